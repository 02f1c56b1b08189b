#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <boost/crc.hpp>

#include "dplac/core/error.hpp"

namespace dplac::nn {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    boost::crc_32_type crc;
    crc.process_bytes(data, n);
    return crc.checksum();
}

/// Append-only byte buffer for the versioned binary formats.
class BinaryWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <typename T>
    void pod(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        bytes(&v, sizeof(T));
    }
    void u32(std::uint32_t v) { pod(v); }
    void u64(std::uint64_t v) { pod(v); }
    void f64(double v) { pod(v); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void f64s(const double* p, std::size_t n) { bytes(p, n * sizeof(double)); }

    [[nodiscard]] const std::vector<std::uint8_t>& buffer() const { return buf_; }

    /// Writes buffer plus trailing CRC32 atomically (temp file + rename).
    void save(const std::filesystem::path& path) const {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
            os.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
            const std::uint32_t crc = crc32(buf_.data(), buf_.size());
            os.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
            if (!os) throw Error("write failed for '" + tmp.string() + "'");
        }
        std::filesystem::rename(tmp, path);
    }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader over a checksum-verified buffer.
class BinaryReader {
public:
    explicit BinaryReader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}

    /// Loads a file written by BinaryWriter::save and verifies its CRC.
    static BinaryReader open(const std::filesystem::path& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw FormatError("cannot open '" + path.string() + "'");
        std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        if (data.size() < sizeof(std::uint32_t)) throw FormatError("'" + path.string() + "' is truncated");
        std::uint32_t stored = 0;
        std::memcpy(&stored, data.data() + data.size() - sizeof(stored), sizeof(stored));
        data.resize(data.size() - sizeof(stored));
        if (crc32(data.data(), data.size()) != stored)
            throw FormatError("checksum failure in '" + path.string() + "'");
        return BinaryReader(std::move(data));
    }

    void bytes(void* out, std::size_t n) {
        if (pos_ + n > buf_.size()) throw FormatError("unexpected end of data");
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T pod() {
        T v{};
        bytes(&v, sizeof(T));
        return v;
    }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    double f64() { return pod<double>(); }
    std::string str() {
        const auto n = u32();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    void f64s(double* out, std::size_t n) { bytes(out, n * sizeof(double)); }

    void expect_magic(std::string_view magic) {
        std::string got(magic.size(), '\0');
        bytes(got.data(), got.size());
        if (got != magic) throw FormatError("bad magic: expected '" + std::string(magic) + "'");
    }

    [[nodiscard]] bool at_end() const { return pos_ == buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

}  // namespace dplac::nn
