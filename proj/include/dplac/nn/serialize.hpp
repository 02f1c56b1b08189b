#pragma once

#include <filesystem>

#include "dplac/nn/adam.hpp"
#include "dplac/nn/binary_io.hpp"
#include "dplac/nn/params.hpp"

namespace dplac::nn {

inline constexpr std::string_view kParamMagic = "DPLACPRM";
inline constexpr std::uint32_t kParamVersion = 1;

inline void write_tensor(BinaryWriter& w, const std::string& name, const Tensor& t) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    w.f64s(t.data(), t.size());
}

inline Tensor read_tensor(BinaryReader& r, std::string& name) {
    name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const auto n = shape_size(shape);
    if (n > (std::size_t{1} << 32)) throw FormatError("implausible tensor size");
    std::vector<double> values(n);
    r.f64s(values.data(), n);
    return Tensor(std::move(shape), std::move(values));
}

/// Appends a ParamSet block (without magic) to a writer.
inline void write_params(BinaryWriter& w, const ParamSet& params) {
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, layer] : params) {
        write_tensor(w, name + "/weights", layer.weights);
        write_tensor(w, name + "/biases", layer.biases);
    }
}

inline ParamSet read_params(BinaryReader& r) {
    ParamSet out;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string wname, bname;
        Tensor w = read_tensor(r, wname);
        Tensor b = read_tensor(r, bname);
        constexpr std::string_view ws = "/weights", bs = "/biases";
        if (!wname.ends_with(ws) || !bname.ends_with(bs)) throw FormatError("malformed layer record");
        const auto base = wname.substr(0, wname.size() - ws.size());
        if (bname.substr(0, bname.size() - bs.size()) != base) throw FormatError("weights/biases name mismatch");
        out.add(base, {std::move(w), std::move(b)});
    }
    return out;
}

/// Optimizer moments and step count, for exact training resumption.
inline void write_adam(BinaryWriter& w, const Adam& opt) {
    w.u64(opt.steps());
    w.f64(opt.config().learning_rate);
    write_params(w, opt.first_moment());
    write_params(w, opt.second_moment());
}

inline void read_adam(BinaryReader& r, Adam& opt) {
    const auto steps = r.u64();
    opt.set_learning_rate(r.f64());
    ParamSet first = read_params(r);
    ParamSet second = read_params(r);
    opt.restore(std::move(first), std::move(second), steps);
}

/// File layout: magic, version, per-tensor (name, shape, raw LE doubles), CRC32.
inline void save_params(const ParamSet& params, const std::filesystem::path& path) {
    BinaryWriter w;
    w.bytes(kParamMagic.data(), kParamMagic.size());
    w.u32(kParamVersion);
    write_params(w, params);
    w.save(path);
}

/// Throws FormatError on any corruption; never returns a partially read set.
inline ParamSet load_params(const std::filesystem::path& path) {
    auto r = BinaryReader::open(path);
    r.expect_magic(kParamMagic);
    if (const auto v = r.u32(); v != kParamVersion) throw FormatError("unsupported parameter file version " + std::to_string(v));
    ParamSet p = read_params(r);
    if (!r.at_end()) throw FormatError("trailing bytes in parameter file");
    return p;
}

}  // namespace dplac::nn
