#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "dplac/core/error.hpp"

namespace dplac {

/// Seeded random stream. Copies continue the same sequence independently.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal() { return normal_(engine_); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Independent child stream; does not advance this one.
    [[nodiscard]] Rng split(std::uint64_t stream) const {
        std::mt19937_64 probe = engine_;
        return Rng(probe() ^ mix(stream + 0x9E3779B97F4A7C15ULL));
    }

    /// Textual engine state, including any cached normal deviate.
    [[nodiscard]] std::string state() const {
        std::ostringstream os;
        os << engine_ << ' ' << normal_;
        return os.str();
    }

    void restore(const std::string& state) {
        std::istringstream is(state);
        is >> engine_ >> normal_;
        if (!is) throw FormatError("corrupt random stream state");
    }

    /// SplitMix64 finalizer, used to decorrelate nearby seeds.
    static constexpr std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dplac
