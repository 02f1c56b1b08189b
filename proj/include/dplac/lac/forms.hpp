#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "dplac/core/error.hpp"
#include "dplac/core/math.hpp"

namespace dplac::lac {

/// Positive head applied to the raw output of the Lyapunov critic trunk.
enum class LyapunovForm { softplus, squared, log };

inline constexpr std::array<LyapunovForm, 3> kAllForms{LyapunovForm::softplus, LyapunovForm::squared,
                                                       LyapunovForm::log};
inline constexpr double kFormFloor = 1e-6;

inline std::string_view to_string(LyapunovForm f) {
    switch (f) {
        case LyapunovForm::softplus: return "SOFTPLUS";
        case LyapunovForm::squared: return "SQUARED";
        case LyapunovForm::log: return "LOG";
    }
    return "?";
}

inline LyapunovForm parse_lyapunov_form(std::string_view s) {
    for (auto f : kAllForms)
        if (s == to_string(f)) return f;
    if (s == "softplus") return LyapunovForm::softplus;
    if (s == "squared") return LyapunovForm::squared;
    if (s == "log") return LyapunovForm::log;
    throw ConfigError("unknown Lyapunov form '" + std::string(s) + "' (expected SOFTPLUS|SQUARED|LOG)");
}

/// softplus(z) | z^2 + 1e-6 | log(1 + softplus(z)) + 1e-6.
inline double apply_form(LyapunovForm f, double z) {
    switch (f) {
        case LyapunovForm::softplus: {
            const double v = softplus(z);
            // exp underflow below z ~ -745 would return exactly 0
            return v > 0.0 ? v : std::numeric_limits<double>::denorm_min();
        }
        case LyapunovForm::squared: return z * z + kFormFloor;
        case LyapunovForm::log: return std::log1p(softplus(z)) + kFormFloor;
    }
    throw Error("unhandled Lyapunov form");
}

/// d apply_form / dz.
inline double form_derivative(LyapunovForm f, double z) {
    switch (f) {
        case LyapunovForm::softplus: return sigmoid(z);
        case LyapunovForm::squared: return 2.0 * z;
        case LyapunovForm::log: return sigmoid(z) / (1.0 + softplus(z));
    }
    throw Error("unhandled Lyapunov form");
}

}  // namespace dplac::lac
