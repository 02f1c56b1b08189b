#pragma once

#include <algorithm>
#include <cmath>

#include "dplac/core/error.hpp"

namespace dplac::control {

/// Channel error e = reference - measured and its rate.
struct TrackingError {
    double e = 0.0;
    double e_dot = 0.0;
};

struct SSurfaceGains {
    double zeta1 = 1.0;
    double zeta2 = 1.0;

    void validate() const {
        if (!(zeta1 > 0.0 && zeta2 > 0.0)) throw ConfigError("S-Surface gains must be positive");
    }
};

struct PidGains {
    double kp = 1.0;
    double ki = 0.0;
    double kd = 0.0;

    // ki = kd = 0 is allowed so that pure-P loops can be expressed.
    void validate() const {
        if (!(kp > 0.0 && ki >= 0.0 && kd >= 0.0)) throw ConfigError("PID gains must satisfy kp > 0, ki >= 0, kd >= 0");
    }
};

struct SmcGains {
    double slope = 1.0;
    double gain = 1.0;
    double width = 0.1;

    void validate() const {
        if (!(slope > 0.0 && gain > 0.0 && width > 0.0)) throw ConfigError("SMC gains must be positive");
    }
};

/// u = 2 / (1 + exp(-zeta1 e - zeta2 e')) - 1 + delta_u, written as tanh(x/2)
/// so it stays finite for any argument.
inline double s_surface(const TrackingError& err, const SSurfaceGains& g, double delta_u = 0.0) {
    const double x = g.zeta1 * err.e + g.zeta2 * err.e_dot;
    return std::tanh(0.5 * x) + delta_u;
}

struct PidState {
    double integral = 0.0;
};

/// Clamped PID. The accumulator is frozen while the output is saturated and
/// the error would push it further into saturation.
inline double pid(const TrackingError& err, PidState& state, const PidGains& g, double dt) {
    if (!(dt > 0.0)) throw Error("pid needs dt > 0");
    const double candidate = state.integral + err.e * dt;
    const double raw = g.kp * err.e + g.ki * candidate + g.kd * err.e_dot;
    const bool saturated = std::abs(raw) > 1.0;
    const bool winding = saturated && (err.e * raw > 0.0);
    if (!winding) state.integral = candidate;
    const double out = g.kp * err.e + g.ki * state.integral + g.kd * err.e_dot;
    return std::clamp(out, -1.0, 1.0);
}

/// Boundary-layer sliding mode law. Here `err.e` is measured - reference,
/// so s = e' + slope e and u = -gain sat(s / width).
inline double smc(const TrackingError& err, const SmcGains& g) {
    const double s = err.e_dot + g.slope * err.e;
    const double u = -g.gain * std::clamp(s / g.width, -1.0, 1.0);
    return std::clamp(u, -1.0, 1.0);
}

}  // namespace dplac::control
