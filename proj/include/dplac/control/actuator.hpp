#pragma once

#include <algorithm>
#include <cmath>

#include "dplac/core/error.hpp"
#include "dplac/dynamics/types.hpp"

namespace dplac::control {

inline constexpr double kMaxPropellerRpm = 1525.0;

/// Normalized channel outputs in [-1, 1]. Positive depth dives.
struct ActuatorCommand {
    double surge = 0.0;
    double yaw = 0.0;
    double depth = 0.0;

    [[nodiscard]] double rpm() const { return std::clamp(surge, -1.0, 1.0) * kMaxPropellerRpm; }
};

struct ActuatorLimits {
    double thrust_coefficient = 5.6e-6;  // N per rpm^2
    double max_yaw_moment = 20.0;        // N m
    double max_heave_force = 40.0;       // N
    double max_pitch_moment = 10.0;      // N m
    double heave_share = 0.7;
    double pitch_share = 0.3;

    void validate() const {
        if (!(thrust_coefficient > 0.0 && max_yaw_moment > 0.0 && max_heave_force > 0.0 && max_pitch_moment > 0.0))
            throw ConfigError("actuator limits must be positive");
        if (!(heave_share >= 0.0 && pitch_share >= 0.0 && heave_share + pitch_share > 0.0))
            throw ConfigError("depth blend shares must be non-negative and not both zero");
    }

    [[nodiscard]] double max_thrust() const { return thrust_coefficient * kMaxPropellerRpm * kMaxPropellerRpm; }
};

inline double propeller_thrust(double rpm, const ActuatorLimits& lim) {
    const double n = std::clamp(rpm, -kMaxPropellerRpm, kMaxPropellerRpm);
    return lim.thrust_coefficient * n * std::abs(n);
}

/// Normalized command needed to hold `thrust` newtons steady.
inline double surge_for_thrust(double thrust, const ActuatorLimits& lim) {
    const double n = std::sqrt(std::abs(thrust) / lim.thrust_coefficient);
    return std::clamp(std::copysign(n / kMaxPropellerRpm, thrust), -1.0, 1.0);
}

/// Maps the three normalized channels to body-frame forces. Diving (positive
/// depth command) pushes heave down and pitches the nose down.
inline dynamics::GeneralizedForce actuator_map(const ActuatorCommand& cmd, const ActuatorLimits& lim) {
    const double yaw = std::clamp(cmd.yaw, -1.0, 1.0);
    const double depth = std::clamp(cmd.depth, -1.0, 1.0);
    dynamics::GeneralizedForce tau = dynamics::GeneralizedForce::Zero();
    tau[0] = propeller_thrust(cmd.rpm(), lim);
    tau[2] = lim.heave_share * depth * lim.max_heave_force;
    tau[4] = -lim.pitch_share * depth * lim.max_pitch_moment;
    tau[5] = yaw * lim.max_yaw_moment;
    return tau;
}

}  // namespace dplac::control
