#pragma once

#include <cmath>

#include "dplac/core/error.hpp"
#include "dplac/dynamics/types.hpp"

namespace dplac::dynamics {

inline constexpr double kPitchGuard = 1e-6;

/// Body-to-inertial rotation for ZYX (yaw-pitch-roll) Euler angles.
inline Matrix3 rotation(double roll, double pitch, double yaw) {
    const double cf = std::cos(roll), sf = std::sin(roll);
    const double ct = std::cos(pitch), st = std::sin(pitch);
    const double cp = std::cos(yaw), sp = std::sin(yaw);
    Matrix3 r;
    r << cp * ct, -sp * cf + cp * st * sf, sp * sf + cp * cf * st,
         sp * ct, cp * cf + sf * st * sp, -cp * sf + st * sp * cf,
         -st, ct * sf, ct * cf;
    return r;
}

/// Maps body angular rates to Euler-angle rates. Singular at pitch = +-pi/2.
inline Matrix3 euler_rate_transform(double roll, double pitch) {
    const double ct = std::cos(pitch);
    if (std::abs(ct) < kPitchGuard) throw NumericError("pitch at the Euler-angle singularity");
    const double cf = std::cos(roll), sf = std::sin(roll), tt = std::tan(pitch);
    Matrix3 t;
    t << 1, sf * tt, cf * tt,
         0, cf, -sf,
         0, sf / ct, cf / ct;
    return t;
}

/// J(eta) with eta_dot = J(eta) nu.
inline Matrix6 kinematic_transform(const Pose& pose) {
    if (!(std::abs(pose.pitch) < kPi / 2 - kPitchGuard)) throw NumericError("pitch at the Euler-angle singularity");
    Matrix6 j = Matrix6::Zero();
    j.topLeftCorner<3, 3>() = rotation(pose.roll, pose.pitch, pose.yaw);
    j.bottomRightCorner<3, 3>() = euler_rate_transform(pose.roll, pose.pitch);
    return j;
}

}  // namespace dplac::dynamics
