#pragma once

#include <Eigen/Dense>

#include "dplac/core/math.hpp"

namespace dplac::dynamics {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Inertial-frame position (m, NED: z positive down) and ZYX Euler attitude (rad).
struct Pose {
    double x = 0, y = 0, z = 0;
    double roll = 0, pitch = 0, yaw = 0;

    [[nodiscard]] Vector6 vec() const { return (Vector6() << x, y, z, roll, pitch, yaw).finished(); }
    [[nodiscard]] Vector3 position() const { return {x, y, z}; }

    static Pose from(const Vector6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Body-fixed linear (m/s) and angular (rad/s) velocity.
struct BodyVelocity {
    double u = 0, v = 0, w = 0;
    double p = 0, q = 0, r = 0;

    [[nodiscard]] Vector6 vec() const { return (Vector6() << u, v, w, p, q, r).finished(); }
    [[nodiscard]] double speed() const { return std::sqrt(u * u + v * v + w * w); }

    static BodyVelocity from(const Vector6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

    friend bool operator==(const BodyVelocity&, const BodyVelocity&) = default;
};

/// tau: surge/sway/heave forces (N) then roll/pitch/yaw moments (N m).
using GeneralizedForce = Vector6;

inline Matrix3 skew(const Vector3& a) {
    Matrix3 s;
    s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    return s;
}

}  // namespace dplac::dynamics
