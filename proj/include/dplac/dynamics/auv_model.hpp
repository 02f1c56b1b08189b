#pragma once

#include <cmath>

#include "dplac/core/error.hpp"
#include "dplac/dynamics/kinematics.hpp"
#include "dplac/dynamics/rigid_body.hpp"
#include "dplac/dynamics/sea_state.hpp"

namespace dplac::dynamics {

struct VelocityLimits {
    double max_speed = 2.3;      // m/s, body linear speed
    double max_yaw_rate = 0.26;  // rad/s
};

struct VehicleState {
    Pose pose;
    BodyVelocity velocity;
};

/// Fossen 6-DoF model with semi-explicit Euler stepping.
class AuvModel {
public:
    explicit AuvModel(RigidBodyParams params = {}, VelocityLimits limits = {})
        : params_(std::move(params)), limits_(limits) {
        params_.validate();
        mass_ = params_.mass_matrix();
        mass_inv_ = mass_.inverse();
    }

    [[nodiscard]] const RigidBodyParams& params() const noexcept { return params_; }
    [[nodiscard]] const VelocityLimits& limits() const noexcept { return limits_; }
    [[nodiscard]] const Matrix6& mass_matrix() const noexcept { return mass_; }
    [[nodiscard]] const Matrix6& mass_inverse() const noexcept { return mass_inv_; }

    /// Skew-symmetric Coriolis-centripetal matrix built from the full (rigid
    /// body + added) mass matrix, so nu^T C(nu) nu = 0 identically.
    [[nodiscard]] Matrix6 coriolis(const Vector6& nu) const {
        const Vector3 nu1 = nu.head<3>();
        const Vector3 nu2 = nu.tail<3>();
        const Vector3 a = mass_.topLeftCorner<3, 3>() * nu1 + mass_.topRightCorner<3, 3>() * nu2;
        const Vector3 b = mass_.bottomLeftCorner<3, 3>() * nu1 + mass_.bottomRightCorner<3, 3>() * nu2;
        Matrix6 c = Matrix6::Zero();
        c.topRightCorner<3, 3>() = -skew(a);
        c.bottomLeftCorner<3, 3>() = -skew(a);
        c.bottomRightCorner<3, 3>() = -skew(b);
        return c;
    }

    /// D(nu): diagonal linear + quadratic + speed-scaled lift damping, plus the
    /// two off-diagonal fin-lift moments.
    [[nodiscard]] Matrix6 damping(const Vector6& nu) const {
        const double speed = std::abs(nu[0]);
        Vector6 d = params_.linear_damping + params_.quadratic_damping.cwiseProduct(nu.cwiseAbs()) +
                    params_.lift_damping * speed;
        Matrix6 out = d.asDiagonal();
        // body-axis sign conventions: the Munk moment is +(m33-m11) u w in pitch
        // and -(m22-m11) u v in yaw; the fin terms oppose both
        out(4, 2) = params_.lift_pitch_from_heave * speed;
        out(5, 1) = -params_.lift_yaw_from_sway * speed;
        return out;
    }

    [[nodiscard]] Vector6 restoring(const Pose& pose) const {
        const double w = params_.weight(), b = params_.buoyancy();
        const Vector3& rg = params_.center_of_gravity;
        const Vector3& rb = params_.center_of_buoyancy;
        const double sf = std::sin(pose.roll), cf = std::cos(pose.roll);
        const double st = std::sin(pose.pitch), ct = std::cos(pose.pitch);
        Vector6 g;
        g << (w - b) * st,
             -(w - b) * ct * sf,
             -(w - b) * ct * cf,
             -(rg.y() * w - rb.y() * b) * ct * cf + (rg.z() * w - rb.z() * b) * ct * sf,
             (rg.z() * w - rb.z() * b) * st + (rg.x() * w - rb.x() * b) * ct * cf,
             -(rg.x() * w - rb.x() * b) * ct * sf - (rg.y() * w - rb.y() * b) * st;
        return g;
    }

    /// F = tau - C(nu) nu - D(nu) nu - G(eta).
    [[nodiscard]] Vector6 residual_force(const Pose& pose, const BodyVelocity& vel, const GeneralizedForce& tau) const {
        const Vector6 nu = vel.vec();
        return tau - coriolis(nu) * nu - damping(nu) * nu - restoring(pose);
    }

    /// Continuous-time derivative (eta_dot, nu_dot) including current advection.
    /// `tau` must already include disturbance loads expressed in the body frame.
    [[nodiscard]] std::pair<Vector6, Vector6> derivative(const Pose& pose, const BodyVelocity& vel,
                                                         const GeneralizedForce& tau, const Vector3& current) const {
        Vector6 eta_dot = kinematic_transform(pose) * vel.vec();
        eta_dot.head<3>() += current;
        Vector6 nu_dot = mass_inv_ * residual_force(pose, vel, tau);
        return {eta_dot, nu_dot};
    }

    /// Rotates the inertial translational part of a disturbance into the body frame.
    [[nodiscard]] static GeneralizedForce disturbance_to_body(const Pose& pose, const GeneralizedForce& d) {
        GeneralizedForce out = d;
        out.head<3>() = rotation(pose.roll, pose.pitch, pose.yaw).transpose() * d.head<3>();
        return out;
    }

    /// eta' = eta + dt J(eta) nu ; nu' = nu + dt M^-1 F(eta, nu), with the
    /// disturbance at time `t` added into tau and the current advecting eta.
    [[nodiscard]] VehicleState step(const VehicleState& s, const GeneralizedForce& tau, double dt, const SeaState& sea,
                                    double t = 0.0, std::uint64_t seed = 0) const {
        if (!(dt > 0.0)) throw Error("dynamics step needs dt > 0");
        GeneralizedForce total = tau;
        if (sea.condition != SeaCondition::ideal)
            total += disturbance_to_body(s.pose, sample_disturbance(sea, t, seed));
        const auto [eta_dot, nu_dot] = derivative(s.pose, s.velocity, total, sea.current);
        Vector6 eta = s.pose.vec() + dt * eta_dot;
        Vector6 nu = s.velocity.vec() + dt * nu_dot;
        if (!eta.allFinite() || !nu.allFinite()) throw NumericError("non-finite vehicle state");
        eta[3] = wrap_angle(eta[3]);
        eta[5] = wrap_angle(eta[5]);
        if (!(std::abs(eta[4]) < kPi / 2 - kPitchGuard)) throw NumericError("pitch reached the Euler-angle singularity");
        VehicleState out{Pose::from(eta), BodyVelocity::from(nu)};
        saturate(out.velocity);
        return out;
    }

    void saturate(BodyVelocity& v) const {
        const double speed = v.speed();
        if (speed > limits_.max_speed) {
            const double k = limits_.max_speed / speed;
            v.u *= k;
            v.v *= k;
            v.w *= k;
        }
        v.r = std::clamp(v.r, -limits_.max_yaw_rate, limits_.max_yaw_rate);
    }

    [[nodiscard]] double kinetic_energy(const BodyVelocity& v) const {
        const Vector6 nu = v.vec();
        return 0.5 * nu.dot(mass_ * nu);
    }

private:
    RigidBodyParams params_;
    VelocityLimits limits_;
    Matrix6 mass_;
    Matrix6 mass_inv_;
};

}  // namespace dplac::dynamics
