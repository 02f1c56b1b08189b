#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dplac/control/actuator.hpp"
#include "dplac/control/laws.hpp"
#include "dplac/core/math.hpp"
#include "dplac/dynamics/auv_model.hpp"

namespace dplac::control {

enum class ControllerKind { ssurface, pid, smc };

inline std::string_view to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::ssurface: return "ssurface";
        case ControllerKind::pid: return "pid";
        case ControllerKind::smc: return "smc";
    }
    return "?";
}

inline ControllerKind parse_controller_kind(std::string_view s) {
    if (s == "ssurface") return ControllerKind::ssurface;
    if (s == "pid") return ControllerKind::pid;
    if (s == "smc") return ControllerKind::smc;
    throw ConfigError("unknown controller '" + std::string(s) + "' (expected ssurface|pid|smc)");
}

/// Gains for one controlled channel under every law.
struct ChannelGains {
    SSurfaceGains ssurface;
    PidGains pid;
    SmcGains smc;
    double delta_u = 0.0;  // constant S-Surface compensation

    void validate() const {
        ssurface.validate();
        pid.validate();
        smc.validate();
    }
};

struct ControllerGains {
    // PID and SMC values come from tune_channel on the calm-water step response
    ChannelGains yaw{{2.0, 1.0}, {1.5, 0.03, 0.375}, {4.0, 1.0, 0.05}, 0.0};
    ChannelGains depth{{1.0, 1.0}, {5.0, 0.1, 5.0}, {1.0, 1.0, 0.2}, 0.0};
    double speed_kp = 2.0;  // proportional trim on top of the thrust feed-forward

    void validate() const {
        yaw.validate();
        depth.validate();
        if (!(speed_kp >= 0.0)) throw ConfigError("speed_kp must be non-negative");
    }
};

/// Desired heading (rad), depth (m, positive down) and surge speed (m/s).
struct Setpoint {
    double yaw = 0.0;
    double depth = 0.0;
    double speed = 0.0;
};

/// One controlled channel: error differencing plus the selected law's state.
class ChannelController {
public:
    ChannelController(ControllerKind kind, ChannelGains gains, bool angular)
        : kind_(kind), gains_(gains), angular_(angular) {
        gains_.validate();
    }

    [[nodiscard]] TrackingError error(double reference, double measured, double dt) const {
        double e = reference - measured;
        if (angular_) e = wrap_angle(e);
        double e_dot = 0.0;
        if (previous_) {
            const double de = angular_ ? wrap_angle(e - *previous_) : e - *previous_;
            e_dot = de / dt;
        }
        return {e, e_dot};
    }

    double update(double reference, double measured, double dt) {
        if (!(dt > 0.0)) throw Error("controller update needs dt > 0");
        const TrackingError err = error(reference, measured, dt);
        previous_ = err.e;
        last_error_ = err;
        switch (kind_) {
            case ControllerKind::ssurface:
                return clamp_unit(s_surface(err, gains_.ssurface, gains_.delta_u));
            case ControllerKind::pid:
                return pid(err, pid_state_, gains_.pid, dt);
            case ControllerKind::smc:
                // the sliding-mode law is written for measured - reference
                return smc({-err.e, -err.e_dot}, gains_.smc);
        }
        return 0.0;
    }

    void reset() {
        previous_.reset();
        pid_state_ = {};
        last_error_ = {};
    }

    [[nodiscard]] const TrackingError& last_error() const noexcept { return last_error_; }
    [[nodiscard]] ControllerKind kind() const noexcept { return kind_; }

private:
    ControllerKind kind_;
    ChannelGains gains_;
    bool angular_;
    std::optional<double> previous_;
    PidState pid_state_;
    TrackingError last_error_;
};

/// Yaw, depth and speed loops for one vehicle.
class VehicleController {
public:
    VehicleController(ControllerKind kind, const ControllerGains& gains, const ActuatorLimits& limits,
                      const dynamics::RigidBodyParams& body)
        : yaw_(kind, gains.yaw, true),
          depth_(kind, gains.depth, false),
          speed_kp_(gains.speed_kp),
          limits_(limits),
          surge_linear_(body.linear_damping[0]),
          surge_quadratic_(body.quadratic_damping[0]) {
        gains.validate();
        limits_.validate();
    }

    ActuatorCommand update(const Setpoint& sp, const dynamics::VehicleState& s, double dt) {
        ActuatorCommand cmd;
        cmd.yaw = yaw_.update(sp.yaw, s.pose.yaw, dt);
        cmd.depth = depth_.update(sp.depth, s.pose.z, dt);
        const double v = sp.speed;
        const double hold = surge_linear_ * v + surge_quadratic_ * v * std::abs(v);
        cmd.surge = clamp_unit(surge_for_thrust(hold, limits_) + speed_kp_ * (v - s.velocity.u));
        return cmd;
    }

    void reset() {
        yaw_.reset();
        depth_.reset();
    }

    [[nodiscard]] const ChannelController& yaw() const noexcept { return yaw_; }
    [[nodiscard]] const ChannelController& depth() const noexcept { return depth_; }
    [[nodiscard]] const ActuatorLimits& limits() const noexcept { return limits_; }

private:
    ChannelController yaw_;
    ChannelController depth_;
    double speed_kp_;
    ActuatorLimits limits_;
    double surge_linear_;
    double surge_quadratic_;
};

}  // namespace dplac::control
