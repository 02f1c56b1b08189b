#pragma once

#include <cmath>
#include <vector>

#include "dplac/control/tracking.hpp"
#include "dplac/core/error.hpp"
#include "dplac/dynamics/sea_state.hpp"

namespace dplac::env {

struct RewardWeights {
    double data = 1.0;        // per MBit delivered
    double service = 10.0;    // per node newly serviced
    double energy = 0.001;    // per joule
    double collision = 50.0;  // per collision event
    double tracking = 0.1;    // per unit tracking-error magnitude

    void validate() const {
        if (!(data >= 0 && service >= 0 && energy >= 0 && collision >= 0 && tracking >= 0))
            throw ConfigError("reward weights must be non-negative");
    }
};

/// Range-attenuated acoustic link.
struct CommModel {
    double peak_rate = 2.0;        // MBit/s at zero range
    double half_range = 10.0;      // m where the rate halves
    double max_range = 30.0;       // m cutoff
    double relay_range = 100.0;    // m, AUV to ASV
    double relay_penalty = 0.5;    // factor outside relay range

    void validate() const {
        if (!(peak_rate > 0 && half_range > 0 && max_range > 0 && relay_range > 0))
            throw ConfigError("comm model constants must be positive");
        if (!(relay_penalty >= 0 && relay_penalty <= 1)) throw ConfigError("relay_penalty must lie in [0, 1]");
    }
};

/// MBit/s between an AUV and a node at range `distance`.
inline double acoustic_rate(double distance, bool relay_ok, const CommModel& m) {
    if (!(distance >= 0.0)) throw Error("acoustic_rate needs a non-negative distance");
    if (distance > m.max_range) return 0.0;
    const double ratio = distance / m.half_range;
    const double rate = m.peak_rate / (1.0 + ratio * ratio);
    return relay_ok ? rate : rate * m.relay_penalty;
}

struct PowerModel {
    double propulsion_max = 400.0;  // W at full rpm
    double hotel = 10.0;            // W
    double coefficient = 1.0;

    void validate() const {
        if (!(propulsion_max >= 0 && hotel >= 0 && coefficient >= 0)) throw ConfigError("power model must be non-negative");
    }
};

/// Electrical power in W for a propeller speed in rpm.
inline double power_draw(double rpm, const PowerModel& m) {
    const double frac = std::min(std::abs(rpm) / control::kMaxPropellerRpm, 1.0);
    return m.coefficient * frac * frac * frac * m.propulsion_max + m.hotel;
}

struct SpawnPose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;
};

struct ScenarioConfig {
    int auv_count = 2;
    int node_count = 20;
    double extent_x = 200.0;  // m
    double extent_y = 200.0;
    double extent_z = 50.0;
    double node_min_depth = 5.0;
    double node_buffer = 6.0;  // MBit
    double control_dt = 0.05;  // 20 Hz
    int inner_steps = 10;      // control steps per decision
    int max_steps = 600;       // decisions per episode
    double collision_radius = 3.0;
    double max_speed_setpoint = 2.0;  // m/s
    int nearest_nodes = 3;
    int history = 10;
    std::vector<SpawnPose> spawns;  // empty: spread around the ASV at 5 m depth
    dynamics::SeaCondition sea = dynamics::SeaCondition::ideal;
    control::ControllerKind controller = control::ControllerKind::ssurface;
    control::ControllerGains gains;
    control::ActuatorLimits actuators;
    CommModel comm;
    PowerModel power;
    RewardWeights weights;

    [[nodiscard]] double decision_dt() const { return control_dt * inner_steps; }

    [[nodiscard]] std::vector<SpawnPose> spawn_poses() const {
        if (!spawns.empty()) return spawns;
        std::vector<SpawnPose> out;
        for (int i = 0; i < auv_count; ++i) {
            const double offset = 6.0 * (i - 0.5 * (auv_count - 1));
            out.push_back({0.5 * extent_x + offset, 0.5 * extent_y, 5.0, 0.0});
        }
        return out;
    }

    void validate() const {
        if (auv_count < 1) throw ConfigError("scenario needs at least one AUV");
        if (node_count < 1) throw ConfigError("scenario needs at least one sensor node");
        if (!(extent_x > 0 && extent_y > 0 && extent_z > 0)) throw ConfigError("mission volume must be positive");
        if (!(node_min_depth >= 0 && node_min_depth < extent_z)) throw ConfigError("node_min_depth outside the volume");
        if (!(node_buffer > 0)) throw ConfigError("node_buffer must be positive");
        if (!(control_dt > 0) || inner_steps < 1 || max_steps < 1) throw ConfigError("invalid stepping configuration");
        if (!(collision_radius >= 0 && max_speed_setpoint > 0)) throw ConfigError("invalid collision radius or speed");
        if (nearest_nodes < 1 || history < 1) throw ConfigError("nearest_nodes and history must be >= 1");
        if (!spawns.empty() && static_cast<int>(spawns.size()) != auv_count)
            throw ConfigError("spawn list length must equal auv_count");
        for (const auto& s : spawn_poses()) {
            if (s.x < 0 || s.x > extent_x || s.y < 0 || s.y > extent_y || s.z < 0 || s.z > extent_z)
                throw ConfigError("spawn pose outside the mission volume");
        }
        gains.validate();
        actuators.validate();
        comm.validate();
        power.validate();
        weights.validate();
    }
};

}  // namespace dplac::env
