#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dplac/core/error.hpp"
#include "dplac/core/rng.hpp"
#include "dplac/dynamics/rigid_body.hpp"

namespace dplac::dynamics {

enum class SeaCondition { ideal, es, ves };

inline std::string_view to_string(SeaCondition c) {
    switch (c) {
        case SeaCondition::ideal: return "ideal";
        case SeaCondition::es: return "es";
        case SeaCondition::ves: return "ves";
    }
    return "?";
}

inline SeaCondition parse_sea_condition(std::string_view s) {
    if (s == "ideal" || s == "IDEAL") return SeaCondition::ideal;
    if (s == "es" || s == "ES") return SeaCondition::es;
    if (s == "ves" || s == "VES") return SeaCondition::ves;
    throw ConfigError("unknown sea condition '" + std::string(s) + "'");
}

/// One sinusoidal wave-load component on a single generalized axis.
struct WaveComponent {
    int axis = 2;            // 0..5 -> surge..yaw
    double amplitude = 0.0;  // N or N m
    double frequency = 0.5;  // rad/s
    double phase = 0.0;      // rad, added to the seeded phase
};

/// Disturbance description. Translational loads are expressed in the inertial
/// frame; moments act about body axes.
struct SeaState {
    SeaCondition condition = SeaCondition::ideal;
    Vector3 current = Vector3::Zero();      // m/s, inertial, advects the vehicle
    Vector3 mean_force = Vector3::Zero();   // N, inertial steady-current drag equivalent
    double gust_amplitude = 0.0;            // N, horizontal, across the current
    double gust_period = 8.0;               // s
    std::vector<WaveComponent> waves;

    [[nodiscard]] bool calm() const {
        if (current.norm() != 0.0 || mean_force.norm() != 0.0 || gust_amplitude != 0.0) return false;
        for (const auto& w : waves)
            if (w.amplitude != 0.0) return false;
        return true;
    }

    void validate() const {
        if (condition == SeaCondition::ideal && !calm()) throw ConfigError("IDEAL sea must have zero disturbances");
        if (gust_amplitude < 0 || gust_period <= 0) throw ConfigError("invalid gust parameters");
        for (const auto& w : waves)
            if (w.axis < 0 || w.axis > 5 || w.amplitude < 0) throw ConfigError("invalid wave component");
    }
};

/// Force a steady current of velocity `current` would exert through the
/// vehicle's surge damping law.
inline Vector3 current_drag_equivalent(const Vector3& current, const RigidBodyParams& body) {
    const double speed = current.norm();
    if (speed == 0.0) return Vector3::Zero();
    const double mag = body.linear_damping[0] * speed + body.quadratic_damping[0] * speed * speed;
    return current / speed * mag;
}

/// Default disturbance presets: ES current 0.3 m/s, gust 5 N; VES 0.6 m/s, 12 N.
inline SeaState default_sea(SeaCondition c, const RigidBodyParams& body = {}) {
    SeaState s;
    s.condition = c;
    if (c == SeaCondition::ideal) return s;
    const bool very = c == SeaCondition::ves;
    s.current = Vector3(very ? 0.6 : 0.3, 0.0, 0.0);
    s.mean_force = current_drag_equivalent(s.current, body);
    s.gust_amplitude = very ? 12.0 : 5.0;
    s.gust_period = 8.0;
    s.waves = {
        {2, very ? 12.0 : 6.0, 0.6, 0.0},
        {4, very ? 1.6 : 0.8, 0.6, 0.5},
        {5, very ? 2.0 : 1.0, 0.5, 1.0},
    };
    return s;
}

/// Disturbance load at time t. Pure in (sea, t, seed): the seed only fixes the
/// phase offsets, so matched seeds give matched waveforms across conditions.
inline GeneralizedForce sample_disturbance(const SeaState& sea, double t, std::uint64_t seed) {
    GeneralizedForce f = GeneralizedForce::Zero();
    if (sea.condition == SeaCondition::ideal) return f;
    Rng rng(seed ^ 0x5EA57A7EULL);
    const double gust_phase = rng.uniform(0.0, 2.0 * kPi);
    f.head<3>() = sea.mean_force;
    if (sea.gust_amplitude > 0.0) {
        Vector3 across(0.0, 1.0, 0.0);
        if (sea.current.head<2>().norm() > 0.0) {
            const Vector3 c = sea.current.normalized();
            across = Vector3(-c.y(), c.x(), 0.0).normalized();
        }
        f.head<3>() += across * sea.gust_amplitude * std::sin(2.0 * kPi * t / sea.gust_period + gust_phase);
    }
    for (const auto& w : sea.waves) {
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        f[w.axis] += w.amplitude * std::sin(w.frequency * t + w.phase + phase);
    }
    return f;
}

}  // namespace dplac::dynamics
