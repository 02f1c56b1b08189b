#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dplac/core/error.hpp"
#include "dplac/dynamics/types.hpp"

namespace dplac::dynamics {

/// Vehicle coefficients for M nu_dot + C(nu) nu + D(nu) nu + G(eta) = tau.
struct RigidBodyParams {
    std::string name = "remus100";
    double length = 1.6;           // m
    double mass = 31.9;            // kg
    double water_density = 1026;   // kg/m^3
    double gravity = 9.81;         // m/s^2
    double displaced_volume = 31.9 / 1026.0;  // m^3
    Vector3 inertia{0.177, 3.45, 3.45};       // Ixx, Iyy, Izz about CG axes, kg m^2
    Vector3 center_of_gravity{0.0, 0.0, 0.0196};  // body frame, m
    Vector3 center_of_buoyancy{0.0, 0.0, 0.0};
    Vector6 added_mass{0.93, 35.5, 35.5, 0.0704, 4.88, 4.88};  // -X_udot, -Y_vdot, ... (positive)
    Vector6 linear_damping{2.0, 10.0, 10.0, 0.5, 5.0, 5.0};
    Vector6 quadratic_damping{1.62, 131.0, 131.0, 0.0013, 9.4, 9.4};
    // Fin/body lift at forward speed, applied as extra diagonal damping scaled by |u|.
    // Without it the Munk moment makes the bare hull pitch/yaw unstable.
    Vector6 lift_damping{0.0, 60.0, 60.0, 0.0, 30.0, 30.0};
    // Fin lift moments per unit |u|: pitch moment from heave velocity, yaw
    // moment from sway velocity. Sized to overcome the Munk moment.
    double lift_pitch_from_heave = 38.0;
    double lift_yaw_from_sway = 38.0;

    [[nodiscard]] double weight() const { return mass * gravity; }
    [[nodiscard]] double buoyancy() const { return water_density * gravity * displaced_volume; }

    /// Rigid-body mass matrix about the body origin.
    [[nodiscard]] Matrix6 rigid_body_mass() const {
        Matrix6 m = Matrix6::Zero();
        m.topLeftCorner<3, 3>() = mass * Matrix3::Identity();
        const Matrix3 s = skew(center_of_gravity);
        m.topRightCorner<3, 3>() = -mass * s;
        m.bottomLeftCorner<3, 3>() = mass * s;
        // parallel-axis shift of the CG inertia to the origin
        m.bottomRightCorner<3, 3>() = Matrix3(inertia.asDiagonal()) - mass * s * s;
        return m;
    }

    [[nodiscard]] Matrix6 mass_matrix() const {
        Matrix6 m = rigid_body_mass();
        m.diagonal() += added_mass;
        return m;
    }

    /// Rejects non-SPD mass matrices, negative damping and non-neutral trim.
    void validate() const {
        const Matrix6 m = mass_matrix();
        if (!m.isApprox(m.transpose(), 1e-12)) throw ConfigError("mass matrix is not symmetric");
        Eigen::LLT<Matrix6> llt(m);
        if (llt.info() != Eigen::Success) throw ConfigError("mass matrix is not positive definite");
        if ((linear_damping.array() < 0).any() || (quadratic_damping.array() < 0).any() ||
            (lift_damping.array() < 0).any())
            throw ConfigError("damping coefficients must be non-negative");
        if (std::abs(buoyancy() - weight()) > 0.01 * weight())
            throw ConfigError("weight and buoyancy differ by more than 1% (vehicle not neutrally trimmed)");
        if (mass <= 0 || length <= 0 || water_density <= 0) throw ConfigError("non-positive physical constant");
    }
};

namespace detail {

template <int N>
Eigen::Matrix<double, N, 1> read_vec(const nlohmann::json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != N) throw ConfigError(std::string("coefficient '") + key + "' needs " + std::to_string(N) + " entries");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = a.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

}  // namespace detail

inline RigidBodyParams rigid_body_from_json(const nlohmann::json& j) {
    RigidBodyParams p;
    try {
        p.name = j.value("name", p.name);
        p.length = j.at("length_m").get<double>();
        p.mass = j.at("mass_kg").get<double>();
        p.water_density = j.at("water_density_kg_m3").get<double>();
        p.gravity = j.value("gravity_m_s2", p.gravity);
        p.displaced_volume = j.at("displaced_volume_m3").get<double>();
        p.inertia = detail::read_vec<3>(j, "inertia_kg_m2");
        p.center_of_gravity = detail::read_vec<3>(j, "center_of_gravity_m");
        p.center_of_buoyancy = detail::read_vec<3>(j, "center_of_buoyancy_m");
        p.added_mass = detail::read_vec<6>(j, "added_mass");
        p.linear_damping = detail::read_vec<6>(j, "linear_damping");
        p.quadratic_damping = detail::read_vec<6>(j, "quadratic_damping");
        p.lift_damping = detail::read_vec<6>(j, "lift_damping");
        p.lift_pitch_from_heave = j.at("lift_pitch_from_heave").get<double>();
        p.lift_yaw_from_sway = j.at("lift_yaw_from_sway").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("coefficient file: ") + e.what());
    }
    p.validate();
    return p;
}

inline RigidBodyParams load_rigid_body(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open coefficient file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("coefficient file '" + path.string() + "': " + e.what());
    }
    return rigid_body_from_json(j);
}

}  // namespace dplac::dynamics
