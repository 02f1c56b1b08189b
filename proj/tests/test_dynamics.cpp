#include <cmath>

#include <gtest/gtest.h>

#include "dplac/dynamics/auv_model.hpp"

using namespace dplac;
using namespace dplac::dynamics;

namespace {

// Classical RK4 on the continuous-time model: the oracle for the Euler stepper.
VehicleState rk4(const AuvModel& m, VehicleState s, const GeneralizedForce& tau, double dt, int steps) {
    auto f = [&](const Vector6& eta, const Vector6& nu) {
        return m.derivative(Pose::from(eta), BodyVelocity::from(nu), tau, Vector3::Zero());
    };
    Vector6 eta = s.pose.vec(), nu = s.velocity.vec();
    for (int i = 0; i < steps; ++i) {
        auto [k1e, k1n] = f(eta, nu);
        auto [k2e, k2n] = f(eta + 0.5 * dt * k1e, nu + 0.5 * dt * k1n);
        auto [k3e, k3n] = f(eta + 0.5 * dt * k2e, nu + 0.5 * dt * k2n);
        auto [k4e, k4n] = f(eta + dt * k3e, nu + dt * k3n);
        eta += dt / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e);
        nu += dt / 6.0 * (k1n + 2 * k2n + 2 * k3n + k4n);
    }
    return {Pose::from(eta), BodyVelocity::from(nu)};
}

Vector6 state_diff(const VehicleState& a, const VehicleState& b) {
    Vector6 d = a.pose.vec() - b.pose.vec();
    return d;
}

}  // namespace

TEST(Kinematics, ZeroAttitudeIsIdentity) {
    const Matrix6 j = kinematic_transform(Pose{});
    EXPECT_TRUE(j.isApprox(Matrix6::Identity(), 1e-15));
}

TEST(Kinematics, YawQuarterTurnMapsSurgeToPlusY) {
    Pose p;
    p.yaw = kPi / 2;
    const Vector6 eta_dot = kinematic_transform(p) * BodyVelocity{1, 0, 0, 0, 0, 0}.vec();
    EXPECT_NEAR(eta_dot[0], 0.0, 1e-15);
    EXPECT_NEAR(eta_dot[1], 1.0, 1e-15);
    EXPECT_NEAR(eta_dot[2], 0.0, 1e-15);
}

TEST(Kinematics, RotationBlockOrthonormal) {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        Pose p{0, 0, 0, rng.uniform(-kPi, kPi), rng.uniform(-1.5, 1.5), rng.uniform(-kPi, kPi)};
        const Matrix3 r = kinematic_transform(p).topLeftCorner<3, 3>();
        EXPECT_LE((r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
}

TEST(Kinematics, PitchSingularityRejected) {
    Pose p;
    p.pitch = kPi / 2;
    EXPECT_THROW(kinematic_transform(p), NumericError);
}

TEST(ResidualForce, VanishesAtRest) {
    AuvModel m;
    const Vector6 f = m.residual_force(Pose{}, BodyVelocity{}, GeneralizedForce::Zero());
    EXPECT_LE(f.cwiseAbs().maxCoeff(), 1e-6);  // buoyancy rounding in the data file
}

TEST(ResidualForce, DampingOpposesSurge) {
    AuvModel m;
    for (double u : {0.1, 0.5, 1.5}) {
        const Vector6 f = m.residual_force(Pose{}, BodyVelocity{u, 0, 0, 0, 0, 0}, GeneralizedForce::Zero());
        EXPECT_LT(f[0], 0.0);
    }
}

TEST(ResidualForce, CoriolisDoesNoWork) {
    AuvModel m;
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
        Vector6 nu;
        for (int k = 0; k < 6; ++k) nu[k] = rng.uniform(-2, 2);
        EXPECT_LE(std::abs(nu.dot(m.coriolis(nu) * nu)), 1e-10);
    }
}

TEST(Step, RestInIdealSeaIsStationary) {
    RigidBodyParams p;
    p.displaced_volume = p.mass / p.water_density;
    AuvModel m(p);
    VehicleState s;
    for (int i = 0; i < 100; ++i) s = m.step(s, GeneralizedForce::Zero(), 0.05, SeaState{});
    EXPECT_LE(s.pose.vec().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(s.velocity.vec().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Step, ConstantThrustApproachesTerminalSpeed) {
    AuvModel m;
    const auto& p = m.params();
    const double thrust = 8.0;
    // 1-D surge oracle: terminal speed where d_l u + d_q u^2 = thrust.
    const double dl = p.linear_damping[0], dq = p.quadratic_damping[0];
    const double terminal = (-dl + std::sqrt(dl * dl + 4 * dq * thrust)) / (2 * dq);
    // and its time response by fine forward integration of (m + Xu) u' = T - dl u - dq u^2
    const double m11 = p.mass + p.added_mass[0];
    double u1d = 0.0;
    for (int i = 0; i < 60000; ++i) u1d += 1e-3 * (thrust - dl * u1d - dq * u1d * u1d) / m11;

    VehicleState s;
    GeneralizedForce tau = GeneralizedForce::Zero();
    tau[0] = thrust;
    double prev = 0.0;
    for (int i = 0; i < 1200; ++i) {
        s = m.step(s, tau, 0.05, SeaState{});
        EXPECT_GE(s.velocity.u, prev - 1e-12);
        prev = s.velocity.u;
    }
    EXPECT_NEAR(u1d, terminal, 1e-3 * terminal);
    EXPECT_NEAR(s.velocity.u, terminal, 0.01 * terminal);
}

TEST(Step, FirstOrderConvergenceAgainstRk4) {
    AuvModel m;
    VehicleState s0{Pose{0, 0, 5, 0.05, 0.1, 0.3}, BodyVelocity{1.0, 0.1, -0.05, 0.02, 0.03, 0.1}};
    GeneralizedForce tau;
    tau << 6.0, 0.5, 2.0, 0.0, -0.4, 0.8;
    const double horizon = 2.0;
    const VehicleState ref = rk4(m, s0, tau, 1e-4, static_cast<int>(horizon / 1e-4));
    auto euler_error = [&](double dt) {
        VehicleState s = s0;
        const int n = static_cast<int>(std::lround(horizon / dt));
        for (int i = 0; i < n; ++i) s = m.step(s, tau, dt, SeaState{});
        return state_diff(s, ref).norm();
    };
    const double e1 = euler_error(0.02), e2 = euler_error(0.01);
    const double ratio = e1 / e2;
    EXPECT_GE(ratio, 1.7);
    EXPECT_LE(ratio, 2.3);
}

TEST(Step, CoriolisEnergyDriftBelowOnePercent) {
    RigidBodyParams p;
    p.linear_damping.setZero();
    p.quadratic_damping.setZero();
    p.lift_damping.setZero();
    p.lift_pitch_from_heave = 0.0;
    p.lift_yaw_from_sway = 0.0;
    p.center_of_gravity.setZero();
    p.displaced_volume = p.mass / p.water_density;
    AuvModel m(p, {10.0, 10.0});
    VehicleState s{Pose{}, BodyVelocity{1.0, 0.2, 0.1, 0.1, 0.05, 0.15}};
    const double e0 = m.kinetic_energy(s.velocity);
    for (int i = 0; i < 100; ++i) s = m.step(s, GeneralizedForce::Zero(), 0.005, SeaState{});
    EXPECT_LT(std::abs(m.kinetic_energy(s.velocity) - e0) / e0, 0.01);
}

TEST(Step, VelocitySaturation) {
    AuvModel m;
    VehicleState s;
    GeneralizedForce tau = GeneralizedForce::Zero();
    tau[0] = 500.0;
    tau[5] = 50.0;
    for (int i = 0; i < 400; ++i) {
        s = m.step(s, tau, 0.05, SeaState{});
        EXPECT_LE(s.velocity.speed(), 2.3 + 1e-12);
        EXPECT_LE(std::abs(s.velocity.r), 0.26 + 1e-12);
    }
}

TEST(Step, PureGivenInputs) {
    AuvModel m;
    const auto sea = default_sea(SeaCondition::ves);
    VehicleState s{Pose{1, 2, 3, 0, 0.1, 0.2}, BodyVelocity{0.5, 0, 0, 0, 0, 0.05}};
    GeneralizedForce tau = GeneralizedForce::Constant(0.3);
    const auto a = m.step(s, tau, 0.05, sea, 12.5, 77);
    const auto b = m.step(s, tau, 0.05, sea, 12.5, 77);
    EXPECT_EQ(a.pose, b.pose);
    EXPECT_EQ(a.velocity, b.velocity);
}

TEST(Step, CurrentAdvectsVehicle) {
    AuvModel m;
    SeaState sea = default_sea(SeaCondition::es);
    sea.mean_force.setZero();
    sea.gust_amplitude = 0;
    sea.waves.clear();
    VehicleState s;
    for (int i = 0; i < 20; ++i) s = m.step(s, GeneralizedForce::Zero(), 0.05, sea, 0.05 * i);
    EXPECT_NEAR(s.pose.x, 0.3 * 1.0, 1e-9);
}

TEST(Coefficients, DataFileLoadsAndValidates) {
    const auto p = load_rigid_body(std::string(DPLAC_DATA_DIR) + "/remus100.json");
    EXPECT_DOUBLE_EQ(p.mass, 31.9);
    EXPECT_DOUBLE_EQ(p.length, 1.6);
    EXPECT_DOUBLE_EQ(p.water_density, 1026.0);
    EXPECT_NEAR(p.buoyancy() / p.weight(), 1.0, 0.01);
    const Matrix6 mm = p.mass_matrix();
    EXPECT_TRUE(mm.isApprox(mm.transpose()));
}

TEST(Coefficients, InvalidSetsRejected) {
    RigidBodyParams heavy;
    heavy.displaced_volume *= 0.9;
    EXPECT_THROW(heavy.validate(), ConfigError);
    RigidBodyParams singular;
    singular.added_mass[0] = -singular.mass;
    EXPECT_THROW(AuvModel{singular}, ConfigError);
    nlohmann::json j = {{"length_m", 1.6}};
    EXPECT_THROW(rigid_body_from_json(j), ConfigError);
}

TEST(Disturbance, IdealIsZero) {
    for (double t : {0.0, 1.3, 99.0}) EXPECT_EQ(sample_disturbance(default_sea(SeaCondition::ideal), t, 5).norm(), 0.0);
}

TEST(Disturbance, VesDominatesEsAtMatchedSeeds) {
    const auto es = default_sea(SeaCondition::es), ves = default_sea(SeaCondition::ves);
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL}) {
        for (int i = 0; i < 5000; ++i) {
            const double t = 0.05 * i;
            EXPECT_GE(sample_disturbance(ves, t, seed).norm(), sample_disturbance(es, t, seed).norm());
        }
    }
}

TEST(Disturbance, DeterministicGivenSeed) {
    const auto es = default_sea(SeaCondition::es);
    EXPECT_EQ(sample_disturbance(es, 3.7, 9), sample_disturbance(es, 3.7, 9));
    EXPECT_NE(sample_disturbance(es, 3.7, 9), sample_disturbance(es, 3.7, 10));
}

TEST(Disturbance, TimeAverageMatchesCurrentDragEquivalent) {
    const auto es = default_sea(SeaCondition::es);
    Vector3 sum = Vector3::Zero();
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += sample_disturbance(es, 0.05 * i, 3).head<3>();
    const Vector3 mean = sum / n;
    EXPECT_LE((mean - es.mean_force).norm(), 0.05 * es.mean_force.norm());
}

TEST(Disturbance, IdealWithLoadsRejected) {
    SeaState s;
    s.gust_amplitude = 1.0;
    EXPECT_THROW(s.validate(), ConfigError);
}
