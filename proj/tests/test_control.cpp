#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dplac/control/benchmark.hpp"
#include "dplac/core/rng.hpp"

using namespace dplac;
using namespace dplac::control;

TEST(SSurface, ZeroErrorGivesZero) { EXPECT_EQ(s_surface({0.0, 0.0}, {2.0, 1.0}), 0.0); }

TEST(SSurface, YawGainsAtUnitErrorMatchesLogisticForm) {
    // 2 / (1 + e^-x) - 1 evaluated directly
    const double x = 2.0 * 1.0;
    const double oracle = 2.0 / (1.0 + std::exp(-x)) - 1.0;
    EXPECT_NEAR(s_surface({1.0, 0.0}, {2.0, 1.0}), oracle, 1e-15);
    EXPECT_NEAR(s_surface({1.0, 0.0}, {2.0, 1.0}), 0.7616, 1e-4);
}

TEST(SSurface, SaturatesAtOnePlusCompensation) {
    EXPECT_NEAR(s_surface({1e6, 0.0}, {2.0, 1.0}), 1.0, 1e-12);
    EXPECT_NEAR(s_surface({-1e6, 0.0}, {2.0, 1.0}), -1.0, 1e-12);
    EXPECT_NEAR(s_surface({1e6, 0.0}, {2.0, 1.0}, 0.1), 1.1, 1e-12);
}

TEST(SSurface, OddMonotoneAndBounded) {
    Rng rng(3);
    const SSurfaceGains g{2.0, 1.0};
    for (int i = 0; i < 10000; ++i) {
        const double e = rng.uniform(-5, 5), ed = rng.uniform(-5, 5), du = rng.uniform(-0.3, 0.3);
        const double u = s_surface({e, ed}, g);
        EXPECT_DOUBLE_EQ(s_surface({-e, -ed}, g), -u);
        EXPECT_GT(s_surface({e, ed}, g, du), -1.0 + du);
        EXPECT_LT(s_surface({e, ed}, g, du), 1.0 + du);
        const double h = 1e-3;
        EXPECT_GT(s_surface({e + h, ed}, g), u);
        EXPECT_GT(s_surface({e, ed + h}, g), u);
    }
}

TEST(SSurface, RejectsNonPositiveGains) {
    EXPECT_THROW((SSurfaceGains{0.0, 1.0}.validate()), ConfigError);
    EXPECT_THROW((SSurfaceGains{1.0, -1.0}.validate()), ConfigError);
}

TEST(Pid, ZeroHistoryGivesZero) {
    PidState st;
    EXPECT_EQ(pid({0.0, 0.0}, st, {1.0, 0.5, 0.2}, 0.05), 0.0);
    EXPECT_EQ(st.integral, 0.0);
}

TEST(Pid, ProportionalOnly) {
    PidState st;
    EXPECT_DOUBLE_EQ(pid({0.5, 0.0}, st, {1.0, 0.0, 0.0}, 0.05), 0.5);
}

TEST(Pid, AccumulatorFrozenWhileSaturated) {
    PidState st;
    const PidGains g{1.0, 0.1, 0.0};
    for (int i = 0; i < 100; ++i) {
        const double before = st.integral;
        EXPECT_EQ(pid({1.0, 0.0}, st, g, 0.05), 1.0);
        EXPECT_EQ(st.integral, before);
    }
    // an error that pulls back out of saturation integrates again
    pid({-0.5, 0.0}, st, g, 0.05);
    EXPECT_DOUBLE_EQ(st.integral, -0.025);
}

TEST(Pid, IntegratesBelowSaturation) {
    PidState st;
    const PidGains g{0.1, 0.5, 0.0};
    for (int i = 0; i < 10; ++i) pid({0.2, 0.0}, st, g, 0.1);
    EXPECT_NEAR(st.integral, 0.2, 1e-12);
}

TEST(Pid, RejectsBadStep) {
    PidState st;
    EXPECT_THROW(pid({0.1, 0.0}, st, {}, 0.0), Error);
}

TEST(Smc, ZeroErrorGivesZero) { EXPECT_EQ(smc({0.0, 0.0}, {1.0, 1.0, 0.1}), 0.0); }

TEST(Smc, SaturatedSwitchingOutsideLayer) {
    const SmcGains g{1.0, 0.8, 0.1};
    EXPECT_DOUBLE_EQ(std::abs(smc({5.0, 0.0}, g)), 0.8);
    EXPECT_DOUBLE_EQ(smc({-5.0, 0.0}, g), 0.8);
}

TEST(Smc, ContinuousAcrossSurface) {
    const SmcGains g{1.0, 0.8, 0.1};
    const double s = g.width * 1e-3;
    const double jump = std::abs(smc({0.0, s}, g) - smc({0.0, -s}, g));
    EXPECT_LT(jump, 1e-2 * g.gain);
}

TEST(Laws, FiniteAndBoundedForFiniteInputs) {
    Rng rng(9);
    PidState st;
    for (int i = 0; i < 10000; ++i) {
        const TrackingError err{rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)};
        const double a = clamp_unit(s_surface(err, {2.0, 1.0}));
        const double b = pid(err, st, {3.0, 0.2, 1.0}, 0.05);
        const double c = smc(err, {0.5, 1.0, 0.2});
        for (double u : {a, b, c}) {
            EXPECT_TRUE(std::isfinite(u));
            EXPECT_LE(std::abs(u), 1.0);
        }
    }
}

TEST(Actuator, ZeroCommandZeroForce) {
    EXPECT_EQ(actuator_map({}, {}), dynamics::GeneralizedForce::Zero());
}

TEST(Actuator, FullSurgeIsMaxRpm) {
    ActuatorCommand cmd;
    cmd.surge = 1.0;
    EXPECT_EQ(cmd.rpm(), 1525.0);
    cmd.surge = 3.0;
    EXPECT_EQ(cmd.rpm(), 1525.0);
    const ActuatorLimits lim;
    EXPECT_DOUBLE_EQ(actuator_map(cmd, lim)[0], lim.thrust_coefficient * 1525.0 * 1525.0);
}

TEST(Actuator, OddInYawAndDepth) {
    Rng rng(5);
    const ActuatorLimits lim;
    for (int i = 0; i < 1000; ++i) {
        const ActuatorCommand c{0.0, rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const ActuatorCommand neg{0.0, -c.yaw, -c.depth};
        EXPECT_EQ(actuator_map(neg, lim), -actuator_map(c, lim));
    }
}

TEST(Actuator, SaturationsHoldForAnyInput) {
    Rng rng(6);
    const ActuatorLimits lim;
    for (int i = 0; i < 10000; ++i) {
        const ActuatorCommand c{rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)};
        const auto tau = actuator_map(c, lim);
        EXPECT_LE(std::abs(c.rpm()), kMaxPropellerRpm);
        EXPECT_LE(std::abs(tau[0]), lim.max_thrust() + 1e-12);
        EXPECT_LE(std::abs(tau[2]), lim.heave_share * lim.max_heave_force + 1e-12);
        EXPECT_LE(std::abs(tau[4]), lim.pitch_share * lim.max_pitch_moment + 1e-12);
        EXPECT_LE(std::abs(tau[5]), lim.max_yaw_moment + 1e-12);
        EXPECT_EQ(tau[1], 0.0);
        EXPECT_EQ(tau[3], 0.0);
    }
}

TEST(Actuator, ThrustInverseRoundTrip) {
    const ActuatorLimits lim;
    for (double thrust : {-5.0, 0.0, 1.0, 7.5}) {
        ActuatorCommand c;
        c.surge = surge_for_thrust(thrust, lim);
        EXPECT_NEAR(actuator_map(c, lim)[0], thrust, 1e-9);
    }
}

TEST(Channel, YawErrorWrapsAndDifferences) {
    ChannelController ch(ControllerKind::ssurface, ControllerGains{}.yaw, true);
    // reference just across the branch cut from the measurement
    const TrackingError first = ch.error(kPi - 0.1, -kPi + 0.1, 0.05);
    EXPECT_NEAR(first.e, -0.2, 1e-12);
    EXPECT_EQ(first.e_dot, 0.0);
    ch.update(kPi - 0.1, -kPi + 0.1, 0.05);
    const TrackingError next = ch.error(kPi - 0.1, -kPi + 0.15, 0.05);
    EXPECT_NEAR(next.e, -0.25, 1e-12);
    EXPECT_NEAR(next.e_dot, -1.0, 1e-9);
}

TEST(Channel, SmcSignMatchesOtherLaws) {
    // every law must push toward the reference
    for (auto kind : {ControllerKind::ssurface, ControllerKind::pid, ControllerKind::smc}) {
        ChannelController ch(kind, ControllerGains{}.depth, false);
        EXPECT_GT(ch.update(15.0, 10.0, 0.05), 0.0) << to_string(kind);
        ch.reset();
        EXPECT_LT(ch.update(5.0, 10.0, 0.05), 0.0) << to_string(kind);
    }
}

TEST(Channel, ParsesKinds) {
    EXPECT_EQ(parse_controller_kind("pid"), ControllerKind::pid);
    EXPECT_EQ(parse_controller_kind("ssurface"), ControllerKind::ssurface);
    EXPECT_EQ(parse_controller_kind("smc"), ControllerKind::smc);
    EXPECT_THROW(parse_controller_kind("lqr"), ConfigError);
}

class ClosedLoop : public ::testing::TestWithParam<ControllerKind> {};

TEST_P(ClosedLoop, StepResponsesSettleInCalmWater) {
    const dynamics::AuvModel model;
    const ControllerGains gains;
    const ActuatorLimits lim;
    const BenchmarkSetup setup;
    const auto yaw = step_response(model, GetParam(), gains, lim, Channel::yaw, {}, setup);
    EXPECT_NEAR(yaw.back().value, setup.yaw_step, 0.05 * setup.yaw_step);
    const auto depth = step_response(model, GetParam(), gains, lim, Channel::depth, {}, setup);
    EXPECT_NEAR(depth.back().value, setup.start_depth + setup.depth_step, 0.05 * setup.depth_step);
    for (const auto& s : depth) EXPECT_LE(std::abs(s.u), 1.0);
}

TEST_P(ClosedLoop, TrackingBenchmarkDeterministic) {
    const dynamics::AuvModel model;
    const auto sea = dynamics::default_sea(dynamics::SeaCondition::es);
    const auto a = tracking_benchmark(model, GetParam(), {}, {}, sea, 4, 60.0);
    const auto b = tracking_benchmark(model, GetParam(), {}, {}, sea, 4, 60.0);
    EXPECT_EQ(a.yaw_mean, b.yaw_mean);
    EXPECT_EQ(a.depth_mean, b.depth_mean);
    EXPECT_TRUE(std::isfinite(a.yaw_std) && std::isfinite(a.depth_std));
}

INSTANTIATE_TEST_SUITE_P(Laws, ClosedLoop,
                         ::testing::Values(ControllerKind::ssurface, ControllerKind::pid, ControllerKind::smc),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Benchmark, OvershootAndSettlingOnSyntheticResponse) {
    std::vector<ResponseSample> r;
    for (int k = 0; k <= 100; ++k) {
        const double t = 0.1 * k;
        const double v = k < 20 ? 0.05 * k : (k < 40 ? 1.2 : 1.0);
        r.push_back({t, 1.0, v, 0.0});
    }
    EXPECT_NEAR(overshoot(r, 0.0), 0.2, 1e-12);
    EXPECT_NEAR(settling_time(r, 0.0), 3.9, 1e-12);
}

TEST(Benchmark, ResponseCsvHasHeaderAndRows) {
    const dynamics::AuvModel model;
    BenchmarkSetup setup;
    setup.duration = 1.0;
    const auto r = step_response(model, ControllerKind::pid, {}, {}, Channel::yaw, {}, setup);
    std::ostringstream os;
    write_response_csv(os, r);
    const std::string text = os.str();
    EXPECT_NE(text.find("t,setpoint,value,u\n"), std::string::npos);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + 20);
}

TEST(Benchmark, TuningPicksFastestInBandOrClosest) {
    const dynamics::AuvModel model;
    const ActuatorLimits lim;
    for (auto kind : {ControllerKind::pid, ControllerKind::smc}) {
        for (auto ch : {Channel::yaw, Channel::depth}) {
            const double initial = ch == Channel::yaw ? 0.0 : BenchmarkSetup{}.start_depth;
            // brute-force oracle over the same grid
            double best_ts = 1e300, best_gap = 1e300;
            bool any_in_band = false;
            for (const auto& g : tuning_grid(kind, {}, ch)) {
                const auto r = step_response(model, kind, g, lim, ch, {});
                const double gap = std::abs(overshoot(r, initial) - 0.05);
                best_gap = std::min(best_gap, gap);
                if (gap <= 0.02) {
                    any_in_band = true;
                    best_ts = std::min(best_ts, settling_time(r, initial));
                }
            }
            const auto tuned = tune_channel(model, kind, {}, lim, ch);
            if (any_in_band) {
                EXPECT_NEAR(tuned.overshoot, 0.05, 0.02) << to_string(kind);
                EXPECT_EQ(tuned.settling, best_ts) << to_string(kind);
            } else {
                EXPECT_EQ(std::abs(tuned.overshoot - 0.05), best_gap) << to_string(kind);
            }
        }
    }
    EXPECT_THROW(tune_channel(model, ControllerKind::ssurface, {}, lim, Channel::yaw), ConfigError);
}

TEST(Benchmark, DefaultGainsAreTheTunedOnes) {
    const dynamics::AuvModel model;
    const ControllerGains defaults;
    for (auto kind : {ControllerKind::pid, ControllerKind::smc}) {
        for (auto ch : {Channel::yaw, Channel::depth}) {
            const auto tuned = tune_channel(model, kind, defaults, {}, ch);
            const ChannelGains& a = ch == Channel::yaw ? tuned.gains.yaw : tuned.gains.depth;
            const ChannelGains& b = ch == Channel::yaw ? defaults.yaw : defaults.depth;
            EXPECT_EQ(a.pid.kp, b.pid.kp);
            EXPECT_EQ(a.pid.ki, b.pid.ki);
            EXPECT_EQ(a.pid.kd, b.pid.kd);
            EXPECT_EQ(a.smc.slope, b.smc.slope);
            EXPECT_EQ(a.smc.width, b.smc.width);
        }
    }
}
