#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "dplac/control/tracking.hpp"
#include "dplac/dynamics/auv_model.hpp"

namespace dplac::control {

enum class Channel { yaw, depth };

struct ResponseSample {
    double t = 0.0;
    double setpoint = 0.0;
    double value = 0.0;
    double u = 0.0;
};

struct BenchmarkSetup {
    double dt = 0.05;
    double cruise_speed = 1.5;
    double start_depth = 10.0;
    double yaw_step = 0.5;    // rad
    double depth_step = 5.0;  // m
    double duration = 60.0;   // s
    double dwell = 30.0;      // s between tracking setpoint changes
};

/// Closed-loop response to a single setpoint step in one channel while the
/// other channel holds its initial value.
inline std::vector<ResponseSample> step_response(const dynamics::AuvModel& model, ControllerKind kind,
                                                 const ControllerGains& gains, const ActuatorLimits& limits,
                                                 Channel channel, const dynamics::SeaState& sea,
                                                 const BenchmarkSetup& setup = {}, std::uint64_t seed = 0) {
    VehicleController ctl(kind, gains, limits, model.params());
    dynamics::VehicleState s;
    s.pose.z = setup.start_depth;
    s.velocity.u = setup.cruise_speed;
    Setpoint sp{0.0, setup.start_depth, setup.cruise_speed};
    if (channel == Channel::yaw) sp.yaw = setup.yaw_step;
    else sp.depth += setup.depth_step;

    std::vector<ResponseSample> out;
    const auto steps = static_cast<int>(std::lround(setup.duration / setup.dt));
    out.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const double t = k * setup.dt;
        const ActuatorCommand cmd = ctl.update(sp, s, setup.dt);
        const double u = channel == Channel::yaw ? cmd.yaw : cmd.depth;
        const double value = channel == Channel::yaw ? s.pose.yaw : s.pose.z;
        out.push_back({t, channel == Channel::yaw ? sp.yaw : sp.depth, value, u});
        s = model.step(s, actuator_map(cmd, limits), setup.dt, sea, t, seed);
    }
    return out;
}

/// Peak excursion past the target as a fraction of the step size.
inline double overshoot(const std::vector<ResponseSample>& r, double initial) {
    if (r.empty()) return 0.0;
    const double target = r.back().setpoint;
    const double step = target - initial;
    if (step == 0.0) return 0.0;
    double worst = 0.0;
    for (const auto& s : r) worst = std::max(worst, (s.value - target) / step);
    return worst;
}

/// First time after which the response stays within `band` of the step.
inline double settling_time(const std::vector<ResponseSample>& r, double initial, double band = 0.05) {
    if (r.empty()) return 0.0;
    const double target = r.back().setpoint;
    const double tol = band * std::abs(target - initial);
    double t_settle = r.front().t;
    for (const auto& s : r)
        if (std::abs(s.value - target) > tol) t_settle = s.t;
    return t_settle;
}

inline void write_response_csv(std::ostream& os, const std::vector<ResponseSample>& r) {
    os << "# step response; t [s], setpoint and value [rad or m], u [normalized]\n";
    os << "t,setpoint,value,u\n";
    for (const auto& s : r) os << s.t << ',' << s.setpoint << ',' << s.value << ',' << s.u << '\n';
}

struct TrackingStats {
    double yaw_mean = 0.0;
    double yaw_std = 0.0;
    double depth_mean = 0.0;
    double depth_std = 0.0;
};

/// Setpoint schedule of the tracking benchmark: piecewise-constant heading
/// and depth changes at staggered times.
inline Setpoint tracking_schedule(double t, const BenchmarkSetup& setup) {
    static constexpr double kYaw[] = {0.5, -0.4, 1.0, 0.0, -0.8, 0.3};
    static constexpr double kDepth[] = {14.0, 9.0, 16.0, 12.0, 17.0, 10.0};
    const auto yi = static_cast<std::size_t>(t / setup.dwell) % 6;
    const auto di = static_cast<std::size_t>((t + 0.5 * setup.dwell) / setup.dwell) % 6;
    return {kYaw[yi], kDepth[di], setup.cruise_speed};
}

/// Mean and spread of |yaw error| and |depth error| over a tracking run.
inline TrackingStats tracking_benchmark(const dynamics::AuvModel& model, ControllerKind kind,
                                        const ControllerGains& gains, const ActuatorLimits& limits,
                                        const dynamics::SeaState& sea, std::uint64_t seed,
                                        double duration = 180.0, const BenchmarkSetup& setup = {}) {
    VehicleController ctl(kind, gains, limits, model.params());
    dynamics::VehicleState s;
    s.pose.z = setup.start_depth;
    s.velocity.u = setup.cruise_speed;
    const auto steps = static_cast<int>(std::lround(duration / setup.dt));
    double sy = 0, syy = 0, sd = 0, sdd = 0;
    for (int k = 0; k < steps; ++k) {
        const double t = k * setup.dt;
        const Setpoint sp = tracking_schedule(t, setup);
        const ActuatorCommand cmd = ctl.update(sp, s, setup.dt);
        const double ey = std::abs(wrap_angle(sp.yaw - s.pose.yaw));
        const double ed = std::abs(sp.depth - s.pose.z);
        sy += ey;
        syy += ey * ey;
        sd += ed;
        sdd += ed * ed;
        s = model.step(s, actuator_map(cmd, limits), setup.dt, sea, t, seed);
    }
    const double n = steps;
    TrackingStats st;
    st.yaw_mean = sy / n;
    st.depth_mean = sd / n;
    st.yaw_std = std::sqrt(std::max(0.0, syy / n - st.yaw_mean * st.yaw_mean));
    st.depth_std = std::sqrt(std::max(0.0, sdd / n - st.depth_mean * st.depth_mean));
    return st;
}

struct TuningResult {
    ControllerGains gains;
    double overshoot = 0.0;
    double settling = 0.0;
};

/// Candidate gain sets scanned by tune_channel: a gain scale times a
/// derivative (PID) or boundary-layer (SMC) ratio.
inline std::vector<ControllerGains> tuning_grid(ControllerKind kind, const ControllerGains& base, Channel channel) {
    if (kind == ControllerKind::ssurface) throw ConfigError("S-Surface gains are fixed, not tuned");
    static constexpr double kScale[] = {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0};
    static constexpr double kRatio[] = {0.25, 0.5, 1.0, 2.0, 4.0};
    std::vector<ControllerGains> out;
    for (double a : kScale) {
        for (double b : kRatio) {
            ControllerGains g = base;
            ChannelGains& c = channel == Channel::yaw ? g.yaw : g.depth;
            if (kind == ControllerKind::pid) c.pid = {a, 0.02 * a, b * a};
            else c.smc = {1.0 / b, 1.0, a};
            out.push_back(g);
        }
    }
    return out;
}

/// Calm-water step-response tuning of one channel: among grid settings whose
/// overshoot is within `tolerance` of `target`, keep the fastest settling
/// one; if none qualifies, the one with the closest overshoot.
inline TuningResult tune_channel(const dynamics::AuvModel& model, ControllerKind kind, const ControllerGains& base,
                                 const ActuatorLimits& limits, Channel channel, double target = 0.05,
                                 double tolerance = 0.02, const BenchmarkSetup& setup = {}) {
    const double initial = channel == Channel::yaw ? 0.0 : setup.start_depth;
    const dynamics::SeaState calm;
    TuningResult best;
    bool best_in_band = false;
    double best_gap = 1e300;
    for (const auto& g : tuning_grid(kind, base, channel)) {
        const auto r = step_response(model, kind, g, limits, channel, calm, setup);
        const double os = overshoot(r, initial);
        const double ts = settling_time(r, initial);
        const double gap = std::abs(os - target);
        const bool in_band = gap <= tolerance;
        const bool better = in_band ? (!best_in_band || ts < best.settling) : (!best_in_band && gap < best_gap);
        if (better) {
            best = {g, os, ts};
            best_in_band = in_band;
            best_gap = gap;
        }
    }
    return best;
}

}  // namespace dplac::control
