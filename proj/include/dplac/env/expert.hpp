#pragma once

#include <cmath>
#include <algorithm>
#include <vector>

#include "dplac/core/rng.hpp"

#include "dplac/env/mission.hpp"

namespace dplac::env {

struct ExpertSettings {
    double cruise_speed = 1.8;    // m/s
    double approach_gain = 0.25;  // speed per metre of remaining range
    double hold_range = 2.0;      // m, stop closing in below this
};

/// Setpoint that drives toward `target`, slowing down inside the hold range.
inline control::Setpoint seek_setpoint(const dynamics::VehicleState& s, const dynamics::Vector3& target, double cruise,
                                       const ExpertSettings& ex) {
    const dynamics::Vector3 d = target - s.pose.position();
    const double horizontal = std::hypot(d.x(), d.y());
    control::Setpoint sp{std::atan2(d.y(), d.x()), target.z(), 0.0};
    sp.speed = std::min(cruise, ex.approach_gain * std::max(0.0, horizontal - ex.hold_range));
    if (horizontal < ex.hold_range) sp.yaw = s.pose.yaw;
    return sp;
}

/// Greedy waypoint seeker: each AUV heads for the nearest unserviced node
/// not already claimed by a lower-indexed AUV, slowing down on arrival.
inline std::vector<Action> expert_actions(const MissionEnv& env, const ExpertSettings& ex = {}) {
    const auto& cfg = env.config();
    std::vector<Action> out;
    std::vector<int> claimed;
    for (std::size_t i = 0; i < env.vehicles().size(); ++i) {
        const auto& s = env.vehicles()[i];
        const dynamics::Vector3 p = s.pose.position();
        int target = -1;
        double best = 1e300;
        for (std::size_t k = 0; k < env.nodes().size(); ++k) {
            if (env.nodes()[k].serviced()) continue;
            bool taken = false;
            for (int c : claimed) taken = taken || c == static_cast<int>(k);
            if (taken) continue;
            const double d = (env.nodes()[k].position - p).norm();
            if (d < best) {
                best = d;
                target = static_cast<int>(k);
            }
        }
        if (target < 0) target = env.nearest_unserviced(p);
        claimed.push_back(target);
        control::Setpoint sp{s.pose.yaw, s.pose.z, 0.0};
        if (target >= 0) sp = seek_setpoint(s, env.nodes()[static_cast<std::size_t>(target)].position, ex.cruise_speed, ex);
        out.push_back(to_action(sp, cfg));
    }
    return out;
}

/// Randomized variant of the greedy seeker used to record demonstrations.
/// Each AUV commits to one of the two nearest unclaimed nodes until it is
/// serviced, and the cruise speed is drawn once per episode.
class DemoExpert {
public:
    DemoExpert(std::size_t auv_count, std::uint64_t seed, ExpertSettings ex = {})
        : ex_(ex), rng_(seed), targets_(auv_count, -1) {
        cruise_ = rng_.uniform(0.7, 1.0) * ex_.cruise_speed;
    }

    [[nodiscard]] double cruise_speed() const noexcept { return cruise_; }

    std::vector<Action> act(const MissionEnv& env) {
        if (targets_.size() != env.vehicles().size()) throw ShapeError("expert sized for a different AUV count");
        const auto& nodes = env.nodes();
        for (auto& t : targets_)
            if (t >= 0 && nodes[static_cast<std::size_t>(t)].serviced()) t = -1;
        std::vector<Action> out;
        for (std::size_t i = 0; i < targets_.size(); ++i) {
            const auto& s = env.vehicles()[i];
            if (targets_[i] < 0) targets_[i] = pick(env, i);
            control::Setpoint sp{s.pose.yaw, s.pose.z, 0.0};
            if (targets_[i] >= 0) sp = seek_setpoint(s, nodes[static_cast<std::size_t>(targets_[i])].position, cruise_, ex_);
            out.push_back(to_action(sp, env.config()));
        }
        return out;
    }

private:
    int pick(const MissionEnv& env, std::size_t i) {
        const dynamics::Vector3 p = env.vehicles()[i].pose.position();
        std::vector<std::pair<double, int>> open;
        for (std::size_t k = 0; k < env.nodes().size(); ++k) {
            if (env.nodes()[k].serviced()) continue;
            if (std::find(targets_.begin(), targets_.end(), static_cast<int>(k)) != targets_.end()) continue;
            open.emplace_back((env.nodes()[k].position - p).norm(), static_cast<int>(k));
        }
        if (open.empty()) return env.nearest_unserviced(p);
        std::sort(open.begin(), open.end());
        const auto choices = std::min<std::int64_t>(2, static_cast<std::int64_t>(open.size()));
        return open[static_cast<std::size_t>(rng_.uniform_int(0, choices - 1))].second;
    }

    ExpertSettings ex_;
    Rng rng_;
    std::vector<int> targets_;
    double cruise_ = 0.0;
};

}  // namespace dplac::env
