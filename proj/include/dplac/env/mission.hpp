#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dplac/control/tracking.hpp"
#include "dplac/core/math.hpp"
#include "dplac/core/rng.hpp"
#include "dplac/dynamics/auv_model.hpp"
#include "dplac/env/scenario.hpp"

namespace dplac::env {

inline constexpr int kActionDim = 3;
/// Normalized (heading, depth, speed) setpoint triple in [-1, 1].
using Action = std::array<double, kActionDim>;

struct SensorNode {
    dynamics::Vector3 position = dynamics::Vector3::Zero();
    double buffer = 0.0;     // MBit
    double delivered = 0.0;  // MBit

    [[nodiscard]] bool serviced() const { return delivered >= buffer; }
    [[nodiscard]] double remaining() const { return buffer - delivered; }
};

struct AsvAnchor {
    dynamics::Vector3 position = dynamics::Vector3::Zero();
    double relay_range = 0.0;
};

struct MissionMetrics {
    double delivered = 0.0;  // MBit over all nodes
    double duration = 0.0;   // s
    double energy = 0.0;     // J over all AUVs
    int serviced = 0;
    int collisions = 0;
    int auv_count = 1;

    /// Sum data rate in MBit/s.
    [[nodiscard]] double sdr() const { return duration > 0.0 ? delivered / duration : 0.0; }
    /// Mean electrical power per AUV in W.
    [[nodiscard]] double ec() const { return duration > 0.0 ? energy / (duration * auv_count) : 0.0; }
};

/// What one AUV contributed during a decision step.
struct AuvStepDelta {
    double delivered = 0.0;
    int newly_serviced = 0;
    double energy = 0.0;
    bool collided = false;
    double tracking = 0.0;  // mean |e_yaw| + |e_depth| / 10 over the control sub-steps
    double yaw_error = 0.0;
    double depth_error = 0.0;
};

inline double reward(const AuvStepDelta& d, const RewardWeights& w) {
    return w.data * d.delivered + w.service * d.newly_serviced - w.energy * d.energy -
           w.collision * (d.collided ? 1.0 : 0.0) - w.tracking * d.tracking;
}

struct StepResult {
    std::vector<double> rewards;
    std::vector<AuvStepDelta> deltas;
    bool done = false;
    bool terminal = false;  // every node serviced; a time-limit stop is not terminal
    bool aborted = false;
    std::string diagnostic;
};

inline control::Setpoint to_setpoint(const Action& a, const ScenarioConfig& cfg) {
    return {kPi * clamp_unit(a[0]), 0.5 * (clamp_unit(a[1]) + 1.0) * cfg.extent_z,
            0.5 * (clamp_unit(a[2]) + 1.0) * cfg.max_speed_setpoint};
}

inline Action to_action(const control::Setpoint& sp, const ScenarioConfig& cfg) {
    return {clamp_unit(wrap_angle(sp.yaw) / kPi), clamp_unit(2.0 * sp.depth / cfg.extent_z - 1.0),
            clamp_unit(2.0 * sp.speed / cfg.max_speed_setpoint - 1.0)};
}

/// Multi-AUV data-collection episode: controllers and dynamics stepped at the
/// control rate inside each decision step.
class MissionEnv {
public:
    static constexpr int kCompactStateDim = 10;

    explicit MissionEnv(ScenarioConfig cfg, dynamics::AuvModel model = dynamics::AuvModel())
        : cfg_(std::move(cfg)), model_(std::move(model)) {
        cfg_.validate();
        sea_ = dynamics::default_sea(cfg_.sea, model_.params());
    }

    [[nodiscard]] const ScenarioConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const dynamics::AuvModel& model() const noexcept { return model_; }
    [[nodiscard]] const std::vector<SensorNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::vector<dynamics::VehicleState>& vehicles() const noexcept { return vehicles_; }
    [[nodiscard]] const AsvAnchor& asv() const noexcept { return asv_; }
    [[nodiscard]] const MissionMetrics& metrics() const noexcept { return metrics_; }
    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] int steps() const noexcept { return steps_; }
    [[nodiscard]] bool finished() const noexcept { return finished_; }

    [[nodiscard]] int observation_dim() const {
        return 10 + 4 * cfg_.nearest_nodes + 3 + 3 + 3 * (cfg_.auv_count - 1) + 2;
    }

    void reset(std::uint64_t seed) {
        Rng rng(seed);
        nodes_.assign(static_cast<std::size_t>(cfg_.node_count), {});
        for (auto& n : nodes_) {
            n.position = {rng.uniform(0.0, cfg_.extent_x), rng.uniform(0.0, cfg_.extent_y),
                          rng.uniform(cfg_.node_min_depth, cfg_.extent_z)};
            n.buffer = cfg_.node_buffer;
        }
        asv_ = {{0.5 * cfg_.extent_x, 0.5 * cfg_.extent_y, 0.0}, cfg_.comm.relay_range};
        vehicles_.clear();
        controllers_.clear();
        for (const auto& sp : cfg_.spawn_poses()) {
            dynamics::VehicleState s;
            s.pose.x = sp.x;
            s.pose.y = sp.y;
            s.pose.z = sp.z;
            s.pose.yaw = sp.yaw;
            vehicles_.push_back(s);
            controllers_.emplace_back(cfg_.controller, cfg_.gains, cfg_.actuators, model_.params());
        }
        disturbance_seed_ = rng.next_u64();
        metrics_ = {};
        metrics_.auv_count = cfg_.auv_count;
        time_ = 0.0;
        steps_ = 0;
        finished_ = false;
    }

    StepResult step(const std::vector<Action>& actions) {
        if (vehicles_.empty()) throw Error("step called before reset");
        if (finished_) throw Error("step called on a finished episode");
        const std::size_t n = vehicles_.size();
        if (actions.size() != n) throw ShapeError("expected one action per AUV");

        StepResult res;
        res.deltas.assign(n, {});
        std::vector<control::Setpoint> sps;
        for (const auto& a : actions) sps.push_back(to_setpoint(a, cfg_));
        const double dt = cfg_.control_dt;
        try {
            for (int k = 0; k < cfg_.inner_steps; ++k) {
                for (std::size_t i = 0; i < n; ++i) {
                    auto& d = res.deltas[i];
                    const auto& s = vehicles_[i];
                    const double ey = std::abs(wrap_angle(sps[i].yaw - s.pose.yaw));
                    const double ez = std::abs(sps[i].depth - s.pose.z);
                    d.yaw_error += ey / cfg_.inner_steps;
                    d.depth_error += ez / cfg_.inner_steps;
                    d.tracking += (ey + ez / 10.0) / cfg_.inner_steps;
                    const control::ActuatorCommand cmd = controllers_[i].update(sps[i], s, dt);
                    d.energy += power_draw(cmd.rpm(), cfg_.power) * dt;
                    vehicles_[i] = model_.step(s, control::actuator_map(cmd, cfg_.actuators), dt, sea_, time_,
                                               Rng::mix(disturbance_seed_ + i));
                    keep_inside(vehicles_[i]);
                }
                for (std::size_t i = 0; i < n; ++i) transfer(i, dt, res.deltas[i]);
                time_ += dt;
            }
        } catch (const NumericError& e) {
            res.aborted = true;
            res.diagnostic = std::string("episode aborted: ") + e.what();
        }
        ++steps_;
        metrics_.duration = time_;

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = (vehicles_[i].pose.position() - vehicles_[j].pose.position()).norm();
                if (d < cfg_.collision_radius) {
                    ++metrics_.collisions;
                    res.deltas[i].collided = true;
                    res.deltas[j].collided = true;
                }
            }
        }
        for (const auto& d : res.deltas) {
            metrics_.energy += d.energy;
            res.rewards.push_back(reward(d, cfg_.weights));
        }
        res.terminal = !res.aborted && metrics_.serviced == static_cast<int>(nodes_.size());
        res.done = res.terminal || res.aborted || steps_ >= cfg_.max_steps;
        finished_ = res.done;
        return res;
    }

    /// Index of the nearest unserviced node to a point, or -1.
    [[nodiscard]] int nearest_unserviced(const dynamics::Vector3& p, int exclude = -1) const {
        int best = -1;
        double best_d = 1e300;
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            if (nodes_[k].serviced() || static_cast<int>(k) == exclude) continue;
            const double d = (nodes_[k].position - p).norm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        return best;
    }

    /// Normalized per-AUV observation; every entry lies in [-1, 1].
    [[nodiscard]] Eigen::VectorXd observation(std::size_t i) const {
        Eigen::VectorXd o(observation_dim());
        int c = 0;
        const auto& s = vehicles_.at(i);
        const dynamics::Vector3 p = s.pose.position();
        const dynamics::Vector3 ext{cfg_.extent_x, cfg_.extent_y, cfg_.extent_z};
        const auto put = [&](double v) { o[c++] = clamp_unit(v); };
        for (const double v : compact_state(i)) put(v);

        std::vector<std::pair<double, int>> order;
        for (std::size_t k = 0; k < nodes_.size(); ++k)
            if (!nodes_[k].serviced()) order.emplace_back((nodes_[k].position - p).norm(), static_cast<int>(k));
        std::sort(order.begin(), order.end());
        for (int k = 0; k < cfg_.nearest_nodes; ++k) {
            if (k < static_cast<int>(order.size())) {
                const auto& node = nodes_[static_cast<std::size_t>(order[static_cast<std::size_t>(k)].second)];
                const dynamics::Vector3 rel = (node.position - p).cwiseQuotient(ext);
                put(rel.x());
                put(rel.y());
                put(rel.z());
                put(node.remaining() / node.buffer);
            } else {
                for (int j = 0; j < 4; ++j) put(0.0);
            }
        }
        const dynamics::Vector3 to_asv = (asv_.position - p).cwiseQuotient(ext);
        put(to_asv.x());
        put(to_asv.y());
        put(to_asv.z());
        for (int k = 0; k < 3; ++k) put(static_cast<int>(cfg_.sea) == k ? 1.0 : 0.0);
        for (std::size_t j = 0; j < vehicles_.size(); ++j) {
            if (j == i) continue;
            const dynamics::Vector3 rel = (vehicles_[j].pose.position() - p).cwiseQuotient(ext);
            put(rel.x());
            put(rel.y());
            put(rel.z());
        }
        double bearing = 0.0;
        if (!order.empty()) {
            const dynamics::Vector3 d = nodes_[static_cast<std::size_t>(order.front().second)].position - p;
            bearing = std::atan2(d.y(), d.x()) / kPi;
        }
        put(bearing);
        put(2.0 * steps_ / cfg_.max_steps - 1.0);
        return o;
    }

    /// Short kinematic summary used for the history part of the encoding.
    [[nodiscard]] std::array<double, kCompactStateDim> compact_state(std::size_t i) const {
        const auto& s = vehicles_.at(i);
        const double vmax = model_.limits().max_speed;
        return {clamp_unit(2.0 * s.pose.x / cfg_.extent_x - 1.0),
                clamp_unit(2.0 * s.pose.y / cfg_.extent_y - 1.0),
                clamp_unit(2.0 * s.pose.z / cfg_.extent_z - 1.0),
                std::sin(s.pose.yaw),
                std::cos(s.pose.yaw),
                clamp_unit(s.pose.pitch / (0.5 * kPi)),
                clamp_unit(s.velocity.u / vmax),
                clamp_unit(s.velocity.v / vmax),
                clamp_unit(s.velocity.w / vmax),
                clamp_unit(s.velocity.r / model_.limits().max_yaw_rate)};
    }

    /// Direct state override, for tests and scripted scenes.
    void set_vehicle(std::size_t i, const dynamics::VehicleState& s) { vehicles_.at(i) = s; }
    void set_node_position(std::size_t k, const dynamics::Vector3& p) { nodes_.at(k).position = p; }

private:
    void keep_inside(dynamics::VehicleState& s) const {
        s.pose.x = std::clamp(s.pose.x, 0.0, cfg_.extent_x);
        s.pose.y = std::clamp(s.pose.y, 0.0, cfg_.extent_y);
        s.pose.z = std::clamp(s.pose.z, 0.0, cfg_.extent_z);
    }

    void transfer(std::size_t i, double dt, AuvStepDelta& d) {
        const dynamics::Vector3 p = vehicles_[i].pose.position();
        const int k = nearest_unserviced(p);
        if (k < 0) return;
        auto& node = nodes_[static_cast<std::size_t>(k)];
        const double dist = (node.position - p).norm();
        const bool relay_ok = (asv_.position - p).norm() <= asv_.relay_range;
        const double amount = std::min(acoustic_rate(dist, relay_ok, cfg_.comm) * dt, node.remaining());
        if (amount <= 0.0) return;
        node.delivered += amount;
        if (node.remaining() <= 1e-12) {
            node.delivered = node.buffer;
            ++d.newly_serviced;
            ++metrics_.serviced;
        }
        d.delivered += amount;
        metrics_.delivered += amount;
    }

    ScenarioConfig cfg_;
    dynamics::AuvModel model_;
    dynamics::SeaState sea_;
    std::vector<SensorNode> nodes_;
    std::vector<dynamics::VehicleState> vehicles_;
    std::vector<control::VehicleController> controllers_;
    AsvAnchor asv_;
    MissionMetrics metrics_;
    std::uint64_t disturbance_seed_ = 0;
    double time_ = 0.0;
    int steps_ = 0;
    bool finished_ = false;
};

}  // namespace dplac::env
