#pragma once

#include <Eigen/Dense>
#include <deque>

#include "dplac/env/mission.hpp"

namespace dplac::env {

/// Observation plus the last `history` compact states and actions of one
/// AUV, oldest first, zero-padded at episode start.
class HistoryEncoder {
public:
    HistoryEncoder(int observation_dim, int history)
        : observation_dim_(observation_dim), history_(history) {
        if (observation_dim < 1 || history < 1) throw ConfigError("encoder needs positive dimensions");
    }

    [[nodiscard]] int dim() const {
        return observation_dim_ + history_ * (MissionEnv::kCompactStateDim + kActionDim);
    }

    void reset() {
        states_.clear();
        actions_.clear();
    }

    /// Records the state the action was taken from and the action itself.
    void push(const std::array<double, MissionEnv::kCompactStateDim>& state, const Action& action) {
        states_.push_back(state);
        actions_.push_back(action);
        if (static_cast<int>(states_.size()) > history_) {
            states_.pop_front();
            actions_.pop_front();
        }
    }

    [[nodiscard]] Eigen::VectorXd encode(const Eigen::VectorXd& observation) const {
        if (observation.size() != observation_dim_) throw ShapeError("observation has the wrong dimension");
        Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
        out.head(observation_dim_) = observation;
        const int pad = history_ - static_cast<int>(states_.size());
        int c = observation_dim_ + pad * MissionEnv::kCompactStateDim;
        for (const auto& s : states_)
            for (double v : s) out[c++] = v;
        c = observation_dim_ + history_ * MissionEnv::kCompactStateDim + pad * kActionDim;
        for (const auto& a : actions_)
            for (double v : a) out[c++] = v;
        return out;
    }

private:
    int observation_dim_;
    int history_;
    std::deque<std::array<double, MissionEnv::kCompactStateDim>> states_;
    std::deque<Action> actions_;
};

}  // namespace dplac::env
