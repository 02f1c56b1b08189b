#pragma once

#include <cmath>
#include <cstdint>

#include "dplac/nn/params.hpp"

namespace dplac::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer bound to one ParamSet layout.
class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& params, AdamConfig config)
        : config_(config), first_(params.zeros_like()), second_(params.zeros_like()) {}

    void step(ParamSet& params, const ParamSet& grads) {
        params.require_same_structure(first_, "adam parameters");
        grads.require_same_structure(first_, "adam gradients");
        ++steps_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
        const double lr = config_.learning_rate;
        auto p = params.begin();
        auto g = grads.begin();
        auto m = first_.begin();
        auto v = second_.begin();
        for (; p != params.end(); ++p, ++g, ++m, ++v) {
            update(p->second.weights, g->second.weights, m->second.weights, v->second.weights, c1, c2, lr);
            update(p->second.biases, g->second.biases, m->second.biases, v->second.biases, c1, c2, lr);
        }
    }

    [[nodiscard]] std::uint64_t steps() const noexcept { return steps_; }
    [[nodiscard]] const AdamConfig& config() const noexcept { return config_; }
    void set_learning_rate(double lr) { config_.learning_rate = lr; }
    [[nodiscard]] const ParamSet& first_moment() const noexcept { return first_; }
    [[nodiscard]] const ParamSet& second_moment() const noexcept { return second_; }

    /// Restores optimizer state from a checkpoint.
    void restore(ParamSet first, ParamSet second, std::uint64_t steps) {
        first.require_same_structure(first_, "adam restore");
        second.require_same_structure(second_, "adam restore");
        first_ = std::move(first);
        second_ = std::move(second);
        steps_ = steps;
    }

private:
    void update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double c1, double c2, double lr) const {
        auto pv = p.values();
        auto gv = g.values();
        auto mv = m.values();
        auto vv = v.values();
        const double b1 = config_.beta1, b2 = config_.beta2;
        for (std::size_t i = 0; i < pv.size(); ++i) {
            mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
            vv[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i];
            const double mhat = mv[i] / c1;
            const double vhat = vv[i] / c2;
            pv[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
    }

    AdamConfig config_;
    ParamSet first_;
    ParamSet second_;
    std::uint64_t steps_ = 0;
};

}  // namespace dplac::nn
