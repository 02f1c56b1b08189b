#pragma once

#include <cmath>
#include <numbers>

#include "dplac/nn/mlp.hpp"

namespace dplac::lac {

using nn::RowMatrix;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// One reparameterized draw a = tanh(mean + exp(log_std) * xi) per row.
struct PolicySample {
    RowMatrix action;   // [B, A]
    RowMatrix mean;     // [B, A]
    RowMatrix log_std;  // clamped, [B, A]
    RowMatrix xi;       // standard normal draw, [B, A]
    Eigen::VectorXd log_prob;
    nn::MlpTape tape;
    RowMatrix raw_log_std;  // before clamping; gradient is cut where it was clamped
};

/// log(1 - tanh(u)^2) without cancellation.
inline double log_one_minus_tanh_sq(double u) {
    return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

/// Tanh-squashed diagonal Gaussian. The network maps a state to the mean and
/// log-std of every action dimension.
class GaussianPolicy {
public:
    GaussianPolicy(int state_dim, int action_dim, int hidden)
        : state_dim_(state_dim), action_dim_(action_dim) {
        if (state_dim < 1 || action_dim < 1 || hidden < 1) throw ConfigError("policy dimensions must be positive");
        const auto h = static_cast<std::size_t>(hidden);
        net_ = nn::Mlp::make("actor", {static_cast<std::size_t>(state_dim), h, h, 2 * static_cast<std::size_t>(action_dim)},
                             nn::Activation::relu);
    }

    [[nodiscard]] int state_dim() const noexcept { return state_dim_; }
    [[nodiscard]] int action_dim() const noexcept { return action_dim_; }
    [[nodiscard]] const nn::Mlp& net() const noexcept { return net_; }

    void init(nn::ParamSet& params, Rng& rng) const { net_.init(params, rng); }

    /// Draws one action per state row; pass `record` to keep the tape for backward().
    PolicySample sample(const nn::ParamSet& params, const RowMatrix& states, Rng& rng, bool record = false) const {
        if (states.cols() != state_dim_) throw ShapeError("policy input has the wrong state dimension");
        PolicySample s;
        const RowMatrix out = nn::forward(params, net_, states, record ? &s.tape : nullptr);
        const Eigen::Index b = states.rows();
        s.mean = out.leftCols(action_dim_);
        s.raw_log_std = out.rightCols(action_dim_);
        s.log_std = s.raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
        s.xi.resize(b, action_dim_);
        for (Eigen::Index i = 0; i < s.xi.size(); ++i) s.xi.data()[i] = rng.normal();
        s.action.resize(b, action_dim_);
        s.log_prob = Eigen::VectorXd::Zero(b);
        const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
        for (Eigen::Index r = 0; r < b; ++r) {
            for (Eigen::Index c = 0; c < action_dim_; ++c) {
                const double xi = s.xi(r, c);
                const double u = s.mean(r, c) + std::exp(s.log_std(r, c)) * xi;
                s.action(r, c) = std::tanh(u);
                s.log_prob[r] += -0.5 * xi * xi - s.log_std(r, c) - half_log_2pi - log_one_minus_tanh_sq(u);
            }
        }
        return s;
    }

    /// Deterministic action tanh(mean).
    [[nodiscard]] RowMatrix mean_action(const nn::ParamSet& params, const RowMatrix& states) const {
        if (states.cols() != state_dim_) throw ShapeError("policy input has the wrong state dimension");
        return nn::forward(params, net_, states).leftCols(action_dim_).array().tanh().matrix();
    }

    /// Accumulates parameter gradients of an objective J given dJ/daction
    /// [B, A] and dJ/dlog_prob [B] on a recorded sample (xi held fixed).
    void backward(const nn::ParamSet& params, const PolicySample& s, const RowMatrix& d_action,
                  const Eigen::VectorXd& d_log_prob, nn::ParamSet& grads) const {
        if (s.tape.empty()) throw Error("policy sample was drawn without a tape");
        const Eigen::Index b = s.action.rows();
        RowMatrix d_out(b, 2 * action_dim_);
        for (Eigen::Index r = 0; r < b; ++r) {
            for (Eigen::Index c = 0; c < action_dim_; ++c) {
                const double a = s.action(r, c);
                const double sigma_xi = std::exp(s.log_std(r, c)) * s.xi(r, c);
                const double da_du = 1.0 - a * a;
                // log_prob depends on u through the squashing term: d/du = 2 tanh(u)
                const double d_u = d_action(r, c) * da_du + d_log_prob[r] * 2.0 * a;
                d_out(r, c) = d_u;
                const double d_ls = d_u * sigma_xi - d_log_prob[r];
                const double raw = s.raw_log_std(r, c);
                d_out(r, action_dim_ + c) = (raw < kLogStdMin || raw > kLogStdMax) ? 0.0 : d_ls;
            }
        }
        nn::backward(params, net_, s.tape, d_out, grads);
    }

private:
    int state_dim_;
    int action_dim_;
    nn::Mlp net_;
};

}  // namespace dplac::lac
