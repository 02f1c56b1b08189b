#pragma once

#include "dplac/lac/forms.hpp"
#include "dplac/lac/policy.hpp"

namespace dplac::lac {

inline RowMatrix join(const RowMatrix& states, const RowMatrix& actions) {
    if (states.rows() != actions.rows()) throw ShapeError("state and action batches differ in size");
    RowMatrix x(states.rows(), states.cols() + actions.cols());
    x << states, actions;
    return x;
}

/// Scalar-output network over (state, action). The Q critic uses the raw
/// output; the Lyapunov critic passes it through its head form.
class StateActionNet {
public:
    struct Pass {
        nn::MlpTape tape;
        Eigen::VectorXd raw;  // trunk output z
    };

    StateActionNet(std::string prefix, int state_dim, int action_dim, int hidden)
        : state_dim_(state_dim), action_dim_(action_dim) {
        if (state_dim < 1 || action_dim < 1 || hidden < 1) throw ConfigError("critic dimensions must be positive");
        const auto h = static_cast<std::size_t>(hidden);
        net_ = nn::Mlp::make(prefix, {static_cast<std::size_t>(state_dim + action_dim), h, h, 1}, nn::Activation::relu);
    }

    [[nodiscard]] int state_dim() const noexcept { return state_dim_; }
    [[nodiscard]] int action_dim() const noexcept { return action_dim_; }
    [[nodiscard]] const nn::Mlp& net() const noexcept { return net_; }

    void init(nn::ParamSet& params, Rng& rng) const { net_.init(params, rng); }

    [[nodiscard]] Eigen::VectorXd raw(const nn::ParamSet& p, const RowMatrix& s, const RowMatrix& a,
                                      Pass* pass = nullptr) const {
        check(s, a);
        RowMatrix out = nn::forward(p, net_, join(s, a), pass ? &pass->tape : nullptr);
        Eigen::VectorXd z = out.col(0);
        if (pass) pass->raw = z;
        return z;
    }

    /// Accumulates parameter gradients for dJ/dz and returns dJ/daction.
    RowMatrix backward(const nn::ParamSet& p, const Pass& pass, const Eigen::VectorXd& dz, nn::ParamSet& grads) const {
        const RowMatrix dx = nn::backward(p, net_, pass.tape, RowMatrix(dz), grads);
        return dx.rightCols(action_dim_);
    }

private:
    void check(const RowMatrix& s, const RowMatrix& a) const {
        if (s.cols() != state_dim_ || a.cols() != action_dim_) throw ShapeError("critic input has the wrong width");
    }

    int state_dim_;
    int action_dim_;
    nn::Mlp net_;
};

inline Eigen::VectorXd apply_form(LyapunovForm f, const Eigen::VectorXd& z) {
    return z.unaryExpr([f](double v) { return apply_form(f, v); });
}

inline Eigen::VectorXd form_derivative(LyapunovForm f, const Eigen::VectorXd& z) {
    return z.unaryExpr([f](double v) { return form_derivative(f, v); });
}

/// y = r + gamma (1 - d) Q_target(s', a').
inline Eigen::VectorXd q_target(const Eigen::VectorXd& r, const Eigen::VectorXd& done, const Eigen::VectorXd& q_next,
                                double gamma) {
    return r.array() + gamma * (1.0 - done.array()) * q_next.array();
}

/// L_hat = -r + gamma (1 - d) L_target(s', pi(s')).
inline Eigen::VectorXd lyap_target(const Eigen::VectorXd& r, const Eigen::VectorXd& done,
                                   const Eigen::VectorXd& l_next, double gamma) {
    return -r.array() + gamma * (1.0 - done.array()) * l_next.array();
}

/// delta L = L(s, pi(s)) - L(s, a) - alpha r.
inline Eigen::VectorXd delta_l(const Eigen::VectorXd& l_new, const Eigen::VectorXd& l_old, const Eigen::VectorXd& r,
                               double alpha) {
    return l_new - l_old - alpha * r;
}

/// Mean squared error and its gradient with respect to the predictions.
struct MseResult {
    double loss = 0.0;
    Eigen::VectorXd grad;
};

inline MseResult mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
    if (pred.size() == 0) throw Error("loss needs a non-empty batch");
    if (pred.size() != target.size()) throw ShapeError("prediction and target sizes differ");
    const Eigen::VectorXd diff = pred - target;
    const auto n = static_cast<double>(pred.size());
    return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

}  // namespace dplac::lac
