#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>

#include "dplac/lac/critics.hpp"
#include "dplac/lac/replay.hpp"
#include "dplac/nn/adam.hpp"
#include "dplac/nn/serialize.hpp"

namespace dplac::lac {

/// How diffusion candidates are scored before execution.
enum class SelectionRule { q, q_minus_lambda_l };

inline SelectionRule parse_selection_rule(std::string_view s) {
    if (s == "q") return SelectionRule::q;
    if (s == "q_minus_lambda_l") return SelectionRule::q_minus_lambda_l;
    throw ConfigError("unknown selection rule '" + std::string(s) + "' (expected q|q_minus_lambda_l)");
}

inline std::string_view to_string(SelectionRule r) { return r == SelectionRule::q ? "q" : "q_minus_lambda_l"; }

struct LacConfig {
    int state_dim = 1;
    int action_dim = 3;
    int hidden = 128;
    int batch = 64;
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double gamma = 0.97;
    double tau = 0.005;
    double lambda_lr = 3e-4;
    double beta_lr = 3e-4;
    double alpha = 0.1;
    double alpha_min = 0.01;
    double alpha_max = 1.0;
    double initial_lambda = 1.0;
    double initial_beta = 0.1;
    std::optional<double> entropy_target;  // defaults to -action_dim
    double log_dual_bound = 20.0;          // |log lambda|, |log beta| cap
    int warmup = 1000;                     // transitions before the first update
    std::size_t buffer_capacity = 100000;
    bool twin_q = false;
    LyapunovForm form = LyapunovForm::softplus;
    SelectionRule selection = SelectionRule::q;

    [[nodiscard]] double target_entropy() const { return entropy_target.value_or(-static_cast<double>(action_dim)); }

    void validate() const {
        if (state_dim < 1 || action_dim < 1 || hidden < 1 || batch < 1) throw ConfigError("LAC dimensions must be positive");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
        if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("soft update rate must lie in (0, 1]");
        if (!(alpha_min > 0.0 && alpha_min <= alpha && alpha <= alpha_max))
            throw ConfigError("stability coefficient must satisfy 0 < alpha_min <= alpha <= alpha_max");
        if (!(initial_lambda > 0.0 && initial_beta > 0.0)) throw ConfigError("initial duals must be positive");
        if (!(actor_lr > 0.0 && critic_lr > 0.0 && lambda_lr >= 0.0 && beta_lr >= 0.0))
            throw ConfigError("learning rates must be positive");
        if (warmup < 0) throw ConfigError("warmup must be >= 0");
    }
};

/// Lagrange multipliers kept in log space, plus the stability coefficient.
struct DualVars {
    double log_lambda = 0.0;
    double log_beta = std::log(0.1);
    double alpha = 0.1;

    [[nodiscard]] double lambda() const { return std::exp(log_lambda); }
    [[nodiscard]] double beta() const { return std::exp(log_beta); }
};

/// Ascent on both dual objectives: lambda grows while the mean Lyapunov
/// condition is violated, beta shrinks while entropy exceeds its target.
inline void dual_update(DualVars& d, double mean_delta_l, double mean_entropy, double entropy_target, double lambda_lr,
                        double beta_lr, double log_bound = std::numeric_limits<double>::infinity()) {
    d.log_lambda = std::clamp(d.log_lambda + lambda_lr * d.lambda() * mean_delta_l, -log_bound, log_bound);
    d.log_beta = std::clamp(d.log_beta + beta_lr * d.beta() * (entropy_target - mean_entropy), -log_bound, log_bound);
}

/// Lyapunov values at (s, a) and the action gradient of sum_i w_i L(s_i, a_i).
struct LyapunovEval {
    Eigen::VectorXd value;
    RowMatrix d_action;
};
using LyapunovFn = std::function<LyapunovEval(const RowMatrix& states, const RowMatrix& actions, const Eigen::VectorXd& w)>;

struct ActorStep {
    double objective = 0.0;
    double mean_delta_l = 0.0;
    double entropy = 0.0;
};

/// Gradient of E[lambda dL + beta (log pi + 1)] through reparameterized actions.
/// Returns the objective without applying it.
inline ActorStep actor_gradient(const GaussianPolicy& policy, const nn::ParamSet& params, const RowMatrix& states,
                                const RowMatrix& actions, const Eigen::VectorXd& rewards, const DualVars& duals,
                                const LyapunovFn& lyapunov, Rng& rng, nn::ParamSet& grads) {
    const Eigen::Index b = states.rows();
    if (b == 0) throw Error("actor update needs a non-empty batch");
    const auto n = static_cast<double>(b);
    const PolicySample cur = policy.sample(params, states, rng, true);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(b, duals.lambda() / n);
    const LyapunovEval fresh = lyapunov(states, cur.action, w);
    const LyapunovEval old = lyapunov(states, actions, Eigen::VectorXd::Zero(b));
    const Eigen::VectorXd dl = delta_l(fresh.value, old.value, rewards, duals.alpha);
    ActorStep out;
    out.mean_delta_l = dl.mean();
    out.entropy = -cur.log_prob.mean();
    out.objective = (duals.lambda() * dl.array() + duals.beta() * (cur.log_prob.array() + 1.0)).mean();
    policy.backward(params, cur, fresh.d_action, Eigen::VectorXd::Constant(b, duals.beta() / n), grads);
    return out;
}

struct Diagnostics {
    long iteration = 0;
    bool warming_up = true;
    double q_loss = 0.0;
    double l_loss = 0.0;
    double actor_loss = 0.0;
    double delta_l = 0.0;
    double lambda = 0.0;
    double beta = 0.0;
    double alpha = 0.0;
    double entropy = 0.0;

    [[nodiscard]] bool all_finite() const {
        for (double v : {q_loss, l_loss, actor_loss, delta_l, lambda, beta, alpha, entropy})
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct Selection {
    std::size_t index = 0;
    Eigen::VectorXd scores;
};

/// Index of the highest score; the lowest index wins ties.
inline std::size_t argmax_first(const Eigen::VectorXd& scores) {
    if (scores.size() == 0) throw Error("cannot select from an empty candidate set");
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.size(); ++k)
        if (scores[k] > scores[best]) best = k;
    return static_cast<std::size_t>(best);
}

/// Actor, critics, their targets, optimizers and duals.
class LacAgent {
public:
    explicit LacAgent(LacConfig cfg, std::uint64_t seed)
        : cfg_(cfg),
          policy_(cfg.state_dim, cfg.action_dim, cfg.hidden),
          q_("q", cfg.state_dim, cfg.action_dim, cfg.hidden),
          q2_("q2", cfg.state_dim, cfg.action_dim, cfg.hidden),
          lyap_("lyap", cfg.state_dim, cfg.action_dim, cfg.hidden),
          rng_(seed) {
        cfg_.validate();
        policy_.init(actor_, rng_);
        q_.init(q_params_, rng_);
        lyap_.init(l_params_, rng_);
        if (cfg_.twin_q) q2_.init(q2_params_, rng_);
        q_target_ = q_params_;
        q2_target_ = q2_params_;
        l_target_ = l_params_;
        actor_opt_ = nn::Adam(actor_, {.learning_rate = cfg_.actor_lr});
        q_opt_ = nn::Adam(q_params_, {.learning_rate = cfg_.critic_lr});
        l_opt_ = nn::Adam(l_params_, {.learning_rate = cfg_.critic_lr});
        if (cfg_.twin_q) q2_opt_ = nn::Adam(q2_params_, {.learning_rate = cfg_.critic_lr});
        duals_.log_lambda = std::log(cfg_.initial_lambda);
        duals_.log_beta = std::log(cfg_.initial_beta);
        duals_.alpha = cfg_.alpha;
        form_ = cfg_.form;
    }

    [[nodiscard]] const LacConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const GaussianPolicy& policy() const noexcept { return policy_; }
    [[nodiscard]] const nn::ParamSet& actor_params() const noexcept { return actor_; }
    [[nodiscard]] const nn::ParamSet& q_params() const noexcept { return q_params_; }
    [[nodiscard]] const nn::ParamSet& lyapunov_params() const noexcept { return l_params_; }
    [[nodiscard]] const nn::ParamSet& lyapunov_target_params() const noexcept { return l_target_; }
    [[nodiscard]] const DualVars& duals() const noexcept { return duals_; }
    [[nodiscard]] LyapunovForm form() const noexcept { return form_; }
    [[nodiscard]] long iterations() const noexcept { return iteration_; }
    [[nodiscard]] Rng& rng() noexcept { return rng_; }

    /// Swaps the head form, keeps the trunk and hard-copies it into the target.
    void set_form(LyapunovForm f) {
        form_ = f;
        l_target_ = l_params_;
    }

    void set_alpha(double a) {
        if (!(a >= cfg_.alpha_min && a <= cfg_.alpha_max)) throw ConfigError("alpha outside its configured bounds");
        duals_.alpha = a;
    }

    [[nodiscard]] Eigen::VectorXd q_value(const RowMatrix& s, const RowMatrix& a) const {
        Eigen::VectorXd v = q_.raw(q_params_, s, a);
        if (cfg_.twin_q) v = v.cwiseMin(q2_.raw(q2_params_, s, a));
        return v;
    }

    [[nodiscard]] Eigen::VectorXd lyapunov_value(const RowMatrix& s, const RowMatrix& a) const {
        return apply_form(form_, lyap_.raw(l_params_, s, a));
    }

    /// Stochastic policy action for each state row.
    [[nodiscard]] RowMatrix act(const RowMatrix& s, Rng& rng) const { return policy_.sample(actor_, s, rng).action; }
    [[nodiscard]] RowMatrix act_deterministic(const RowMatrix& s) const { return policy_.mean_action(actor_, s); }

    /// Scores the candidates' first actions for one state row.
    [[nodiscard]] Selection select(const Eigen::VectorXd& state, const RowMatrix& first_actions) const {
        if (first_actions.rows() == 0) throw Error("cannot select from an empty candidate set");
        const RowMatrix s = state.transpose().replicate(first_actions.rows(), 1);
        Selection out;
        out.scores = q_value(s, first_actions);
        if (cfg_.selection == SelectionRule::q_minus_lambda_l) out.scores -= duals_.lambda() * lyapunov_value(s, first_actions);
        out.index = argmax_first(out.scores);
        return out;
    }

    /// One critic, Lyapunov, actor, dual and target step; a no-op while the
    /// buffer is below max(batch, warmup).
    Diagnostics train_iteration(const ReplayBuffer& buffer) {
        Diagnostics d;
        d.lambda = duals_.lambda();
        d.beta = duals_.beta();
        d.alpha = duals_.alpha;
        d.iteration = iteration_;
        const auto need = static_cast<std::size_t>(std::max(cfg_.batch, cfg_.warmup));
        if (buffer.size() < need) return d;
        d.warming_up = false;
        const Batch b = buffer.sample(static_cast<std::size_t>(cfg_.batch), rng_);

        const PolicySample next = policy_.sample(actor_, b.next_states, rng_);
        Eigen::VectorXd q_next = q_.raw(q_target_, b.next_states, next.action);
        if (cfg_.twin_q) q_next = q_next.cwiseMin(q2_.raw(q2_target_, b.next_states, next.action));
        const Eigen::VectorXd y = q_target(b.rewards, b.done, q_next, cfg_.gamma);
        const Eigen::VectorXd l_next = apply_form(form_, lyap_.raw(l_target_, b.next_states, next.action));
        const Eigen::VectorXd l_hat = lyap_target(b.rewards, b.done, l_next, cfg_.gamma);

        d.q_loss = critic_step(q_, q_params_, q_opt_, b, y);
        if (cfg_.twin_q) d.q_loss = 0.5 * (d.q_loss + critic_step(q2_, q2_params_, q2_opt_, b, y));
        d.l_loss = lyapunov_step(b, l_hat);

        auto grads = actor_.zeros_like();
        const ActorStep a = actor_gradient(policy_, actor_, b.states, b.actions, b.rewards, duals_, lyapunov_fn(), rng_, grads);
        actor_opt_.step(actor_, grads);
        d.actor_loss = a.objective;
        d.delta_l = a.mean_delta_l;
        d.entropy = a.entropy;

        dual_update(duals_, a.mean_delta_l, a.entropy, cfg_.target_entropy(), cfg_.lambda_lr, cfg_.beta_lr,
                    cfg_.log_dual_bound);
        nn::soft_update(q_target_, q_params_, cfg_.tau);
        if (cfg_.twin_q) nn::soft_update(q2_target_, q2_params_, cfg_.tau);
        nn::soft_update(l_target_, l_params_, cfg_.tau);
        d.lambda = duals_.lambda();
        d.beta = duals_.beta();
        if (!d.all_finite() || !actor_.all_finite() || !q_params_.all_finite() || !l_params_.all_finite())
            throw NumericError("LAC update produced non-finite values at iteration " + std::to_string(iteration_));
        ++iteration_;
        return d;
    }

    /// Current Lyapunov critic as a differentiable function of the action.
    [[nodiscard]] LyapunovFn lyapunov_fn() const {
        return [this](const RowMatrix& s, const RowMatrix& a, const Eigen::VectorXd& w) {
            StateActionNet::Pass pass;
            const Eigen::VectorXd z = lyap_.raw(l_params_, s, a, &pass);
            LyapunovEval e{apply_form(form_, z), RowMatrix::Zero(a.rows(), a.cols())};
            if (w.cwiseAbs().maxCoeff() > 0.0) {
                auto scratch = l_params_.zeros_like();
                e.d_action = lyap_.backward(l_params_, pass, w.cwiseProduct(form_derivative(form_, z)), scratch);
            }
            return e;
        };
    }

    void save(const std::filesystem::path& path, const ReplayBuffer* buffer = nullptr) const {
        nn::BinaryWriter w;
        w.bytes(kMagic.data(), kMagic.size());
        w.u32(1);
        w.str(to_string(form_));
        w.f64(duals_.log_lambda);
        w.f64(duals_.log_beta);
        w.f64(duals_.alpha);
        w.u64(static_cast<std::uint64_t>(iteration_));
        w.u64(buffer ? buffer->cursor() : 0);
        w.u64(buffer ? buffer->size() : 0);
        for (const auto* p : {&actor_, &q_params_, &q_target_, &q2_params_, &q2_target_, &l_params_, &l_target_})
            nn::write_params(w, *p);
        w.save(path);
    }

    struct CheckpointInfo {
        std::uint64_t buffer_cursor = 0;
        std::uint64_t buffer_size = 0;
    };

    /// Restores parameters, duals and form; optimizer moments restart.
    CheckpointInfo load(const std::filesystem::path& path) {
        auto r = nn::BinaryReader::open(path);
        r.expect_magic(kMagic);
        if (r.u32() != 1) throw FormatError("unsupported LAC checkpoint version");
        const LyapunovForm f = parse_lyapunov_form(r.str());
        DualVars dv;
        dv.log_lambda = r.f64();
        dv.log_beta = r.f64();
        dv.alpha = r.f64();
        const auto it = static_cast<long>(r.u64());
        CheckpointInfo info{r.u64(), r.u64()};
        std::array<nn::ParamSet, 7> sets;
        for (auto& s : sets) s = nn::read_params(r);
        if (!r.at_end()) throw FormatError("trailing bytes in LAC checkpoint");
        sets[0].require_same_structure(actor_, "checkpoint actor");
        sets[1].require_same_structure(q_params_, "checkpoint critic");
        sets[5].require_same_structure(l_params_, "checkpoint Lyapunov critic");
        actor_ = std::move(sets[0]);
        q_params_ = std::move(sets[1]);
        q_target_ = std::move(sets[2]);
        q2_params_ = std::move(sets[3]);
        q2_target_ = std::move(sets[4]);
        l_params_ = std::move(sets[5]);
        l_target_ = std::move(sets[6]);
        form_ = f;
        duals_ = dv;
        iteration_ = it;
        actor_opt_ = nn::Adam(actor_, {.learning_rate = cfg_.actor_lr});
        q_opt_ = nn::Adam(q_params_, {.learning_rate = cfg_.critic_lr});
        l_opt_ = nn::Adam(l_params_, {.learning_rate = cfg_.critic_lr});
        if (cfg_.twin_q) q2_opt_ = nn::Adam(q2_params_, {.learning_rate = cfg_.critic_lr});
        return info;
    }

    /// Complete training state (optimizer moments and random stream
    /// included), so a resumed run continues exactly.
    void write_state(nn::BinaryWriter& w) const {
        w.str(to_string(form_));
        w.f64(duals_.log_lambda);
        w.f64(duals_.log_beta);
        w.f64(duals_.alpha);
        w.u64(static_cast<std::uint64_t>(iteration_));
        w.str(rng_.state());
        for (const auto* p : {&actor_, &q_params_, &q_target_, &q2_params_, &q2_target_, &l_params_, &l_target_})
            nn::write_params(w, *p);
        for (const auto* o : {&actor_opt_, &q_opt_, &q2_opt_, &l_opt_}) nn::write_adam(w, *o);
    }

    void read_state(nn::BinaryReader& r) {
        const LyapunovForm f = parse_lyapunov_form(r.str());
        DualVars dv;
        dv.log_lambda = r.f64();
        dv.log_beta = r.f64();
        dv.alpha = r.f64();
        const auto it = static_cast<long>(r.u64());
        Rng rng = rng_;
        rng.restore(r.str());
        std::array<nn::ParamSet*, 7> dst{&actor_, &q_params_, &q_target_, &q2_params_, &q2_target_, &l_params_, &l_target_};
        std::array<nn::ParamSet, 7> sets;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            sets[i] = nn::read_params(r);
            sets[i].require_same_structure(*dst[i], "agent snapshot");
        }
        std::array<nn::Adam, 4> opts{actor_opt_, q_opt_, q2_opt_, l_opt_};
        for (auto& o : opts) nn::read_adam(r, o);
        for (std::size_t i = 0; i < sets.size(); ++i) *dst[i] = std::move(sets[i]);
        actor_opt_ = std::move(opts[0]);
        q_opt_ = std::move(opts[1]);
        q2_opt_ = std::move(opts[2]);
        l_opt_ = std::move(opts[3]);
        form_ = f;
        duals_ = dv;
        iteration_ = it;
        rng_ = std::move(rng);
    }

private:
    static constexpr std::string_view kMagic = "DPLACLAC";

    static double critic_step(const StateActionNet& net, nn::ParamSet& params, nn::Adam& opt, const Batch& b,
                              const Eigen::VectorXd& y) {
        StateActionNet::Pass pass;
        const auto m = mse(net.raw(params, b.states, b.actions, &pass), y);
        auto grads = params.zeros_like();
        net.backward(params, pass, m.grad, grads);
        opt.step(params, grads);
        return m.loss;
    }

    double lyapunov_step(const Batch& b, const Eigen::VectorXd& l_hat) {
        StateActionNet::Pass pass;
        const Eigen::VectorXd z = lyap_.raw(l_params_, b.states, b.actions, &pass);
        const auto m = mse(apply_form(form_, z), l_hat);
        auto grads = l_params_.zeros_like();
        lyap_.backward(l_params_, pass, m.grad.cwiseProduct(form_derivative(form_, z)), grads);
        l_opt_.step(l_params_, grads);
        return m.loss;
    }

    LacConfig cfg_;
    GaussianPolicy policy_;
    StateActionNet q_, q2_, lyap_;
    Rng rng_;
    nn::ParamSet actor_, q_params_, q_target_, q2_params_, q2_target_, l_params_, l_target_;
    nn::Adam actor_opt_, q_opt_, q2_opt_, l_opt_;
    DualVars duals_;
    LyapunovForm form_ = LyapunovForm::softplus;
    long iteration_ = 0;
};

class DiagnosticsCsv {
public:
    explicit DiagnosticsCsv(const std::filesystem::path& path) : os_(path) {
        if (!os_) throw Error("cannot open '" + path.string() + "' for writing");
        os_ << "iteration,q_loss,l_loss,actor_loss,delta_l,lambda,beta,alpha,entropy\n";
        os_.precision(8);
    }

    void write(const Diagnostics& d) {
        if (d.warming_up) return;
        os_ << d.iteration << ',' << d.q_loss << ',' << d.l_loss << ',' << d.actor_loss << ',' << d.delta_l << ','
            << d.lambda << ',' << d.beta << ',' << d.alpha << ',' << d.entropy << '\n';
    }

private:
    std::ofstream os_;
};

}  // namespace dplac::lac
