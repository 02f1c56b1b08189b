#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "dplac/diffusion/denoiser.hpp"
#include "dplac/diffusion/schedule.hpp"
#include "dplac/nn/adam.hpp"
#include "dplac/nn/serialize.hpp"

namespace dplac::diffusion {

/// a_t = sqrt(alpha_bar_t) a0 + sqrt(1 - alpha_bar_t) eps.
inline RowMatrix forward_noise(const RowMatrix& a0, int t, const RowMatrix& eps, const NoiseSchedule& s) {
    if (t < 1 || t > s.steps) throw Error("diffusion step " + std::to_string(t) + " outside 1..T");
    if (a0.rows() != eps.rows() || a0.cols() != eps.cols()) throw ShapeError("noise shape differs from the action");
    return s.signal(t) * a0 + s.noise(t) * eps;
}

/// One transition of the single-step chain: a_t = sqrt(1 - beta_t) a_{t-1} + sqrt(beta_t) eps.
inline RowMatrix forward_step(const RowMatrix& prev, int t, const RowMatrix& eps, const NoiseSchedule& s) {
    const double b = s.beta.at(static_cast<std::size_t>(t));
    return std::sqrt(1.0 - b) * prev + std::sqrt(b) * eps;
}

struct NoiseDraw {
    std::vector<int> ts;
    RowMatrix eps;
    RowMatrix noisy;
};

/// Per-sample step uniform in 1..T and standard-normal noise, drawn row by row.
inline NoiseDraw draw_noise(const RowMatrix& a0, const NoiseSchedule& s, Rng& rng) {
    NoiseDraw d;
    d.eps.resize(a0.rows(), a0.cols());
    d.noisy.resize(a0.rows(), a0.cols());
    for (Eigen::Index r = 0; r < a0.rows(); ++r) {
        const auto t = static_cast<int>(rng.uniform_int(1, s.steps));
        d.ts.push_back(t);
        for (Eigen::Index c = 0; c < a0.cols(); ++c) d.eps(r, c) = rng.normal();
        d.noisy.row(r) = s.signal(t) * a0.row(r) + s.noise(t) * d.eps.row(r);
    }
    return d;
}

/// Mean over the batch of ||eps - eps_hat||^2 for any predictor
/// `predict(noisy, ts, cond, eps) -> eps_hat`. The true noise is passed so
/// that oracle stubs can be expressed.
template <class Predict>
double diffusion_loss_with(const RowMatrix& cond, const RowMatrix& a0, const NoiseSchedule& s, Rng& rng,
                           Predict&& predict) {
    if (a0.rows() == 0) throw Error("diffusion loss needs a non-empty batch");
    const NoiseDraw d = draw_noise(a0, s, rng);
    const RowMatrix eps_hat = predict(d.noisy, d.ts, cond, d.eps);
    return (d.eps - eps_hat).squaredNorm() / static_cast<double>(a0.rows());
}

/// Denoiser loss with gradients accumulated into `grads` when given.
inline double diffusion_loss(const Denoiser& net, const nn::ParamSet& params, const RowMatrix& cond,
                             const RowMatrix& a0, const NoiseSchedule& s, Rng& rng, nn::ParamSet* grads = nullptr) {
    if (a0.rows() == 0) throw Error("diffusion loss needs a non-empty batch");
    const NoiseDraw d = draw_noise(a0, s, rng);
    Denoiser::Tape tape;
    const RowMatrix eps_hat = net.forward(params, d.noisy, d.ts, cond, grads ? &tape : nullptr);
    const RowMatrix diff = eps_hat - d.eps;
    const double n = static_cast<double>(a0.rows());
    if (grads) net.backward(params, tape, (2.0 / n) * diff, *grads);
    return diff.squaredNorm() / n;
}

struct SamplerOptions {
    bool strided = true;
    bool stochastic = true;  // false forces z = 0 at every step
    bool clamp = true;
};

/// Reverse chain over rows; row r draws its noise from streams[r], so a row's
/// sample does not depend on the rest of the batch. `predict(a_t, t)`
/// returns eps_hat for every row at step t.
template <class Predict>
RowMatrix reverse_chain(int rows, int dim, const NoiseSchedule& s, std::vector<Rng>& streams, Predict&& predict,
                        const SamplerOptions& opt = {}) {
    if (static_cast<int>(streams.size()) != rows) throw ShapeError("one noise stream per sampled row required");
    RowMatrix a(rows, dim);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < dim; ++c) a(r, c) = streams[static_cast<std::size_t>(r)].normal();
    int t = s.steps;
    while (t > 0) {
        const int prev = s.previous(t, opt.strided);
        // effective beta over the skipped span; equals beta_t when prev = t - 1
        const double beta = 1.0 - s.alpha_bar[static_cast<std::size_t>(t)] / s.alpha_bar[static_cast<std::size_t>(prev)];
        const RowMatrix eps_hat = predict(a, t);
        a = (a - (beta / s.noise(t)) * eps_hat) / std::sqrt(1.0 - beta);
        if (prev > 0 && opt.stochastic) {
            const double sigma = std::sqrt(beta);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < dim; ++c) a(r, c) += sigma * streams[static_cast<std::size_t>(r)].normal();
        }
        t = prev;
    }
    if (opt.clamp) a = a.cwiseMax(-1.0).cwiseMin(1.0);
    return a;
}

/// Reverse sampling with the denoiser; condition and time contributions of
/// the first layer are computed once per call.
inline RowMatrix sample_rows(const Denoiser& net, const nn::ParamSet& params, const RowMatrix& cond,
                             const NoiseSchedule& s, std::vector<Rng>& streams, const SamplerOptions& opt = {}) {
    const RowMatrix cpart = net.condition_part(params, cond);
    return reverse_chain(static_cast<int>(cond.rows()), net.config().action_dim, s, streams,
                         [&](const RowMatrix& a, int t) { return net.predict_cached(params, a, cpart, net.time_part(params, t)); },
                         opt);
}

struct DiffusionConfig {
    ScheduleKind schedule = ScheduleKind::linear;
    int steps = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    int inference_steps = 50;
    int batch = 32;
    double learning_rate = 1e-4;
    int horizon = 4;     // decisions per action sequence
    int candidates = 5;  // K
    DenoiserConfig net;

    void validate() const {
        if (batch < 1 || horizon < 1 || candidates < 1) throw ConfigError("batch, horizon and candidates must be >= 1");
        if (!(learning_rate > 0)) throw ConfigError("diffusion learning rate must be positive");
        net.validate();
    }

    [[nodiscard]] NoiseSchedule make_schedule() const {
        return build_schedule(schedule, steps, beta_min, beta_max, inference_steps);
    }
};

/// Stream for candidate j of a request seeded with `seed`; candidate 0 is
/// the plain single-sample stream.
inline Rng candidate_stream(std::uint64_t seed, int j) { return Rng(seed).split(static_cast<std::uint64_t>(j)); }

/// Trained denoiser together with its schedule and frozen condition statistics.
class DiffusionPrior {
public:
    DiffusionPrior(DiffusionConfig cfg, Eigen::VectorXd cond_mean, Eigen::VectorXd cond_std)
        : cfg_(cfg), schedule_(cfg.make_schedule()), net_(cfg.net), mean_(std::move(cond_mean)), std_(std::move(cond_std)) {
        cfg_.validate();
        if (mean_.size() != cfg_.net.cond_dim || std_.size() != cfg_.net.cond_dim)
            throw ShapeError("condition statistics do not match cond_dim");
        if ((std_.array() <= 0.0).any()) throw ConfigError("condition std must be positive");
    }

    void init(Rng& rng) {
        params_ = {};
        net_.init(params_, rng);
    }

    [[nodiscard]] const DiffusionConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const NoiseSchedule& schedule() const noexcept { return schedule_; }
    [[nodiscard]] const Denoiser& net() const noexcept { return net_; }
    [[nodiscard]] const nn::ParamSet& params() const noexcept { return params_; }
    [[nodiscard]] nn::ParamSet& params() noexcept { return params_; }
    [[nodiscard]] const Eigen::VectorXd& cond_mean() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::VectorXd& cond_std() const noexcept { return std_; }

    [[nodiscard]] RowMatrix normalize(const RowMatrix& raw) const {
        if (raw.cols() != mean_.size()) throw ShapeError("condition width does not match the prior");
        RowMatrix out = raw;
        out.rowwise() -= mean_.transpose();
        out.array().rowwise() /= std_.transpose().array();
        return out;
    }

    /// One optimizer step on a batch of raw conditions and clean sequences.
    double train_step(nn::Adam& opt, const RowMatrix& cond_raw, const RowMatrix& a0, Rng& rng) {
        nn::ParamSet grads = params_.zeros_like();
        const double loss = diffusion_loss(net_, params_, normalize(cond_raw), a0, schedule_, rng, &grads);
        if (!std::isfinite(loss)) throw NumericError("diffusion loss is not finite");
        opt.step(params_, grads);
        return loss;
    }

    /// `k` candidates for each raw condition row; rows are grouped per
    /// condition (row c * k + j is candidate j of condition c).
    [[nodiscard]] RowMatrix candidates(const RowMatrix& cond_raw, int k, std::vector<Rng>& streams,
                                       const SamplerOptions& opt = {}) const {
        if (k < 1) throw ConfigError("candidate count must be >= 1");
        const RowMatrix norm = normalize(cond_raw);
        RowMatrix rep(norm.rows() * k, norm.cols());
        for (Eigen::Index c = 0; c < norm.rows(); ++c)
            for (int j = 0; j < k; ++j) rep.row(c * k + j) = norm.row(c);
        return sample_rows(net_, params_, rep, schedule_, streams, opt);
    }

    /// One action sequence for a single raw condition row.
    [[nodiscard]] Eigen::VectorXd sample(const RowMatrix& cond_raw, std::uint64_t seed,
                                         const SamplerOptions& opt = {}) const {
        if (cond_raw.rows() != 1) throw ShapeError("sample takes exactly one condition row");
        std::vector<Rng> streams{candidate_stream(seed, 0)};
        return sample_rows(net_, params_, normalize(cond_raw), schedule_, streams, opt).row(0).transpose();
    }

    /// K candidates [K, d] for one raw condition row, each on its own stream.
    [[nodiscard]] RowMatrix generate(const RowMatrix& cond_raw, int k, std::uint64_t seed,
                                     const SamplerOptions& opt = {}) const {
        if (cond_raw.rows() != 1) throw ShapeError("generate takes exactly one condition row");
        if (k < 1) throw ConfigError("candidate count must be >= 1");
        std::vector<Rng> streams;
        for (int j = 0; j < k; ++j) streams.push_back(candidate_stream(seed, j));
        return candidates(cond_raw, k, streams, opt);
    }

    void save(const std::filesystem::path& path) const {
        nn::BinaryWriter w;
        write(w);
        w.save(path);
    }

    static DiffusionPrior load(const std::filesystem::path& path) {
        auto r = nn::BinaryReader::open(path);
        DiffusionPrior prior = read(r);
        if (!r.at_end()) throw FormatError("trailing bytes in diffusion checkpoint");
        return prior;
    }

    void write(nn::BinaryWriter& w) const {
        w.bytes(kMagic.data(), kMagic.size());
        w.u32(1);
        w.u32(cfg_.schedule == ScheduleKind::linear ? 0 : 1);
        for (int v : {cfg_.steps, cfg_.inference_steps, cfg_.batch, cfg_.horizon, cfg_.candidates, cfg_.net.cond_dim,
                      cfg_.net.action_dim, cfg_.net.cond_width, cfg_.net.width, cfg_.net.time_raw, cfg_.net.time_dim})
            w.u32(static_cast<std::uint32_t>(v));
        w.f64(cfg_.beta_min);
        w.f64(cfg_.beta_max);
        w.f64(cfg_.learning_rate);
        w.f64s(mean_.data(), static_cast<std::size_t>(mean_.size()));
        w.f64s(std_.data(), static_cast<std::size_t>(std_.size()));
        nn::write_params(w, params_);
    }

    static DiffusionPrior read(nn::BinaryReader& r) {
        r.expect_magic(kMagic);
        if (r.u32() != 1) throw FormatError("unsupported diffusion checkpoint version");
        DiffusionConfig cfg;
        cfg.schedule = r.u32() == 0 ? ScheduleKind::linear : ScheduleKind::cosine;
        int* fields[] = {&cfg.steps, &cfg.inference_steps, &cfg.batch, &cfg.horizon, &cfg.candidates,
                         &cfg.net.cond_dim, &cfg.net.action_dim, &cfg.net.cond_width, &cfg.net.width,
                         &cfg.net.time_raw, &cfg.net.time_dim};
        for (int* f : fields) *f = static_cast<int>(r.u32());
        cfg.beta_min = r.f64();
        cfg.beta_max = r.f64();
        cfg.learning_rate = r.f64();
        Eigen::VectorXd mean(cfg.net.cond_dim), sd(cfg.net.cond_dim);
        r.f64s(mean.data(), static_cast<std::size_t>(mean.size()));
        r.f64s(sd.data(), static_cast<std::size_t>(sd.size()));
        DiffusionPrior prior(cfg, std::move(mean), std::move(sd));
        prior.params_ = nn::read_params(r);
        return prior;
    }

private:
    static constexpr std::string_view kMagic = "DPLACDIF";

    DiffusionConfig cfg_;
    NoiseSchedule schedule_;
    Denoiser net_;
    nn::ParamSet params_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
};

}  // namespace dplac::diffusion
