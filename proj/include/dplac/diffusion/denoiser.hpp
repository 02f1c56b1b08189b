#pragma once

#include <cmath>
#include <vector>

#include "dplac/nn/mlp.hpp"

namespace dplac::diffusion {

using nn::RowMatrix;

struct DenoiserConfig {
    int cond_dim = 1;
    int action_dim = 1;
    int cond_width = 256;  // condition encoder, two layers
    int width = 256;       // trunk outer width; inner blocks use width/2 and width/4
    int time_raw = 64;     // sinusoid features (even)
    int time_dim = 128;    // learned affine map of the sinusoids

    void validate() const {
        if (cond_dim < 1 || action_dim < 1 || cond_width < 1 || width < 4 || time_dim < 1)
            throw ConfigError("denoiser dimensions must be positive (width >= 4)");
        if (time_raw < 2 || time_raw % 2 != 0) throw ConfigError("time_raw must be an even number >= 2");
    }
};

/// Interleaved sin/cos of t at geometric frequencies from 1 down to 1e-4.
/// Row i holds the features of ts[i].
inline RowMatrix sinusoid_features(const std::vector<int>& ts, int raw_dim) {
    const int half = raw_dim / 2;
    RowMatrix out(static_cast<Eigen::Index>(ts.size()), raw_dim);
    for (std::size_t r = 0; r < ts.size(); ++r) {
        for (int i = 0; i < half; ++i) {
            const double freq = half > 1 ? std::pow(1e-4, static_cast<double>(i) / (half - 1)) : 1.0;
            const double x = ts[r] * freq;
            out(static_cast<Eigen::Index>(r), 2 * i) = std::sin(x);
            out(static_cast<Eigen::Index>(r), 2 * i + 1) = std::cos(x);
        }
    }
    return out;
}

/// Noise predictor: condition encoder and time embedding feed the first trunk
/// layer; the trunk narrows twice and widens back with additive skips. The
/// output layer starts at zero.
class Denoiser {
public:
    struct Tape {
        nn::MlpTape cond, time, in_act, in_cond, in_time, down1, down2, up1, up2, out;
        RowMatrix h0, h1;
    };

    explicit Denoiser(DenoiserConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto w = static_cast<std::size_t>(cfg_.width);
        const auto cw = static_cast<std::size_t>(cfg_.cond_width);
        const auto td = static_cast<std::size_t>(cfg_.time_dim);
        using nn::Activation;
        cond_ = nn::Mlp::make("den/cond", {static_cast<std::size_t>(cfg_.cond_dim), cw, cw}, Activation::relu,
                              Activation::relu);
        time_ = nn::Mlp::make("den/time", {static_cast<std::size_t>(cfg_.time_raw), td}, Activation::identity);
        in_act_ = nn::Mlp::make("den/in_act", {static_cast<std::size_t>(cfg_.action_dim), w}, Activation::identity);
        in_cond_ = nn::Mlp::make("den/in_cond", {cw, w}, Activation::identity);
        in_time_ = nn::Mlp::make("den/in_time", {td, w}, Activation::identity);
        down1_ = nn::Mlp::make("den/down1", {w, w / 2}, Activation::relu, Activation::relu);
        down2_ = nn::Mlp::make("den/down2", {w / 2, w / 4}, Activation::relu, Activation::relu);
        up1_ = nn::Mlp::make("den/up1", {w / 4, w / 2}, Activation::relu, Activation::relu);
        up2_ = nn::Mlp::make("den/up2", {w / 2, w}, Activation::relu, Activation::relu);
        out_ = nn::Mlp::make("den/out", {w, static_cast<std::size_t>(cfg_.action_dim)}, Activation::identity);
    }

    [[nodiscard]] const DenoiserConfig& config() const noexcept { return cfg_; }

    void init(nn::ParamSet& params, Rng& rng) const {
        for (const auto* m : blocks()) m->init(params, rng);
        out_.zero_output_layer(params);
    }

    /// Predicted noise for noisy actions `a_t` [B, d] at steps `ts` given
    /// normalized conditions [B, cond_dim].
    RowMatrix forward(const nn::ParamSet& p, const RowMatrix& a_t, const std::vector<int>& ts, const RowMatrix& cond,
                      Tape* tape = nullptr) const {
        if (a_t.cols() != cfg_.action_dim) throw ShapeError("noisy action width does not match the denoiser");
        if (cond.cols() != cfg_.cond_dim) throw ShapeError("condition width does not match the denoiser");
        if (a_t.rows() != cond.rows() || static_cast<std::size_t>(a_t.rows()) != ts.size())
            throw ShapeError("denoiser inputs disagree on batch size");
        const RowMatrix c = nn::forward(p, cond_, cond, tape ? &tape->cond : nullptr);
        const RowMatrix tau = nn::forward(p, time_, sinusoid_features(ts, cfg_.time_raw), tape ? &tape->time : nullptr);
        RowMatrix z0 = nn::forward(p, in_act_, a_t, tape ? &tape->in_act : nullptr);
        z0 += nn::forward(p, in_cond_, c, tape ? &tape->in_cond : nullptr);
        z0 += nn::forward(p, in_time_, tau, tape ? &tape->in_time : nullptr);
        return trunk(p, z0.cwiseMax(0.0), tape);
    }

    /// Accumulates parameter gradients for dLoss/dOutput `dy`.
    void backward(const nn::ParamSet& p, const Tape& tape, const RowMatrix& dy, nn::ParamSet& grads) const {
        RowMatrix g_v2 = nn::backward(p, out_, tape.out, dy, grads);
        RowMatrix g_v1 = nn::backward(p, up2_, tape.up2, g_v2, grads);
        RowMatrix g_h2 = nn::backward(p, up1_, tape.up1, g_v1, grads);
        RowMatrix g_h1 = g_v1 + nn::backward(p, down2_, tape.down2, g_h2, grads);
        RowMatrix g_h0 = g_v2 + nn::backward(p, down1_, tape.down1, g_h1, grads);
        nn::activation_backward(nn::Activation::relu, tape.h0, g_h0);
        nn::backward(p, in_act_, tape.in_act, g_h0, grads);
        const RowMatrix g_c = nn::backward(p, in_cond_, tape.in_cond, g_h0, grads);
        const RowMatrix g_tau = nn::backward(p, in_time_, tape.in_time, g_h0, grads);
        nn::backward(p, cond_, tape.cond, g_c, grads);
        nn::backward(p, time_, tape.time, g_tau, grads);
    }

    /// First-layer contribution of the conditions, reusable across steps.
    [[nodiscard]] RowMatrix condition_part(const nn::ParamSet& p, const RowMatrix& cond) const {
        if (cond.cols() != cfg_.cond_dim) throw ShapeError("condition width does not match the denoiser");
        return nn::forward(p, in_cond_, nn::forward(p, cond_, cond));
    }

    /// First-layer contribution of step t, one row.
    [[nodiscard]] RowMatrix time_part(const nn::ParamSet& p, int t) const {
        return nn::forward(p, in_time_, nn::forward(p, time_, sinusoid_features({t}, cfg_.time_raw)));
    }

    /// Same result as forward() from cached condition and time parts.
    [[nodiscard]] RowMatrix predict_cached(const nn::ParamSet& p, const RowMatrix& a_t, const RowMatrix& cond_part,
                                           const RowMatrix& time_part) const {
        RowMatrix z0 = nn::forward(p, in_act_, a_t) + cond_part;
        z0.rowwise() += time_part.row(0);
        return trunk(p, z0.cwiseMax(0.0), nullptr);
    }

private:
    RowMatrix trunk(const nn::ParamSet& p, RowMatrix h0, Tape* tape) const {
        RowMatrix h1 = nn::forward(p, down1_, h0, tape ? &tape->down1 : nullptr);
        const RowMatrix h2 = nn::forward(p, down2_, h1, tape ? &tape->down2 : nullptr);
        RowMatrix v1 = nn::forward(p, up1_, h2, tape ? &tape->up1 : nullptr);
        v1 += h1;
        RowMatrix v2 = nn::forward(p, up2_, v1, tape ? &tape->up2 : nullptr);
        v2 += h0;
        if (tape) {
            tape->h0 = std::move(h0);
            tape->h1 = std::move(h1);
        }
        return nn::forward(p, out_, v2, tape ? &tape->out : nullptr);
    }

    [[nodiscard]] std::vector<const nn::Mlp*> blocks() const {
        return {&cond_, &time_, &in_act_, &in_cond_, &in_time_, &down1_, &down2_, &up1_, &up2_, &out_};
    }

    DenoiserConfig cfg_;
    nn::Mlp cond_, time_, in_act_, in_cond_, in_time_, down1_, down2_, up1_, up2_, out_;
};

}  // namespace dplac::diffusion
