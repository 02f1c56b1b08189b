#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "dplac/diffusion/demos.hpp"

using namespace dplac;
using namespace dplac::diffusion;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("dplac_test_" + name);
}

RowMatrix scalar(double v) {
    RowMatrix m(1, 1);
    m(0, 0) = v;
    return m;
}

RowMatrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    RowMatrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(xs.size() - 1);
    return m;
}

DenoiserConfig tiny_net(int cond, int act) {
    DenoiserConfig c;
    c.cond_dim = cond;
    c.action_dim = act;
    c.cond_width = 8;
    c.width = 8;
    c.time_raw = 6;
    c.time_dim = 4;
    return c;
}

DiffusionConfig toy_config(int cond_dim) {
    DiffusionConfig c;
    c.batch = 64;
    c.learning_rate = 1e-3;
    c.horizon = 1;
    c.net.cond_dim = cond_dim;
    c.net.action_dim = 1;
    c.net.cond_width = 32;
    c.net.width = 64;
    c.net.time_raw = 32;
    c.net.time_dim = 32;
    return c;
}

/// Trains a 1-D prior on condition/target pairs produced by `draw`.
template <class Draw>
DiffusionPrior train_toy(int cond_dim, int steps, std::uint64_t seed, Draw&& draw, std::vector<double>* losses) {
    const auto cfg = toy_config(cond_dim);
    DiffusionPrior prior(cfg, Eigen::VectorXd::Zero(cond_dim), Eigen::VectorXd::Ones(cond_dim));
    Rng rng(seed);
    prior.init(rng);
    nn::Adam opt(prior.params(), nn::AdamConfig{.learning_rate = cfg.learning_rate});
    RowMatrix cond(cfg.batch, cond_dim), a0(cfg.batch, 1);
    for (int s = 0; s < steps; ++s) {
        for (int b = 0; b < cfg.batch; ++b) draw(rng, cond.row(b), a0(b, 0));
        const double loss = prior.train_step(opt, cond, a0, rng);
        if (losses) losses->push_back(loss);
    }
    return prior;
}

/// Modes +-1, std 0.1, equal weights; the condition is a constant 0.
const DiffusionPrior& bimodal_prior(std::vector<double>* losses = nullptr) {
    static std::vector<double> curve;
    static const DiffusionPrior prior = train_toy(
        1, 3000, 7,
        [](Rng& rng, auto cond, double& a) {
            cond.setZero();
            a = (rng.uniform() < 0.5 ? -1.0 : 1.0) + 0.1 * rng.normal();
        },
        &curve);
    if (losses) *losses = curve;
    return prior;
}

std::vector<double> sample_many(const DiffusionPrior& prior, const RowMatrix& cond, int n, std::uint64_t seed,
                                SamplerOptions opt = {}) {
    RowMatrix rep(n, cond.cols());
    for (int i = 0; i < n; ++i) rep.row(i) = cond.row(0);
    std::vector<Rng> streams;
    for (int i = 0; i < n; ++i) streams.push_back(candidate_stream(seed, i));
    const RowMatrix a = prior.candidates(rep, 1, streams, opt);
    return {a.data(), a.data() + a.size()};
}

}  // namespace

// ---------------------------------------------------------------- schedule

TEST(Schedule, LinearEndpointsExact) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    EXPECT_EQ(s.beta.size(), 1001U);
    EXPECT_DOUBLE_EQ(s.beta[1], 1e-4);
    EXPECT_DOUBLE_EQ(s.beta[1000], 0.02);
    EXPECT_EQ(s.beta[0], 0.0);
    EXPECT_EQ(s.alpha_bar[0], 1.0);
}

TEST(Schedule, BetaNondecreasingAlphaBarStrictlyDecreasing) {
    for (const auto& s : {linear_schedule(1000, 1e-4, 0.02, 50), cosine_schedule(1000, 50)}) {
        for (int t = 1; t <= s.steps; ++t) {
            EXPECT_GT(s.beta[t], 0.0);
            EXPECT_LT(s.beta[t], 1.0);
            EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]);
        }
    }
    const auto lin = linear_schedule(1000, 1e-4, 0.02, 50);
    for (int t = 2; t <= 1000; ++t) EXPECT_GE(lin.beta[t], lin.beta[t - 1]);
}

TEST(Schedule, TerminalAlphaBarBelowThreshold) {
    // independent product in extended precision
    long double prod = 1.0L;
    for (int i = 0; i < 1000; ++i) prod *= 1.0L - (1e-4L + (0.02L - 1e-4L) * i / 999.0L);
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    EXPECT_LT(static_cast<double>(prod), 1e-4);
    EXPECT_NEAR(s.alpha_bar[1000], static_cast<double>(prod), 1e-12);
    EXPECT_LT(s.alpha_bar[1000], 1e-4);
}

TEST(Schedule, StridedIndicesEvenAndEndAtT) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    ASSERT_EQ(s.inference.size(), 50U);
    for (std::size_t j = 0; j < 50; ++j) EXPECT_EQ(s.inference[j], static_cast<int>(20 * (j + 1)));
    EXPECT_EQ(s.previous(1000, true), 980);
    EXPECT_EQ(s.previous(20, true), 0);
    EXPECT_EQ(s.previous(1000, false), 999);
    const auto odd = strided_indices(10, 3);
    EXPECT_EQ(odd, (std::vector<int>{3, 7, 10}));
}

TEST(Schedule, InvalidRangesRejected) {
    EXPECT_THROW(linear_schedule(1000, 0.0, 0.02, 50), ConfigError);
    EXPECT_THROW(linear_schedule(1000, 0.02, 1e-4, 50), ConfigError);
    EXPECT_THROW(linear_schedule(1000, 1e-4, 1.0, 50), ConfigError);
    EXPECT_THROW(linear_schedule(1000, 1e-4, 0.02, 1001), ConfigError);
    EXPECT_THROW(linear_schedule(1000, 1e-4, 0.02, 0), ConfigError);
    EXPECT_THROW(parse_schedule_kind("quadratic"), ConfigError);
    EXPECT_EQ(parse_schedule_kind("cosine"), ScheduleKind::cosine);
}

// ---------------------------------------------------------- forward noise

TEST(ForwardNoise, ZeroNoiseScalesSignal) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(1);
    const RowMatrix a0 = random_matrix(3, 4, rng);
    const RowMatrix out = forward_noise(a0, 400, RowMatrix::Zero(3, 4), s);
    EXPECT_TRUE(out.isApprox(std::sqrt(s.alpha_bar[400]) * a0, 1e-15));
}

TEST(ForwardNoise, PlugInExample) {
    NoiseSchedule s;
    s.steps = 1;
    s.beta = {0.0, 0.75};
    s.alpha = {1.0, 0.25};
    s.alpha_bar = {1.0, 0.25};
    s.inference = {1};
    EXPECT_NEAR(forward_noise(scalar(1.0), 1, scalar(1.0), s)(0, 0), 1.3660254, 1e-7);
}

TEST(ForwardNoise, StepOutOfRangeRejected) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    EXPECT_THROW(forward_noise(scalar(1), 0, scalar(0), s), Error);
    EXPECT_THROW(forward_noise(scalar(1), 1001, scalar(0), s), Error);
    EXPECT_THROW(forward_noise(scalar(1), 5, RowMatrix::Zero(1, 2), s), ShapeError);
}

TEST(ForwardNoise, IteratedSingleStepsMatchDirectSampling) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    constexpr int n = 100000;
    constexpr int t = 150;
    const double a0 = 0.7;
    Rng rng(11);
    std::vector<double> chain(n), direct(n);
    for (int i = 0; i < n; ++i) {
        RowMatrix a = scalar(a0);
        for (int k = 1; k <= t; ++k) a = forward_step(a, k, scalar(rng.normal()), s);
        chain[i] = a(0, 0);
        direct[i] = forward_noise(scalar(a0), t, scalar(rng.normal()), s)(0, 0);
    }
    const auto mc = moments(chain), md = moments(direct);
    const double v = 1.0 - s.alpha_bar[t];
    // difference of two independent sample means / variances, 4 standard errors
    EXPECT_LT(std::abs(mc.mean - md.mean), 4.0 * std::sqrt(2.0 * v / n));
    EXPECT_LT(std::abs(mc.var - md.var), 4.0 * v * std::sqrt(4.0 / (n - 1)));
}

TEST(ForwardNoise, ConditionalVarianceLaw) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    constexpr int n = 20000;
    Rng rng(5);
    for (int t : {1, 10, 100, 500, 1000}) {
        std::vector<double> xs(n);
        for (int i = 0; i < n; ++i) xs[i] = forward_noise(scalar(-0.3), t, scalar(rng.normal()), s)(0, 0);
        const double v = 1.0 - s.alpha_bar[t];
        const auto m = moments(xs);
        EXPECT_LT(std::abs(m.var - v), 3.0 * v * std::sqrt(2.0 / (n - 1))) << "t=" << t;
        EXPECT_LT(std::abs(m.mean + 0.3 * s.signal(t)), 3.0 * std::sqrt(v / n)) << "t=" << t;
    }
}

// ------------------------------------------------------------ embedding

TEST(TimeEmbedding, ZeroStepIsSinZeroCosOne) {
    const RowMatrix f = sinusoid_features({0}, 64);
    for (int i = 0; i < 32; ++i) {
        EXPECT_EQ(f(0, 2 * i), 0.0);
        EXPECT_EQ(f(0, 2 * i + 1), 1.0);
    }
}

TEST(TimeEmbedding, InjectiveOverTheGrid) {
    std::vector<int> ts(1001);
    std::iota(ts.begin(), ts.end(), 0);
    const RowMatrix f = sinusoid_features(ts, 64);
    double min_d = 1e300;
    for (Eigen::Index a = 0; a < f.rows(); ++a)
        for (Eigen::Index b = a + 1; b < f.rows(); ++b) min_d = std::min(min_d, (f.row(a) - f.row(b)).squaredNorm());
    EXPECT_GT(min_d, 0.0);
}

TEST(TimeEmbedding, FrequenciesSpanOneToTenThousandPeriods) {
    const RowMatrix f = sinusoid_features({1}, 8);
    EXPECT_NEAR(f(0, 0), std::sin(1.0), 1e-15);
    EXPECT_NEAR(f(0, 6), std::sin(1e-4), 1e-15);
}

TEST(TimeEmbedding, DeterministicGivenParams) {
    const Denoiser net(tiny_net(2, 3));
    nn::ParamSet p;
    Rng rng(3);
    net.init(p, rng);
    EXPECT_EQ(net.time_part(p, 417), net.time_part(p, 417));
    EXPECT_NE(net.time_part(p, 417), net.time_part(p, 418));
}

// ------------------------------------------------------------- denoiser

TEST(DenoiserTest, ZeroInitOutputIsZero) {
    const Denoiser net(DenoiserConfig{.cond_dim = 5, .action_dim = 12});
    nn::ParamSet p;
    Rng rng(1);
    net.init(p, rng);
    const RowMatrix y = net.forward(p, random_matrix(4, 12, rng), {1, 50, 500, 1000}, random_matrix(4, 5, rng));
    EXPECT_EQ(y, RowMatrix::Zero(4, 12));
}

TEST(DenoiserTest, OutputShapeEqualsInputShape) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const int cd = static_cast<int>(rng.uniform_int(1, 9));
        const int ad = static_cast<int>(rng.uniform_int(1, 13));
        const auto b = rng.uniform_int(1, 6);
        const Denoiser net(tiny_net(cd, ad));
        nn::ParamSet p;
        net.init(p, rng);
        std::vector<int> ts(static_cast<std::size_t>(b), 10);
        const RowMatrix y = net.forward(p, random_matrix(b, ad, rng), ts, random_matrix(b, cd, rng));
        EXPECT_EQ(y.rows(), b);
        EXPECT_EQ(y.cols(), ad);
    }
}

TEST(DenoiserTest, ShapeMismatchRejected) {
    const Denoiser net(tiny_net(3, 2));
    nn::ParamSet p;
    Rng rng(2);
    net.init(p, rng);
    EXPECT_THROW(net.forward(p, RowMatrix::Zero(2, 3), {1, 1}, RowMatrix::Zero(2, 3)), ShapeError);
    EXPECT_THROW(net.forward(p, RowMatrix::Zero(2, 2), {1, 1}, RowMatrix::Zero(2, 4)), ShapeError);
    EXPECT_THROW(net.forward(p, RowMatrix::Zero(2, 2), {1}, RowMatrix::Zero(2, 3)), ShapeError);
    EXPECT_THROW(Denoiser(DenoiserConfig{.time_raw = 5}), ConfigError);
}

TEST(DenoiserTest, GradientMatchesFiniteDifferences) {
    Rng rng(8);
    const Denoiser net(tiny_net(3, 2));
    nn::ParamSet p;
    net.init(p, rng);
    for (auto& [_, l] : p) {  // leave the zero-initialized state so every path carries gradient
        for (auto& v : l.weights.values()) v += 0.3 * rng.normal();
        for (auto& v : l.biases.values()) v = 0.2 * rng.normal();
    }
    const RowMatrix a = random_matrix(3, 2, rng), c = random_matrix(3, 3, rng), w = random_matrix(3, 2, rng);
    const std::vector<int> ts{3, 250, 999};
    auto loss = [&] { return net.forward(p, a, ts, c).cwiseProduct(w).sum(); };
    Denoiser::Tape tape;
    net.forward(p, a, ts, c, &tape);
    auto grads = p.zeros_like();
    net.backward(p, tape, w, grads);
    const double h = 1e-6;
    int checked = 0;
    for (auto& [name, layer] : p) {
        for (bool weights : {true, false}) {
            nn::Tensor& t = weights ? layer.weights : layer.biases;
            const nn::Tensor& g = weights ? grads.at(name).weights : grads.at(name).biases;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double orig = t[i];
                t[i] = orig + h;
                const double fp = loss();
                t[i] = orig - h;
                const double fm = loss();
                t[i] = orig;
                const double numeric = (fp - fm) / (2 * h);
                EXPECT_NEAR(g[i], numeric, 1e-5 * std::max(1.0, std::abs(numeric))) << name << "[" << i << "]";
                ++checked;
            }
        }
    }
    EXPECT_EQ(static_cast<std::size_t>(checked), p.parameter_count());
}

TEST(DenoiserTest, CachedPredictionMatchesForward) {
    Rng rng(4);
    const Denoiser net(tiny_net(3, 5));
    nn::ParamSet p;
    net.init(p, rng);
    for (auto& v : p.at("den/out/l0").weights.values()) v = rng.normal();
    const RowMatrix a = random_matrix(4, 5, rng), c = random_matrix(4, 3, rng);
    const RowMatrix full = net.forward(p, a, {77, 77, 77, 77}, c);
    const RowMatrix cached = net.predict_cached(p, a, net.condition_part(p, c), net.time_part(p, 77));
    EXPECT_TRUE(full.isApprox(cached, 1e-12));
}

// ----------------------------------------------------------------- loss

TEST(Loss, PerfectPredictorGivesZero) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(1);
    const RowMatrix a0 = random_matrix(32, 12, rng);
    const double l = diffusion_loss_with(RowMatrix::Zero(32, 1), a0, s, rng,
                                         [](const RowMatrix&, const std::vector<int>&, const RowMatrix&,
                                            const RowMatrix& eps) { return eps; });
    EXPECT_EQ(l, 0.0);
}

TEST(Loss, ZeroPredictorGivesActionDimension) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(2);
    const int d = 12;
    const RowMatrix a0 = random_matrix(10000, d, rng);
    const double l = diffusion_loss_with(RowMatrix::Zero(10000, 1), a0, s, rng,
                                         [](const RowMatrix& x, const std::vector<int>&, const RowMatrix&,
                                            const RowMatrix&) { return RowMatrix::Zero(x.rows(), x.cols()); });
    EXPECT_NEAR(l, d, 0.05 * d);
}

TEST(Loss, ZeroInitDenoiserMatchesZeroPredictorAndEmptyBatchThrows) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    const Denoiser net(tiny_net(2, 4));
    nn::ParamSet p;
    Rng rng(3);
    net.init(p, rng);
    const RowMatrix a0 = random_matrix(4000, 4, rng);
    EXPECT_NEAR(diffusion_loss(net, p, RowMatrix::Zero(4000, 2), a0, s, rng), 4.0, 0.2);
    EXPECT_THROW(diffusion_loss(net, p, RowMatrix(0, 2), RowMatrix(0, 4), s, rng), Error);
}

TEST(Loss, TrainingDeterministicAndFinite) {
    auto run = [] {
        std::vector<double> losses;
        const auto prior = train_toy(
            1, 50, 9, [](Rng& r, auto c, double& a) { c.setZero(); a = r.uniform(-1, 1); }, &losses);
        return std::make_pair(losses, prior.params());
    };
    const auto [l1, p1] = run();
    const auto [l2, p2] = run();
    EXPECT_EQ(l1, l2);
    EXPECT_TRUE(p1.all_finite());
    for (const auto& [name, layer] : p1) EXPECT_EQ(layer, p2.at(name)) << name;
    for (double l : l1) EXPECT_TRUE(std::isfinite(l));
}

// ------------------------------------------------------------- sampling

TEST(Sampling, ZeroPredictorIsAPureRescaleChain) {
    const auto s = linear_schedule(1000, 1e-4, 0.02, 50);
    for (bool strided : {true, false}) {
        std::vector<Rng> streams{Rng(42), Rng(43)};
        std::vector<Rng> copy = streams;
        const RowMatrix out = reverse_chain(
            2, 3, s, streams, [](const RowMatrix& a, int) { return RowMatrix::Zero(a.rows(), a.cols()); },
            {.strided = strided, .stochastic = false, .clamp = false});
        // closed form: prod over the visited steps of 1/sqrt(1 - beta) telescopes to 1/sqrt(alpha_bar_T)
        long double gain = 1.0L;
        if (strided) {
            int prev = 0;
            for (int t : s.inference) {
                gain /= std::sqrt(1.0L - (1.0L - static_cast<long double>(s.alpha_bar[t]) / s.alpha_bar[prev]));
                prev = t;
            }
        } else {
            for (int t = 1; t <= 1000; ++t) gain /= std::sqrt(1.0L - static_cast<long double>(s.beta[t]));
        }
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c) {
                const double start = copy[r].normal();
                EXPECT_NEAR(out(r, c), start * static_cast<double>(gain), 1e-9 * std::abs(out(r, c)));
                EXPECT_NEAR(out(r, c), start / std::sqrt(s.alpha_bar[1000]), 1e-8 * std::abs(out(r, c)));
            }
    }
}

TEST(Sampling, FixedSeedGivesIdenticalSampleAndOutputIsClamped) {
    const auto& prior = bimodal_prior();
    const auto a = prior.sample(scalar(0.0), 123);
    const auto b = prior.sample(scalar(0.0), 123);
    EXPECT_EQ(a, b);
    for (double v : sample_many(prior, scalar(0.0), 200, 5)) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Sampling, ToyBimodalLossDecreases) {
    std::vector<double> losses;
    bimodal_prior(&losses);
    ASSERT_GE(losses.size(), 2000U);
    const double head = std::accumulate(losses.begin(), losses.begin() + 200, 0.0) / 200;
    const double tail = std::accumulate(losses.begin() + 1800, losses.begin() + 2000, 0.0) / 200;
    EXPECT_LT(tail, 0.8 * head);
}

TEST(Sampling, ToyBimodalRecoversBothModes) {
    const auto xs = sample_many(bimodal_prior(), scalar(0.0), 4000, 77);
    // 0.05-wide histogram over [-1.2, 1.2]; one peak per half-line
    std::vector<int> hist(48, 0);
    for (double x : xs) hist[static_cast<std::size_t>(std::clamp((x + 1.2) / 0.05, 0.0, 47.0))]++;
    const auto neg_peak = std::max_element(hist.begin(), hist.begin() + 24) - hist.begin();
    const auto pos_peak = std::max_element(hist.begin() + 24, hist.end()) - hist.begin();
    const double neg_centre = -1.2 + 0.05 * (static_cast<double>(neg_peak) + 0.5);
    const double pos_centre = -1.2 + 0.05 * (static_cast<double>(pos_peak) + 0.5);
    EXPECT_NEAR(neg_centre, -1.0, 0.1);
    EXPECT_NEAR(pos_centre, 1.0, 0.1);
    const auto neg = std::count_if(xs.begin(), xs.end(), [](double x) { return x < 0.0; });
    EXPECT_GE(static_cast<double>(neg) / xs.size(), 0.3);
    EXPECT_GE(static_cast<double>(xs.size() - neg) / xs.size(), 0.3);
}

TEST(Sampling, StridedAndFullChainsAgreeOnFirstTwoMoments) {
    const auto& prior = bimodal_prior();
    const auto strided = sample_many(prior, scalar(0.0), 3000, 1, {.strided = true});
    const auto full = sample_many(prior, scalar(0.0), 3000, 2, {.strided = false});
    const auto ms = moments(strided), mf = moments(full);
    const double m2s = ms.var + ms.mean * ms.mean, m2f = mf.var + mf.mean * mf.mean;
    // the first moment is near zero, so it is compared on the scale of the spread
    EXPECT_LT(std::abs(ms.mean - mf.mean), 0.1 * std::sqrt(mf.var));
    EXPECT_LT(std::abs(m2s - m2f), 0.1 * m2f);
}

TEST(Sampling, ConditioningIsLive) {
    const auto prior = train_toy(
        1, 2000, 13,
        [](Rng& rng, auto cond, double& a) {
            const double c = rng.uniform() < 0.5 ? -1.0 : 1.0;
            cond(0, 0) = c;
            a = 0.5 * c + 0.05 * rng.normal();
        },
        nullptr);
    const RowMatrix at = scalar(0.2);
    double delta = 0.0;
    for (int t : {10, 100, 500}) {
        const RowMatrix lo = prior.net().forward(prior.params(), at, {t}, prior.normalize(scalar(-1.0)));
        const RowMatrix hi = prior.net().forward(prior.params(), at, {t}, prior.normalize(scalar(1.0)));
        delta += std::abs(lo(0, 0) - hi(0, 0));
    }
    EXPECT_GT(delta / 3.0, 0.0);
    const auto lo = moments(sample_many(prior, scalar(-1.0), 500, 3));
    const auto hi = moments(sample_many(prior, scalar(1.0), 500, 4));
    EXPECT_NEAR(lo.mean, -0.5, 0.1);
    EXPECT_NEAR(hi.mean, 0.5, 0.1);
}

// ----------------------------------------------------------- candidates

TEST(Candidates, SingleCandidateEqualsSingleSample) {
    const auto& prior = bimodal_prior();
    for (std::uint64_t seed : {1ULL, 99ULL, 4096ULL}) {
        const RowMatrix k1 = prior.generate(scalar(0.0), 1, seed);
        ASSERT_EQ(k1.rows(), 1);
        EXPECT_EQ(k1(0, 0), prior.sample(scalar(0.0), seed)[0]);
    }
}

TEST(Candidates, DefaultCountAndPairwiseDistinct) {
    EXPECT_EQ(DiffusionConfig{}.candidates, 5);
    const DiffusionConfig cfg;
    DenoiserConfig net = cfg.net;
    net.cond_dim = 4;
    net.action_dim = 12;
    DiffusionConfig c = cfg;
    c.net = net;
    DiffusionPrior prior(c, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4));
    Rng rng(1);
    prior.init(rng);
    const RowMatrix cand = prior.generate(RowMatrix::Ones(1, 4), c.candidates, 17);
    ASSERT_EQ(cand.rows(), 5);
    ASSERT_EQ(cand.cols(), 12);
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) EXPECT_GT((cand.row(i) - cand.row(j)).norm(), 0.0);
    EXPECT_LE(cand.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Candidates, RowsIndependentOfBatchComposition) {
    const auto& prior = bimodal_prior();
    const RowMatrix five = prior.generate(scalar(0.0), 5, 31);
    std::vector<Rng> one{candidate_stream(31, 3)};
    EXPECT_EQ(prior.candidates(scalar(0.0), 1, one)(0, 0), five(3, 0));
    EXPECT_THROW(prior.generate(scalar(0.0), 0, 1), ConfigError);
}

TEST(PriorIo, RoundTripReproducesSamples) {
    const auto& prior = bimodal_prior();
    const auto path = temp_path("prior.bin");
    prior.save(path);
    const auto back = DiffusionPrior::load(path);
    EXPECT_EQ(back.generate(scalar(0.0), 5, 8), prior.generate(scalar(0.0), 5, 8));
    std::filesystem::remove(path);
}

// ---------------------------------------------------------------- demos

namespace {

env::ScenarioConfig demo_scenario() {
    env::ScenarioConfig cfg;
    cfg.node_count = 6;
    cfg.extent_x = 80.0;
    cfg.extent_y = 80.0;
    cfg.extent_z = 20.0;
    cfg.max_steps = 150;
    return cfg;
}

DemoOptions demo_options() {
    DemoOptions o;
    o.episodes = 3;
    o.seed = 21;
    return o;
}

}  // namespace

TEST(Demos, FixedSeedSameHash) {
    const auto a = generate_demos(demo_scenario(), dynamics::AuvModel(), demo_options());
    const auto b = generate_demos(demo_scenario(), dynamics::AuvModel(), demo_options());
    EXPECT_EQ(a.hash(), b.hash());
    auto other = demo_options();
    other.seed = 22;
    EXPECT_NE(generate_demos(demo_scenario(), dynamics::AuvModel(), other).hash(), a.hash());
}

TEST(Demos, ActionsInRangeAndShapesConsistent) {
    const auto cfg = demo_scenario();
    const auto d = generate_demos(cfg, dynamics::AuvModel(), demo_options());
    ASSERT_GT(d.size(), 0);
    EXPECT_EQ(d.action_dim(), 4 * env::kActionDim);
    const env::MissionEnv e(cfg);
    EXPECT_EQ(d.cond_dim(), env::HistoryEncoder(e.observation_dim(), cfg.history).dim());
    EXPECT_LE(d.actions.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_EQ(d.mean.size(), d.cond_dim());
    EXPECT_TRUE((d.std.array() > 0.0).all());
}

TEST(Demos, WindowCountFollowsEpisodeLength) {
    EXPECT_EQ(windows_per_auv(10, 4), 7);
    EXPECT_EQ(windows_per_auv(4, 4), 1);
    EXPECT_EQ(windows_per_auv(3, 4), 0);
    auto opt = demo_options();
    opt.episodes = 1;
    const auto cfg = demo_scenario();
    const auto d = generate_demos(cfg, dynamics::AuvModel(), opt);
    // replay the same episode to learn its length
    env::MissionEnv e(cfg);
    Rng master(opt.seed);
    e.reset(master.next_u64());
    env::DemoExpert ex(2, master.next_u64());
    while (!e.finished()) e.step(ex.act(e));
    EXPECT_EQ(d.size(), 2 * windows_per_auv(e.steps(), opt.horizon));
}

TEST(Demos, WindowsPairEncodingWithFollowingActions) {
    auto opt = demo_options();
    opt.episodes = 1;
    const auto d = generate_demos(demo_scenario(), dynamics::AuvModel(), opt);
    // consecutive rows of one AUV overlap by horizon-1 actions
    const int d3 = env::kActionDim;
    for (Eigen::Index r = 0; r + 1 < 20; ++r)
        EXPECT_EQ(d.actions.row(r).segment(d3, 3 * d3), d.actions.row(r + 1).segment(0, 3 * d3));
    // the most recent history action of row r+1 is the first action of row r
    const int obs = d.cond_dim() - 10 * (env::MissionEnv::kCompactStateDim + d3);
    for (Eigen::Index r = 0; r + 1 < 20; ++r)
        EXPECT_EQ(d.conditions.row(r + 1).tail(d3), d.actions.row(r).head(d3));
    EXPECT_GT(obs, 0);
}

TEST(Demos, RandomizedExpertServicesHalfTheNodesOnIdealSea) {
    env::ScenarioConfig cfg;  // default scenario
    env::MissionEnv e(cfg);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        e.reset(seed);
        env::DemoExpert ex(static_cast<std::size_t>(cfg.auv_count), seed);
        while (!e.finished()) e.step(ex.act(e));
        EXPECT_GE(e.metrics().serviced, cfg.node_count / 2) << "seed " << seed;
    }
}

TEST(Demos, StallingExpertEpisodesDroppedAndReported) {
    auto opt = demo_options();
    opt.stall_decisions = 1;
    EXPECT_THROW(generate_demos(demo_scenario(), dynamics::AuvModel(), opt), Error);
    opt.max_drop_fraction = 1.0;
    const auto d = generate_demos(demo_scenario(), dynamics::AuvModel(), opt);
    EXPECT_EQ(d.dropped, 3);
    EXPECT_EQ(d.episodes, 3);
    EXPECT_EQ(d.size(), 0);
}

TEST(Demos, SaveLoadRoundTripAndTrainingCurve) {
    const auto d = generate_demos(demo_scenario(), dynamics::AuvModel(), demo_options());
    const auto path = temp_path("demos.bin");
    d.save(path);
    const auto back = DemoDataset::load(path);
    EXPECT_EQ(back.hash(), d.hash());
    std::filesystem::remove(path);

    DiffusionConfig cfg;
    cfg.net.cond_width = 16;
    cfg.net.width = 16;
    std::vector<TrainingPoint> curve;
    const auto prior = train_prior(d, cfg, 5, 1, &curve);
    ASSERT_EQ(curve.size(), 5U);
    const auto csv = temp_path("curve.csv");
    write_training_curve(csv, curve);
    std::ifstream is(csv);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "step,loss");
    std::filesystem::remove(csv);
    EXPECT_EQ(prior.config().net.cond_dim, d.cond_dim());
}
