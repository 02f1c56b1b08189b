#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>

#include "dplac/diffusion/prior.hpp"
#include "dplac/env/encoding.hpp"
#include "dplac/env/expert.hpp"

namespace dplac::diffusion {

/// Paired (encoded state, flattened action sequence) rows with frozen
/// condition statistics.
struct DemoDataset {
    int horizon = 0;
    RowMatrix conditions;  // [N, cond_dim]
    RowMatrix actions;     // [N, horizon * kActionDim]
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    int episodes = 0;
    int dropped = 0;
    std::vector<int> kept_steps;  // decisions per kept episode; generation-time only, not serialized

    [[nodiscard]] Eigen::Index size() const noexcept { return conditions.rows(); }
    [[nodiscard]] int cond_dim() const noexcept { return static_cast<int>(conditions.cols()); }
    [[nodiscard]] int action_dim() const noexcept { return static_cast<int>(actions.cols()); }

    /// Per-column mean and std; constant columns get std 1.
    void compute_statistics() {
        if (size() == 0) throw Error("demo dataset is empty");
        mean = conditions.colwise().mean().transpose();
        const RowMatrix centered = conditions.rowwise() - mean.transpose();
        std = (centered.colwise().squaredNorm() / static_cast<double>(size())).cwiseSqrt().transpose();
        for (Eigen::Index c = 0; c < std.size(); ++c)
            if (std[c] < 1e-8) std[c] = 1.0;
    }

    [[nodiscard]] nn::BinaryWriter serialize() const {
        nn::BinaryWriter w;
        w.bytes(kMagic.data(), kMagic.size());
        w.u32(kVersion);
        w.u32(static_cast<std::uint32_t>(horizon));
        w.u32(static_cast<std::uint32_t>(cond_dim()));
        w.u32(static_cast<std::uint32_t>(action_dim()));
        w.u64(static_cast<std::uint64_t>(size()));
        w.u32(static_cast<std::uint32_t>(episodes));
        w.u32(static_cast<std::uint32_t>(dropped));
        w.f64s(mean.data(), static_cast<std::size_t>(mean.size()));
        w.f64s(std.data(), static_cast<std::size_t>(std.size()));
        w.f64s(conditions.data(), static_cast<std::size_t>(conditions.size()));
        w.f64s(actions.data(), static_cast<std::size_t>(actions.size()));
        return w;
    }

    /// CRC32 of the serialized bytes, as 8 hex digits.
    [[nodiscard]] std::string hash() const {
        const auto w = serialize();
        char buf[9];
        std::snprintf(buf, sizeof buf, "%08x", nn::crc32(w.buffer().data(), w.buffer().size()));
        return buf;
    }

    void save(const std::filesystem::path& path) const { serialize().save(path); }

    static DemoDataset load(const std::filesystem::path& path) {
        auto r = nn::BinaryReader::open(path);
        r.expect_magic(kMagic);
        if (r.u32() != kVersion) throw FormatError("unsupported demo dataset version");
        DemoDataset d;
        d.horizon = static_cast<int>(r.u32());
        const auto cd = static_cast<Eigen::Index>(r.u32());
        const auto ad = static_cast<Eigen::Index>(r.u32());
        const auto n = static_cast<Eigen::Index>(r.u64());
        d.episodes = static_cast<int>(r.u32());
        d.dropped = static_cast<int>(r.u32());
        d.mean.resize(cd);
        d.std.resize(cd);
        d.conditions.resize(n, cd);
        d.actions.resize(n, ad);
        r.f64s(d.mean.data(), static_cast<std::size_t>(cd));
        r.f64s(d.std.data(), static_cast<std::size_t>(cd));
        r.f64s(d.conditions.data(), static_cast<std::size_t>(d.conditions.size()));
        r.f64s(d.actions.data(), static_cast<std::size_t>(d.actions.size()));
        if (!r.at_end()) throw FormatError("trailing bytes in demo dataset");
        return d;
    }

private:
    static constexpr std::string_view kMagic = "DPLACDEM";
    static constexpr std::uint32_t kVersion = 1;
};

struct DemoOptions {
    int episodes = 40;
    std::uint64_t seed = 1;
    int horizon = 4;
    int stall_decisions = 120;      // decisions without delivered data before an episode is dropped
    double max_drop_fraction = 0.5;  // more dropped episodes than this aborts generation
    env::ExpertSettings expert;
};

/// Rows recorded from one episode of length `steps`: one per AUV and start
/// index t with t + horizon <= steps.
inline int windows_per_auv(int steps, int horizon) { return std::max(0, steps - horizon + 1); }

/// Rolls the randomized expert and records sliding windows for every AUV.
/// Encodings include the padded early-episode histories the policy also sees.
inline DemoDataset generate_demos(const env::ScenarioConfig& cfg, const dynamics::AuvModel& model,
                                  const DemoOptions& opt) {
    if (opt.episodes < 1 || opt.horizon < 1) throw ConfigError("demo generation needs episodes and horizon >= 1");
    env::MissionEnv environment(cfg, model);
    const int n_auv = cfg.auv_count;
    const int d = opt.horizon * env::kActionDim;
    const env::HistoryEncoder proto(environment.observation_dim(), cfg.history);
    std::vector<Eigen::VectorXd> conds;
    std::vector<Eigen::VectorXd> acts;
    DemoDataset out;
    out.horizon = opt.horizon;
    Rng master(opt.seed);
    for (int e = 0; e < opt.episodes; ++e) {
        environment.reset(master.next_u64());
        env::DemoExpert expert(static_cast<std::size_t>(n_auv), master.next_u64(), opt.expert);
        std::vector<env::HistoryEncoder> enc(static_cast<std::size_t>(n_auv), proto);
        std::vector<std::vector<Eigen::VectorXd>> ep_cond(static_cast<std::size_t>(n_auv));
        std::vector<std::vector<env::Action>> ep_act(static_cast<std::size_t>(n_auv));
        double delivered = 0.0;
        int idle = 0;
        bool stalled = false;
        while (!environment.finished()) {
            const auto actions = expert.act(environment);
            for (std::size_t i = 0; i < actions.size(); ++i) {
                ep_cond[i].push_back(enc[i].encode(environment.observation(i)));
                ep_act[i].push_back(actions[i]);
                enc[i].push(environment.compact_state(i), actions[i]);
            }
            const auto res = environment.step(actions);
            if (res.aborted) {
                stalled = true;
                break;
            }
            idle = environment.metrics().delivered > delivered ? 0 : idle + 1;
            delivered = environment.metrics().delivered;
            if (idle >= opt.stall_decisions) {
                stalled = true;
                break;
            }
        }
        ++out.episodes;
        if (stalled) {
            ++out.dropped;
            continue;
        }
        out.kept_steps.push_back(static_cast<int>(ep_cond.front().size()));
        for (std::size_t i = 0; i < ep_cond.size(); ++i) {
            const int steps = static_cast<int>(ep_cond[i].size());
            for (int t = 0; t < windows_per_auv(steps, opt.horizon); ++t) {
                Eigen::VectorXd a(d);
                for (int h = 0; h < opt.horizon; ++h)
                    for (int c = 0; c < env::kActionDim; ++c)
                        a[h * env::kActionDim + c] = ep_act[i][static_cast<std::size_t>(t + h)][static_cast<std::size_t>(c)];
                conds.push_back(ep_cond[i][static_cast<std::size_t>(t)]);
                acts.push_back(std::move(a));
            }
        }
    }
    if (out.dropped > opt.max_drop_fraction * out.episodes)
        throw Error("expert stalled in " + std::to_string(out.dropped) + " of " + std::to_string(out.episodes) +
                    " demo episodes");
    out.conditions.resize(static_cast<Eigen::Index>(conds.size()), proto.dim());
    out.actions.resize(static_cast<Eigen::Index>(acts.size()), d);
    for (std::size_t r = 0; r < conds.size(); ++r) {
        out.conditions.row(static_cast<Eigen::Index>(r)) = conds[r].transpose();
        out.actions.row(static_cast<Eigen::Index>(r)) = acts[r].transpose();
    }
    if (out.size() > 0) out.compute_statistics();
    return out;
}

struct TrainingPoint {
    int step = 0;
    double loss = 0.0;
};

/// Resumable fit of a fresh prior on the dataset, with minibatches drawn
/// with replacement. One random stream drives initialization, batches and
/// noise, so a restored snapshot continues with identical losses.
class PriorTrainer {
public:
    PriorTrainer(const DemoDataset& data, DiffusionConfig cfg, std::uint64_t seed)
        : data_(data), prior_(prepare(data, cfg), data.mean, data.std), rng_(seed) {
        prior_.init(rng_);
        opt_ = nn::Adam(prior_.params(), nn::AdamConfig{.learning_rate = prior_.config().learning_rate});
    }

    TrainingPoint step() {
        const auto& cfg = prior_.config();
        RowMatrix cond(cfg.batch, data_.cond_dim());
        RowMatrix a0(cfg.batch, data_.action_dim());
        for (int b = 0; b < cfg.batch; ++b) {
            const auto r = static_cast<Eigen::Index>(rng_.uniform_int(0, data_.size() - 1));
            cond.row(b) = data_.conditions.row(r);
            a0.row(b) = data_.actions.row(r);
        }
        const double loss = prior_.train_step(opt_, cond, a0, rng_);
        return {++steps_, loss};
    }

    [[nodiscard]] int steps_done() const noexcept { return steps_; }
    [[nodiscard]] const DiffusionPrior& prior() const noexcept { return prior_; }
    [[nodiscard]] DiffusionPrior take() { return std::move(prior_); }

    void save_state(const std::filesystem::path& path) const {
        nn::BinaryWriter w;
        w.bytes(kMagic.data(), kMagic.size());
        w.u32(1);
        w.str(data_.hash());
        w.u64(static_cast<std::uint64_t>(steps_));
        w.str(rng_.state());
        prior_.write(w);
        nn::write_adam(w, opt_);
        w.save(path);
    }

    void load_state(const std::filesystem::path& path) {
        auto r = nn::BinaryReader::open(path);
        r.expect_magic(kMagic);
        if (r.u32() != 1) throw FormatError("unsupported prior training snapshot version");
        if (r.str() != data_.hash()) throw ConfigError("prior training snapshot belongs to a different demo dataset");
        const auto steps = static_cast<int>(r.u64());
        Rng rng = rng_;
        rng.restore(r.str());
        DiffusionPrior prior = DiffusionPrior::read(r);
        prior.params().require_same_structure(prior_.params(), "prior training snapshot");
        nn::Adam opt = opt_;
        nn::read_adam(r, opt);
        if (!r.at_end()) throw FormatError("trailing bytes in prior training snapshot");
        prior_ = std::move(prior);
        opt_ = std::move(opt);
        rng_ = std::move(rng);
        steps_ = steps;
    }

private:
    static constexpr std::string_view kMagic = "DPLACPTS";

    static DiffusionConfig prepare(const DemoDataset& data, DiffusionConfig cfg) {
        if (data.size() == 0) throw Error("cannot train on an empty demo dataset");
        if (data.mean.size() != data.cond_dim()) throw Error("demo dataset statistics are missing");
        cfg.net.cond_dim = data.cond_dim();
        cfg.net.action_dim = data.action_dim();
        cfg.horizon = data.horizon;
        return cfg;
    }

    const DemoDataset& data_;
    DiffusionPrior prior_;
    Rng rng_;
    nn::Adam opt_;
    int steps_ = 0;
};

/// Fits a fresh prior for `steps` minibatch updates.
inline DiffusionPrior train_prior(const DemoDataset& data, DiffusionConfig cfg, int steps, std::uint64_t seed,
                                  std::vector<TrainingPoint>* curve = nullptr,
                                  const std::function<void(const TrainingPoint&)>& progress = {}) {
    PriorTrainer t(data, cfg, seed);
    while (t.steps_done() < steps) {
        const TrainingPoint p = t.step();
        if (curve) curve->push_back(p);
        if (progress) progress(p);
    }
    return t.take();
}

inline void write_training_curve(const std::filesystem::path& path, const std::vector<TrainingPoint>& curve) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    os << "step,loss\n";
    os.precision(10);
    for (const auto& p : curve) os << p.step << ',' << p.loss << '\n';
}

}  // namespace dplac::diffusion
