#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "dplac/diffusion/prior.hpp"
#include "dplac/env/encoding.hpp"
#include "dplac/env/expert.hpp"
#include "dplac/lac/agent.hpp"
#include "dplac/stability/llm.hpp"

namespace dplac::harness {

using nn::RowMatrix;

/// Where each decision's action comes from.
enum class ActionSource {
    diffusion,  // K candidates from the prior, one picked by score rank
    actor,      // the LAC policy
    random,     // uniform in [-1, 1]^3
    expert,     // scripted nearest-node expert
};

struct Strategy {
    ActionSource source = ActionSource::diffusion;
    int rank = 0;              // diffusion only: 0 executes the best-scored candidate
    bool stochastic = false;   // actor only: sample instead of taking the mean
};

/// One planned 2-D path per candidate at a snapshot decision.
struct CandidateSnapshot {
    int stage = 0;
    int decision = 0;
    int auv = 0;
    std::vector<std::vector<std::array<double, 2>>> paths;  // K polylines
    int chosen = 0;
};

struct EpisodeOutcome {
    double episode_return = 0.0;  // summed over AUVs and decisions
    int steps = 0;
    bool aborted = false;
    env::MissionMetrics metrics;
    double yaw_error = 0.0;       // mean over AUVs and decisions (rad)
    double depth_error = 0.0;     // m
    std::vector<std::vector<std::array<double, 3>>> tracks;  // per AUV positions, one per decision
    std::vector<CandidateSnapshot> snapshots;
};

/// Dead-reckoned horizontal path of one action sequence from position p.
inline std::vector<std::array<double, 2>> planned_path(const Eigen::VectorXd& sequence, const dynamics::Vector3& p,
                                                       const env::ScenarioConfig& cfg) {
    std::vector<std::array<double, 2>> out{{p.x(), p.y()}};
    double x = p.x(), y = p.y();
    for (Eigen::Index h = 0; h + env::kActionDim <= sequence.size(); h += env::kActionDim) {
        const env::Action a{sequence[h], sequence[h + 1], sequence[h + 2]};
        const control::Setpoint sp = env::to_setpoint(a, cfg);
        x += sp.speed * cfg.decision_dt() * std::cos(sp.yaw);
        y += sp.speed * cfg.decision_dt() * std::sin(sp.yaw);
        out.push_back({x, y});
    }
    return out;
}

/// Indices of `scores` from best to worst; ties keep the lower index first.
inline std::vector<int> rank_order(const Eigen::VectorXd& scores) {
    std::vector<int> idx(static_cast<std::size_t>(scores.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    return idx;
}

/// Per-decision hooks used by training; evaluation leaves them empty.
struct StepHooks {
    std::function<void(std::size_t auv, const Eigen::VectorXd& state, const env::Action& action, double reward,
                       const Eigen::VectorXd& next_state, bool terminal)>
        transition;
    std::function<void()> after_step;
};

struct EpisodeOptions {
    std::uint64_t env_seed = 0;
    std::uint64_t decision_seed = 0;   // candidate streams and exploration noise
    std::vector<int> snapshot_steps;   // decisions at which candidate paths are recorded
    bool record_tracks = false;
    diffusion::SamplerOptions sampler;
    int candidates = 5;
};

/// Runs one episode with the given strategy. `agent` is needed for scoring
/// and for the actor strategy; `prior` for the diffusion strategy.
inline EpisodeOutcome run_episode(env::MissionEnv& environment, const lac::LacAgent* agent,
                                  const diffusion::DiffusionPrior* prior, const Strategy& strategy,
                                  const EpisodeOptions& opt, const StepHooks& hooks = {}) {
    if (strategy.source == ActionSource::diffusion) {
        if (!prior || !agent) throw ConfigError("diffusion strategy needs a prior and an agent to score candidates");
        if (strategy.rank < 0 || strategy.rank >= opt.candidates) throw ConfigError("candidate rank outside [0, K)");
    }
    if (strategy.source == ActionSource::actor && !agent) throw ConfigError("actor strategy needs an agent");
    const auto& cfg = environment.config();
    const auto n = static_cast<std::size_t>(cfg.auv_count);
    environment.reset(opt.env_seed);
    Rng rng(opt.decision_seed);
    env::DemoExpert expert(n, rng.next_u64());
    const env::HistoryEncoder proto(environment.observation_dim(), cfg.history);
    std::vector<env::HistoryEncoder> enc(n, proto);
    EpisodeOutcome out;
    out.tracks.resize(n);
    std::vector<Eigen::VectorXd> obs(n);
    for (std::size_t i = 0; i < n; ++i) obs[i] = environment.observation(i);
    const int k = opt.candidates;
    int stage = 0;
    while (!environment.finished()) {
        std::vector<env::Action> actions(n);
        switch (strategy.source) {
            case ActionSource::diffusion: {
                RowMatrix cond(static_cast<Eigen::Index>(n), proto.dim());
                for (std::size_t i = 0; i < n; ++i) cond.row(static_cast<Eigen::Index>(i)) = enc[i].encode(obs[i]).transpose();
                const std::uint64_t seed = rng.next_u64();
                std::vector<Rng> streams;
                for (std::size_t i = 0; i < n * static_cast<std::size_t>(k); ++i)
                    streams.push_back(diffusion::candidate_stream(seed, static_cast<int>(i)));
                const RowMatrix seqs = prior->candidates(cond, k, streams, opt.sampler);
                const bool snap = std::find(opt.snapshot_steps.begin(), opt.snapshot_steps.end(), environment.steps()) !=
                                  opt.snapshot_steps.end();
                for (std::size_t i = 0; i < n; ++i) {
                    const RowMatrix block = seqs.middleRows(static_cast<Eigen::Index>(i) * k, k);
                    const RowMatrix first = block.leftCols(env::kActionDim);
                    const auto sel = agent->select(obs[i], first);
                    const int pick = strategy.rank == 0 ? static_cast<int>(sel.index)
                                                        : rank_order(sel.scores)[static_cast<std::size_t>(strategy.rank)];
                    for (int c = 0; c < env::kActionDim; ++c) actions[i][static_cast<std::size_t>(c)] = first(pick, c);
                    if (snap) {
                        CandidateSnapshot s{stage, environment.steps(), static_cast<int>(i), {}, pick};
                        for (int j = 0; j < k; ++j)
                            s.paths.push_back(planned_path(block.row(j).transpose(), environment.vehicles()[i].pose.position(), cfg));
                        out.snapshots.push_back(std::move(s));
                    }
                }
                if (snap) ++stage;
                break;
            }
            case ActionSource::actor: {
                RowMatrix s(static_cast<Eigen::Index>(n), environment.observation_dim());
                for (std::size_t i = 0; i < n; ++i) s.row(static_cast<Eigen::Index>(i)) = obs[i].transpose();
                const RowMatrix a = strategy.stochastic ? agent->act(s, rng) : agent->act_deterministic(s);
                for (std::size_t i = 0; i < n; ++i)
                    for (int c = 0; c < env::kActionDim; ++c)
                        actions[i][static_cast<std::size_t>(c)] = a(static_cast<Eigen::Index>(i), c);
                break;
            }
            case ActionSource::random:
                for (auto& a : actions)
                    for (auto& v : a) v = rng.uniform(-1.0, 1.0);
                break;
            case ActionSource::expert:
                actions = expert.act(environment);
                break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            enc[i].push(environment.compact_state(i), actions[i]);
            if (opt.record_tracks) {
                const auto p = environment.vehicles()[i].pose.position();
                out.tracks[i].push_back({p.x(), p.y(), p.z()});
            }
        }
        const env::StepResult res = environment.step(actions);
        if (res.aborted) {
            out.aborted = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd next = environment.observation(i);
            out.episode_return += res.rewards[i];
            out.yaw_error += res.deltas[i].yaw_error;
            out.depth_error += res.deltas[i].depth_error;
            if (hooks.transition)
                hooks.transition(i, obs[i], actions[i], res.rewards[i], next, res.terminal);
            obs[i] = next;
        }
        ++out.steps;
        if (hooks.after_step) hooks.after_step();
    }
    if (out.steps > 0) {
        out.yaw_error /= static_cast<double>(out.steps * static_cast<int>(n));
        out.depth_error /= static_cast<double>(out.steps * static_cast<int>(n));
    }
    out.metrics = environment.metrics();
    return out;
}

struct AdaptationSettings {
    bool enabled = true;
    int every = 10;  // episodes per stability window
    stability::SelectorThresholds thresholds;
    stability::TaskDescription task{"collect data from every sensor node with the AUV team",
                                    {stability::Priority::coverage},
                                    dynamics::SeaCondition::ideal};
    stability::LlmEndpoint endpoint;
};

struct TrainingSettings {
    int episodes = 300;
    bool use_diffusion = true;
    int updates_per_step = 1;
    diffusion::SamplerOptions sampler;
    AdaptationSettings adaptation;
};

/// Everything logged for one training episode.
struct EpisodeRecord {
    int episode = 0;
    double episode_return = 0.0;
    int steps = 0;
    env::MissionMetrics metrics;
    int updates = 0;
    int violations = 0;
    double mean_lyapunov = 0.0;
    double lambda = 0.0;
    double alpha = 0.0;
    lac::LyapunovForm form = lac::LyapunovForm::softplus;
};

struct TrainingHooks {
    std::function<void(const EpisodeRecord&)> episode;
    std::function<void(const lac::Diagnostics&)> iteration;
    std::function<void(const stability::DecisionRecord&)> decision;
};

/// Algorithm loop: act (diffusion candidates filtered by the critic, or the
/// actor alone), store per-AUV transitions, update after every decision and
/// adapt the Lyapunov form and coefficient between stability windows.
class Trainer {
public:
    Trainer(env::ScenarioConfig scenario, dynamics::AuvModel model, lac::LacConfig lac_cfg, TrainingSettings settings,
            std::uint64_t seed, const diffusion::DiffusionPrior* prior)
        : env_(std::move(scenario), std::move(model)),
          settings_(std::move(settings)),
          prior_(prior),
          agent_(with_state_dim(lac_cfg, env_.observation_dim()), Rng(seed).split(1).next_u64()),
          buffer_(lac_cfg.buffer_capacity, env_.observation_dim(), env::kActionDim),
          episode_seeds_(Rng(seed).split(2)),
          decision_seeds_(Rng(seed).split(3)),
          selector_(settings_.adaptation.thresholds) {
        if (settings_.episodes < 0 || settings_.updates_per_step < 0) throw ConfigError("invalid training budget");
        if (settings_.use_diffusion) {
            if (!prior_) throw ConfigError("diffusion training needs a prior checkpoint (or --no-diffusion)");
            if (prior_->config().net.cond_dim !=
                env::HistoryEncoder(env_.observation_dim(), env_.config().history).dim())
                throw ShapeError("prior condition width does not match the scenario encoding");
        }
        settings_.adaptation.task.validate();
    }

    [[nodiscard]] lac::LacAgent& agent() noexcept { return agent_; }
    [[nodiscard]] const lac::LacAgent& agent() const noexcept { return agent_; }
    [[nodiscard]] const lac::ReplayBuffer& buffer() const noexcept { return buffer_; }
    [[nodiscard]] const std::vector<EpisodeRecord>& history() const noexcept { return history_; }
    [[nodiscard]] int episodes_done() const noexcept { return static_cast<int>(history_.size()); }

    EpisodeRecord run_episode(const TrainingHooks& hooks = {}) {
        EpisodeRecord rec;
        rec.episode = episodes_done();
        std::vector<Eigen::VectorXd> visited_s;
        std::vector<Eigen::VectorXd> visited_a;
        StepHooks step;
        step.transition = [&](std::size_t, const Eigen::VectorXd& s, const env::Action& a, double r,
                              const Eigen::VectorXd& s2, bool terminal) {
            Eigen::VectorXd av(env::kActionDim);
            for (int c = 0; c < env::kActionDim; ++c) av[c] = a[static_cast<std::size_t>(c)];
            buffer_.add({s, av, r, s2, terminal});
            visited_s.push_back(s);
            visited_a.push_back(std::move(av));
        };
        step.after_step = [&] {
            for (int u = 0; u < settings_.updates_per_step; ++u) {
                const lac::Diagnostics d = agent_.train_iteration(buffer_);
                if (d.warming_up) continue;
                ++rec.updates;
                if (d.delta_l > 0.0) ++rec.violations;
                if (hooks.iteration) hooks.iteration(d);
            }
        };
        EpisodeOptions opt;
        opt.env_seed = episode_seeds_.next_u64();
        opt.decision_seed = decision_seeds_.next_u64();
        opt.sampler = settings_.sampler;
        opt.candidates = prior_ ? prior_->config().candidates : 1;
        const Strategy strategy{settings_.use_diffusion ? ActionSource::diffusion : ActionSource::actor, 0, true};
        const EpisodeOutcome out = harness::run_episode(env_, &agent_, prior_, strategy, opt, step);
        if (out.aborted) throw NumericError("environment aborted during training episode " + std::to_string(rec.episode));
        rec.episode_return = out.episode_return;
        rec.steps = out.steps;
        rec.metrics = out.metrics;
        if (!visited_s.empty()) {
            RowMatrix s(static_cast<Eigen::Index>(visited_s.size()), env_.observation_dim());
            RowMatrix a(static_cast<Eigen::Index>(visited_a.size()), env::kActionDim);
            for (std::size_t r = 0; r < visited_s.size(); ++r) {
                s.row(static_cast<Eigen::Index>(r)) = visited_s[r].transpose();
                a.row(static_cast<Eigen::Index>(r)) = visited_a[r].transpose();
            }
            rec.mean_lyapunov = agent_.lyapunov_value(s, a).mean();
        }
        rec.lambda = agent_.duals().lambda();
        rec.alpha = agent_.duals().alpha;
        rec.form = agent_.form();
        history_.push_back(rec);
        if (hooks.episode) hooks.episode(rec);
        adapt(hooks);
        return rec;
    }

    void run(const TrainingHooks& hooks = {}) {
        while (episodes_done() < settings_.episodes) run_episode(hooks);
    }

    /// Everything needed to continue the run exactly: agent and optimizer
    /// state, replay contents, seed streams, selector streak and history.
    void save_state(const std::filesystem::path& path) const {
        nn::BinaryWriter w;
        w.bytes(kStateMagic.data(), kStateMagic.size());
        w.u32(1);
        w.u32(settings_.use_diffusion ? 1 : 0);
        w.str(episode_seeds_.state());
        w.str(decision_seeds_.state());
        w.u32(static_cast<std::uint32_t>(selector_.streak()));
        agent_.write_state(w);
        buffer_.write(w);
        w.u64(history_.size());
        for (const auto& r : history_) {
            w.u32(static_cast<std::uint32_t>(r.episode));
            w.f64(r.episode_return);
            w.u32(static_cast<std::uint32_t>(r.steps));
            w.f64(r.metrics.delivered);
            w.f64(r.metrics.duration);
            w.f64(r.metrics.energy);
            w.u32(static_cast<std::uint32_t>(r.metrics.serviced));
            w.u32(static_cast<std::uint32_t>(r.metrics.collisions));
            w.u32(static_cast<std::uint32_t>(r.metrics.auv_count));
            w.u32(static_cast<std::uint32_t>(r.updates));
            w.u32(static_cast<std::uint32_t>(r.violations));
            w.f64(r.mean_lyapunov);
            w.f64(r.lambda);
            w.f64(r.alpha);
            w.str(lac::to_string(r.form));
        }
        w.save(path);
    }

    void load_state(const std::filesystem::path& path) {
        auto r = nn::BinaryReader::open(path);
        r.expect_magic(kStateMagic);
        if (r.u32() != 1) throw FormatError("unsupported training snapshot version");
        if ((r.u32() != 0) != settings_.use_diffusion)
            throw ConfigError("training snapshot was written with a different diffusion mode");
        episode_seeds_.restore(r.str());
        decision_seeds_.restore(r.str());
        selector_.set_streak(static_cast<int>(r.u32()));
        agent_.read_state(r);
        buffer_.read(r);
        history_.clear();
        const auto n = r.u64();
        for (std::uint64_t i = 0; i < n; ++i) {
            EpisodeRecord e;
            e.episode = static_cast<int>(r.u32());
            e.episode_return = r.f64();
            e.steps = static_cast<int>(r.u32());
            e.metrics.delivered = r.f64();
            e.metrics.duration = r.f64();
            e.metrics.energy = r.f64();
            e.metrics.serviced = static_cast<int>(r.u32());
            e.metrics.collisions = static_cast<int>(r.u32());
            e.metrics.auv_count = static_cast<int>(r.u32());
            e.updates = static_cast<int>(r.u32());
            e.violations = static_cast<int>(r.u32());
            e.mean_lyapunov = r.f64();
            e.lambda = r.f64();
            e.alpha = r.f64();
            e.form = lac::parse_lyapunov_form(r.str());
            history_.push_back(e);
        }
        if (!r.at_end()) throw FormatError("trailing bytes in training snapshot");
    }

private:
    static constexpr std::string_view kStateMagic = "DPLACTRN";

    static lac::LacConfig with_state_dim(lac::LacConfig c, int dim) {
        c.state_dim = dim;
        c.action_dim = env::kActionDim;
        return c;
    }

    void adapt(const TrainingHooks& hooks) {
        const auto& a = settings_.adaptation;
        if (!a.enabled || a.every < stability::kMinReportWindow || episodes_done() % a.every != 0) return;
        std::vector<stability::EpisodeStats> window;
        for (auto it = history_.end() - a.every; it != history_.end(); ++it)
            window.push_back({it->episode_return, it->updates, it->violations, it->mean_lyapunov});
        const stability::StabilityReport report = stability::evaluate_stability(window);
        const stability::SelectorDecision current{agent_.form(), agent_.duals().alpha, ""};
        const stability::LlmOutcome out = stability::llm_select(report, a.task, current, selector_, a.endpoint);
        const stability::ApplyOutcome applied = stability::apply_decision(out.decision, agent_);
        if (hooks.decision) {
            stability::DecisionRecord r;
            r.episode = episodes_done();
            r.timestamp = stability::utc_timestamp();
            r.report = report;
            r.current = current;
            r.rule_decision = out.rule_decision;
            r.decision = out.decision;
            r.source = out.source;
            r.error = out.error;
            r.prompt = out.prompt;
            r.reply = out.reply;
            r.applied_noop = applied.noop();
            hooks.decision(r);
        }
    }

    env::MissionEnv env_;
    TrainingSettings settings_;
    const diffusion::DiffusionPrior* prior_;
    lac::LacAgent agent_;
    lac::ReplayBuffer buffer_;
    Rng episode_seeds_;
    Rng decision_seeds_;
    stability::RuleSelector selector_;
    std::vector<EpisodeRecord> history_;
};

}  // namespace dplac::harness
