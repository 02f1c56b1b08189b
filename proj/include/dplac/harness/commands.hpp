#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <thread>

#include "dplac/control/benchmark.hpp"
#include "dplac/harness/config.hpp"
#include "dplac/harness/report.hpp"
#include "dplac/harness/svg.hpp"

namespace dplac::harness {

using Progress = std::function<void(const std::string&)>;

/// File layout of one experiment directory. Every verb reads its inputs from
/// and writes its outputs under the same root.
struct RunPaths {
    std::filesystem::path root;

    [[nodiscard]] std::filesystem::path demos() const { return root / "demos.bin"; }
    [[nodiscard]] std::filesystem::path demo_summary() const { return root / "demos_summary.json"; }
    [[nodiscard]] std::filesystem::path prior() const { return root / "prior.bin"; }
    [[nodiscard]] std::filesystem::path loss_csv() const { return root / "diffusion_loss.csv"; }
    [[nodiscard]] std::filesystem::path prior_state() const { return root / "checkpoints" / "prior_state.bin"; }
    [[nodiscard]] std::filesystem::path prior_last_good() const { return root / "checkpoints" / "prior_last_good.bin"; }
    [[nodiscard]] std::filesystem::path train_dir(bool diffusion) const {
        return root / "train" / (diffusion ? "diffusion_lac" : "lac");
    }
    [[nodiscard]] std::filesystem::path agent(bool diffusion) const { return train_dir(diffusion) / "agent.bin"; }
    [[nodiscard]] std::filesystem::path evaluate_dir() const { return root / "evaluate"; }
    [[nodiscard]] std::filesystem::path ablation_dir() const { return root / "ablation"; }
    [[nodiscard]] std::filesystem::path sweep_dir() const { return root / "sweep"; }
    [[nodiscard]] std::filesystem::path plots_dir() const { return root / "plots"; }
};

inline std::string framework_label(bool diffusion) { return diffusion ? "Diffusion+LAC" : "LAC"; }

inline std::string version_comment() { return "tool " + std::string(kToolVersion); }

/// Runs f(0..n-1) on a small worker pool; results keep their index order, so
/// the output does not depend on scheduling. The first failure is rethrown.
template <class F>
auto parallel_map(std::size_t n, F f, unsigned workers = 0) -> std::vector<decltype(f(std::size_t{0}))> {
    using R = decltype(f(std::size_t{0}));
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Keeps comment lines, the header and the data rows accepted by `keep`
/// (given the row's cells); used to roll logs back to a checkpoint.
inline void truncate_csv(const std::filesystem::path& path, const std::function<bool(const std::vector<std::string>&)>& keep) {
    if (!std::filesystem::exists(path)) return;
    std::ifstream is(path);
    std::string line, kept;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || !header) {
            if (!line.empty() && line[0] != '#') header = true;
            kept += line + '\n';
            continue;
        }
        if (keep(split_csv_line(line))) kept += line + '\n';
    }
    is.close();
    std::ofstream os(path, std::ios::trunc);
    os << kept;
}

inline lac::LacConfig agent_config(lac::LacConfig c, int state_dim) {
    c.state_dim = state_dim;
    c.action_dim = env::kActionDim;
    return c;
}

/// Loads an agent checkpoint read-only for evaluation.
inline lac::LacAgent load_agent(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing agent checkpoint '" + path.string() + "'");
    const env::MissionEnv probe(cfg.scenario, cfg.model());
    lac::LacAgent agent(agent_config(cfg.lac, probe.observation_dim()), 0);
    agent.load(path);
    return agent;
}

inline diffusion::DiffusionPrior load_prior(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error("missing diffusion checkpoint '" + path.string() + "' (run train-diffusion first)");
    return diffusion::DiffusionPrior::load(path);
}

// ---------------------------------------------------------------- gen-demos

struct DemoSummary {
    int episodes = 0;
    int dropped = 0;
    long windows = 0;
    std::string hash;
    std::vector<int> kept_steps;
};

inline DemoSummary gen_demos(const ExperimentConfig& cfg, const RunPaths& run, const Progress& log = {}) {
    cfg.validate();
    write_resolved_config(cfg, run.root);
    const diffusion::DemoDataset data = diffusion::generate_demos(cfg.scenario, cfg.model(), cfg.demos);
    data.save(run.demos());
    DemoSummary s{data.episodes, data.dropped, static_cast<long>(data.size()), data.hash(), data.kept_steps};
    nlohmann::json j{{"version", std::string(kToolVersion)},
                     {"episodes", s.episodes},
                     {"kept", s.episodes - s.dropped},
                     {"dropped", s.dropped},
                     {"windows", s.windows},
                     {"kept_steps", s.kept_steps},
                     {"horizon", data.horizon},
                     {"cond_dim", data.cond_dim()},
                     {"auv_count", cfg.scenario.auv_count},
                     {"seed", cfg.demos.seed},
                     {"hash", s.hash}};
    std::ofstream(run.demo_summary()) << j.dump(2) << '\n';
    if (log)
        log("demos: " + std::to_string(s.episodes - s.dropped) + " kept, " + std::to_string(s.dropped) + " dropped, " +
            std::to_string(s.windows) + " windows, hash " + s.hash);
    return s;
}

// ---------------------------------------------------------- train-diffusion

struct DiffusionSummary {
    int steps = 0;
    bool resumed = false;
    double final_loss = 0.0;
};

/// Trains the prior to the configured step budget, checkpointing the full
/// trainer state; an existing snapshot in the run directory is resumed.
/// A non-finite loss aborts after saving the last good parameters.
inline DiffusionSummary train_diffusion(const ExperimentConfig& cfg, const RunPaths& run,
                                        std::optional<std::filesystem::path> dataset = std::nullopt,
                                        const Progress& log = {}) {
    cfg.validate();
    write_resolved_config(cfg, run.root);
    const auto data_path = dataset.value_or(run.demos());
    if (!std::filesystem::exists(data_path)) throw Error("missing demo dataset '" + data_path.string() + "' (run gen-demos first)");
    const diffusion::DemoDataset data = diffusion::DemoDataset::load(data_path);
    diffusion::PriorTrainer trainer(data, cfg.diffusion.model, cfg.diffusion.seed);
    DiffusionSummary out;
    std::filesystem::create_directories(run.prior_state().parent_path());
    if (std::filesystem::exists(run.prior_state())) {
        trainer.load_state(run.prior_state());
        out.resumed = true;
        const int done = trainer.steps_done();
        truncate_csv(run.loss_csv(), [done](const auto& cells) { return std::stoi(cells.at(0)) <= done; });
        if (log) log("resuming prior training at step " + std::to_string(done));
    }
    CsvWriter csv(run.loss_csv(), {version_comment(), "loss: mean squared noise-prediction error per minibatch"},
                  {"step", "loss"}, out.resumed);
    while (trainer.steps_done() < cfg.diffusion.train_steps) {
        diffusion::TrainingPoint p;
        try {
            p = trainer.step();
        } catch (const NumericError& e) {
            trainer.prior().save(run.prior_last_good());
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(trainer.steps_done() + 1) +
                               "; last good parameters saved to " + run.prior_last_good().string());
        }
        csv.row(p.step, p.loss);
        out.final_loss = p.loss;
        if (p.step % cfg.diffusion.checkpoint_every == 0) {
            trainer.save_state(run.prior_state());
            trainer.prior().save(run.prior());
            if (log) log("step " + std::to_string(p.step) + " loss " + std::to_string(p.loss));
        }
    }
    trainer.save_state(run.prior_state());
    trainer.prior().save(run.prior());
    out.steps = trainer.steps_done();
    return out;
}

// -------------------------------------------------------------------- train

struct TrainSummary {
    int episodes = 0;
    bool resumed = false;
    std::vector<EpisodeRecord> history;
};

inline const std::vector<std::string>& episode_columns() {
    static const std::vector<std::string> cols{"episode", "return", "steps", "sdr", "ec", "ssn", "collisions",
                                               "updates", "violations", "mean_lyapunov", "lambda", "alpha", "form"};
    return cols;
}

/// Full training loop with append-only logs. A snapshot in the run's
/// checkpoint directory is resumed and the logs are rolled back to it, so the
/// remaining rows match an uninterrupted run.
inline TrainSummary train_agent(const ExperimentConfig& cfg, const RunPaths& run, bool use_diffusion,
                                std::optional<std::filesystem::path> prior_path = std::nullopt,
                                const Progress& log = {}) {
    cfg.validate();
    const auto dir = run.train_dir(use_diffusion);
    write_resolved_config(cfg, dir);
    std::optional<diffusion::DiffusionPrior> prior;
    if (use_diffusion) prior.emplace(load_prior(prior_path.value_or(run.prior())));
    TrainingSettings ts = cfg.training_settings();
    ts.use_diffusion = use_diffusion;
    Trainer trainer(cfg.scenario, cfg.model(), cfg.lac, ts, cfg.training.seed, prior ? &*prior : nullptr);

    const auto state = dir / "checkpoints" / "trainer_state.bin";
    const auto episodes_csv = dir / "episodes.csv";
    const auto diag_csv = dir / "diagnostics.csv";
    const stability::DecisionLog decisions(dir / "decisions.jsonl");
    std::filesystem::create_directories(state.parent_path());
    TrainSummary out;
    if (std::filesystem::exists(state)) {
        trainer.load_state(state);
        out.resumed = true;
        const int done = trainer.episodes_done();
        const long iters = trainer.agent().iterations();
        truncate_csv(episodes_csv, [done](const auto& c) { return std::stoi(c.at(0)) < done; });
        truncate_csv(diag_csv, [iters](const auto& c) { return std::stol(c.at(0)) < iters; });
        if (std::filesystem::exists(decisions.path())) {
            auto kept = decisions.read();
            std::erase_if(kept, [done](const auto& r) { return r.episode > done; });
            std::filesystem::remove(decisions.path());
            for (const auto& r : kept) decisions.append(r);
        }
        if (log) log("resuming training at episode " + std::to_string(done));
    } else {
        std::filesystem::remove(decisions.path());
    }
    CsvWriter episodes(episodes_csv,
                       {version_comment(), "framework " + framework_label(use_diffusion),
                        "units: return summed over AUVs; sdr MBit/s; ec W per AUV; ssn nodes"},
                       episode_columns(), out.resumed);
    CsvWriter diagnostics(diag_csv, {version_comment()},
                          {"iteration", "q_loss", "l_loss", "actor_loss", "delta_l", "lambda", "beta", "alpha", "entropy"},
                          out.resumed);
    TrainingHooks hooks;
    hooks.episode = [&](const EpisodeRecord& r) {
        episodes.row(r.episode, r.episode_return, r.steps, r.metrics.sdr(), r.metrics.ec(), r.metrics.serviced,
                     r.metrics.collisions, r.updates, r.violations, r.mean_lyapunov, r.lambda, r.alpha,
                     lac::to_string(r.form));
        if (log && (r.episode + 1) % 10 == 0)
            log("episode " + std::to_string(r.episode + 1) + " return " + std::to_string(r.episode_return));
    };
    hooks.iteration = [&](const lac::Diagnostics& d) {
        diagnostics.row(d.iteration, d.q_loss, d.l_loss, d.actor_loss, d.delta_l, d.lambda, d.beta, d.alpha, d.entropy);
    };
    hooks.decision = [&](const stability::DecisionRecord& r) { decisions.append(r); };
    while (trainer.episodes_done() < ts.episodes) {
        trainer.run_episode(hooks);
        const int done = trainer.episodes_done();
        if (done % cfg.training.checkpoint_every == 0) {
            trainer.save_state(state);
            trainer.agent().save(dir / "checkpoints" / ("agent_ep" + std::to_string(done) + ".bin"), &trainer.buffer());
        }
    }
    trainer.save_state(state);
    trainer.agent().save(dir / "agent.bin", &trainer.buffer());
    out.episodes = trainer.episodes_done();
    out.history = trainer.history();
    return out;
}

// ----------------------------------------------------------------- evaluate

struct ResultRow {
    std::string framework;
    control::ControllerKind controller{};
    dynamics::SeaCondition condition{};
    int seeds = 0;
    MeanStd sdr, ec, ssn, ret;
};

struct TrackingRow {
    control::ControllerKind controller{};
    dynamics::SeaCondition condition{};
    int seeds = 0;
    MeanStd yaw, depth;      // mean absolute error over seeds
    double yaw_spread = 0.0;  // mean within-run standard deviation
    double depth_spread = 0.0;
};

struct EvaluationResult {
    std::vector<ResultRow> table;
    std::vector<TrackingRow> tracking;
};

/// Per-seed episode stream shared by every strategy evaluated at that seed.
inline std::pair<std::uint64_t, std::uint64_t> evaluation_seeds(std::uint64_t seed, int episode) {
    Rng r = Rng(seed).split(static_cast<std::uint64_t>(episode));
    const std::uint64_t env_seed = r.next_u64();
    return {env_seed, r.next_u64()};
}

inline std::vector<int> snapshot_steps(const env::ScenarioConfig& s) {
    return {0, s.max_steps / 3, (2 * s.max_steps) / 3};
}

/// Writes one recorded episode as track and candidate CSVs.
inline void write_trajectory(const EpisodeOutcome& ep, const std::filesystem::path& dir) {
    CsvWriter tracks(dir / "trajectory.csv", {version_comment(), "units: m, inertial frame"}, {"auv", "step", "x", "y", "z"});
    for (std::size_t a = 0; a < ep.tracks.size(); ++a)
        for (std::size_t k = 0; k < ep.tracks[a].size(); ++k)
            tracks.row(a, k, ep.tracks[a][k][0], ep.tracks[a][k][1], ep.tracks[a][k][2]);
    CsvWriter cands(dir / "candidates.csv", {version_comment(), "dead-reckoned horizontal candidate paths, m"},
                    {"stage", "decision", "auv", "candidate", "chosen", "point", "x", "y"});
    for (const auto& s : ep.snapshots)
        for (std::size_t j = 0; j < s.paths.size(); ++j)
            for (std::size_t p = 0; p < s.paths[j].size(); ++p)
                cands.row(s.stage, s.decision, s.auv, j, static_cast<int>(j) == s.chosen ? 1 : 0, p, s.paths[j][p][0],
                          s.paths[j][p][1]);
}

/// Crossed evaluation over frameworks x controllers x conditions x seeds,
/// plus the tracking benchmark. Checkpoints are only read.
inline EvaluationResult evaluate(const ExperimentConfig& cfg, const RunPaths& run,
                                 std::optional<std::filesystem::path> prior_path = std::nullopt,
                                 const Progress& log = {}) {
    cfg.validate();
    const auto dir = run.evaluate_dir();
    write_resolved_config(cfg, dir);
    const diffusion::DiffusionPrior prior = load_prior(prior_path.value_or(run.prior()));
    const lac::LacAgent diff_agent = load_agent(cfg, run.agent(true));
    const lac::LacAgent plain_agent = load_agent(cfg, run.agent(false));
    const dynamics::AuvModel model = cfg.model();
    const auto& ev = cfg.evaluation;

    struct Job {
        bool diffusion;
        control::ControllerKind controller;
        dynamics::SeaCondition condition;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (bool diffusion : {true, false})
        for (auto c : ev.controllers)
            for (auto s : ev.conditions)
                for (auto seed : ev.seeds) jobs.push_back({diffusion, c, s, seed});

    struct SeedResult {
        double sdr = 0, ec = 0, ssn = 0, ret = 0;
    };
    const auto results = parallel_map(jobs.size(), [&](std::size_t i) {
        const Job& job = jobs[i];
        env::ScenarioConfig sc = cfg.scenario;
        sc.controller = job.controller;
        sc.sea = job.condition;
        env::MissionEnv environment(sc, model);
        SeedResult r;
        for (int e = 0; e < ev.episodes_per_seed; ++e) {
            EpisodeOptions opt;
            std::tie(opt.env_seed, opt.decision_seed) = evaluation_seeds(job.seed, e);
            opt.candidates = prior.config().candidates;
            const Strategy st = job.diffusion ? Strategy{ActionSource::diffusion, 0, false}
                                              : Strategy{ActionSource::actor, 0, false};
            const EpisodeOutcome out = run_episode(environment, job.diffusion ? &diff_agent : &plain_agent,
                                                   &prior, st, opt);
            if (out.aborted) throw NumericError("environment aborted during evaluation");
            r.sdr += out.metrics.sdr();
            r.ec += out.metrics.ec();
            r.ssn += out.metrics.serviced;
            r.ret += out.episode_return;
        }
        const double n = ev.episodes_per_seed;
        return SeedResult{r.sdr / n, r.ec / n, r.ssn / n, r.ret / n};
    });

    EvaluationResult out;
    CsvWriter table(dir / "results.csv",
                    {version_comment(), "units: sdr MBit/s; ec W per AUV; ssn nodes; return summed over AUVs",
                     "mean and sample std over evaluation seeds; desk-scale magnitudes are not comparable to reference tables"},
                    {"framework", "controller", "condition", "seeds", "sdr_mean", "sdr_std", "ec_mean", "ec_std",
                     "ssn_mean", "ssn_std", "return_mean", "return_std"});
    const std::size_t per_cell = ev.seeds.size();
    for (std::size_t c = 0; c < jobs.size(); c += per_cell) {
        std::vector<double> sdr, ec, ssn, ret;
        for (std::size_t k = c; k < c + per_cell; ++k) {
            sdr.push_back(results[k].sdr);
            ec.push_back(results[k].ec);
            ssn.push_back(results[k].ssn);
            ret.push_back(results[k].ret);
        }
        ResultRow row{framework_label(jobs[c].diffusion), jobs[c].controller, jobs[c].condition,
                      static_cast<int>(per_cell), mean_std(sdr), mean_std(ec), mean_std(ssn), mean_std(ret)};
        table.row(row.framework, control::to_string(row.controller), dynamics::to_string(row.condition), row.seeds,
                  row.sdr.mean, row.sdr.std, row.ec.mean, row.ec.std, row.ssn.mean, row.ssn.std, row.ret.mean, row.ret.std);
        out.table.push_back(std::move(row));
    }

    struct TrackJob {
        control::ControllerKind controller;
        dynamics::SeaCondition condition;
        std::uint64_t seed;
    };
    std::vector<TrackJob> tjobs;
    for (auto c : ev.controllers)
        for (auto s : ev.conditions)
            for (auto seed : ev.seeds) tjobs.push_back({c, s, seed});
    const auto stats = parallel_map(tjobs.size(), [&](std::size_t i) {
        const auto& j = tjobs[i];
        return control::tracking_benchmark(model, j.controller, cfg.scenario.gains, cfg.scenario.actuators,
                                           dynamics::default_sea(j.condition, model.params()), j.seed,
                                           ev.tracking_duration);
    });
    CsvWriter tracking(dir / "tracking.csv",
                       {version_comment(), "units: yaw rad, depth m; mean absolute error per run, then mean/std over seeds",
                        "spread columns: mean within-run standard deviation of the absolute error"},
                       {"controller", "condition", "seeds", "yaw_mean", "yaw_std", "yaw_spread", "depth_mean",
                        "depth_std", "depth_spread"});
    for (std::size_t c = 0; c < tjobs.size(); c += per_cell) {
        std::vector<double> y, d, ys, ds;
        for (std::size_t k = c; k < c + per_cell; ++k) {
            y.push_back(stats[k].yaw_mean);
            d.push_back(stats[k].depth_mean);
            ys.push_back(stats[k].yaw_std);
            ds.push_back(stats[k].depth_std);
        }
        TrackingRow row{tjobs[c].controller, tjobs[c].condition, static_cast<int>(per_cell), mean_std(y), mean_std(d),
                        mean_std(ys).mean, mean_std(ds).mean};
        tracking.row(control::to_string(row.controller), dynamics::to_string(row.condition), row.seeds, row.yaw.mean,
                     row.yaw.std, row.yaw_spread, row.depth.mean, row.depth.std, row.depth_spread);
        out.tracking.push_back(row);
    }

    // One recorded diffusion episode for the trajectory figure.
    env::ScenarioConfig sc = cfg.scenario;
    sc.controller = ev.controllers.front();
    sc.sea = ev.conditions.front();
    env::MissionEnv environment(sc, model);
    EpisodeOptions opt;
    std::tie(opt.env_seed, opt.decision_seed) = evaluation_seeds(ev.seeds.front(), 0);
    opt.candidates = prior.config().candidates;
    opt.record_tracks = true;
    opt.snapshot_steps = snapshot_steps(sc);
    write_trajectory(run_episode(environment, &diff_agent, &prior, {ActionSource::diffusion, 0, false}, opt), dir);
    if (log) log("evaluation: " + std::to_string(out.table.size()) + " table rows written to " + dir.string());
    return out;
}

// -------------------------------------------------------- ablate-candidates

struct StrategyResult {
    std::string label;
    int rank = -1;  // candidate rank for OA/CA strategies, -1 for the actor
    std::vector<double> returns;
    MeanStd ret, sdr, ec, ssn;
};

struct AblationResult {
    std::vector<StrategyResult> strategies;  // OA, CA1..CA4, RL(LAC)
    double spearman = 0.0;                   // score rank vs realized return, pooled over episodes
    bool oa_best = false;
};

/// Six strategies on matched episodes: the selector's choice, the next four
/// candidates by score, and the agent's own actor.
inline AblationResult ablate_candidates(const ExperimentConfig& cfg, const RunPaths& run,
                                        std::optional<std::filesystem::path> prior_path = std::nullopt,
                                        const Progress& log = {}) {
    cfg.validate();
    const auto dir = run.ablation_dir();
    write_resolved_config(cfg, dir);
    const diffusion::DiffusionPrior prior = load_prior(prior_path.value_or(run.prior()));
    if (prior.config().candidates < 5)
        throw ConfigError("candidate ablation needs K >= 5 candidates (checkpoint has K = " +
                          std::to_string(prior.config().candidates) + ")");
    const lac::LacAgent agent = load_agent(cfg, run.agent(true));
    const dynamics::AuvModel model = cfg.model();
    const int episodes = cfg.ablation.episodes;
    const std::vector<std::pair<std::string, Strategy>> strategies{
        {"OA", {ActionSource::diffusion, 0, false}},  {"CA1", {ActionSource::diffusion, 1, false}},
        {"CA2", {ActionSource::diffusion, 2, false}}, {"CA3", {ActionSource::diffusion, 3, false}},
        {"CA4", {ActionSource::diffusion, 4, false}}, {"RL(LAC)", {ActionSource::actor, 0, false}}};
    const auto outcomes = parallel_map(strategies.size() * static_cast<std::size_t>(episodes), [&](std::size_t i) {
        const auto& st = strategies[i / static_cast<std::size_t>(episodes)].second;
        const int e = static_cast<int>(i % static_cast<std::size_t>(episodes));
        env::MissionEnv environment(cfg.scenario, model);
        EpisodeOptions opt;
        std::tie(opt.env_seed, opt.decision_seed) = evaluation_seeds(cfg.ablation.seed, e);
        opt.candidates = prior.config().candidates;
        const EpisodeOutcome out = run_episode(environment, &agent, &prior, st, opt);
        if (out.aborted) throw NumericError("environment aborted during ablation");
        return out;
    });
    AblationResult res;
    CsvWriter per_episode(dir / "ablation_episodes.csv", {version_comment()}, {"strategy", "episode", "return", "sdr", "ec", "ssn"});
    std::vector<double> score_rank, realized;
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        StrategyResult r;
        r.label = strategies[s].first;
        r.rank = strategies[s].second.source == ActionSource::diffusion ? strategies[s].second.rank : -1;
        std::vector<double> sdr, ec, ssn;
        for (int e = 0; e < episodes; ++e) {
            const auto& o = outcomes[s * static_cast<std::size_t>(episodes) + static_cast<std::size_t>(e)];
            r.returns.push_back(o.episode_return);
            sdr.push_back(o.metrics.sdr());
            ec.push_back(o.metrics.ec());
            ssn.push_back(o.metrics.serviced);
            per_episode.row(r.label, e, o.episode_return, o.metrics.sdr(), o.metrics.ec(), o.metrics.serviced);
            if (r.rank >= 0) {
                score_rank.push_back(-static_cast<double>(r.rank));  // higher score -> larger value
                realized.push_back(o.episode_return);
            }
        }
        r.ret = mean_std(r.returns);
        r.sdr = mean_std(sdr);
        r.ec = mean_std(ec);
        r.ssn = mean_std(ssn);
        res.strategies.push_back(std::move(r));
    }
    res.spearman = spearman(score_rank, realized);
    res.oa_best = true;
    for (std::size_t s = 1; s < 5; ++s) res.oa_best = res.oa_best && res.strategies[0].ret.mean >= res.strategies[s].ret.mean;
    CsvWriter table(dir / "ablation.csv",
                    {version_comment(), "episodes " + std::to_string(episodes) + ", seed " + std::to_string(cfg.ablation.seed),
                     "reference ordering OA > CA1 > RL(LAC) > CA2 > CA3 > CA4 (returns x1e3: -4620.9, -4931.1, -5193.4, "
                     "-5327.7, -5665.0, -8330.8); an ordering target, not a magnitude target",
                     "spearman(score rank, return) " + std::to_string(res.spearman)},
                    {"strategy", "rank", "return_mean", "return_std", "sdr_mean", "ec_mean", "ssn_mean"});
    for (const auto& r : res.strategies)
        table.row(r.label, r.rank, r.ret.mean, r.ret.std, r.sdr.mean, r.ec.mean, r.ssn.mean);
    nlohmann::json summary{{"version", std::string(kToolVersion)},
                           {"episodes", episodes},
                           {"spearman", res.spearman},
                           {"oa_best", res.oa_best}};
    std::ofstream(dir / "ablation_summary.json") << summary.dump(2) << '\n';
    if (log) log("ablation: spearman " + std::to_string(res.spearman) + (res.oa_best ? ", OA best" : ", OA not best"));
    return res;
}

// ---------------------------------------------------------- sweep-stability

struct SweepSetting {
    lac::LyapunovForm form = lac::LyapunovForm::softplus;
    double alpha = 0.1;

    [[nodiscard]] std::string label() const {
        std::ostringstream os;
        os << lac::to_string(form) << "@" << alpha;
        return os.str();
    }
    bool operator==(const SweepSetting&) const = default;
};

/// Union of the alpha family (SOFTPLUS head) and the form family (alpha
/// 0.1), without duplicates.
inline std::vector<SweepSetting> sweep_settings(const SweepSection& s) {
    std::vector<SweepSetting> out;
    const auto add = [&](SweepSetting x) {
        if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
    };
    for (double a : s.alphas) add({lac::LyapunovForm::softplus, a});
    for (auto f : s.forms) add({f, 0.1});
    return out;
}

struct SweepCurve {
    SweepSetting setting;
    std::uint64_t seed = 0;
    std::vector<double> lyapunov;  // episode-mean Lyapunov value per episode
    std::vector<double> returns;
    std::size_t first_trained = 0;  // first episode with critic updates

    /// Episodes from the first trained episode until the value halves. Warmup
    /// episodes only see the randomly initialized critic.
    [[nodiscard]] int episodes_to_half() const {
        if (first_trained >= lyapunov.size()) throw Error("sweep run never trained its critic");
        return harness::episodes_to_half({lyapunov.begin() + static_cast<long>(first_trained), lyapunov.end()});
    }
};

struct SweepResult {
    std::vector<SweepSetting> settings;
    std::vector<SweepCurve> curves;  // settings x seeds, setting-major
    std::vector<double> median_to_half;  // per setting

    [[nodiscard]] std::size_t index(const SweepSetting& s) const {
        const auto it = std::find(settings.begin(), settings.end(), s);
        if (it == settings.end()) throw Error("setting " + s.label() + " not in sweep");
        return static_cast<std::size_t>(it - settings.begin());
    }
};

inline const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> cols{"setting", "form", "alpha", "seed", "episode", "mean_lyapunov", "return"};
    return cols;
}

/// Matched-seed trainings with the form and coefficient held fixed (the
/// outer-loop adaptation is off), logging the episode-mean Lyapunov value.
inline SweepResult sweep_stability(const ExperimentConfig& cfg, const RunPaths& run,
                                   std::optional<std::filesystem::path> prior_path = std::nullopt,
                                   const Progress& log = {}) {
    cfg.validate();
    const auto dir = run.sweep_dir();
    write_resolved_config(cfg, dir);
    std::optional<diffusion::DiffusionPrior> prior;
    if (cfg.sweep.use_diffusion) prior.emplace(load_prior(prior_path.value_or(run.prior())));
    SweepResult res;
    res.settings = sweep_settings(cfg.sweep);
    const auto& seeds = cfg.sweep.seeds;
    const dynamics::AuvModel model = cfg.model();
    res.curves = parallel_map(res.settings.size() * seeds.size(), [&](std::size_t i) {
        const SweepSetting& st = res.settings[i / seeds.size()];
        const std::uint64_t seed = seeds[i % seeds.size()];
        lac::LacConfig lc = cfg.lac;
        lc.form = st.form;
        lc.alpha = st.alpha;
        TrainingSettings ts = cfg.training_settings();
        ts.episodes = cfg.sweep.episodes;
        ts.use_diffusion = cfg.sweep.use_diffusion;
        ts.adaptation.enabled = false;
        Trainer trainer(cfg.scenario, model, lc, ts, seed, prior ? &*prior : nullptr);
        trainer.run();
        SweepCurve c{st, seed, {}, {}, trainer.history().size()};
        for (const auto& r : trainer.history()) {
            if (r.updates > 0 && c.first_trained == trainer.history().size())
                c.first_trained = c.lyapunov.size();
            c.lyapunov.push_back(r.mean_lyapunov);
            c.returns.push_back(r.episode_return);
        }
        if (log) log("sweep " + st.label() + " seed " + std::to_string(seed) + " done");
        return c;
    });
    CsvWriter csv(dir / "lyapunov.csv",
                  {version_comment(), "mean_lyapunov: current Lyapunov critic averaged over the episode's visited pairs"},
                  sweep_columns());
    for (const auto& c : res.curves)
        for (std::size_t e = 0; e < c.lyapunov.size(); ++e)
            csv.row(c.setting.label(), lac::to_string(c.setting.form), c.setting.alpha, c.seed, e, c.lyapunov[e], c.returns[e]);
    CsvWriter summary(dir / "summary.csv", {version_comment(),
                       "episodes_to_half: episodes after the first trained episode until the value is at or below half "
                       "of that episode's; initial_mean is taken at the first trained episode"},
                      {"setting", "form", "alpha", "median_episodes_to_half", "initial_mean", "final_mean"});
    for (std::size_t s = 0; s < res.settings.size(); ++s) {
        std::vector<double> half, first, last;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto& c = res.curves[s * seeds.size() + k];
            half.push_back(c.episodes_to_half());
            first.push_back(c.lyapunov[c.first_trained]);
            last.push_back(c.lyapunov.back());
        }
        res.median_to_half.push_back(median(half));
        summary.row(res.settings[s].label(), lac::to_string(res.settings[s].form), res.settings[s].alpha,
                    res.median_to_half.back(), mean_std(first).mean, mean_std(last).mean);
    }
    return res;
}

// --------------------------------------------------------------- emit-plots

/// Trailing moving average with a window of `w` samples.
inline std::vector<double> moving_average(const std::vector<double>& xs, std::size_t w) {
    std::vector<double> out;
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sum += xs[i];
        if (i >= w) sum -= xs[i - w];
        out.push_back(sum / static_cast<double>(std::min(i + 1, w)));
    }
    return out;
}

inline std::string plot_loss(const CsvTable& t) {
    const auto steps = t.numbers("step");
    const auto loss = t.numbers("loss");
    return svg::line_chart("Diffusion training loss", "step", "loss",
                           {{"loss", steps, loss, {}, {}}, {"moving average (100)", steps, moving_average(loss, 100), {}, {}}});
}

inline std::string plot_returns(const std::vector<std::pair<std::string, CsvTable>>& runs) {
    std::vector<svg::Series> series;
    for (const auto& [name, t] : runs)
        series.push_back({name, t.numbers("episode"), moving_average(t.numbers("return"), 10), {}, {}});
    return svg::line_chart("Episode return (moving average of 10)", "episode", "return", series);
}

inline std::string plot_ablation(const CsvTable& t) {
    std::vector<std::string> labels;
    for (const auto& r : t.rows) labels.push_back(r.at(t.column("strategy")));
    return svg::bar_chart("Candidate ablation", "mean episode return", labels, t.numbers("return_mean"),
                          t.numbers("return_std"));
}

/// Mean +- std band over seeds for each setting selected by `pick`.
inline std::string plot_lyapunov(const CsvTable& t, const std::string& title,
                                 const std::function<bool(const std::string& form, double alpha)>& pick) {
    const auto setting_col = t.column("setting");
    const auto form_col = t.column("form");
    const auto alpha = t.numbers("alpha");
    const auto episode = t.numbers("episode");
    const auto value = t.numbers("mean_lyapunov");
    std::vector<std::string> order;
    std::map<std::string, std::map<int, std::vector<double>>> grouped;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& label = t.rows[r][setting_col];
        if (!pick(t.rows[r][form_col], alpha[r])) continue;
        if (!grouped.count(label)) order.push_back(label);
        grouped[label][static_cast<int>(episode[r])].push_back(value[r]);
    }
    std::vector<svg::Series> series;
    for (const auto& label : order) {
        svg::Series s{label, {}, {}, {}, {}};
        for (const auto& [e, vs] : grouped[label]) {
            const MeanStd m = mean_std(vs);
            s.x.push_back(e);
            s.y.push_back(m.mean);
            s.lo.push_back(m.mean - m.std);
            s.hi.push_back(m.mean + m.std);
        }
        series.push_back(std::move(s));
    }
    return svg::line_chart(title, "episode", "episode-mean Lyapunov value", series);
}

inline std::string plot_trajectory(const CsvTable& tracks, const CsvTable& candidates) {
    std::vector<svg::Polyline> lines;
    std::vector<std::string> legend, colors;
    const auto auv = tracks.numbers("auv");
    const auto x = tracks.numbers("x");
    const auto y = tracks.numbers("y");
    std::map<int, std::vector<std::array<double, 2>>> paths;
    for (std::size_t r = 0; r < auv.size(); ++r) paths[static_cast<int>(auv[r])].push_back({x[r], y[r]});
    for (const auto& [a, pts] : paths) {
        const std::string color = svg::kPalette[static_cast<std::size_t>(a) % svg::kPalette.size()];
        lines.push_back({pts, color, 2.0, false, -1});
        legend.push_back("AUV " + std::to_string(a));
        colors.push_back(color);
    }
    // Candidate overlays of the first AUV: K polylines per snapshot stage.
    const auto stage = candidates.numbers("stage");
    const auto cauv = candidates.numbers("auv");
    const auto cand = candidates.numbers("candidate");
    const auto chosen = candidates.numbers("chosen");
    const auto cx = candidates.numbers("x");
    const auto cy = candidates.numbers("y");
    std::map<std::pair<int, int>, svg::Polyline> overlays;
    for (std::size_t r = 0; r < stage.size(); ++r) {
        if (cauv[r] != 0.0) continue;
        auto& l = overlays[{static_cast<int>(stage[r]), static_cast<int>(cand[r])}];
        l.group = static_cast<int>(stage[r]);
        l.stroke = chosen[r] != 0.0 ? "#000000" : "#9e9e9e";
        l.width = chosen[r] != 0.0 ? 1.8 : 1.0;
        l.dashed = chosen[r] == 0.0;
        l.points.push_back({cx[r], cy[r]});
    }
    for (auto& [key, l] : overlays) lines.push_back(std::move(l));
    if (!overlays.empty()) {
        legend.push_back("chosen candidate");
        colors.push_back("#000000");
        legend.push_back("other candidates");
        colors.push_back("#9e9e9e");
    }
    return svg::polyline_plot("Trajectories with candidate overlays", lines, legend, colors);
}

/// Renders every figure whose log exists under the run directory. A log with
/// a header and no rows gives an empty-axes figure.
inline std::vector<std::filesystem::path> emit_plots(const RunPaths& run, const std::filesystem::path& out_dir,
                                                     const Progress& log = {}) {
    namespace fs = std::filesystem;
    std::vector<fs::path> written;
    const auto emit = [&](const std::string& name, const std::string& content) {
        svg::write_file(out_dir / name, content);
        written.push_back(out_dir / name);
    };
    if (fs::exists(run.loss_csv())) emit("diffusion_loss.svg", plot_loss(read_csv(run.loss_csv())));
    std::vector<std::pair<std::string, CsvTable>> runs;
    if (fs::exists(run.root / "train")) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(run.root / "train"))
            if (e.is_directory() && fs::exists(e.path() / "episodes.csv")) dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) runs.emplace_back(d.filename().string(), read_csv(d / "episodes.csv"));
    }
    if (!runs.empty()) emit("returns.svg", plot_returns(runs));
    if (fs::exists(run.ablation_dir() / "ablation.csv")) emit("ablation.svg", plot_ablation(read_csv(run.ablation_dir() / "ablation.csv")));
    if (fs::exists(run.sweep_dir() / "lyapunov.csv")) {
        const CsvTable t = read_csv(run.sweep_dir() / "lyapunov.csv");
        emit("lyapunov_alpha.svg", plot_lyapunov(t, "Lyapunov value by coefficient (softplus head)",
                                                 [](const std::string& f, double) { return f == "softplus"; }));
        emit("lyapunov_form.svg", plot_lyapunov(t, "Lyapunov value by head form (alpha 0.1)",
                                                [](const std::string&, double a) { return std::abs(a - 0.1) < 1e-12; }));
    }
    const auto ev = run.evaluate_dir();
    if (fs::exists(ev / "trajectory.csv") && fs::exists(ev / "candidates.csv"))
        emit("trajectory.svg", plot_trajectory(read_csv(ev / "trajectory.csv"), read_csv(ev / "candidates.csv")));
    if (written.empty()) throw Error("no run logs found under '" + run.root.string() + "'");
    if (log) log("wrote " + std::to_string(written.size()) + " figures to " + out_dir.string());
    return written;
}

}  // namespace dplac::harness
