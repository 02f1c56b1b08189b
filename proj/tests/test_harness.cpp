#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "dplac/harness/commands.hpp"

using namespace dplac;
using namespace dplac::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dplac_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

/// Small enough that every command runs in about a second.
ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.scenario.node_count = 6;
    c.scenario.extent_x = c.scenario.extent_y = 40.0;
    c.scenario.extent_z = 20.0;
    c.scenario.max_steps = 12;
    c.scenario.history = 3;
    c.demos.episodes = 4;
    c.demos.stall_decisions = 1000;
    c.diffusion.model.steps = 100;
    c.diffusion.model.inference_steps = 10;
    c.diffusion.model.batch = 8;
    c.diffusion.model.net.width = 16;
    c.diffusion.model.net.cond_width = 16;
    c.diffusion.model.net.time_raw = 8;
    c.diffusion.model.net.time_dim = 8;
    c.diffusion.model.learning_rate = 1e-3;
    c.diffusion.train_steps = 30;
    c.diffusion.checkpoint_every = 10;
    c.lac.hidden = 16;
    c.lac.batch = 8;
    c.lac.warmup = 16;
    c.lac.buffer_capacity = 2000;
    c.training.episodes = 6;
    c.training.checkpoint_every = 3;
    c.adaptation.every = 5;
    c.evaluation.tracking_duration = 5.0;
    c.ablation.episodes = 2;
    c.sweep.episodes = 3;
    c.sweep.seeds = {1, 2};
    return c;
}

std::vector<double> column(const fs::path& csv, const std::string& name) { return read_csv(csv).numbers(name); }

}  // namespace

// ------------------------------------------------------------------ config

TEST(Config, DefaultsValidateAndRoundTrip) {
    const ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    auto j = to_json(c);
    EXPECT_EQ(j.at("version"), std::string(kToolVersion));
    j.erase("version");
    EXPECT_EQ(to_json(config_from_json(j)), to_json(c));
}

TEST(Config, OverridesOnlyTheGivenKeys) {
    const auto c = config_from_json(nlohmann::json::parse(R"({"scenario": {"max_steps": 77, "reward": {"collision": 5}},
                                                             "lac": {"form": "squared"}})"));
    EXPECT_EQ(c.scenario.max_steps, 77);
    EXPECT_EQ(c.scenario.weights.collision, 5.0);
    EXPECT_EQ(c.scenario.weights.service, env::RewardWeights{}.service);
    EXPECT_EQ(c.lac.form, lac::LyapunovForm::squared);
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
    for (const char* text : {R"({"bogus": 1})", R"({"scenario": {"bogus": 1}})", R"({"scenario": {"gains": {"yaw": {"pid": {"kx": 1}}}}})",
                             R"({"scenario": {"spawns": [{"x": 1, "y": 1, "z": 1, "yaw": 0, "roll": 0}]}})"}) {
        try {
            (void)config_from_json(nlohmann::json::parse(text));
            ADD_FAILURE() << "accepted " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find("unknown config key"), std::string::npos) << e.what();
        }
    }
}

TEST(Config, WrongTypesAndInvalidValuesAreRejected) {
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"lac": {"batch": 1.5}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"lac": {"twin_q": 1}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"scenario": {"sea": "stormy"}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"scenario": {"node_count": 0}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"evaluation": {"seeds": [1, 2, 3, 4]}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"demos": {"horizon": 3}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"({"sweep": {"alphas": [2.0]}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(nlohmann::json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, FileLoadingResolvesPathsAgainstTheConfigDirectory) {
    const auto dir = fresh_dir("cfgfile");
    fs::copy_file(fs::path(DPLAC_DATA_DIR) / "remus100.json", dir / "coeffs.json");
    std::ofstream(dir / "exp.json") << "// comment lines are allowed\n{\"coefficients\": \"coeffs.json\", \"version\": \"x\"}\n";
    const auto c = load_config(dir / "exp.json");
    EXPECT_EQ(c.coefficients, (dir / "coeffs.json").lexically_normal());
    EXPECT_NO_THROW((void)c.model());
    std::ofstream(dir / "bad.json") << "{\"scenario\": ";
    EXPECT_THROW((void)load_config(dir / "bad.json"), ConfigError);
    EXPECT_THROW((void)load_config(dir / "missing.json"), ConfigError);
}

TEST(Config, ResolvedConfigIsWrittenWithTheToolVersion) {
    const auto dir = fresh_dir("resolved");
    write_resolved_config(tiny_config(), dir);
    const auto j = nlohmann::json::parse(slurp(dir / "resolved_config.json"));
    EXPECT_EQ(j.at("version"), std::string(kToolVersion));
    EXPECT_EQ(j.at("scenario").at("max_steps"), 12);
}

TEST(Config, ShippedConfigsLoad) {
    for (const char* name : {"default.json", "desk.json"}) {
        const fs::path p = fs::path(DPLAC_CONFIG_DIR) / name;
        ASSERT_TRUE(fs::exists(p)) << p;
        EXPECT_NO_THROW((void)load_config(p)) << name;
    }
}

// ------------------------------------------------------------------ report

TEST(Report, MeanAndSampleStd) {
    const auto m = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
    EXPECT_DOUBLE_EQ(m.mean, 5.0);
    EXPECT_NEAR(m.std, std::sqrt(32.0 / 7.0), 1e-12);
    EXPECT_EQ(mean_std({3.0}).std, 0.0);
}

TEST(Report, AverageRanksShareTies) {
    EXPECT_EQ(average_ranks({10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
    EXPECT_EQ(average_ranks({3, 1, 2}), (std::vector<double>{3, 1, 2}));
}

TEST(Report, SpearmanMatchesTheSquaredRankDifferenceFormula) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + trial % 20;
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.normal();
            y[i] = 0.5 * x[i] + rng.normal();
        }
        const auto rx = average_ranks(x), ry = average_ranks(y);
        double d2 = 0.0;
        for (int i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
        EXPECT_NEAR(spearman(x, y), 1.0 - 6.0 * d2 / (n * (static_cast<double>(n) * n - 1.0)), 1e-12);
    }
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {10, 20, 30}), 1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {3, 2, 1}), -1.0);
    EXPECT_EQ(spearman({1, 1, 1}, {1, 2, 3}), 0.0);
    EXPECT_THROW((void)spearman({1}, {1}), Error);
    EXPECT_THROW((void)spearman({1, 2}, {1}), ShapeError);
}

TEST(Report, EpisodesToHalf) {
    EXPECT_EQ(episodes_to_half({1.0, 0.8, 0.5, 0.2}), 2);
    EXPECT_EQ(episodes_to_half({1.0, 0.9, 0.8}), 3);
    EXPECT_EQ(episodes_to_half({1.0, 2.0, 4.0}), 3);
    EXPECT_EQ(episodes_to_half({2.0, 0.1}), 1);
    EXPECT_THROW((void)episodes_to_half({}), Error);
}

TEST(Report, SweepCurveSkipsWarmupEpisodes) {
    SweepCurve c;
    c.lyapunov = {0.01, 0.01, 1.0, 0.6, 0.4};
    c.first_trained = 2;
    EXPECT_EQ(c.episodes_to_half(), 2);
    c.first_trained = 5;
    EXPECT_THROW((void)c.episodes_to_half(), Error);
}

TEST(Report, Median) {
    EXPECT_EQ(median({3, 1, 2}), 2.0);
    EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
    EXPECT_THROW((void)median({}), Error);
}

TEST(Report, CsvRoundTripAndMalformedInput) {
    const auto dir = fresh_dir("csv");
    {
        CsvWriter w(dir / "a.csv", {"tool x", "units: m"}, {"k", "v", "name"});
        w.row(1, 0.25, "a");
        w.row(2, -3.5, "b");
        EXPECT_THROW(w.row(1, 2), ShapeError);
    }
    const auto t = read_csv(dir / "a.csv");
    EXPECT_EQ(t.columns, (std::vector<std::string>{"k", "v", "name"}));
    EXPECT_EQ(t.numbers("v"), (std::vector<double>{0.25, -3.5}));
    EXPECT_THROW((void)t.numbers("name"), FormatError);
    EXPECT_THROW((void)t.column("missing"), FormatError);
    {
        CsvWriter w(dir / "a.csv", {"ignored"}, {"k", "v", "name"}, true);
        w.row(3, 1.0, "c");
    }
    EXPECT_EQ(read_csv(dir / "a.csv").rows.size(), 3u);
    EXPECT_EQ(slurp(dir / "a.csv").find("ignored"), std::string::npos);

    std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3\n";
    EXPECT_THROW((void)read_csv(dir / "bad.csv"), FormatError);
    std::ofstream(dir / "empty.csv") << "# only a comment\n";
    EXPECT_THROW((void)read_csv(dir / "empty.csv"), FormatError);

    truncate_csv(dir / "a.csv", [](const auto& c) { return std::stoi(c.at(0)) < 3; });
    EXPECT_EQ(read_csv(dir / "a.csv").numbers("k"), (std::vector<double>{1, 2}));
    EXPECT_NE(slurp(dir / "a.csv").find("# units: m"), std::string::npos);
}

TEST(Report, ParallelMapKeepsOrderAndRethrows) {
    const auto out = parallel_map(37, [](std::size_t i) { return static_cast<int>(i * i); }, 4);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
    EXPECT_THROW((void)parallel_map(5, [](std::size_t i) { if (i == 3) throw ConfigError("x"); return 0; }, 2),
                 ConfigError);
    EXPECT_TRUE(parallel_map(0, [](std::size_t) { return 1; }).empty());
}

// --------------------------------------------------------------------- svg

TEST(Svg, DeterministicAndEmptyAxes) {
    const std::vector<svg::Series> s{{"a", {0, 1, 2}, {1, 3, 2}, {0, 2, 1}, {2, 4, 3}}, {"b", {0, 1}, {5, 4}, {}, {}}};
    EXPECT_EQ(svg::line_chart("t", "x", "y", s), svg::line_chart("t", "x", "y", s));
    const auto empty = svg::line_chart("t", "x", "y", {});
    EXPECT_NE(empty.find("<svg"), std::string::npos);
    EXPECT_EQ(empty.find("<path"), std::string::npos);
    const auto empty_series = svg::line_chart("t", "x", "y", {{"a", {}, {}, {}, {}}});
    EXPECT_EQ(empty_series.find("<path"), std::string::npos);
    EXPECT_THROW((void)svg::line_chart("t", "x", "y", {{"a", {1}, {}, {}, {}}}), ShapeError);
    EXPECT_NE(svg::bar_chart("t", "y", {"a<b"}, {1.0}, {0.5}).find("a&lt;b"), std::string::npos);
}

TEST(Svg, GroupedPolylinesPerStage) {
    std::vector<svg::Polyline> lines{{{{0, 0}, {5, 5}}, "#000", 1.0, false, -1}};
    for (int g = 0; g < 3; ++g)
        for (int k = 0; k < 5; ++k) lines.push_back({{{0, 0}, {1.0 * k, 2.0 * g}}, "#111", 1.0, true, g});
    const auto doc = svg::polyline_plot("p", lines);
    std::size_t groups = 0;
    for (std::size_t at = doc.find("<g data-stage"); at != std::string::npos; at = doc.find("<g data-stage", at + 1)) {
        ++groups;
        const auto end = doc.find("</g>", at);
        int count = 0;
        for (auto p = doc.find("<polyline", at); p != std::string::npos && p < end; p = doc.find("<polyline", p + 1)) ++count;
        EXPECT_EQ(count, 5);
    }
    EXPECT_EQ(groups, 3u);
}

// ---------------------------------------------------------------- commands

TEST(Commands, GenDemosIsDeterministicAndCountsWindows) {
    const auto cfg = tiny_config();
    const RunPaths a{fresh_dir("demos_a")}, b{fresh_dir("demos_b")};
    const auto sa = gen_demos(cfg, a);
    const auto sb = gen_demos(cfg, b);
    EXPECT_EQ(sa.hash, sb.hash);
    EXPECT_EQ(slurp(a.demos()), slurp(b.demos()));
    long expected = 0;
    for (int steps : sa.kept_steps) expected += cfg.scenario.auv_count * std::max(0, steps - cfg.demos.horizon + 1);
    EXPECT_EQ(sa.windows, expected);
    EXPECT_EQ(static_cast<int>(sa.kept_steps.size()), sa.episodes - sa.dropped);
    const auto j = nlohmann::json::parse(slurp(a.demo_summary()));
    EXPECT_EQ(j.at("windows"), expected);
    EXPECT_TRUE(fs::exists(a.root / "resolved_config.json"));

    auto bad = cfg;
    bad.scenario.node_count = 0;
    EXPECT_THROW((void)gen_demos(bad, RunPaths{fresh_dir("demos_bad")}), ConfigError);
}

TEST(Commands, TrainDiffusionResumesToIdenticalLosses) {
    const auto cfg = tiny_config();
    const RunPaths full{fresh_dir("diff_full")}, split{fresh_dir("diff_split")};
    gen_demos(cfg, full);
    fs::copy_file(full.demos(), split.demos());
    const auto s = train_diffusion(cfg, full);
    EXPECT_EQ(s.steps, cfg.diffusion.train_steps);
    EXPECT_EQ(column(full.loss_csv(), "step").size(), static_cast<std::size_t>(cfg.diffusion.train_steps));

    auto first = cfg;
    first.diffusion.train_steps = 20;
    train_diffusion(first, split);
    // a row written after the last snapshot, as if the run had been killed
    std::ofstream(split.loss_csv(), std::ios::app) << "21,123\n";
    const auto resumed = train_diffusion(cfg, split);
    EXPECT_TRUE(resumed.resumed);
    EXPECT_EQ(slurp(split.loss_csv()), slurp(full.loss_csv()));
    EXPECT_EQ(slurp(split.prior()), slurp(full.prior()));
}

TEST(Commands, TrainDiffusionAbortsOnNonFiniteLossKeepingLastGood) {
    const auto cfg = tiny_config();
    const RunPaths run{fresh_dir("diff_nan")};
    gen_demos(cfg, run);
    auto data = diffusion::DemoDataset::load(run.demos());
    data.actions(0, 0) = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index r = 0; r < data.actions.rows(); ++r) data.actions(r, 0) = std::numeric_limits<double>::quiet_NaN();
    data.save(run.root / "nan.bin");
    EXPECT_THROW((void)train_diffusion(cfg, run, run.root / "nan.bin"), NumericError);
    EXPECT_TRUE(fs::exists(run.prior_last_good()));
    EXPECT_NO_THROW((void)diffusion::DiffusionPrior::load(run.prior_last_good()));
    EXPECT_THROW((void)train_diffusion(cfg, RunPaths{fresh_dir("diff_nodata")}), Error);
}

TEST(Commands, TrainWithoutDiffusionHonoursBudgetAndIsDeterministic) {
    const auto cfg = tiny_config();
    const RunPaths a{fresh_dir("train_a")}, b{fresh_dir("train_b")};
    const auto s = train_agent(cfg, a, false);
    train_agent(cfg, b, false);
    EXPECT_EQ(s.episodes, cfg.training.episodes);
    const auto dir = a.train_dir(false);
    EXPECT_EQ(column(dir / "episodes.csv", "episode").size(), static_cast<std::size_t>(cfg.training.episodes));
    EXPECT_EQ(slurp(dir / "episodes.csv"), slurp(b.train_dir(false) / "episodes.csv"));
    EXPECT_EQ(slurp(dir / "diagnostics.csv"), slurp(b.train_dir(false) / "diagnostics.csv"));
    EXPECT_EQ(slurp(dir / "agent.bin"), slurp(b.train_dir(false) / "agent.bin"));
    EXPECT_TRUE(fs::exists(dir / "resolved_config.json"));
    EXPECT_TRUE(fs::exists(dir / "checkpoints" / "agent_ep3.bin"));
    EXPECT_EQ(stability::DecisionLog(dir / "decisions.jsonl").read().size(), 1u);
    EXPECT_THROW((void)train_agent(cfg, RunPaths{fresh_dir("train_noprior")}, true), Error);
}

TEST(Commands, TrainResumeMatchesUninterruptedRun) {
    const auto cfg = tiny_config();
    const RunPaths full{fresh_dir("resume_full")}, split{fresh_dir("resume_split")};
    train_agent(cfg, full, false);
    auto first = cfg;
    first.training.episodes = 3;
    train_agent(first, split, false);
    std::ofstream(split.train_dir(false) / "episodes.csv", std::ios::app) << "3,1,1,1,1,1,0,1,1,1,1,0.1,softplus\n";
    const auto s = train_agent(cfg, split, false);
    EXPECT_TRUE(s.resumed);
    for (const char* f : {"episodes.csv", "diagnostics.csv", "agent.bin"})
        EXPECT_EQ(slurp(split.train_dir(false) / f), slurp(full.train_dir(false) / f)) << f;
    auto ra = stability::DecisionLog(full.train_dir(false) / "decisions.jsonl").read();
    auto rb = stability::DecisionLog(split.train_dir(false) / "decisions.jsonl").read();
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        EXPECT_EQ(ra[i].episode, rb[i].episode);
        EXPECT_EQ(ra[i].decision.alpha, rb[i].decision.alpha);
        EXPECT_EQ(ra[i].decision.form, rb[i].decision.form);
        EXPECT_EQ(ra[i].report.violation_rate, rb[i].report.violation_rate);
    }
}

class PipelineTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        cfg_ = tiny_config();
        run_ = RunPaths{fresh_dir("pipeline")};
        gen_demos(cfg_, run_);
        train_diffusion(cfg_, run_);
        train_agent(cfg_, run_, true);
        train_agent(cfg_, run_, false);
    }
    static ExperimentConfig cfg_;
    static RunPaths run_;
};
ExperimentConfig PipelineTest::cfg_;
RunPaths PipelineTest::run_;

TEST_F(PipelineTest, EvaluateTableLayoutDeterminismAndReadOnlyCheckpoints) {
    const std::string before = slurp(run_.agent(true)) + slurp(run_.agent(false)) + slurp(run_.prior());
    const auto r1 = evaluate(cfg_, run_);
    const std::string first_table = slurp(run_.evaluate_dir() / "results.csv");
    const auto r2 = evaluate(cfg_, run_);
    EXPECT_EQ(slurp(run_.evaluate_dir() / "results.csv"), first_table);
    EXPECT_EQ(slurp(run_.agent(true)) + slurp(run_.agent(false)) + slurp(run_.prior()), before);
    ASSERT_EQ(r1.table.size(), 2u * 3u * 2u);
    for (const auto& row : r1.table) {
        EXPECT_EQ(row.seeds, 5);
        EXPECT_GE(row.sdr.std, 0.0);
    }
    EXPECT_EQ(r1.table.front().framework, "Diffusion+LAC");
    EXPECT_EQ(r1.table.back().framework, "LAC");
    EXPECT_EQ(r1.tracking.size(), 3u * 2u);
    EXPECT_EQ(read_csv(run_.evaluate_dir() / "results.csv").rows.size(), 12u);

    const RunPaths empty{fresh_dir("eval_missing")};
    fs::copy_file(run_.prior(), empty.prior());
    EXPECT_THROW((void)evaluate(cfg_, empty), Error);
}

TEST_F(PipelineTest, AblationReportsSixStrategiesAndRejectsSmallK) {
    const auto res = ablate_candidates(cfg_, run_);
    ASSERT_EQ(res.strategies.size(), 6u);
    EXPECT_EQ(res.strategies[0].label, "OA");
    EXPECT_EQ(res.strategies[5].label, "RL(LAC)");
    for (const auto& s : res.strategies) EXPECT_EQ(s.returns.size(), 2u);
    EXPECT_GE(res.spearman, -1.0);
    EXPECT_LE(res.spearman, 1.0);

    const RunPaths small{fresh_dir("ablate_k3")};
    auto c3 = cfg_;
    c3.diffusion.model.candidates = 3;
    fs::copy_file(run_.demos(), small.demos());
    train_diffusion(c3, small);
    EXPECT_THROW((void)ablate_candidates(c3, small), ConfigError);
}

TEST_F(PipelineTest, SweepRowCountAndSettingsUnion) {
    const auto settings = sweep_settings(cfg_.sweep);
    EXPECT_EQ(settings.size(), 6u);
    const RunPaths run{fresh_dir("sweep")};
    const auto res = sweep_stability(cfg_, run);
    EXPECT_EQ(res.curves.size(), settings.size() * cfg_.sweep.seeds.size());
    EXPECT_EQ(read_csv(run.sweep_dir() / "lyapunov.csv").rows.size(),
              static_cast<std::size_t>(cfg_.sweep.episodes) * settings.size() * cfg_.sweep.seeds.size());
    EXPECT_EQ(res.median_to_half.size(), settings.size());
}

TEST_F(PipelineTest, PlotsAreByteIdenticalAndTrajectoryHasKPolylinesPerStage) {
    evaluate(cfg_, run_);
    const auto out1 = run_.root / "plots1";
    const auto out2 = run_.root / "plots2";
    const auto files = emit_plots(run_, out1);
    emit_plots(run_, out2);
    EXPECT_GE(files.size(), 3u);
    for (const auto& f : files) EXPECT_EQ(slurp(f), slurp(out2 / f.filename())) << f;
    const std::string traj = slurp(out1 / "trajectory.svg");
    int stages = 0;
    for (auto at = traj.find("<g data-stage"); at != std::string::npos; at = traj.find("<g data-stage", at + 1)) {
        ++stages;
        const auto end = traj.find("</g>", at);
        int count = 0;
        for (auto p = traj.find("<polyline", at); p != std::string::npos && p < end; p = traj.find("<polyline", p + 1))
            ++count;
        EXPECT_EQ(count, cfg_.diffusion.model.candidates);
    }
    EXPECT_EQ(stages, static_cast<int>(snapshot_steps(cfg_.scenario).size()));
}

TEST(Commands, EmptyButValidLogGivesEmptyAxes) {
    const RunPaths run{fresh_dir("plots_empty")};
    { CsvWriter w(run.loss_csv(), {"tool"}, {"step", "loss"}); }
    const auto files = emit_plots(run, run.plots_dir());
    ASSERT_EQ(files.size(), 1u);
    const auto doc = slurp(files.front());
    EXPECT_NE(doc.find("<svg"), std::string::npos);
    EXPECT_EQ(doc.find("<path"), std::string::npos);
    EXPECT_THROW((void)emit_plots(RunPaths{fresh_dir("plots_none")}, run.plots_dir()), Error);
    std::ofstream(run.loss_csv(), std::ios::app) << "1\n";
    EXPECT_THROW((void)emit_plots(run, run.plots_dir()), FormatError);
}
