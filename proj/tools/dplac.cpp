#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dplac/harness/commands.hpp"

namespace {

using namespace dplac;
using namespace dplac::harness;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool no_diffusion = false;
    std::string controller;
    std::string sea;
    std::string llm_endpoint;
    std::string demos;
    std::string prior;
    std::string runs;
};

/// `count` consecutive seeds starting at `first`.
std::vector<std::uint64_t> seed_block(std::uint64_t first, std::size_t count) {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(first + i);
    return out;
}

ExperimentConfig resolve(const Options& o, const std::string& verb) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (!o.controller.empty()) {
        cfg.scenario.controller = control::parse_controller_kind(o.controller);
        cfg.evaluation.controllers = {cfg.scenario.controller};
    }
    if (!o.sea.empty()) {
        cfg.scenario.sea = dynamics::parse_sea_condition(o.sea);
        cfg.evaluation.conditions = {cfg.scenario.sea};
    }
    if (o.seed) {
        const std::uint64_t s = *o.seed;
        if (verb == "gen-demos") cfg.demos.seed = s;
        else if (verb == "train-diffusion") cfg.diffusion.seed = s;
        else if (verb == "train") cfg.training.seed = s;
        else if (verb == "evaluate") cfg.evaluation.seeds = seed_block(s, cfg.evaluation.seeds.size());
        else if (verb == "ablate-candidates") cfg.ablation.seed = s;
        else if (verb == "sweep-stability") cfg.sweep.seeds = seed_block(s, cfg.sweep.seeds.size());
    }
    if (o.no_diffusion) {
        cfg.training.use_diffusion = false;
        cfg.sweep.use_diffusion = false;
    }
    cfg.adaptation.endpoint = stability::LlmEndpoint::from_env();
    if (!o.llm_endpoint.empty()) cfg.adaptation.endpoint.url = o.llm_endpoint;
    if (!o.out.empty()) cfg.output = o.out;
    cfg.validate();
    return cfg;
}

std::optional<std::filesystem::path> optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

int run(const std::string& verb, const Options& o) {
    const ExperimentConfig cfg = resolve(o, verb);
    const RunPaths paths{cfg.output};
    const Progress log = [](const std::string& msg) { std::cerr << msg << '\n'; };
    if (verb == "gen-demos") {
        gen_demos(cfg, paths, log);
    } else if (verb == "train-diffusion") {
        const auto s = train_diffusion(cfg, paths, optional_path(o.demos), log);
        std::cout << "trained " << s.steps << " steps, final loss " << s.final_loss << '\n';
    } else if (verb == "train") {
        const auto s = train_agent(cfg, paths, cfg.training.use_diffusion, optional_path(o.prior), log);
        std::cout << "trained " << s.episodes << " episodes into " << paths.train_dir(cfg.training.use_diffusion).string()
                  << '\n';
    } else if (verb == "evaluate") {
        evaluate(cfg, paths, optional_path(o.prior), log);
    } else if (verb == "ablate-candidates") {
        const auto r = ablate_candidates(cfg, paths, optional_path(o.prior), log);
        for (const auto& s : r.strategies) std::cout << s.label << ' ' << s.ret.mean << " +- " << s.ret.std << '\n';
        std::cout << "spearman " << r.spearman << '\n';
    } else if (verb == "sweep-stability") {
        const auto r = sweep_stability(cfg, paths, optional_path(o.prior), log);
        for (std::size_t i = 0; i < r.settings.size(); ++i)
            std::cout << r.settings[i].label() << " median episodes to half " << r.median_to_half[i] << '\n';
    } else if (verb == "emit-plots") {
        const RunPaths in{o.runs.empty() ? paths.root : std::filesystem::path(o.runs)};
        for (const auto& f : emit_plots(in, paths.plots_dir(), log)) std::cout << f.string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-prior Lyapunov actor-critic experiments for multi-AUV data collection"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    Options o;
    const std::map<std::string, std::string> verbs{
        {"gen-demos", "Roll the scripted expert and write the demonstration dataset"},
        {"train-diffusion", "Pre-train the diffusion prior on the demonstrations (resumable)"},
        {"train", "Train the agent, with diffusion candidates unless --no-diffusion (resumable)"},
        {"evaluate", "Crossed evaluation table and tracking-error table"},
        {"ablate-candidates", "Compare the selected candidate, lower-ranked candidates and the plain actor"},
        {"sweep-stability", "Lyapunov-value curves across stability coefficients and head forms"},
        {"emit-plots", "Render SVG figures from existing run logs"}};
    for (const auto& [name, help] : verbs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Seed for this command");
        sub->add_option("--out", o.out, "Run directory (defaults to the config's output)");
        sub->add_flag("--no-diffusion", o.no_diffusion, "Plain LAC without diffusion candidates");
        sub->add_option("--controller", o.controller, "Low-level controller")
            ->check(CLI::IsMember({"ssurface", "pid", "smc"}));
        sub->add_option("--sea", o.sea, "Sea condition")->check(CLI::IsMember({"ideal", "es", "ves"}));
        sub->add_option("--llm-endpoint", o.llm_endpoint,
                        "Chat-completions URL for the stability selector; credentials come from DPLAC_LLM_API_KEY");
        if (name == "train-diffusion") sub->add_option("--demos", o.demos, "Demo dataset (default <out>/demos.bin)");
        if (name == "train" || name == "evaluate" || name == "ablate-candidates" || name == "sweep-stability")
            sub->add_option("--prior", o.prior, "Diffusion checkpoint (default <out>/prior.bin)");
        if (name == "emit-plots") sub->add_option("--runs", o.runs, "Run directory to read logs from (default --out)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
