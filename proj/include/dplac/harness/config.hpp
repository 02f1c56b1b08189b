#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dplac/diffusion/demos.hpp"
#include "dplac/dynamics/rigid_body.hpp"
#include "dplac/harness/training.hpp"

namespace dplac::harness {

inline constexpr std::string_view kToolVersion = "dplac 1.0.0";

struct DiffusionSection {
    diffusion::DiffusionConfig model;
    int train_steps = 20000;
    int checkpoint_every = 1000;
    std::uint64_t seed = 7;
};

struct TrainingSection {
    int episodes = 300;
    int updates_per_step = 1;
    bool use_diffusion = true;
    int checkpoint_every = 50;
    std::uint64_t seed = 0;
};

struct EvaluationSection {
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int episodes_per_seed = 1;
    std::vector<dynamics::SeaCondition> conditions{dynamics::SeaCondition::es, dynamics::SeaCondition::ves};
    std::vector<control::ControllerKind> controllers{control::ControllerKind::ssurface, control::ControllerKind::pid,
                                                     control::ControllerKind::smc};
    double tracking_duration = 180.0;  // s per tracking-benchmark run
};

struct AblationSection {
    int episodes = 20;
    std::uint64_t seed = 99;
};

struct SweepSection {
    std::vector<double> alphas{0.05, 0.1, 0.2, 0.5};
    std::vector<lac::LyapunovForm> forms{lac::LyapunovForm::softplus, lac::LyapunovForm::squared, lac::LyapunovForm::log};
    std::vector<std::uint64_t> seeds{11, 12, 13};
    int episodes = 100;
    bool use_diffusion = false;
};

/// Full experiment description. Every field has a default; a config file
/// overrides any subset and may not contain unknown keys.
struct ExperimentConfig {
    env::ScenarioConfig scenario;
    std::filesystem::path coefficients;  // empty: built-in REMUS-100-class values
    diffusion::DemoOptions demos;
    DiffusionSection diffusion;
    lac::LacConfig lac;
    TrainingSection training;
    AdaptationSettings adaptation;
    EvaluationSection evaluation;
    AblationSection ablation;
    SweepSection sweep;
    std::string output = "runs/default";  // relative to the working directory

    void validate() const {
        scenario.validate();
        if (demos.episodes < 1 || demos.horizon < 1) throw ConfigError("demos need episodes and horizon >= 1");
        if (demos.horizon != diffusion.model.horizon) throw ConfigError("demos.horizon must equal diffusion.horizon");
        if (!(demos.max_drop_fraction >= 0.0 && demos.max_drop_fraction <= 1.0))
            throw ConfigError("demos.max_drop_fraction must lie in [0, 1]");
        diffusion.model.validate();
        (void)diffusion.model.make_schedule();
        if (diffusion.train_steps < 0 || diffusion.checkpoint_every < 1)
            throw ConfigError("diffusion step budget must be >= 0 and checkpoint interval >= 1");
        lac.validate();
        if (training.episodes < 0 || training.updates_per_step < 0 || training.checkpoint_every < 1)
            throw ConfigError("invalid training budget");
        adaptation.thresholds.validate();
        adaptation.task.validate();
        if (adaptation.every < stability::kMinReportWindow)
            throw ConfigError("adaptation.every must be at least " + std::to_string(stability::kMinReportWindow));
        if (lac.alpha < adaptation.thresholds.alpha_min || lac.alpha > adaptation.thresholds.alpha_max)
            throw ConfigError("lac.alpha outside the selector's alpha bounds");
        if (evaluation.seeds.size() < 5) throw ConfigError("evaluation needs at least 5 seeds");
        if (evaluation.episodes_per_seed < 1) throw ConfigError("evaluation.episodes_per_seed must be >= 1");
        if (evaluation.conditions.empty() || evaluation.controllers.empty())
            throw ConfigError("evaluation needs at least one condition and one controller");
        if (ablation.episodes < 1) throw ConfigError("ablation.episodes must be >= 1");
        if (sweep.alphas.empty() || sweep.forms.empty() || sweep.seeds.empty() || sweep.episodes < 1)
            throw ConfigError("sweep needs alphas, forms, seeds and episodes");
        for (double a : sweep.alphas)
            if (!(a >= lac.alpha_min && a <= lac.alpha_max)) throw ConfigError("sweep alpha outside lac alpha bounds");
    }

    [[nodiscard]] dynamics::AuvModel model() const {
        if (coefficients.empty()) return dynamics::AuvModel();
        return dynamics::AuvModel(dynamics::load_rigid_body(coefficients));
    }

    [[nodiscard]] TrainingSettings training_settings() const {
        TrainingSettings t;
        t.episodes = training.episodes;
        t.use_diffusion = training.use_diffusion;
        t.updates_per_step = training.updates_per_step;
        t.adaptation = adaptation;
        t.adaptation.task.sea = scenario.sea;
        return t;
    }
};

namespace detail {

/// Field list of a config type, shared by reading and writing.
template <class T>
struct Fields;

template <class V, class T>
void fields(V& v, T& t) {
    Fields<T>::visit(v, t);
}

/// Reads present keys into fields and remembers which keys were consumed.
class Reader {
public:
    Reader(const nlohmann::json& j, std::string path, std::filesystem::path base)
        : j_(j), path_(std::move(path)), base_(std::move(base)) {
        if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
    }

    template <class T>
    void operator()(const char* key, T& value) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        try {
            read(j_.at(key), value, path_ + "." + key);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + path_ + "." + key + "': " + e.what());
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            if (msg.rfind("config key", 0) == 0 || msg.rfind("unknown config key", 0) == 0) throw;
            throw ConfigError("config key '" + path_ + "." + key + "': " + msg);
        }
    }

    template <class S>
    void section(const char* key, S& s) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        Reader child(j_.at(key), path_ + "." + key, base_);
        fields(child, s);
        child.finish();
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + "." + k + "'");
    }

private:
    template <class T>
    static void read(const nlohmann::json& j, T& v, const std::string&) requires std::is_arithmetic_v<T> {
        if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw ConfigError("expected a boolean");
        } else {
            if (!j.is_number()) throw ConfigError("expected a number");
            if constexpr (std::is_integral_v<T>)
                if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError("expected an integer");
        }
        v = j.get<T>();
    }
    static void read(const nlohmann::json& j, std::string& v, const std::string&) { v = j.get<std::string>(); }
    void read(const nlohmann::json& j, std::filesystem::path& v, const std::string&) const {
        const std::filesystem::path p = j.get<std::string>();
        v = p.empty() || p.is_absolute() ? p : (base_ / p).lexically_normal();
    }
    static void read(const nlohmann::json& j, std::optional<double>& v, const std::string& where) {
        if (j.is_null()) {
            v.reset();
            return;
        }
        double d = 0.0;
        read(j, d, where);
        v = d;
    }
    static void read(const nlohmann::json& j, dynamics::SeaCondition& v, const std::string&) {
        v = dynamics::parse_sea_condition(j.get<std::string>());
    }
    static void read(const nlohmann::json& j, control::ControllerKind& v, const std::string&) {
        v = control::parse_controller_kind(j.get<std::string>());
    }
    static void read(const nlohmann::json& j, lac::LyapunovForm& v, const std::string&) {
        v = lac::parse_lyapunov_form(j.get<std::string>());
    }
    static void read(const nlohmann::json& j, lac::SelectionRule& v, const std::string&) {
        v = lac::parse_selection_rule(j.get<std::string>());
    }
    static void read(const nlohmann::json& j, diffusion::ScheduleKind& v, const std::string&) {
        v = diffusion::parse_schedule_kind(j.get<std::string>());
    }
    static void read(const nlohmann::json& j, stability::Priority& v, const std::string&) {
        v = stability::parse_priority(j.get<std::string>());
    }
    template <class T>
    void read(const nlohmann::json& j, std::vector<T>& v, const std::string& where) const {
        if (!j.is_array()) throw ConfigError("expected an array");
        v.clear();
        for (const auto& e : j) {
            T x{};
            read(e, x, where);
            v.push_back(std::move(x));
        }
    }
    template <class S>
    void read(const nlohmann::json& j, S& s, const std::string& where) const requires std::is_class_v<S> {
        Reader child(j, where, base_);
        fields(child, s);
        child.finish();
    }

    const nlohmann::json& j_;
    std::string path_;
    std::filesystem::path base_;
    std::set<std::string> seen_;
};

/// Serializes every field, defaults included.
class Writer {
public:
    template <class T>
    void operator()(const char* key, const T& value) {
        j_[key] = write(value);
    }

    template <class S>
    void section(const char* key, const S& s) {
        Writer child;
        fields(child, const_cast<S&>(s));
        j_[key] = std::move(child.j_);
    }

    [[nodiscard]] nlohmann::json take() { return std::move(j_); }

private:
    template <class T>
    static nlohmann::json write(const T& v) requires std::is_arithmetic_v<T> { return v; }
    static nlohmann::json write(const std::string& v) { return v; }
    static nlohmann::json write(const std::filesystem::path& v) { return v.string(); }
    static nlohmann::json write(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }
    static nlohmann::json write(dynamics::SeaCondition v) { return std::string(dynamics::to_string(v)); }
    static nlohmann::json write(control::ControllerKind v) { return std::string(control::to_string(v)); }
    static nlohmann::json write(lac::LyapunovForm v) { return std::string(lac::to_string(v)); }
    static nlohmann::json write(lac::SelectionRule v) { return std::string(lac::to_string(v)); }
    static nlohmann::json write(diffusion::ScheduleKind v) { return std::string(diffusion::to_string(v)); }
    static nlohmann::json write(stability::Priority v) { return std::string(stability::to_string(v)); }
    template <class T>
    static nlohmann::json write(const std::vector<T>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& e : v) a.push_back(write(e));
        return a;
    }
    template <class S>
    static nlohmann::json write(const S& s) requires std::is_class_v<S> {
        Writer child;
        fields(child, const_cast<S&>(s));
        return child.take();
    }

    nlohmann::json j_ = nlohmann::json::object();
};

template <>
struct Fields<env::SpawnPose> {
    template <class V>
    static void visit(V& v, env::SpawnPose& s) {
        v("x", s.x); v("y", s.y); v("z", s.z); v("yaw", s.yaw);
    }
};

template <>
struct Fields<env::RewardWeights> {
    template <class V>
    static void visit(V& v, env::RewardWeights& w) {
        v("data", w.data); v("service", w.service); v("energy", w.energy); v("collision", w.collision);
        v("tracking", w.tracking);
    }
};

template <>
struct Fields<env::CommModel> {
    template <class V>
    static void visit(V& v, env::CommModel& c) {
        v("peak_rate", c.peak_rate); v("half_range", c.half_range); v("max_range", c.max_range);
        v("relay_range", c.relay_range); v("relay_penalty", c.relay_penalty);
    }
};

template <>
struct Fields<env::PowerModel> {
    template <class V>
    static void visit(V& v, env::PowerModel& p) {
        v("propulsion_max", p.propulsion_max); v("hotel", p.hotel); v("coefficient", p.coefficient);
    }
};

template <>
struct Fields<control::SSurfaceGains> {
    template <class V>
    static void visit(V& v, control::SSurfaceGains& g) {
        v("zeta1", g.zeta1); v("zeta2", g.zeta2);
    }
};
template <>
struct Fields<control::PidGains> {
    template <class V>
    static void visit(V& v, control::PidGains& g) {
        v("kp", g.kp); v("ki", g.ki); v("kd", g.kd);
    }
};
template <>
struct Fields<control::SmcGains> {
    template <class V>
    static void visit(V& v, control::SmcGains& g) {
        v("slope", g.slope); v("gain", g.gain); v("width", g.width);
    }
};

template <>
struct Fields<control::ChannelGains> {
    template <class V>
    static void visit(V& v, control::ChannelGains& g) {
        v.section("ssurface", g.ssurface); v.section("pid", g.pid); v.section("smc", g.smc); v("delta_u", g.delta_u);
    }
};

template <>
struct Fields<control::ControllerGains> {
    template <class V>
    static void visit(V& v, control::ControllerGains& g) {
        v.section("yaw", g.yaw); v.section("depth", g.depth); v("speed_kp", g.speed_kp);
    }
};

template <>
struct Fields<control::ActuatorLimits> {
    template <class V>
    static void visit(V& v, control::ActuatorLimits& a) {
        v("thrust_coefficient", a.thrust_coefficient); v("max_yaw_moment", a.max_yaw_moment);
        v("max_heave_force", a.max_heave_force); v("max_pitch_moment", a.max_pitch_moment);
        v("heave_share", a.heave_share); v("pitch_share", a.pitch_share);
    }
};

template <>
struct Fields<env::ScenarioConfig> {
    template <class V>
    static void visit(V& v, env::ScenarioConfig& s) {
        v("auv_count", s.auv_count); v("node_count", s.node_count);
        v("extent_x", s.extent_x); v("extent_y", s.extent_y); v("extent_z", s.extent_z);
        v("node_min_depth", s.node_min_depth); v("node_buffer", s.node_buffer);
        v("control_dt", s.control_dt); v("inner_steps", s.inner_steps); v("max_steps", s.max_steps);
        v("collision_radius", s.collision_radius); v("max_speed_setpoint", s.max_speed_setpoint);
        v("nearest_nodes", s.nearest_nodes); v("history", s.history); v("spawns", s.spawns);
        v("sea", s.sea); v("controller", s.controller); v.section("gains", s.gains); v.section("actuators", s.actuators);
        v.section("comm", s.comm); v.section("power", s.power); v.section("reward", s.weights);
    }
};

template <>
struct Fields<env::ExpertSettings> {
    template <class V>
    static void visit(V& v, env::ExpertSettings& e) {
        v("cruise_speed", e.cruise_speed); v("approach_gain", e.approach_gain); v("hold_range", e.hold_range);
    }
};

template <>
struct Fields<diffusion::DemoOptions> {
    template <class V>
    static void visit(V& v, diffusion::DemoOptions& d) {
        v("episodes", d.episodes); v("seed", d.seed); v("horizon", d.horizon); v("stall_decisions", d.stall_decisions);
        v("max_drop_fraction", d.max_drop_fraction); v.section("expert", d.expert);
    }
};

template <>
struct Fields<diffusion::DenoiserConfig> {
    template <class V>
    static void visit(V& v, diffusion::DenoiserConfig& n) {
        v("cond_width", n.cond_width); v("width", n.width); v("time_raw", n.time_raw); v("time_dim", n.time_dim);
    }
};

template <>
struct Fields<DiffusionSection> {
    template <class V>
    static void visit(V& v, DiffusionSection& d) {
        v("schedule", d.model.schedule); v("steps", d.model.steps); v("beta_min", d.model.beta_min);
        v("beta_max", d.model.beta_max); v("inference_steps", d.model.inference_steps); v("batch", d.model.batch);
        v("learning_rate", d.model.learning_rate); v("horizon", d.model.horizon); v("candidates", d.model.candidates);
        v.section("net", d.model.net); v("train_steps", d.train_steps); v("checkpoint_every", d.checkpoint_every);
        v("seed", d.seed);
    }
};

template <>
struct Fields<lac::LacConfig> {
    template <class V>
    static void visit(V& v, lac::LacConfig& c) {
        v("hidden", c.hidden); v("batch", c.batch); v("actor_lr", c.actor_lr); v("critic_lr", c.critic_lr);
        v("gamma", c.gamma); v("tau", c.tau); v("lambda_lr", c.lambda_lr); v("beta_lr", c.beta_lr); v("alpha", c.alpha);
        v("alpha_min", c.alpha_min); v("alpha_max", c.alpha_max); v("initial_lambda", c.initial_lambda);
        v("initial_beta", c.initial_beta); v("entropy_target", c.entropy_target); v("log_dual_bound", c.log_dual_bound);
        v("warmup", c.warmup); v("buffer_capacity", c.buffer_capacity); v("twin_q", c.twin_q); v("form", c.form);
        v("selection", c.selection);
    }
};

template <>
struct Fields<TrainingSection> {
    template <class V>
    static void visit(V& v, TrainingSection& t) {
        v("episodes", t.episodes); v("updates_per_step", t.updates_per_step); v("use_diffusion", t.use_diffusion);
        v("checkpoint_every", t.checkpoint_every); v("seed", t.seed);
    }
};

template <>
struct Fields<stability::SelectorThresholds> {
    template <class V>
    static void visit(V& v, stability::SelectorThresholds& t) {
        v("violation", t.violation); v("consecutive", t.consecutive); v("oscillation", t.oscillation);
        v("calm_violation", t.calm_violation); v("alpha_min", t.alpha_min); v("alpha_max", t.alpha_max);
    }
};

template <>
struct Fields<AdaptationSettings> {
    template <class V>
    static void visit(V& v, AdaptationSettings& a) {
        v("enabled", a.enabled); v("every", a.every); v.section("thresholds", a.thresholds);
        v("task", a.task.text); v("priorities", a.task.priorities);
    }
};

template <>
struct Fields<EvaluationSection> {
    template <class V>
    static void visit(V& v, EvaluationSection& e) {
        v("seeds", e.seeds); v("episodes_per_seed", e.episodes_per_seed); v("conditions", e.conditions);
        v("controllers", e.controllers); v("tracking_duration", e.tracking_duration);
    }
};

template <>
struct Fields<AblationSection> {
    template <class V>
    static void visit(V& v, AblationSection& a) {
        v("episodes", a.episodes); v("seed", a.seed);
    }
};

template <>
struct Fields<SweepSection> {
    template <class V>
    static void visit(V& v, SweepSection& s) {
        v("alphas", s.alphas); v("forms", s.forms); v("seeds", s.seeds); v("episodes", s.episodes);
        v("use_diffusion", s.use_diffusion);
    }
};

template <>
struct Fields<ExperimentConfig> {
    template <class V>
    static void visit(V& v, ExperimentConfig& c) {
        v.section("scenario", c.scenario); v("coefficients", c.coefficients); v.section("demos", c.demos);
        v.section("diffusion", c.diffusion); v.section("lac", c.lac); v.section("training", c.training);
        v.section("adaptation", c.adaptation); v.section("evaluation", c.evaluation); v.section("ablation", c.ablation);
        v.section("sweep", c.sweep); v("output", c.output);
    }
};

}  // namespace detail

/// Overlays `j` on the defaults. Relative paths resolve against `base`.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = ".") {
    ExperimentConfig c;
    detail::Reader r(j, "config", base);
    detail::fields(r, c);
    r.finish();
    c.validate();
    return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    detail::Writer w;
    detail::fields(w, const_cast<ExperimentConfig&>(c));
    nlohmann::json j = w.take();
    j["version"] = std::string(kToolVersion);
    return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    j.erase("version");
    return config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// Writes the resolved configuration and tool version beside a run's outputs.
inline void write_resolved_config(const ExperimentConfig& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "resolved_config.json");
    if (!os) throw Error("cannot write resolved config into '" + dir.string() + "'");
    os << to_json(c).dump(2) << '\n';
}

}  // namespace dplac::harness
