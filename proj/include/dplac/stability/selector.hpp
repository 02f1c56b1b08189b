#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dplac/lac/agent.hpp"
#include "dplac/dynamics/sea_state.hpp"
#include "dplac/stability/monitor.hpp"

namespace dplac::stability {

using lac::LyapunovForm;

enum class Priority { tracking, energy, coverage };

inline std::string_view to_string(Priority p) {
    switch (p) {
        case Priority::tracking: return "tracking";
        case Priority::energy: return "energy";
        case Priority::coverage: return "coverage";
    }
    return "?";
}

inline Priority parse_priority(std::string_view s) {
    for (auto p : {Priority::tracking, Priority::energy, Priority::coverage})
        if (s == to_string(p)) return p;
    throw ConfigError("unknown priority tag '" + std::string(s) + "' (expected tracking|energy|coverage)");
}

struct TaskDescription {
    std::string text;
    std::vector<Priority> priorities;
    dynamics::SeaCondition sea = dynamics::SeaCondition::ideal;

    void validate() const {
        if (text.empty()) throw ConfigError("task description text must not be empty");
    }
};

struct SelectorDecision {
    LyapunovForm form = LyapunovForm::softplus;
    double alpha = 0.1;
    std::string rationale;

    /// Same form and coefficient; the rationale is ignored.
    [[nodiscard]] bool same_setting(const SelectorDecision& o) const { return form == o.form && alpha == o.alpha; }
    friend bool operator==(const SelectorDecision&, const SelectorDecision&) = default;
};

enum class DecisionSource { rule, llm, fallback };

inline std::string_view to_string(DecisionSource s) {
    switch (s) {
        case DecisionSource::rule: return "rule";
        case DecisionSource::llm: return "llm";
        case DecisionSource::fallback: return "fallback";
    }
    return "?";
}

struct SelectorThresholds {
    double violation = 0.3;       // escalate above this rate ...
    int consecutive = 2;          // ... for this many windows in a row
    double oscillation = 1.0;     // relax above this oscillation index ...
    double calm_violation = 0.1;  // ... while violations stay at or below this
    double alpha_min = 0.01;
    double alpha_max = 1.0;

    void validate() const {
        if (!(alpha_min > 0.0 && alpha_min < alpha_max)) throw ConfigError("alpha bounds must satisfy 0 < min < max");
        if (consecutive < 1) throw ConfigError("consecutive window count must be >= 1");
    }
};

/// Rule policy: persistent violations escalate to SQUARED with alpha doubled;
/// oscillating but compliant training relaxes to LOG with alpha halved.
/// Stateful only through the run of consecutive violating windows.
class RuleSelector {
public:
    explicit RuleSelector(SelectorThresholds t = {}) : t_(t) { t_.validate(); }

    [[nodiscard]] const SelectorThresholds& thresholds() const noexcept { return t_; }
    [[nodiscard]] int streak() const noexcept { return streak_; }
    void set_streak(int s) {
        if (s < 0) throw FormatError("negative violation streak");
        streak_ = s;
    }

    SelectorDecision select(const StabilityReport& r, const TaskDescription& task, const SelectorDecision& current) {
        task.validate();
        streak_ = r.violation_rate > t_.violation ? streak_ + 1 : 0;
        SelectorDecision d = current;
        std::ostringstream why;
        if (streak_ >= t_.consecutive) {
            d.form = LyapunovForm::squared;
            d.alpha = std::min(2.0 * current.alpha, t_.alpha_max);
            why << "violation rate " << r.violation_rate << " above " << t_.violation << " for " << streak_
                << " windows: escalate";
            streak_ = 0;
        } else if (r.oscillation > t_.oscillation && r.violation_rate <= t_.calm_violation) {
            d.form = LyapunovForm::log;
            d.alpha = std::max(0.5 * current.alpha, t_.alpha_min);
            why << "oscillation " << r.oscillation << " with violation rate " << r.violation_rate << ": relax";
        } else {
            why << "keep (violation " << r.violation_rate << ", oscillation " << r.oscillation << ")";
        }
        d.rationale = why.str();
        return d;
    }

private:
    SelectorThresholds t_;
    int streak_ = 0;
};

struct ApplyOutcome {
    bool form_changed = false;
    bool alpha_changed = false;
    [[nodiscard]] bool noop() const { return !form_changed && !alpha_changed; }
};

/// Installs a decision between episodes. A form change swaps the head and
/// hard-copies the trunk into the target; the trunk itself is untouched.
inline ApplyOutcome apply_decision(const SelectorDecision& d, lac::LacAgent& agent) {
    ApplyOutcome out;
    if (d.form != agent.form()) {
        agent.set_form(d.form);
        out.form_changed = true;
    }
    if (d.alpha != agent.duals().alpha) {
        agent.set_alpha(d.alpha);
        out.alpha_changed = true;
    }
    return out;
}

struct DecisionRecord {
    int episode = 0;
    std::string timestamp;
    StabilityReport report;
    SelectorDecision current;
    SelectorDecision rule_decision;
    SelectorDecision decision;
    DecisionSource source = DecisionSource::rule;
    std::string error;
    std::string prompt;
    std::string reply;
    bool applied_noop = false;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json to_json(const StabilityReport& r) {
    return {{"window", r.window}, {"violation_rate", r.violation_rate}, {"oscillation", r.oscillation},
            {"lyapunov_decay", r.lyapunov_decay}};
}

inline nlohmann::json to_json(const SelectorDecision& d) {
    return {{"form", std::string(lac::to_string(d.form))}, {"alpha", d.alpha}, {"rationale", d.rationale}};
}

inline StabilityReport report_from_json(const nlohmann::json& j) {
    return {j.at("window").get<int>(), j.at("violation_rate").get<double>(), j.at("oscillation").get<double>(),
            j.at("lyapunov_decay").get<double>()};
}

inline SelectorDecision decision_from_json(const nlohmann::json& j) {
    return {lac::parse_lyapunov_form(j.at("form").get<std::string>()), j.at("alpha").get<double>(),
            j.at("rationale").get<std::string>()};
}

/// Append-only JSON-lines log of selector decisions.
class DecisionLog {
public:
    explicit DecisionLog(std::filesystem::path path) : path_(std::move(path)) {}

    void append(const DecisionRecord& r) const {
        nlohmann::json j{{"episode", r.episode},
                         {"timestamp", r.timestamp},
                         {"report", to_json(r.report)},
                         {"current", to_json(r.current)},
                         {"rule_decision", to_json(r.rule_decision)},
                         {"decision", to_json(r.decision)},
                         {"source", std::string(to_string(r.source))},
                         {"error", r.error},
                         {"prompt", r.prompt},
                         {"reply", r.reply},
                         {"noop", r.applied_noop}};
        std::ofstream os(path_, std::ios::app);
        if (!os) throw Error("cannot append to '" + path_.string() + "'");
        os << j.dump() << '\n';
    }

    [[nodiscard]] std::vector<DecisionRecord> read() const {
        std::ifstream is(path_);
        if (!is) throw Error("cannot open '" + path_.string() + "'");
        std::vector<DecisionRecord> out;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            DecisionRecord r;
            r.episode = j.at("episode").get<int>();
            r.timestamp = j.at("timestamp").get<std::string>();
            r.report = report_from_json(j.at("report"));
            r.current = decision_from_json(j.at("current"));
            r.rule_decision = decision_from_json(j.at("rule_decision"));
            r.decision = decision_from_json(j.at("decision"));
            const auto src = j.at("source").get<std::string>();
            r.source = src == "llm" ? DecisionSource::llm : src == "fallback" ? DecisionSource::fallback : DecisionSource::rule;
            r.error = j.at("error").get<std::string>();
            r.prompt = j.at("prompt").get<std::string>();
            r.reply = j.at("reply").get<std::string>();
            r.applied_noop = j.at("noop").get<bool>();
            out.push_back(std::move(r));
        }
        return out;
    }

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Reruns a fresh rule selector over the logged reports; returns the index
/// of the first record whose rule decision differs, or -1.
inline int replay_mismatch(const std::vector<DecisionRecord>& records, const TaskDescription& task,
                           SelectorThresholds t = {}) {
    RuleSelector sel(t);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto d = sel.select(records[i].report, task, records[i].current);
        if (!d.same_setting(records[i].rule_decision)) return static_cast<int>(i);
    }
    return -1;
}

}  // namespace dplac::stability
