#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>

// Eigen goes first: httplib pulls in <resolv.h>, whose _res macro breaks Eigen's product kernels.
#include "dplac/stability/selector.hpp"

#include <httplib.h>
#include <json.hpp>

namespace dplac::stability {

/// Remote selector endpoint. An empty url disables the remote path entirely.
struct LlmEndpoint {
    std::string url;
    std::string api_key;
    std::string model = "gpt-4o";
    double temperature = 0.5;
    double top_p = 1.0;
    int timeout_s = 10;

    [[nodiscard]] bool enabled() const noexcept { return !url.empty(); }

    /// DPLAC_LLM_ENDPOINT, DPLAC_LLM_API_KEY and DPLAC_LLM_MODEL.
    static LlmEndpoint from_env() {
        LlmEndpoint e;
        if (const char* v = std::getenv("DPLAC_LLM_ENDPOINT")) e.url = v;
        if (const char* v = std::getenv("DPLAC_LLM_API_KEY")) e.api_key = v;
        if (const char* v = std::getenv("DPLAC_LLM_MODEL"); v && *v) e.model = v;
        return e;
    }
};

struct LlmOutcome {
    SelectorDecision decision;
    SelectorDecision rule_decision;
    DecisionSource source = DecisionSource::rule;
    std::string error;
    std::string prompt;
    std::string reply;
};

/// Structured prompt: task, report numbers, the form library and the alpha bounds.
inline std::string build_prompt(const StabilityReport& r, const TaskDescription& task, const SelectorDecision& current,
                                const SelectorThresholds& t) {
    nlohmann::json prio = nlohmann::json::array();
    for (auto p : task.priorities) prio.push_back(std::string(to_string(p)));
    nlohmann::json forms = nlohmann::json::array();
    for (auto f : lac::kAllForms) forms.push_back(std::string(lac::to_string(f)));
    const nlohmann::json body{
        {"task", task.text},
        {"priorities", prio},
        {"sea_condition", std::string(dynamics::to_string(task.sea))},
        {"report", to_json(r)},
        {"current", {{"form", std::string(lac::to_string(current.form))}, {"alpha", current.alpha}}},
        {"library", forms},
        {"alpha_bounds", {t.alpha_min, t.alpha_max}},
    };
    return "Choose the Lyapunov function form and stability coefficient alpha for the next training window of an "
           "AUV data-collection policy. The violation rate is the fraction of updates whose mean Lyapunov "
           "condition was positive; the oscillation index is the mean absolute change of episode returns over "
           "their standard deviation. Reply with a single JSON object and nothing else: "
           "{\"form\": one of the library ids, \"alpha\": number within alpha_bounds, \"rationale\": short text}.\n" +
           body.dump(2);
}

/// Strict reply parser. Accepts the decision object itself or a chat
/// completion whose first message content is that object.
inline SelectorDecision parse_reply(const std::string& raw, const SelectorThresholds& t) {
    nlohmann::json j = nlohmann::json::parse(raw);
    if (j.contains("choices")) {
        std::string content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        const auto open = content.find('{');
        const auto close = content.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open)
            throw FormatError("reply content holds no JSON object");
        j = nlohmann::json::parse(content.substr(open, close - open + 1));
    }
    if (!j.is_object() || j.size() != 3 || !j.contains("form") || !j.contains("alpha") || !j.contains("rationale"))
        throw FormatError("reply must be exactly {form, alpha, rationale}");
    if (!j.at("form").is_string() || !j.at("alpha").is_number() || !j.at("rationale").is_string())
        throw FormatError("reply fields have the wrong types");
    SelectorDecision d;
    d.form = lac::parse_lyapunov_form(j.at("form").get<std::string>());
    d.alpha = j.at("alpha").get<double>();
    if (!std::isfinite(d.alpha) || d.alpha < t.alpha_min || d.alpha > t.alpha_max)
        throw FormatError("alpha " + std::to_string(d.alpha) + " outside [" + std::to_string(t.alpha_min) + ", " +
                          std::to_string(t.alpha_max) + "]");
    d.rationale = j.at("rationale").get<std::string>();
    return d;
}

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/\s]+)(/\S*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("malformed endpoint url '" + url + "'");
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

/// One POST (plus at most one retry on transport failure); returns the body.
inline std::string post_json(const LlmEndpoint& ep, const std::string& body) {
    const ParsedUrl u = parse_url(ep.url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (u.origin.rfind("https://", 0) == 0) throw Error("https endpoints need a build with OpenSSL");
#endif
    httplib::Client cli(u.origin);
    cli.set_connection_timeout(ep.timeout_s, 0);
    cli.set_read_timeout(ep.timeout_s, 0);
    cli.set_write_timeout(ep.timeout_s, 0);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto res = cli.Post(u.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) throw Error("endpoint returned HTTP " + std::to_string(res->status));
        return res->body;
    }
    throw Error(last_error);
}

/// Remote selection with strict fallback: the rule decision is always
/// computed first and is returned unchanged when the endpoint is unset or
/// anything about the exchange fails.
inline LlmOutcome llm_select(const StabilityReport& r, const TaskDescription& task, const SelectorDecision& current,
                             RuleSelector& rules, const LlmEndpoint& ep) {
    LlmOutcome out;
    out.rule_decision = rules.select(r, task, current);
    out.decision = out.rule_decision;
    if (!ep.enabled()) return out;
    out.prompt = build_prompt(r, task, current, rules.thresholds());
    try {
        const nlohmann::json request{
            {"model", ep.model},
            {"temperature", ep.temperature},
            {"top_p", ep.top_p},
            {"messages",
             {{{"role", "system"}, {"content", "You select Lyapunov functions for safe reinforcement learning."}},
              {{"role", "user"}, {"content", out.prompt}}}},
        };
        out.reply = post_json(ep, request.dump());
        out.decision = parse_reply(out.reply, rules.thresholds());
        out.source = DecisionSource::llm;
    } catch (const std::exception& e) {
        out.source = DecisionSource::fallback;
        out.error = e.what();
    }
    return out;
}

}  // namespace dplac::stability
