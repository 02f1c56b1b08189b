#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "dplac/core/error.hpp"
#include "dplac/core/math.hpp"

namespace dplac::diffusion {

enum class ScheduleKind { linear, cosine };

inline ScheduleKind parse_schedule_kind(std::string_view s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw ConfigError("unknown noise schedule '" + std::string(s) + "' (expected linear|cosine)");
}

inline std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "cosine"; }

/// Tables indexed by t = 0..T; entry 0 is the clean sample (beta 0, alpha_bar 1).
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<int> inference;  // increasing subset of 1..T ending at T

    [[nodiscard]] double signal(int t) const { return std::sqrt(alpha_bar.at(static_cast<std::size_t>(t))); }
    [[nodiscard]] double noise(int t) const { return std::sqrt(1.0 - alpha_bar.at(static_cast<std::size_t>(t))); }

    /// Index the reverse chain visits after `t`: the next lower inference index, or 0.
    [[nodiscard]] int previous(int t, bool strided) const {
        if (!strided) return t - 1;
        int prev = 0;
        for (int s : inference) {
            if (s >= t) break;
            prev = s;
        }
        return prev;
    }
};

inline std::vector<int> strided_indices(int steps, int count) {
    if (count < 1 || count > steps) throw ConfigError("inference step count must lie in [1, T]");
    std::vector<int> out;
    for (int j = 1; j <= count; ++j) {
        const auto idx = static_cast<int>(std::lround(static_cast<double>(j) * steps / count));
        if (out.empty() || idx > out.back()) out.push_back(idx);
    }
    return out;
}

inline NoiseSchedule finish_schedule(int steps, std::vector<double> beta, int inference_steps) {
    NoiseSchedule s;
    s.steps = steps;
    s.beta = std::move(beta);
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    s.alpha[0] = 1.0;
    s.alpha_bar[0] = 1.0;
    for (std::size_t t = 1; t < s.beta.size(); ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    s.inference = strided_indices(steps, inference_steps);
    return s;
}

/// Linearly spaced betas from beta_min (t = 1) to beta_max (t = T).
inline NoiseSchedule linear_schedule(int steps, double beta_min, double beta_max, int inference_steps) {
    if (steps < 2) throw ConfigError("schedule needs T >= 2");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0))
        throw ConfigError("schedule needs 0 < beta_min < beta_max < 1");
    std::vector<double> beta(static_cast<std::size_t>(steps) + 1, 0.0);
    for (int t = 1; t <= steps; ++t)
        beta[static_cast<std::size_t>(t)] = beta_min + (beta_max - beta_min) * (t - 1) / (steps - 1);
    return finish_schedule(steps, std::move(beta), inference_steps);
}

/// Squared-cosine alpha_bar with offset 0.008; betas capped at 0.999.
inline NoiseSchedule cosine_schedule(int steps, int inference_steps) {
    if (steps < 2) throw ConfigError("schedule needs T >= 2");
    constexpr double offset = 0.008;
    auto f = [&](int t) {
        const double c = std::cos((static_cast<double>(t) / steps + offset) / (1.0 + offset) * 0.5 * kPi);
        return c * c;
    };
    std::vector<double> beta(static_cast<std::size_t>(steps) + 1, 0.0);
    for (int t = 1; t <= steps; ++t)
        beta[static_cast<std::size_t>(t)] = std::min(1.0 - f(t) / f(t - 1), 0.999);
    return finish_schedule(steps, std::move(beta), inference_steps);
}

inline NoiseSchedule build_schedule(ScheduleKind kind, int steps, double beta_min, double beta_max,
                                    int inference_steps) {
    return kind == ScheduleKind::linear ? linear_schedule(steps, beta_min, beta_max, inference_steps)
                                        : cosine_schedule(steps, inference_steps);
}

}  // namespace dplac::diffusion
