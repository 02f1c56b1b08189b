#pragma once

#include <cmath>
#include <vector>

#include "dplac/core/error.hpp"

namespace dplac::stability {

/// Per-episode summary fed to the monitor.
struct EpisodeStats {
    double episode_return = 0.0;
    int updates = 0;
    int violations = 0;            // updates with mean delta L > 0
    double mean_lyapunov = 0.0;    // episode mean of L over visited (s, a)
};

struct StabilityReport {
    int window = 0;
    double violation_rate = 0.0;
    double oscillation = 0.0;      // mean |R_i - R_{i-1}| / std(R)
    double lyapunov_decay = 0.0;   // mean relative drop of the episode-mean L per episode

    friend bool operator==(const StabilityReport&, const StabilityReport&) = default;
};

inline constexpr int kMinReportWindow = 5;

/// Mean absolute successive difference divided by the population std; 0 for
/// constant series.
inline double oscillation_index(const std::vector<double>& returns) {
    const auto n = static_cast<double>(returns.size());
    if (returns.size() < 2) return 0.0;
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    if (sd == 0.0) return 0.0;
    double diff = 0.0;
    for (std::size_t i = 1; i < returns.size(); ++i) diff += std::abs(returns[i] - returns[i - 1]);
    return diff / (n - 1.0) / sd;
}

inline StabilityReport evaluate_stability(const std::vector<EpisodeStats>& window) {
    if (static_cast<int>(window.size()) < kMinReportWindow)
        throw Error("stability window needs at least " + std::to_string(kMinReportWindow) + " episodes");
    StabilityReport r;
    r.window = static_cast<int>(window.size());
    long updates = 0, violations = 0;
    std::vector<double> returns;
    for (const auto& e : window) {
        if (e.updates < 0 || e.violations < 0 || e.violations > e.updates)
            throw Error("episode stats have inconsistent update counts");
        updates += e.updates;
        violations += e.violations;
        returns.push_back(e.episode_return);
    }
    r.violation_rate = updates > 0 ? static_cast<double>(violations) / static_cast<double>(updates) : 0.0;
    r.oscillation = oscillation_index(returns);
    double decay = 0.0;
    int terms = 0;
    for (std::size_t i = 1; i < window.size(); ++i) {
        const double prev = window[i - 1].mean_lyapunov;
        if (prev > 0.0) {
            decay += (prev - window[i].mean_lyapunov) / prev;
            ++terms;
        }
    }
    r.lyapunov_decay = terms > 0 ? decay / terms : 0.0;
    return r;
}

}  // namespace dplac::stability
