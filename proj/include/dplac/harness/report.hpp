#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dplac/core/error.hpp"

namespace dplac::harness {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
    int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd m;
    m.n = static_cast<int>(xs.size());
    if (xs.empty()) return m;
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return m;
}

/// Ranks starting at 1; tied values share their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Spearman rank correlation (Pearson correlation of average ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("spearman needs equal-length samples");
    if (x.size() < 2) throw Error("spearman needs at least two pairs");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// First index whose value is at most half of the first value; the curve
/// length when it never gets there.
inline int episodes_to_half(const std::vector<double>& curve) {
    if (curve.empty()) throw Error("empty Lyapunov curve");
    const double half = 0.5 * curve.front();
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i] <= half) return static_cast<int>(i);
    return static_cast<int>(curve.size());
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw Error("median of an empty sample");
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

/// Plain CSV writer with versioned header comments.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& comments,
              const std::vector<std::string>& columns, bool append = false)
        : path_(path) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
        os_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!os_) throw Error("cannot open '" + path.string() + "' for writing");
        os_.precision(10);
        if (fresh) {
            for (const auto& c : comments) os_ << "# " << c << '\n';
            for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
            os_ << '\n';
        }
        width_ = columns.size();
    }

    template <class... Ts>
    void row(const Ts&... values) {
        if (sizeof...(Ts) != width_) throw ShapeError("CSV row width does not match the header of " + path_.string());
        std::size_t i = 0;
        ((os_ << (i++ ? "," : "") << values), ...);
        os_ << '\n';
        os_.flush();
    }

private:
    std::filesystem::path path_;
    std::ofstream os_;
    std::size_t width_ = 0;
};

/// Parsed CSV: comment lines skipped, first remaining line is the header.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw FormatError("CSV has no column '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    [[nodiscard]] std::vector<double> numbers(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        for (const auto& r : rows) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(r.at(c), &used));
                if (used != r.at(c).size()) throw FormatError("trailing characters");
            } catch (const std::exception&) {
                throw FormatError("non-numeric value '" + r.at(c) + "' in column '" + name + "'");
            }
        }
        return out;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open '" + path.string() + "'");
    CsvTable t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (!header) {
            t.columns = std::move(cells);
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw FormatError("malformed CSV '" + path.string() + "': row has " + std::to_string(cells.size()) +
                              " cells, header has " + std::to_string(t.columns.size()));
        t.rows.push_back(std::move(cells));
    }
    if (!header) throw FormatError("CSV '" + path.string() + "' has no header line");
    return t;
}

}  // namespace dplac::harness
