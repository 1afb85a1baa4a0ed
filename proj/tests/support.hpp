#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "benchstitch/benchstitch.hpp"

namespace bstest {

using namespace benchstitch;

inline std::string id(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%03zu", prefix, i);
    return buf;
}

// Random parameters in no particular gauge.
inline StitchParams random_params(Rng& rng, std::size_t models, std::size_t benchmarks) {
    StitchParams p;
    for (std::size_t m = 0; m < models; ++m) p.capability[id('m', m)] = rng.normal(0.0, 1.5);
    for (std::size_t b = 0; b < benchmarks; ++b) {
        p.difficulty[id('b', b)] = rng.normal(0.0, 1.0);
        p.slope[id('b', b)] = std::exp(rng.normal(0.0, 0.4));
    }
    return p;
}

// Noise-free scores from `p`. Model m is released at t0 + m * dt. With
// drop > 1 the pair (m, b) is skipped when (7m + 3b) % drop == 0, which keeps
// the model-benchmark graph connected.
inline ScoreTable exact_table(const StitchParams& p, double t0 = 2020.0, double dt = 0.02, std::size_t drop = 1,
                              Link link = Link::sigmoid) {
    std::vector<ScoreRecord> rows;
    std::size_t m = 0;
    for (const auto& [mid, c] : p.capability) {
        std::size_t b = 0;
        for (const auto& [bid, d] : p.difficulty) {
            if (drop <= 1 || (7 * m + 3 * b) % drop != 0) {
                rows.push_back({mid, bid, predict_score(p, mid, bid, link),
                                Date::from_fractional_year(t0 + static_cast<double>(m) * dt), std::nullopt});
            }
            ++b;
        }
        ++m;
    }
    return ScoreTable::from_records(std::move(rows));
}

// Fully crossed sigmoid scores with additive Gaussian noise, clamped to [0, 1].
// Benchmarks are released in 2024 so they survive a recency filter.
inline ScoreTable noisy_table(std::uint64_t seed, std::size_t models, std::size_t benchmarks, double sigma) {
    Rng rng(seed);
    const auto p = random_params(rng, models, benchmarks);
    std::vector<ScoreRecord> rows;
    std::size_t m = 0;
    for (const auto& [mid, c] : p.capability) {
        const auto release = Date::from_fractional_year(2023.0 + 0.05 * static_cast<double>(m++));
        std::size_t b = 0;
        for (const auto& [bid, d] : p.difficulty) {
            const double s = std::clamp(predict_score(p, mid, bid) + rng.normal(0.0, sigma), 0.0, 1.0);
            rows.push_back({mid, bid, s, release, Date::from_fractional_year(2024.0 + 0.01 * static_cast<double>(b++))});
        }
    }
    return ScoreTable::from_records(std::move(rows));
}

// Half the benchmarks, chosen independently of the scores, are labelled optimized-for.
inline std::vector<BenchmarkLabel> random_labels(const ScoreTable& table, Rng& rng) {
    std::vector<std::string> ids;
    for (const auto& b : table.benchmarks()) ids.push_back(b.id);
    rng.shuffle(ids);
    std::vector<BenchmarkLabel> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], i < ids.size() / 2});
    return out;
}

inline std::vector<CapabilityPoint> points(const std::vector<double>& t, const std::vector<double>& c) {
    std::vector<CapabilityPoint> out;
    for (std::size_t i = 0; i < t.size(); ++i) out.push_back({id('m', i), t[i], c[i]});
    return out;
}

// Continuous single-knot fit by exhaustive search over every point time and
// every midpoint between consecutive distinct times. Normal equations are
// solved by Cramer's rule, independently of the library solver.
struct BruteBreak {
    double tau = 0.0, level = 0.0, pre = 0.0, post = 0.0, rss = 0.0;
    bool found = false;
};

inline BruteBreak brute_force_break(std::vector<double> t, std::vector<double> y, std::size_t min_segment) {
    std::vector<std::size_t> order(t.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
    std::vector<double> ts, ys;
    for (auto i : order) {
        ts.push_back(t[i]);
        ys.push_back(y[i]);
    }
    BruteBreak best;
    std::vector<double> taus;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        if (k > 0 && ts[k] == ts[k - 1]) continue;
        if (k > 0) taus.push_back(0.5 * (ts[k - 1] + ts[k]));
        taus.push_back(ts[k]);
    }
    for (double tau : taus) {
        std::size_t n_pre = 0, n_post = 0;
        for (double v : ts) {
            n_pre += v <= tau;
            n_post += v >= tau;
        }
        if (n_pre < min_segment || n_post < min_segment) continue;
        double a[3][3] = {}, r[3] = {};
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double x[3] = {1.0, std::min(ts[i] - tau, 0.0), std::max(ts[i] - tau, 0.0)};
            for (int p = 0; p < 3; ++p) {
                r[p] += x[p] * ys[i];
                for (int q = 0; q < 3; ++q) a[p][q] += x[p] * x[q];
            }
        }
        auto det3 = [](double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        const double det = det3(a);
        double sol[3];
        for (int c = 0; c < 3; ++c) {
            double m[3][3];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) m[i][j] = j == c ? r[i] : a[i][j];
            sol[c] = det3(m) / det;
        }
        double rss = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double e =
                ys[i] - (sol[0] + sol[1] * std::min(ts[i] - tau, 0.0) + sol[2] * std::max(ts[i] - tau, 0.0));
            rss += e * e;
        }
        if (!best.found || rss < best.rss) best = {tau, sol[0], sol[1], sol[2], rss, true};
    }
    return best;
}

}  // namespace bstest
