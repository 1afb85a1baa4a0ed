#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "benchstitch/dataset.hpp"
#include "benchstitch/error.hpp"
#include "benchstitch/rng.hpp"
#include "benchstitch/stats.hpp"
#include "benchstitch/stitch.hpp"

namespace benchstitch {

struct CapabilityPoint {
    std::string model_id;
    double t = 0.0;  // fractional years
    double capability = 0.0;
};

// One point per fitted model, at its release date.
inline std::vector<CapabilityPoint> capability_points(const StitchParams& params, const ScoreTable& table) {
    std::vector<CapabilityPoint> out;
    for (const auto& m : table.models()) {
        auto it = params.capability.find(m.id);
        if (it != params.capability.end()) out.push_back({m.id, m.t(), it->second});
    }
    return out;
}

// Running-max frontier: points, in time order, whose capability strictly
// exceeds every earlier point. At equal times only the highest can qualify.
inline std::vector<CapabilityPoint> frontier(std::vector<CapabilityPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const CapabilityPoint& a, const CapabilityPoint& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.capability > b.capability;
    });
    std::vector<CapabilityPoint> out;
    for (auto& p : points) {
        if (out.empty() || p.capability > out.back().capability) out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear trend and forecast

struct TrendFit {
    double slope = stats::nan;      // capability units per year
    double intercept = stats::nan;  // capability at t = 0
    stats::Interval slope_ci;       // 95%
    std::size_t n_points = 0;
    double residual_std = stats::nan;
    double t_mean = stats::nan;
    double sxx = stats::nan;

    double value_at(double t) const { return intercept + slope * t; }
};

inline TrendFit fit_linear_trend(const std::vector<CapabilityPoint>& points) {
    if (points.size() < 3) throw InsufficientDataError("fit_linear_trend: need at least 3 points");
    std::vector<double> t, c;
    for (const auto& p : points) {
        t.push_back(p.t);
        c.push_back(p.capability);
    }
    const auto lf = stats::fit_line(t, c);
    TrendFit out;
    out.slope = lf.slope;
    out.intercept = lf.intercept;
    out.slope_ci = lf.slope_ci(0.95);
    out.n_points = lf.n;
    out.residual_std = lf.residual_std;
    out.t_mean = lf.x_mean;
    out.sxx = lf.sxx;
    return out;
}

struct Forecast {
    double t = 0.0;
    double estimate = 0.0;
    stats::Interval interval;  // 95% prediction interval
};

// Point estimate on the fitted line with the OLS prediction interval
// s * sqrt(1 + 1/n + (t - t_mean)^2 / Sxx).
inline Forecast forecast(const TrendFit& trend, double t_target) {
    Forecast f;
    f.t = t_target;
    f.estimate = trend.value_at(t_target);
    const double n = static_cast<double>(trend.n_points);
    const double q = stats::student_t_quantile(0.975, n - 2.0);
    const double dt = t_target - trend.t_mean;
    const double half = q * trend.residual_std * std::sqrt(1.0 + 1.0 / n + dt * dt / trend.sxx);
    f.interval = {f.estimate - half, f.estimate + half};
    return f;
}

struct BacktestEntry {
    std::string model_id;
    double t = 0.0;
    double realized = 0.0;
    Forecast predicted;
    double error = 0.0;  // realized - forecast
};

struct BacktestReport {
    double cutoff = 0.0;
    double horizon_years = 0.0;
    TrendFit trend;
    std::vector<BacktestEntry> entries;
    double mean_signed_error = stats::nan;
};

inline BacktestReport backtest(const std::vector<CapabilityPoint>& points, double cutoff, double horizon_years) {
    const auto fr = frontier(points);
    std::vector<CapabilityPoint> before, after;
    for (const auto& p : fr) {
        if (p.t < cutoff) {
            before.push_back(p);
        } else if (p.t <= cutoff + horizon_years) {
            after.push_back(p);
        }
    }
    if (before.size() < 3) throw InsufficientDataError("backtest: fewer than 3 frontier points before the cutoff");
    if (after.empty()) throw InsufficientDataError("backtest: no frontier points within the horizon after the cutoff");
    BacktestReport r;
    r.cutoff = cutoff;
    r.horizon_years = horizon_years;
    r.trend = fit_linear_trend(before);
    double sum = 0.0;
    for (const auto& p : after) {
        BacktestEntry e{p.model_id, p.t, p.capability, forecast(r.trend, p.t), 0.0};
        e.error = e.realized - e.predicted.estimate;
        sum += e.error;
        r.entries.push_back(std::move(e));
    }
    r.mean_signed_error = sum / static_cast<double>(r.entries.size());
    return r;
}

// ---------------------------------------------------------------------------
// Capability -> time horizon map

struct HorizonMap {
    double a = stats::nan;  // slope of ln(horizon) on capability
    double c = stats::nan;  // intercept
    double train_r2 = stats::nan;
    double test_r2 = stats::nan;
    std::uint64_t split_seed = 0;
    std::vector<std::string> train_models;
    std::vector<std::string> test_models;
};

inline HorizonMap fit_horizon_map(const std::map<std::string, double>& capabilities,
                                  const std::vector<HorizonRecord>& horizons, double train_frac = 0.6,
                                  std::uint64_t seed = 0) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
    std::map<std::string, double> log_h;
    for (const auto& h : horizons) {
        if (capabilities.count(h.model_id)) log_h[h.model_id] = std::log(h.horizon);
    }
    if (log_h.size() < 5) {
        throw InsufficientDataError("fit_horizon_map: need at least 5 models with both capability and horizon, found " +
                                    std::to_string(log_h.size()));
    }
    std::vector<std::string> ids;
    for (const auto& [id, v] : log_h) ids.push_back(id);
    Rng rng(seed);
    rng.shuffle(ids);
    const auto n = ids.size();
    auto n_train = static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 2, n - 1);

    HorizonMap out;
    out.split_seed = seed;
    out.train_models.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_models.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(out.train_models.begin(), out.train_models.end());
    std::sort(out.test_models.begin(), out.test_models.end());

    std::vector<double> x, y;
    for (const auto& id : out.train_models) {
        x.push_back(capabilities.at(id));
        y.push_back(log_h.at(id));
    }
    const auto lf = stats::fit_line(x, y);
    out.a = lf.slope;
    out.c = lf.intercept;
    out.train_r2 = lf.r2();
    std::vector<double> yt, pt;
    for (const auto& id : out.test_models) {
        yt.push_back(log_h.at(id));
        pt.push_back(out.a * capabilities.at(id) + out.c);
    }
    out.test_r2 = stats::r_squared(yt, pt);
    return out;
}

inline double capability_to_horizon(const HorizonMap& map, double capability) {
    return std::exp(map.a * capability + map.c);
}

struct Growth {
    double annual_multiplier = 1.0;
    std::optional<double> doubling_months;  // none unless the multiplier exceeds 1
};

// Annual horizon growth implied by a capability slope (units/year).
inline Growth slope_to_growth(double a, double slope) {
    Growth g;
    g.annual_multiplier = std::exp(a * slope);
    if (g.annual_multiplier > 1.0) g.doubling_months = 12.0 * std::log(2.0) / std::log(g.annual_multiplier);
    return g;
}

inline Growth slope_to_growth(const HorizonMap& map, double slope) { return slope_to_growth(map.a, slope); }

// ---------------------------------------------------------------------------
// Single-breakpoint (hinge) detection

struct BreakpointFit {
    double t_break = stats::nan;
    double level_at_break = stats::nan;
    double pre_slope = stats::nan;
    double post_slope = stats::nan;
    double ratio = stats::nan;      // post / pre; NaN when pre_slope <= 0
    bool ratio_defined = false;
    double rss = stats::nan;
    double line_rss = stats::nan;   // single straight line, for comparison
    bool detected = false;
    std::size_t n_pre = 0;          // points with t <= t_break
    std::size_t n_post = 0;         // points with t >= t_break
    std::size_t candidates = 0;

    double value_at(double t) const {
        return level_at_break + (t < t_break ? pre_slope : post_slope) * (t - t_break);
    }
};

// Candidate break times: every point time and every midpoint between
// consecutive distinct times, ascending.
inline std::vector<double> breakpoint_candidates(const std::vector<double>& sorted_t) {
    std::vector<double> out;
    for (std::size_t i = 0; i < sorted_t.size(); ++i) {
        if (i > 0 && sorted_t[i] == sorted_t[i - 1]) continue;
        if (i > 0) out.push_back(0.5 * (sorted_t[i - 1] + sorted_t[i]));
        out.push_back(sorted_t[i]);
    }
    return out;
}

namespace detail {

struct HingeSolution {
    double level = 0.0, pre = 0.0, post = 0.0, rss = 0.0;
};

// Continuous two-segment least squares with the knot fixed at tau.
inline HingeSolution solve_hinge(const std::vector<double>& t, const std::vector<double>& y, double tau) {
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dt = t[i] - tau;
        const Eigen::Vector3d row(1.0, std::min(dt, 0.0), std::max(dt, 0.0));
        A += row * row.transpose();
        rhs += row * y[i];
    }
    const Eigen::Vector3d beta = A.ldlt().solve(rhs);
    HingeSolution s{beta(0), beta(1), beta(2), 0.0};
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dt = t[i] - tau;
        const double r = y[i] - (s.level + s.pre * std::min(dt, 0.0) + s.post * std::max(dt, 0.0));
        s.rss += r * r;
    }
    return s;
}

}  // namespace detail

inline BreakpointFit detect_breakpoint(std::vector<CapabilityPoint> points, double threshold = 2.0,
                                       std::size_t min_segment = 3) {
    if (min_segment < 2) throw ConfigError("min_segment must be at least 2");
    if (points.size() < 2 * min_segment) {
        throw InsufficientDataError("detect_breakpoint: need at least " + std::to_string(2 * min_segment) +
                                    " points, found " + std::to_string(points.size()));
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const CapabilityPoint& a, const CapabilityPoint& b) { return a.t < b.t; });
    std::vector<double> t, y;
    for (const auto& p : points) {
        t.push_back(p.t);
        y.push_back(p.capability);
    }

    BreakpointFit best;
    bool found = false;
    for (double tau : breakpoint_candidates(t)) {
        const auto n_pre = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), tau) - t.begin());
        const auto n_post = static_cast<std::size_t>(t.end() - std::lower_bound(t.begin(), t.end(), tau));
        if (n_pre < min_segment || n_post < min_segment) continue;
        ++best.candidates;
        const auto s = detail::solve_hinge(t, y, tau);
        if (!found || s.rss < best.rss) {
            found = true;
            best.t_break = tau;
            best.level_at_break = s.level;
            best.pre_slope = s.pre;
            best.post_slope = s.post;
            best.rss = s.rss;
            best.n_pre = n_pre;
            best.n_post = n_post;
        }
    }
    if (!found) throw InsufficientDataError("detect_breakpoint: no admissible break candidate");

    best.line_rss = stats::fit_line(t, y).ss_res;
    best.ratio_defined = best.pre_slope > 0.0;
    if (best.ratio_defined) {
        best.ratio = best.post_slope / best.pre_slope;
        best.detected = best.ratio >= threshold;
    }
    return best;
}

}  // namespace benchstitch
