#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "benchstitch/dataset.hpp"
#include "benchstitch/error.hpp"
#include "benchstitch/stats.hpp"
#include "benchstitch/stitch.hpp"
#include "benchstitch/trends.hpp"

namespace benchstitch::algoprog {

// A fitted model joined with its training compute. `fingerprint` identifies
// the gauged fit the capability came from; analyses refuse mixed inputs.
struct ModelPoint {
    std::string model_id;
    double t = 0.0;
    double capability = 0.0;
    double log_flop = 0.0;  // natural log
    std::optional<std::string> family;
    bool distilled = false;
    std::string fingerprint;
};

inline std::vector<ModelPoint> join_compute(const FitResult& fit, const ScoreTable& table,
                                            const std::vector<ComputeRecord>& compute) {
    std::map<std::string, const ComputeRecord*> by_id;
    for (const auto& c : compute) by_id[c.model_id] = &c;
    std::vector<ModelPoint> out;
    for (const auto& m : table.models()) {
        auto cap = fit.params.capability.find(m.id);
        auto cr = by_id.find(m.id);
        if (cap == fit.params.capability.end() || cr == by_id.end()) continue;
        out.push_back({m.id, m.t(), cap->second, std::log(cr->second->training_flop), cr->second->family,
                       cr->second->distilled, fit.fingerprint});
    }
    return out;
}

inline void require_single_fit(std::span<const ModelPoint> points) {
    for (const auto& p : points) {
        if (p.fingerprint != points.front().fingerprint) {
            throw ValidationError("inputs mix capabilities from different fits (" + points.front().fingerprint + " vs " +
                                  p.fingerprint + ")");
        }
    }
}

// ---------------------------------------------------------------------------
// Compute slope k

struct FamilyFit {
    std::string family;
    double k = stats::nan;
    double intercept = stats::nan;
    std::size_t n_models = 0;
    double r2 = stats::nan;
    stats::Interval k_ci;
};

struct KEstimate {
    std::vector<FamilyFit> families;
    std::vector<std::string> skipped;  // families with fewer than 2 usable models
    double weighted_k = stats::nan;   // weighted by model count
};

inline KEstimate estimate_k(std::span<const ModelPoint> points, const std::vector<std::string>& families,
                            bool exclude_distilled) {
    require_single_fit(points);
    KEstimate out;
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& family : families) {
        std::vector<double> x, y;
        for (const auto& p : points) {
            if (p.family != family || (exclude_distilled && p.distilled)) continue;
            x.push_back(p.log_flop);
            y.push_back(p.capability);
        }
        if (x.size() < 2) {
            out.skipped.push_back(family);
            continue;
        }
        stats::LineFit lf;
        try {
            lf = stats::fit_line(x, y);
        } catch (const SingularError&) {
            out.skipped.push_back(family);
            continue;
        }
        out.families.push_back({family, lf.slope, lf.intercept, lf.n, lf.r2(), lf.slope_ci(0.95)});
        weighted += lf.slope * static_cast<double>(lf.n);
        total += lf.n;
    }
    if (out.families.empty()) throw InsufficientDataError("estimate_k: no family has 2 or more usable models");
    out.weighted_k = weighted / static_cast<double>(total);
    return out;
}

// Pooled slope of C on ln F over every model with compute. Confounds compute
// growth with algorithmic gains, so it is biased relative to within-family fits.
inline FamilyFit estimate_k_all_models(std::span<const ModelPoint> points, bool exclude_distilled) {
    require_single_fit(points);
    std::vector<double> x, y;
    for (const auto& p : points) {
        if (exclude_distilled && p.distilled) continue;
        x.push_back(p.log_flop);
        y.push_back(p.capability);
    }
    const auto lf = stats::fit_line(x, y);
    return {"all", lf.slope, lf.intercept, lf.n, lf.r2(), lf.slope_ci(0.95)};
}

// ---------------------------------------------------------------------------
// Algorithmic quality b and its rate of change

inline double compute_b(double capability, double training_flop, double k) {
    if (k == 0.0) throw ConfigError("compute_b: k must be non-zero");
    if (!(training_flop > 0.0)) throw ValidationError("compute_b: training_flop must be positive");
    return capability - k * std::log(training_flop);
}

enum class FrontierMode { capability, quality };

inline const char* to_string(FrontierMode m) { return m == FrontierMode::capability ? "capability" : "quality"; }

struct BPoint {
    std::string model_id;
    double t = 0.0;
    double b = 0.0;
    double capability = 0.0;
};

inline std::vector<BPoint> b_points(std::span<const ModelPoint> points, double k, bool exclude_distilled) {
    require_single_fit(points);
    std::vector<BPoint> out;
    for (const auto& p : points) {
        if (exclude_distilled && p.distilled) continue;
        out.push_back({p.model_id, p.t, p.capability - k * p.log_flop, p.capability});
    }
    return out;
}

struct ProgressEstimate {
    FrontierMode frontier_mode = FrontierMode::capability;
    double k_used = stats::nan;
    double delta_b_per_year = stats::nan;
    stats::Interval delta_b_ci;
    double efficiency_per_year = stats::nan;  // exp(delta_b / k)
    stats::Interval efficiency_ci;
    std::vector<std::string> frontier_models;
};

inline stats::Interval efficiency_interval(const stats::Interval& db, double k) {
    double lo = std::exp(db.lo / k), hi = std::exp(db.hi / k);
    if (lo > hi) std::swap(lo, hi);
    return {lo, hi};
}

inline ProgressEstimate delta_b_rate(const std::vector<BPoint>& points, FrontierMode mode, double k_used) {
    if (k_used == 0.0) throw ConfigError("delta_b_rate: k must be non-zero");
    std::vector<CapabilityPoint> keyed;
    std::map<std::string, const BPoint*> by_id;
    for (const auto& p : points) {
        keyed.push_back({p.model_id, p.t, mode == FrontierMode::capability ? p.capability : p.b});
        by_id[p.model_id] = &p;
    }
    const auto fr = frontier(std::move(keyed));
    if (fr.size() < 3) throw InsufficientDataError("delta_b_rate: fewer than 3 frontier points");
    std::vector<double> t, b;
    ProgressEstimate out;
    for (const auto& p : fr) {
        t.push_back(p.t);
        b.push_back(by_id.at(p.model_id)->b);
        out.frontier_models.push_back(p.model_id);
    }
    const auto lf = stats::fit_line(t, b);
    out.frontier_mode = mode;
    out.k_used = k_used;
    out.delta_b_per_year = lf.slope;
    out.delta_b_ci = lf.slope_ci(0.95);
    out.efficiency_per_year = std::exp(out.delta_b_per_year / k_used);
    out.efficiency_ci = efficiency_interval(out.delta_b_ci, k_used);
    return out;
}

// ---------------------------------------------------------------------------
// Joint regression C = k ln F + b_rate (t - t0) + intercept

struct JointPoint {
    double t = 0.0;
    double capability = 0.0;
    double log_flop = 0.0;
};

struct JointEstimate {
    double k = stats::nan;
    double b_rate = stats::nan;
    double intercept = stats::nan;
    stats::Interval k_ci;
    stats::Interval b_rate_ci;
    double efficiency_per_year = stats::nan;
    stats::Interval efficiency_ci;
    double condition_number = stats::nan;
    std::size_t n = 0;
};

inline JointEstimate ols_joint(const std::vector<JointPoint>& points, std::optional<double> t0 = std::nullopt) {
    if (points.size() < 4) throw InsufficientDataError("ols_joint: need at least 4 points");
    double origin = t0.value_or(points.front().t);
    if (!t0) {
        for (const auto& p : points) origin = std::min(origin, p.t);
    }
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        X(i, 0) = 1.0;
        X(i, 1) = p.log_flop;
        X(i, 2) = p.t - origin;
        y(i) = p.capability;
    }
    // Collinearity is judged on the centered regressors: an intercept column
    // plus raw ln F (~50) is otherwise spuriously ill-conditioned.
    Eigen::MatrixXd centered = X.rightCols(2);
    centered.rowwise() -= centered.colwise().mean();
    const double cond = stats::column_normalized_condition(centered);
    if (!(cond < 1e8)) {
        throw SingularError("ols_joint: regressors are collinear (condition number " + std::to_string(cond) + ")");
    }
    const auto r = stats::ols(X, y, std::numeric_limits<double>::infinity());
    JointEstimate out;
    out.n = points.size();
    out.condition_number = cond;
    out.intercept = r.coef(0);
    out.k = r.coef(1);
    out.b_rate = r.coef(2);
    const double q = stats::student_t_quantile(0.975, static_cast<double>(r.df));
    out.k_ci = {out.k - q * r.se(1), out.k + q * r.se(1)};
    out.b_rate_ci = {out.b_rate - q * r.se(2), out.b_rate + q * r.se(2)};
    out.efficiency_per_year = std::exp(out.b_rate / out.k);
    out.efficiency_ci = efficiency_interval(out.b_rate_ci, out.k);
    return out;
}

// ---------------------------------------------------------------------------
// Direct bucket estimators

struct CapabilityBucket {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t n_in_bucket = 0;
    std::size_t n_models = 0;            // compute-frontier models used in the fit
    double annual_compute_reduction = stats::nan;  // exp(-slope of ln F on t)
    std::vector<std::string> frontier_models;
};

// Capability buckets [lo, lo + width) swept in `step` increments. In each,
// starting from the earliest model, keep later models that use strictly less
// compute than all earlier kept ones, and fit ln F on t when 3 or more remain.
inline std::vector<CapabilityBucket> bucket_fixed_capability(std::span<const ModelPoint> points, double width = 0.3,
                                                             double step = 0.1) {
    require_single_fit(points);
    if (!(width > 0.0 && step > 0.0)) throw ConfigError("bucket width and step must be positive");
    std::vector<CapabilityBucket> out;
    if (points.empty()) return out;
    double cmin = points.front().capability, cmax = cmin;
    for (const auto& p : points) {
        cmin = std::min(cmin, p.capability);
        cmax = std::max(cmax, p.capability);
    }
    std::vector<const ModelPoint*> sorted;
    for (const auto& p : points) sorted.push_back(&p);
    std::stable_sort(sorted.begin(), sorted.end(), [](const ModelPoint* a, const ModelPoint* b) {
        if (a->t != b->t) return a->t < b->t;
        return a->model_id < b->model_id;
    });

    const auto first = static_cast<long>(std::floor(cmin / step + 1e-9));
    const auto last = static_cast<long>(std::floor(cmax / step + 1e-9));
    for (long i = first; i <= last; ++i) {
        CapabilityBucket bucket;
        bucket.lower = std::round(static_cast<double>(i) * step * 1e9) / 1e9;
        bucket.upper = bucket.lower + width;
        std::vector<const ModelPoint*> kept;
        for (const auto* p : sorted) {
            if (p->capability < bucket.lower || p->capability >= bucket.upper) continue;
            ++bucket.n_in_bucket;
            if (kept.empty() || (p->t > kept.front()->t && p->log_flop < kept.back()->log_flop)) kept.push_back(p);
        }
        if (kept.size() < 3) continue;
        std::vector<double> t, lf;
        for (const auto* p : kept) {
            t.push_back(p->t);
            lf.push_back(p->log_flop);
            bucket.frontier_models.push_back(p->model_id);
        }
        try {
            const auto fit = stats::fit_line(t, lf);
            bucket.n_models = kept.size();
            bucket.annual_compute_reduction = std::exp(-fit.slope);
        } catch (const SingularError&) {
            continue;
        }
        out.push_back(std::move(bucket));
    }
    return out;
}

struct ComputeBucket {
    double center_log10_flop = 0.0;
    std::size_t n_in_bucket = 0;
    std::size_t n_models = 0;  // capability-frontier models used in the fit
    double capability_per_year = stats::nan;
    std::vector<std::string> frontier_models;
};

// Compute buckets centred on a 0.1-decade grid (x.x5 in log10 FLOP). Models
// within a factor `half_width_factor` of the centre form the bucket; its
// running-max capability frontier is fitted when 3 or more models remain.
inline std::vector<ComputeBucket> bucket_fixed_compute(std::span<const ModelPoint> points,
                                                       double half_width_factor = std::sqrt(2.0),
                                                       double grid_step_log10 = 0.1) {
    require_single_fit(points);
    if (!(half_width_factor > 1.0)) throw ConfigError("half_width_factor must exceed 1");
    std::vector<ComputeBucket> out;
    if (points.empty()) return out;
    const double ln10 = std::log(10.0);
    double lo = points.front().log_flop / ln10, hi = lo;
    for (const auto& p : points) {
        lo = std::min(lo, p.log_flop / ln10);
        hi = std::max(hi, p.log_flop / ln10);
    }
    const double half = std::log10(half_width_factor);
    const auto first = static_cast<long>(std::floor(lo / grid_step_log10));
    const auto last = static_cast<long>(std::floor(hi / grid_step_log10));
    for (long i = first; i <= last; ++i) {
        ComputeBucket bucket;
        bucket.center_log10_flop = (static_cast<double>(i) + 0.5) * grid_step_log10;
        std::vector<CapabilityPoint> members;
        for (const auto& p : points) {
            if (std::abs(p.log_flop / ln10 - bucket.center_log10_flop) <= half) {
                members.push_back({p.model_id, p.t, p.capability});
            }
        }
        bucket.n_in_bucket = members.size();
        const auto fr = frontier(std::move(members));
        if (fr.size() < 3) continue;
        std::vector<double> t, c;
        for (const auto& p : fr) {
            t.push_back(p.t);
            c.push_back(p.capability);
            bucket.frontier_models.push_back(p.model_id);
        }
        bucket.n_models = fr.size();
        bucket.capability_per_year = stats::fit_line(t, c).slope;
        out.push_back(std::move(bucket));
    }
    return out;
}

}  // namespace benchstitch::algoprog
