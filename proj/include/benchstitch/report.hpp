#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "benchstitch/algoprog.hpp"
#include "benchstitch/csv.hpp"
#include "benchstitch/dataset.hpp"
#include "benchstitch/robustness.hpp"
#include "benchstitch/stitch.hpp"
#include "benchstitch/synthlab.hpp"
#include "benchstitch/trends.hpp"

// JSON and CSV renderings of analysis results. Non-finite numbers become null
// in JSON and empty fields in CSV.
namespace benchstitch::report {

using Json = nlohmann::ordered_json;

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string cell(double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); }

inline Json interval(const stats::Interval& i) { return Json::array({num(i.lo), num(i.hi)}); }

inline Json gauge(const GaugeSpec& g) {
    Json j;
    if (g.mode == GaugeSpec::Mode::benchmark_anchor) {
        j["mode"] = "benchmark_anchor";
        j["anchor_benchmark"] = *g.anchor_benchmark;
    } else {
        j["mode"] = "model_pair_anchor";
        Json models = Json::array();
        for (const auto& [id, v] : g.anchor_models) models.push_back({{"id", id}, {"value", num(v)}});
        j["anchor_models"] = models;
    }
    return j;
}

inline Json diagnostics(const Diagnostics& d) {
    Json per = Json::object();
    for (const auto& [id, r2] : d.per_benchmark_r2) per[id] = num(r2);
    return {{"r2", num(d.r2)},
            {"mse", num(d.mse)},
            {"rss", num(d.rss)},
            {"aic", num(d.aic)},
            {"bic", num(d.bic)},
            {"information_criteria_reliable", d.information_criteria_reliable},
            {"ks_statistic", num(d.ks_statistic)},
            {"ks_p_value", num(d.ks_p_value)},
            {"per_benchmark_r2", per}};
}

inline Json fit(const FitResult& f, const ScoreTable& table, const std::optional<SensitivityReport>& errors,
                const std::optional<Diagnostics>& diag) {
    Json models = Json::array();
    for (const auto& m : table.models()) {
        Json e{{"id", m.id}, {"capability", num(f.params.capability.at(m.id))}};
        if (errors) {
            const auto& s = errors->capability.at(m.id);
            e["err_lo"] = num(s.lo);
            e["err_hi"] = num(s.hi);
            e["err_capped"] = s.capped;
        }
        e["release"] = m.release.iso();
        models.push_back(e);
    }
    Json benches = Json::array();
    for (const auto& b : table.benchmarks()) {
        Json e{{"id", b.id}, {"difficulty", num(f.params.difficulty.at(b.id))}, {"slope", num(f.params.slope.at(b.id))}};
        if (errors) {
            const auto& s = errors->difficulty.at(b.id);
            e["err_lo"] = num(s.lo);
            e["err_hi"] = num(s.hi);
            e["err_capped"] = s.capped;
        }
        e["release"] = b.release ? Json(b.release->iso()) : Json(nullptr);
        benches.push_back(e);
    }
    Json j{{"models", models},
           {"benchmarks", benches},
           {"gauge", gauge(f.params.gauge)},
           {"link", to_string(f.link)},
           {"l2_strength", num(f.l2_strength)},
           {"rss", num(f.rss)},
           {"loss", num(f.loss)},
           {"n_obs", f.n_obs},
           {"n_params", f.n_params},
           {"converged", f.converged},
           {"iterations", f.iterations},
           {"fingerprint", f.fingerprint}};
    if (diag) j["diagnostics"] = diagnostics(*diag);
    return j;
}

inline std::string residuals_csv(const Diagnostics& d) {
    std::ostringstream out;
    out << "model_id,benchmark_id,observed,predicted,residual\n";
    for (const auto& r : d.residuals) {
        out << csv::quote(r.model_id) << ',' << csv::quote(r.benchmark_id) << ',' << cell(r.observed) << ','
            << cell(r.predicted) << ',' << cell(r.residual) << '\n';
    }
    return out.str();
}

inline std::string capabilities_csv(const FitResult& f, const ScoreTable& table, const std::optional<SensitivityReport>& errors) {
    std::ostringstream out;
    out << "model_id,release,t,capability,err_lo,err_hi\n";
    for (const auto& m : table.models()) {
        out << csv::quote(m.id) << ',' << m.release.iso() << ',' << cell(m.t()) << ',' << cell(f.params.capability.at(m.id))
            << ',';
        if (errors) out << cell(errors->capability.at(m.id).lo) << ',' << cell(errors->capability.at(m.id).hi);
        else out << ',';
        out << '\n';
    }
    return out.str();
}

inline std::string difficulties_csv(const FitResult& f, const ScoreTable& table, const std::optional<SensitivityReport>& errors) {
    std::ostringstream out;
    out << "benchmark_id,release,t,difficulty,slope,err_lo,err_hi\n";
    for (const auto& b : table.benchmarks()) {
        out << csv::quote(b.id) << ',' << (b.release ? b.release->iso() : std::string()) << ','
            << (b.release ? cell(b.release->fractional_year()) : std::string()) << ','
            << cell(f.params.difficulty.at(b.id)) << ',' << cell(f.params.slope.at(b.id)) << ',';
        if (errors) out << cell(errors->difficulty.at(b.id).lo) << ',' << cell(errors->difficulty.at(b.id).hi);
        else out << ',';
        out << '\n';
    }
    return out.str();
}

inline Json trend(const TrendFit& t) {
    return {{"slope", num(t.slope)},
            {"slope_ci", interval(t.slope_ci)},
            {"intercept", num(t.intercept)},
            {"n_points", t.n_points},
            {"residual_std", num(t.residual_std)}};
}

inline Json points(const std::vector<CapabilityPoint>& pts) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back({{"model_id", p.model_id}, {"t", num(p.t)}, {"capability", num(p.capability)}});
    return a;
}

// Plot data: frontier points with the fitted line and its 95% prediction band.
inline std::string trend_plot_csv(const std::vector<CapabilityPoint>& frontier_points, const TrendFit& t) {
    std::ostringstream out;
    out << "t,capability,fitted,lo,hi\n";
    for (const auto& p : frontier_points) {
        const auto f = forecast(t, p.t);
        out << cell(p.t) << ',' << cell(p.capability) << ',' << cell(f.estimate) << ',' << cell(f.interval.lo) << ','
            << cell(f.interval.hi) << '\n';
    }
    return out.str();
}

inline Json forecast(const Forecast& f) {
    return {{"t", num(f.t)}, {"estimate", num(f.estimate)}, {"interval", interval(f.interval)}};
}

inline Json horizon_map(const HorizonMap& h) {
    return {{"a", num(h.a)},
            {"c", num(h.c)},
            {"train_r2", num(h.train_r2)},
            {"test_r2", num(h.test_r2)},
            {"split_seed", h.split_seed},
            {"train_models", h.train_models},
            {"test_models", h.test_models}};
}

inline Json growth(const Growth& g) {
    return {{"annual_multiplier", num(g.annual_multiplier)},
            {"doubling_months", g.doubling_months ? num(*g.doubling_months) : Json(nullptr)}};
}

inline Json backtest(const BacktestReport& b) {
    Json entries = Json::array();
    for (const auto& e : b.entries) {
        entries.push_back({{"model_id", e.model_id}, {"t", num(e.t)}, {"realized", num(e.realized)},
                           {"predicted", num(e.predicted.estimate)}, {"interval", interval(e.predicted.interval)},
                           {"error", num(e.error)}});
    }
    return {{"cutoff", num(b.cutoff)},
            {"horizon_years", num(b.horizon_years)},
            {"trend", trend(b.trend)},
            {"mean_signed_error", num(b.mean_signed_error)},
            {"entries", entries}};
}

inline Json breakpoint(const BreakpointFit& b, double threshold) {
    return {{"t_break", num(b.t_break)},
            {"t_break_date", std::isfinite(b.t_break) ? Json(Date::from_fractional_year(b.t_break).iso()) : Json(nullptr)},
            {"level_at_break", num(b.level_at_break)},
            {"pre_slope", num(b.pre_slope)},
            {"post_slope", num(b.post_slope)},
            {"ratio", num(b.ratio)},
            {"ratio_defined", b.ratio_defined},
            {"threshold", num(threshold)},
            {"detected", b.detected},
            {"rss", num(b.rss)},
            {"line_rss", num(b.line_rss)},
            {"n_pre", b.n_pre},
            {"n_post", b.n_post},
            {"candidates", b.candidates}};
}

inline std::string breakpoint_plot_csv(const std::vector<CapabilityPoint>& pts, const BreakpointFit& b) {
    std::ostringstream out;
    out << "model_id,t,capability,fitted\n";
    for (const auto& p : pts) {
        out << csv::quote(p.model_id) << ',' << cell(p.t) << ',' << cell(p.capability) << ',' << cell(b.value_at(p.t)) << '\n';
    }
    return out.str();
}

inline Json k_estimate(const algoprog::KEstimate& k) {
    Json fams = Json::array();
    for (const auto& f : k.families) {
        fams.push_back({{"family", f.family}, {"k", num(f.k)}, {"k_ci", interval(f.k_ci)}, {"intercept", num(f.intercept)},
                        {"n_models", f.n_models}, {"r2", num(f.r2)}});
    }
    return {{"weighted_k", num(k.weighted_k)}, {"families", fams}, {"skipped", k.skipped}};
}

inline Json family_fit(const algoprog::FamilyFit& f) {
    return {{"family", f.family}, {"k", num(f.k)}, {"k_ci", interval(f.k_ci)}, {"intercept", num(f.intercept)},
            {"n_models", f.n_models}, {"r2", num(f.r2)}};
}

inline Json progress(const algoprog::ProgressEstimate& p) {
    return {{"frontier_mode", algoprog::to_string(p.frontier_mode)},
            {"k_used", num(p.k_used)},
            {"delta_b_per_year", num(p.delta_b_per_year)},
            {"delta_b_ci", interval(p.delta_b_ci)},
            {"efficiency_per_year", num(p.efficiency_per_year)},
            {"efficiency_ci", interval(p.efficiency_ci)},
            {"frontier_models", p.frontier_models}};
}

inline Json joint(const algoprog::JointEstimate& j) {
    return {{"k", num(j.k)},
            {"k_ci", interval(j.k_ci)},
            {"b_rate", num(j.b_rate)},
            {"b_rate_ci", interval(j.b_rate_ci)},
            {"intercept", num(j.intercept)},
            {"efficiency_per_year", num(j.efficiency_per_year)},
            {"efficiency_ci", interval(j.efficiency_ci)},
            {"condition_number", num(j.condition_number)},
            {"n", j.n}};
}

inline std::string capability_buckets_csv(const std::vector<algoprog::CapabilityBucket>& buckets) {
    std::ostringstream out;
    out << "lower,upper,n_in_bucket,n_models,annual_compute_reduction\n";
    for (const auto& b : buckets) {
        out << cell(b.lower) << ',' << cell(b.upper) << ',' << b.n_in_bucket << ',' << b.n_models << ','
            << cell(b.annual_compute_reduction) << '\n';
    }
    return out.str();
}

inline std::string compute_buckets_csv(const std::vector<algoprog::ComputeBucket>& buckets) {
    std::ostringstream out;
    out << "center_log10_flop,n_in_bucket,n_models,capability_per_year\n";
    for (const auto& b : buckets) {
        out << cell(b.center_log10_flop) << ',' << b.n_in_bucket << ',' << b.n_models << ',' << cell(b.capability_per_year)
            << '\n';
    }
    return out.str();
}

inline Json anchor_sweep(const robust::AnchorSweepResult& r) {
    Json failed = Json::array();
    for (const auto& f : r.failed) failed.push_back({{"anchor", f.anchor}, {"reason", f.reason}});
    double max_cap_sd = 0.0;
    for (const auto& [id, s] : r.capability) max_cap_sd = std::max(max_cap_sd, s.stddev);
    return {{"anchors", r.anchors}, {"failed", failed}, {"max_capability_std", num(max_cap_sd)}};
}

inline std::string anchor_spread_csv(const robust::AnchorSweepResult& r) {
    std::ostringstream out;
    out << "kind,id,mean,std,n\n";
    for (const auto& [id, s] : r.capability) out << "model," << csv::quote(id) << ',' << cell(s.mean) << ',' << cell(s.stddev) << ',' << s.n << '\n';
    for (const auto& [id, s] : r.difficulty) out << "benchmark," << csv::quote(id) << ',' << cell(s.mean) << ',' << cell(s.stddev) << ',' << s.n << '\n';
    return out.str();
}

inline Json subset_slopes(const robust::SubsetSlopes& s) {
    return {{"runs", s.runs.size()},
            {"missing", s.missing},
            {"median", num(s.median)},
            {"p025", num(s.p025)},
            {"p975", num(s.p975)}};
}

inline std::string subset_runs_csv(const robust::SubsetSlopes& s) {
    std::ostringstream out;
    out << "run,n_benchmarks,slope,failure\n";
    for (std::size_t i = 0; i < s.runs.size(); ++i) {
        const auto& r = s.runs[i];
        out << i << ',' << r.benchmarks.size() << ',' << (r.slope ? cell(*r.slope) : std::string()) << ','
            << csv::quote(r.failure) << '\n';
    }
    return out.str();
}

inline Json permutation(const robust::PermutationResult& p) {
    Json anchors = Json::array();
    for (const auto& a : p.per_anchor) {
        anchors.push_back({{"anchor", a.anchor},
                           {"anchor_optimized_for", a.anchor_optimized_for},
                           {"observed_diff", num(a.observed_diff)},
                           {"shared_models", a.shared_models},
                           {"n_null", a.null_diffs.size()},
                           {"p_value", num(a.p_value)}});
    }
    return {{"observed_diff", num(p.observed_diff)},
            {"mean_p", num(p.mean_p)},
            {"n_permutations", p.n_permutations},
            {"optimized", p.optimized},
            {"not_optimized", p.not_optimized},
            {"per_anchor", anchors}};
}

inline Json link_comparison(const std::vector<robust::LinkMetrics>& rows) {
    Json a = Json::array();
    for (const auto& m : rows) {
        a.push_back({{"link", to_string(m.link)},
                     {"r2", num(m.r2)},
                     {"mse", num(m.mse)},
                     {"aic", num(m.aic)},
                     {"bic", num(m.bic)},
                     {"cv_mse", num(m.cv_mse)},
                     {"cv_failure", m.cv_failure.empty() ? Json(nullptr) : Json(m.cv_failure)},
                     {"n_params", m.n_params},
                     {"converged", m.converged}});
    }
    return a;
}

inline Json detection(const synth::DetectionOutcome& o, double threshold) {
    return {{"detected", o.detected},
            {"detection_lag_months", o.detection_lag_months ? num(*o.detection_lag_months) : Json(nullptr)},
            {"cutoffs_evaluated", o.cutoffs_evaluated},
            {"breakpoint", o.fit ? breakpoint(*o.fit, threshold) : Json(nullptr)}};
}

inline Json sweep_summary(const synth::SweepResult& s) {
    Json cells = Json::array();
    for (const auto& c : s.summaries) {
        cells.push_back({{"N", num(c.cell.accel_factor)},
                         {"noise_mult", num(c.cell.noise_mult)},
                         {"f", num(c.cell.accel_fraction)},
                         {"n_models", c.cell.n_models},
                         {"n_benchmarks", c.cell.n_benchmarks},
                         {"replicas", c.replicas},
                         {"detected", c.detected},
                         {"median_lag_months", num(c.median_lag)},
                         {"iqr_lag_months", num(c.iqr_lag)}});
    }
    return {{"cells", cells}};
}

inline Json false_positive(const synth::FalsePositiveResult& r, const synth::FalsePositiveWindow& w) {
    return {{"replicas", r.replicas},
            {"fired", r.fired},
            {"rate", num(r.rate)},
            {"ci95", interval(r.ci)},
            {"window_start", num(w.start)},
            {"window_months", num(w.months)}};
}

}  // namespace benchstitch::report
