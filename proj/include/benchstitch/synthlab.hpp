#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "benchstitch/csv.hpp"
#include "benchstitch/dataset.hpp"
#include "benchstitch/error.hpp"
#include "benchstitch/rng.hpp"
#include "benchstitch/stats.hpp"
#include "benchstitch/stitch.hpp"
#include "benchstitch/trends.hpp"

namespace benchstitch::synth {

struct SyntheticConfig {
    double t_start = 2020.0;
    double t_end = 2030.0;
    double total_capability_increase = 3.5;
    double base_capability = 0.0;
    double base_difficulty = 0.5;
    double accel_factor = 1.0;  // N
    double t_cutoff = 2027.0;
    double accel_fraction = 1.0;  // f
    double noise_sigma = 0.05;
    std::size_t n_models = 600;
    std::size_t n_benchmarks = 30;
    double benchmarks_per_model_frac = 0.25;
    double score_clip = 0.05;
    double score_noise_sigma = 0.0;  // off: noise lives in the latent variables
    bool accelerated_noise = true;   // noise on accelerating models after t_cutoff
    std::uint64_t seed = 0;

    double delta_c() const { return total_capability_increase / (t_end - t_start); }

    void validate() const {
        if (!(t_start < t_end)) throw ConfigError("t_start must precede t_end");
        if (accel_factor != 1.0 && !(t_start < t_cutoff && t_cutoff < t_end)) {
            throw ConfigError("t_cutoff must lie strictly inside (t_start, t_end) when accel_factor != 1");
        }
        if (!(accel_factor > 0.0)) throw ConfigError("accel_factor must be positive");
        if (!(accel_fraction >= 0.0 && accel_fraction <= 1.0)) throw ConfigError("accel_fraction must lie in [0, 1]");
        if (!(noise_sigma >= 0.0) || !(score_noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
        if (!(benchmarks_per_model_frac > 0.0 && benchmarks_per_model_frac <= 1.0)) {
            throw ConfigError("benchmarks_per_model_frac must lie in (0, 1]");
        }
        if (!(score_clip >= 0.0 && score_clip < 0.5)) throw ConfigError("score_clip must lie in [0, 0.5)");
        if (n_models < 1 || n_benchmarks < 1) throw ConfigError("need at least one model and one benchmark");
    }
};

// Noise-free capability law. Continuous at t_cutoff.
inline double capability_law(const SyntheticConfig& c, double t, bool accelerating) {
    const double dc = c.delta_c();
    if (!accelerating || t <= c.t_cutoff) return c.base_capability + (t - c.t_start) * dc;
    return c.base_capability + (c.t_cutoff - c.t_start) * dc + (t - c.t_cutoff) * c.accel_factor * dc;
}

inline double difficulty_law(const SyntheticConfig& c, double t) {
    return c.base_difficulty + (t - c.t_start) * c.delta_c();
}

struct GroundTruth {
    std::map<std::string, double> capability;
    std::map<std::string, double> difficulty;
    std::map<std::string, double> model_t;
    std::set<std::string> accelerating;
};

struct SyntheticData {
    SyntheticConfig config;
    ScoreTable table;
    GroundTruth truth;
    std::size_t dropped_scores = 0;
};

inline std::string padded_id(char prefix, std::size_t i, std::size_t count, int min_width) {
    const auto width = std::max(static_cast<std::size_t>(min_width), std::to_string(count).size());
    const std::string digits = std::to_string(i);
    return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

// Release times are day-quantized; laws are evaluated at the quantized time.
inline SyntheticData generate(const SyntheticConfig& config) {
    config.validate();
    Rng time_rng(child_seed(config.seed, 1));
    Rng accel_rng(child_seed(config.seed, 2));
    Rng noise_rng(child_seed(config.seed, 3));
    Rng subset_rng(child_seed(config.seed, 4));
    Rng bench_rng(child_seed(config.seed, 5));

    SyntheticData out;
    out.config = config;

    std::vector<double> mt(config.n_models);
    for (auto& t : mt) t = time_rng.uniform(config.t_start, config.t_end);
    std::sort(mt.begin(), mt.end());
    const auto n_accel = static_cast<std::size_t>(std::llround(config.accel_fraction * static_cast<double>(config.n_models)));
    std::vector<bool> accel(config.n_models, false);
    for (std::size_t i : accel_rng.sample_without_replacement(config.n_models, n_accel)) accel[i] = true;

    std::vector<std::string> model_ids(config.n_models);
    std::vector<Date> model_dates(config.n_models);
    std::vector<double> caps(config.n_models);
    for (std::size_t i = 0; i < config.n_models; ++i) {
        model_ids[i] = padded_id('m', i + 1, config.n_models, 4);
        model_dates[i] = Date::from_fractional_year(mt[i]);
        const double t = model_dates[i].fractional_year();
        const double eps = noise_rng.normal(0.0, config.noise_sigma);
        const bool noisy = config.accelerated_noise || !accel[i] || config.accel_factor == 1.0 || t <= config.t_cutoff;
        caps[i] = capability_law(config, t, accel[i]) + (noisy ? eps : 0.0);
        out.truth.capability[model_ids[i]] = caps[i];
        out.truth.model_t[model_ids[i]] = t;
        if (accel[i]) out.truth.accelerating.insert(model_ids[i]);
    }

    std::vector<double> bt(config.n_benchmarks);
    for (auto& t : bt) t = bench_rng.uniform(config.t_start, config.t_end);
    std::sort(bt.begin(), bt.end());
    std::vector<std::string> bench_ids(config.n_benchmarks);
    std::vector<Date> bench_dates(config.n_benchmarks);
    std::vector<double> diffs(config.n_benchmarks);
    for (std::size_t b = 0; b < config.n_benchmarks; ++b) {
        bench_ids[b] = padded_id('b', b + 1, config.n_benchmarks, 2);
        bench_dates[b] = Date::from_fractional_year(bt[b]);
        diffs[b] = difficulty_law(config, bench_dates[b].fractional_year()) + noise_rng.normal(0.0, config.noise_sigma);
        out.truth.difficulty[bench_ids[b]] = diffs[b];
    }

    const auto per_model = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.benchmarks_per_model_frac * static_cast<double>(config.n_benchmarks))));
    std::vector<ScoreRecord> rows;
    for (std::size_t i = 0; i < config.n_models; ++i) {
        for (std::size_t b : subset_rng.sample_without_replacement(config.n_benchmarks, per_model)) {
            const double s = logistic(caps[i] - diffs[b]) + noise_rng.normal(0.0, config.score_noise_sigma);
            if (!(s > config.score_clip && s < 1.0 - config.score_clip)) {
                ++out.dropped_scores;
                continue;
            }
            rows.push_back({model_ids[i], bench_ids[b], s, model_dates[i], bench_dates[b]});
        }
    }
    out.table = ScoreTable::from_records(std::move(rows), DuplicatePolicy::strict);
    return out;
}

// Least-squares affine map from fitted capabilities onto ground truth.
struct TruthAlignment {
    stats::Affine to_truth;
    double correlation = stats::nan;
    double max_abs_error = stats::nan;
    std::size_t n = 0;
};

inline TruthAlignment align_to_truth(const std::map<std::string, double>& fitted,
                                     const std::map<std::string, double>& truth) {
    std::vector<double> x, y;
    for (const auto& [id, v] : fitted) {
        if (auto it = truth.find(id); it != truth.end()) {
            x.push_back(v);
            y.push_back(it->second);
        }
    }
    if (x.size() < 2) throw InsufficientDataError("align_to_truth: fewer than 2 shared entities");
    TruthAlignment out;
    out.n = x.size();
    out.to_truth = stats::fit_affine(x, y);
    out.correlation = stats::pearson(x, y);
    out.max_abs_error = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.max_abs_error = std::max(out.max_abs_error, std::abs(out.to_truth(x[i]) - y[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rolling detection

struct DetectorConfig {
    double step_months = 1.0;
    double threshold = 2.0;
    std::size_t min_segment = 3;
    std::size_t min_benchmarks = 1;
    bool respect_benchmark_release = true;
    FitConfig fit;

    void validate() const {
        if (!(step_months > 0.0)) throw ConfigError("step_months must be positive");
        if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");
        if (min_benchmarks < 1) throw ConfigError("min_benchmarks must be at least 1");
        fit.validate();
    }
};

// Records observable at `cutoff`: released models and, if requested, released benchmarks.
inline ScoreTable observable_at(const ScoreTable& table, double cutoff, const DetectorConfig& det) {
    auto sub = table.filter([&](const ScoreRecord& r) {
        if (r.model_release.fractional_year() > cutoff) return false;
        return !det.respect_benchmark_release || !r.benchmark_release ||
               r.benchmark_release->fractional_year() <= cutoff;
    });
    if (det.min_benchmarks > 1 && !sub.empty()) sub = filter_min_benchmarks(sub, det.min_benchmarks);
    return sub;
}

// Fits the observable data and runs the breakpoint detector on the frontier.
// Returns nothing when there is too little frontier to test.
inline std::optional<BreakpointFit> detect_at(const ScoreTable& table, double cutoff, const DetectorConfig& det) {
    const auto sub = observable_at(table, cutoff, det);
    if (sub.empty()) return std::nullopt;
    const auto result = fit(sub, det.fit, GaugeSpec::benchmark(most_covered_benchmark(sub)));
    const auto fr = frontier(capability_points(result.params, sub));
    if (fr.size() < 2 * det.min_segment) return std::nullopt;
    return detect_breakpoint(fr, det.threshold, det.min_segment);
}

struct DetectionOutcome {
    bool detected = false;
    std::optional<double> detection_lag_months;
    std::optional<BreakpointFit> fit;  // at the firing cutoff, else the last evaluated one
    std::size_t cutoffs_evaluated = 0;
};

inline double cutoff_time(double origin, std::size_t k, double step_months) {
    return origin + static_cast<double>(k) * step_months / 12.0;
}

// Replays data month by month after t_cutoff; the lag is the first firing
// cutoff minus t_cutoff.
inline DetectionOutcome detect_in(const SyntheticData& data, const DetectorConfig& det) {
    det.validate();
    const auto& cfg = data.config;
    DetectionOutcome out;
    for (std::size_t k = 1;; ++k) {
        const double c = cutoff_time(cfg.t_cutoff, k, det.step_months);
        if (c > cfg.t_end + 1e-9) break;
        ++out.cutoffs_evaluated;
        auto bp = detect_at(data.table, c, det);
        if (!bp) continue;
        out.fit = bp;
        if (bp->detected) {
            out.detected = true;
            out.detection_lag_months = static_cast<double>(k) * det.step_months;
            break;
        }
    }
    return out;
}

inline DetectionOutcome detection_experiment(const SyntheticConfig& config, const DetectorConfig& det) {
    if (config.accel_factor == 1.0) throw ConfigError("detection_experiment requires accel_factor != 1");
    return detect_in(generate(config), det);
}

// ---------------------------------------------------------------------------
// False positives

struct FalsePositiveWindow {
    double start = 2027.0;  // first cutoff is start + one step
    double months = 36.0;
};

struct FalsePositiveResult {
    std::size_t replicas = 0;
    std::size_t fired = 0;
    double rate = stats::nan;
    stats::Interval ci;  // exact binomial 95%
    std::vector<bool> per_replica;
};

inline FalsePositiveResult false_positive_rate(const SyntheticConfig& config, std::size_t replicas,
                                               const DetectorConfig& det, const FalsePositiveWindow& window,
                                               std::uint64_t seed) {
    if (config.accel_factor != 1.0) throw ConfigError("false_positive_rate requires accel_factor == 1");
    if (replicas < 20) throw ConfigError("false_positive_rate requires at least 20 replicas");
    if (!(window.months > 0.0)) throw ConfigError("false-positive window must be positive");
    det.validate();
    FalsePositiveResult out;
    out.replicas = replicas;
    for (std::size_t r = 0; r < replicas; ++r) {
        auto cfg = config;
        cfg.seed = child_seed(seed, r);
        const auto data = generate(cfg);
        bool fired = false;
        for (std::size_t k = 1; !fired; ++k) {
            const double elapsed = static_cast<double>(k) * det.step_months;
            if (elapsed > window.months + 1e-9) break;
            const double c = cutoff_time(window.start, k, det.step_months);
            if (c > cfg.t_end + 1e-9) break;
            if (auto bp = detect_at(data.table, c, det); bp && bp->detected) fired = true;
        }
        out.per_replica.push_back(fired);
        out.fired += fired ? 1 : 0;
    }
    out.rate = static_cast<double>(out.fired) / static_cast<double>(replicas);
    out.ci = stats::clopper_pearson(out.fired, replicas, 0.95);
    return out;
}

// ---------------------------------------------------------------------------
// Grid sweeps

struct SweepCell {
    double accel_factor = 2.0;
    double noise_mult = 1.0;
    double accel_fraction = 1.0;
    std::size_t n_models = 600;
    std::size_t n_benchmarks = 30;
};

enum class SweepPreset { primary, data_volume };

inline SweepPreset parse_preset(std::string_view s) {
    if (s == "primary") return SweepPreset::primary;
    if (s == "data_volume") return SweepPreset::data_volume;
    throw ConfigError("unknown sweep preset '" + std::string(s) + "' (expected primary or data_volume)");
}

inline const char* to_string(SweepPreset p) { return p == SweepPreset::primary ? "primary" : "data_volume"; }

// primary: N x noise multiplier x accelerating fraction.
// data_volume: models/year x benchmarks/year x N at baseline noise, f = 1.
inline std::vector<SweepCell> preset_cells(SweepPreset preset, const SyntheticConfig& base) {
    std::vector<SweepCell> cells;
    if (preset == SweepPreset::primary) {
        for (double n : {2.0, 4.0, 8.0}) {
            for (double noise : {0.5, 1.0, 2.0, 4.0}) {
                for (double f : {0.25, 1.0}) cells.push_back({n, noise, f, base.n_models, base.n_benchmarks});
            }
        }
        return cells;
    }
    const double years = base.t_end - base.t_start;
    for (double mpy : {40.0, 60.0, 80.0, 100.0, 120.0}) {
        for (double bpy : {2.0, 4.0, 6.0, 8.0, 10.0}) {
            for (double n : {2.5, 5.0}) {
                cells.push_back({n, 1.0, 1.0, static_cast<std::size_t>(std::llround(mpy * years)),
                                 static_cast<std::size_t>(std::llround(bpy * years))});
            }
        }
    }
    return cells;
}

struct SweepRow {
    std::size_t cell = 0;
    std::size_t replica = 0;
    DetectionOutcome outcome;
};

struct CellSummary {
    SweepCell cell;
    std::size_t replicas = 0;
    std::size_t detected = 0;
    double median_lag = stats::nan;  // over detected replicas
    double iqr_lag = stats::nan;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<SweepRow> rows;
    std::vector<CellSummary> summaries;
    bool varies_data_volume = false;
};

inline SweepResult sweep(const SyntheticConfig& base, const std::vector<SweepCell>& cells, std::size_t replicas,
                         const DetectorConfig& det, std::uint64_t seed) {
    if (replicas < 1) throw ConfigError("sweep requires at least one replica");
    SweepResult out;
    out.cells = cells;
    for (const auto& c : cells) {
        if (c.n_models != cells.front().n_models || c.n_benchmarks != cells.front().n_benchmarks) {
            out.varies_data_volume = true;
        }
    }
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const auto& cell = cells[ci];
        CellSummary summary{cell, replicas, 0, stats::nan, stats::nan};
        std::vector<double> lags;
        for (std::size_t r = 0; r < replicas; ++r) {
            auto cfg = base;
            cfg.accel_factor = cell.accel_factor;
            cfg.noise_sigma = base.noise_sigma * cell.noise_mult;
            cfg.accel_fraction = cell.accel_fraction;
            cfg.n_models = cell.n_models;
            cfg.n_benchmarks = cell.n_benchmarks;
            cfg.seed = child_seed(seed, ci, r);
            auto outcome = detection_experiment(cfg, det);
            if (outcome.detected) {
                ++summary.detected;
                lags.push_back(*outcome.detection_lag_months);
            }
            out.rows.push_back({ci, r, std::move(outcome)});
        }
        if (!lags.empty()) {
            summary.median_lag = stats::median(lags);
            summary.iqr_lag = stats::quantile(lags, 0.75) - stats::quantile(lags, 0.25);
        }
        out.summaries.push_back(summary);
    }
    return out;
}

// Columns N,noise_mult,f,replica,detected,lag_months,t_break,ratio; grids that
// vary data volume append n_models,n_benchmarks. Missing values are empty.
inline void write_sweep_rows(std::ostream& out, const SweepResult& result) {
    out << "N,noise_mult,f,replica,detected,lag_months,t_break,ratio";
    if (result.varies_data_volume) out << ",n_models,n_benchmarks";
    out << '\n';
    auto opt = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); };
    for (const auto& row : result.rows) {
        const auto& cell = result.cells[row.cell];
        const auto& o = row.outcome;
        out << csv::format_double(cell.accel_factor) << ',' << csv::format_double(cell.noise_mult) << ','
            << csv::format_double(cell.accel_fraction) << ',' << row.replica << ',' << (o.detected ? "true" : "false")
            << ',' << (o.detection_lag_months ? csv::format_double(*o.detection_lag_months) : std::string()) << ','
            << (o.fit ? opt(o.fit->t_break) : std::string()) << ',' << (o.fit ? opt(o.fit->ratio) : std::string());
        if (result.varies_data_volume) out << ',' << cell.n_models << ',' << cell.n_benchmarks;
        out << '\n';
    }
}

}  // namespace benchstitch::synth
