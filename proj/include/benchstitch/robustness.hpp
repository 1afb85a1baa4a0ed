#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "benchstitch/dataset.hpp"
#include "benchstitch/error.hpp"
#include "benchstitch/rng.hpp"
#include "benchstitch/stats.hpp"
#include "benchstitch/stitch.hpp"
#include "benchstitch/trends.hpp"

namespace benchstitch::robust {

// ---------------------------------------------------------------------------
// Anchor sweep

struct Spread {
    double mean = stats::nan;
    double stddev = 0.0;  // sample standard deviation; 0 with one anchor
    std::size_t n = 0;
};

struct AnchorFailure {
    std::string anchor;
    std::string reason;
};

struct AnchorSweepResult {
    std::vector<std::string> anchors;  // fits that converged, reference first
    std::vector<AnchorFailure> failed;
    std::map<std::string, Spread> capability;
    std::map<std::string, Spread> difficulty;
};

inline Spread spread_of(const std::vector<double>& v) {
    Spread s;
    s.n = v.size();
    if (v.empty()) return s;
    s.mean = stats::mean(v);
    s.stddev = v.size() > 1 ? stats::stddev(v) : 0.0;
    return s;
}

// Least-squares affine map taking `from` capabilities onto `onto` over shared models.
inline stats::Affine alignment(const std::map<std::string, double>& from, const std::map<std::string, double>& onto) {
    std::vector<double> x, y;
    for (const auto& [id, v] : from) {
        if (auto it = onto.find(id); it != onto.end()) {
            x.push_back(v);
            y.push_back(it->second);
        }
    }
    if (x.empty()) throw InsufficientDataError("alignment: no shared models");
    return stats::fit_affine(x, y);
}

inline AnchorSweepResult anchor_sweep(const ScoreTable& table, const std::vector<GaugeSpec>& anchors,
                                      const FitConfig& config) {
    if (anchors.empty()) throw ConfigError("anchor_sweep: no anchors given");
    AnchorSweepResult out;
    std::vector<StitchParams> aligned;
    for (const auto& gauge : anchors) {
        const std::string name = gauge.describe();
        try {
            auto result = fit(table, config, gauge);
            if (!result.converged) {
                out.failed.push_back({name, "did not converge"});
                continue;
            }
            if (!aligned.empty()) {
                result.params = apply_affine(result.params, alignment(result.params.capability, aligned.front().capability));
            }
            aligned.push_back(std::move(result.params));
            out.anchors.push_back(name);
        } catch (const Error& e) {
            out.failed.push_back({name, e.what()});
        }
    }
    std::map<std::string, std::vector<double>> caps, diffs;
    for (const auto& p : aligned) {
        for (const auto& [id, v] : p.capability) caps[id].push_back(v);
        for (const auto& [id, v] : p.difficulty) diffs[id].push_back(v);
    }
    for (const auto& [id, v] : caps) out.capability[id] = spread_of(v);
    for (const auto& [id, v] : diffs) out.difficulty[id] = spread_of(v);
    return out;
}

// ---------------------------------------------------------------------------
// Random benchmark subsets

struct SubsetRun {
    std::vector<std::string> benchmarks;
    std::optional<double> slope;  // missing when the fit failed or did not converge
    std::string failure;
};

struct SubsetSlopes {
    std::vector<SubsetRun> runs;
    std::size_t missing = 0;
    double median = stats::nan;
    double p025 = stats::nan;
    double p975 = stats::nan;
};

struct SubsetOptions {
    double drop_frac = 0.5;
    std::size_t n_runs = 100;
    std::size_t min_benchmarks = 1;  // per-model filter applied after dropping
    std::uint64_t seed = 0;
};

// Drops round(drop_frac * B) benchmarks, never the anchor, refits, and records
// the frontier trend slope.
inline SubsetSlopes random_subset_slopes(const ScoreTable& table, const GaugeSpec& gauge, const FitConfig& config,
                                         const SubsetOptions& opt) {
    if (!(opt.drop_frac >= 0.0 && opt.drop_frac < 1.0)) throw ConfigError("drop_frac must lie in [0, 1)");
    if (opt.n_runs < 1) throw ConfigError("n_runs must be at least 1");
    if (gauge.mode != GaugeSpec::Mode::benchmark_anchor) throw ConfigError("random subsets need a benchmark anchor");
    const auto& anchor = *gauge.anchor_benchmark;
    std::vector<std::string> others;
    for (const auto& b : table.benchmarks()) {
        if (b.id != anchor) others.push_back(b.id);
    }
    if (!table.benchmark_index(anchor)) throw ConfigError("anchor benchmark '" + anchor + "' not in table");
    const auto n_drop = static_cast<std::size_t>(std::llround(opt.drop_frac * static_cast<double>(table.benchmarks().size())));
    const std::size_t n_keep = others.size() - std::min(n_drop, others.size());
    if (n_keep + 1 < 5) {
        throw ConfigError("random subsets would leave " + std::to_string(n_keep + 1) + " benchmarks; at least 5 required");
    }

    SubsetSlopes out;
    std::vector<double> slopes;
    for (std::size_t r = 0; r < opt.n_runs; ++r) {
        Rng rng(child_seed(opt.seed, r));
        std::set<std::string> keep{anchor};
        for (std::size_t i : rng.sample_without_replacement(others.size(), n_keep)) keep.insert(others[i]);
        SubsetRun run;
        run.benchmarks.assign(keep.begin(), keep.end());
        try {
            auto sub = table.with_benchmarks(keep);
            if (opt.min_benchmarks > 1) sub = filter_min_benchmarks(sub, opt.min_benchmarks);
            const auto result = fit(sub, config, gauge);
            if (!result.converged) {
                run.failure = "did not converge";
            } else {
                run.slope = fit_linear_trend(frontier(capability_points(result.params, sub))).slope;
                slopes.push_back(*run.slope);
            }
        } catch (const Error& e) {
            run.failure = e.what();
        }
        if (!run.slope) ++out.missing;
        out.runs.push_back(std::move(run));
    }
    if (!slopes.empty()) {
        out.median = stats::median(slopes);
        out.p025 = stats::quantile(slopes, 0.025);
        out.p975 = stats::quantile(slopes, 0.975);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimized-for permutation test

struct AnchorPermutation {
    std::string anchor;
    bool anchor_optimized_for = false;
    double observed_diff = stats::nan;
    std::size_t shared_models = 0;
    std::vector<double> null_diffs;
    double p_value = stats::nan;
};

struct PermutationResult {
    double observed_diff = stats::nan;  // mean over anchors
    std::vector<AnchorPermutation> per_anchor;
    double mean_p = stats::nan;
    std::size_t n_permutations = 0;
    std::vector<std::string> optimized;
    std::vector<std::string> not_optimized;
};

struct PermutationOptions {
    std::size_t anchors_optimized = 9;
    std::size_t anchors_not_optimized = 10;
    std::size_t n_permutations = 100;
    double recency_cutoff = 2024.0;  // keep benchmarks released on or after this time
    std::size_t max_partition_attempts = 50;
    std::uint64_t seed = 0;
};

namespace detail {

struct SideDiff {
    double diff = stats::nan;
    std::set<std::string> shared;
};

// Mean capability of shared models fitted on side A minus side B, both
// anchored on `anchor`, which belongs to both sides.
inline SideDiff side_difference(const ScoreTable& table, const std::string& anchor, std::set<std::string> a,
                                std::set<std::string> b, const FitConfig& config) {
    a.insert(anchor);
    b.insert(anchor);
    const auto ta = table.with_benchmarks(a);
    const auto tb = table.with_benchmarks(b);
    const auto fa = fit(ta, config, GaugeSpec::benchmark(anchor));
    const auto fb = fit(tb, config, GaugeSpec::benchmark(anchor));
    SideDiff out;
    double sum = 0.0;
    for (const auto& [id, ca] : fa.params.capability) {
        if (auto it = fb.params.capability.find(id); it != fb.params.capability.end()) {
            sum += ca - it->second;
            out.shared.insert(id);
        }
    }
    if (!out.shared.empty()) out.diff = sum / static_cast<double>(out.shared.size());
    return out;
}

}  // namespace detail

inline PermutationResult optimized_for_test(const ScoreTable& table, const std::vector<BenchmarkLabel>& labels,
                                            const FitConfig& config, const PermutationOptions& opt) {
    if (opt.n_permutations == 0) throw ConfigError("n_permutations must be positive: p-value undefined");
    if (opt.anchors_optimized + opt.anchors_not_optimized == 0) throw ConfigError("no anchors requested");
    std::map<std::string, bool> label;
    for (const auto& l : labels) label[l.benchmark_id] = l.optimized_for;

    std::set<std::string> recent;
    for (const auto& b : table.benchmarks()) {
        if (b.release && b.release->fractional_year() >= opt.recency_cutoff && label.count(b.id)) recent.insert(b.id);
    }
    const auto filtered = table.with_benchmarks(recent);
    const auto coverage = filtered.records_per_benchmark();

    PermutationResult out;
    out.n_permutations = opt.n_permutations;
    std::vector<std::pair<std::size_t, std::string>> ranked_opt, ranked_not;
    for (std::size_t i = 0; i < filtered.benchmarks().size(); ++i) {
        const auto& id = filtered.benchmarks()[i].id;
        (label.at(id) ? out.optimized : out.not_optimized).push_back(id);
        (label.at(id) ? ranked_opt : ranked_not).push_back({coverage[i], id});
    }
    if (out.optimized.empty() || out.not_optimized.empty()) {
        throw ProtocolError("optimized_for_test: after the recency filter, " +
                            std::string(out.optimized.empty() ? "no optimized-for" : "no not-optimized-for") +
                            " benchmarks remain");
    }
    auto by_coverage = [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; };
    std::sort(ranked_opt.begin(), ranked_opt.end(), by_coverage);
    std::sort(ranked_not.begin(), ranked_not.end(), by_coverage);

    std::vector<std::pair<std::string, bool>> anchors;
    for (std::size_t i = 0; i < std::min(opt.anchors_optimized, ranked_opt.size()); ++i) anchors.push_back({ranked_opt[i].second, true});
    for (std::size_t i = 0; i < std::min(opt.anchors_not_optimized, ranked_not.size()); ++i) anchors.push_back({ranked_not[i].second, false});

    double diff_sum = 0.0, p_sum = 0.0;
    for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
        const auto& [anchor, is_opt] = anchors[ai];
        std::set<std::string> side_opt, side_not;
        std::vector<std::string> pool;
        for (const auto& id : out.optimized) {
            if (id != anchor) {
                side_opt.insert(id);
                pool.push_back(id);
            }
        }
        for (const auto& id : out.not_optimized) {
            if (id != anchor) {
                side_not.insert(id);
                pool.push_back(id);
            }
        }
        AnchorPermutation ap;
        ap.anchor = anchor;
        ap.anchor_optimized_for = is_opt;
        const auto observed = detail::side_difference(filtered, anchor, side_opt, side_not, config);
        ap.observed_diff = observed.diff;
        ap.shared_models = observed.shared.size();
        if (!std::isfinite(ap.observed_diff)) throw ProtocolError("anchor '" + anchor + "': the two sides share no models");

        // Null: relabel the pooled benchmarks with the observed class sizes.
        Rng rng(child_seed(opt.seed, ai));
        for (std::size_t p = 0; p < opt.n_permutations; ++p) {
            detail::SideDiff draw;
            for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, opt.max_partition_attempts); ++attempt) {
                std::set<std::string> a, b;
                const auto pick = rng.sample_without_replacement(pool.size(), side_opt.size());
                std::set<std::size_t> chosen(pick.begin(), pick.end());
                for (std::size_t i = 0; i < pool.size(); ++i) (chosen.count(i) ? a : b).insert(pool[i]);
                draw = detail::side_difference(filtered, anchor, a, b, config);
                if (std::includes(draw.shared.begin(), draw.shared.end(), observed.shared.begin(), observed.shared.end())) break;
            }
            if (std::isfinite(draw.diff)) ap.null_diffs.push_back(draw.diff);
        }
        if (ap.null_diffs.empty()) throw ProtocolError("anchor '" + anchor + "': no feasible null partition");
        ap.p_value = stats::permutation_p_value(ap.observed_diff, ap.null_diffs);
        diff_sum += ap.observed_diff;
        p_sum += ap.p_value;
        out.per_anchor.push_back(std::move(ap));
    }
    out.observed_diff = diff_sum / static_cast<double>(out.per_anchor.size());
    out.mean_p = p_sum / static_cast<double>(out.per_anchor.size());
    return out;
}

// ---------------------------------------------------------------------------
// Link comparison

struct LinkMetrics {
    Link link = Link::sigmoid;
    double r2 = stats::nan;
    double mse = stats::nan;
    double aic = stats::nan;
    double bic = stats::nan;
    double cv_mse = stats::nan;  // NaN when no valid partition exists
    std::string cv_failure;
    std::size_t n_params = 0;
    bool converged = false;
};

inline std::vector<LinkMetrics> link_comparison(const ScoreTable& table, const FitConfig& config, const GaugeSpec& gauge,
                                                std::size_t folds = 10, std::uint64_t seed = 0) {
    std::vector<LinkMetrics> out;
    for (Link link : {Link::sigmoid, Link::clipped_linear}) {
        FitConfig c = config;
        c.link = link;
        const auto result = fit(table, c, gauge);
        const auto d = diagnostics(result, table);
        LinkMetrics m;
        m.link = link;
        m.r2 = d.r2;
        m.mse = d.mse;
        m.aic = d.aic;
        m.bic = d.bic;
        m.n_params = result.n_params;
        m.converged = result.converged;
        try {
            m.cv_mse = cross_validate(table, c, gauge, folds, seed).mean_mse;
        } catch (const PartitionError& e) {
            m.cv_failure = e.what();
        }
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace benchstitch::robust
