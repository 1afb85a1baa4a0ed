#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "support.hpp"

using namespace benchstitch;
using namespace benchstitch::synth;

namespace {

// Ridge shrinkage bends an exact fit, so noiseless identities are checked unpenalized.
FitConfig exact_fit() {
    FitConfig f;
    f.l2_strength = 0.0;
    return f;
}

DetectorConfig exact_detector() {
    DetectorConfig d;
    d.fit = exact_fit();
    return d;
}

SyntheticConfig small(double n_accel, double sigma, std::uint64_t seed) {
    SyntheticConfig c;
    c.accel_factor = n_accel;
    c.noise_sigma = sigma;
    c.n_models = 300;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Synth, LawsAreContinuousAndAccelerate) {
    SyntheticConfig c;
    c.accel_factor = 2.0;
    EXPECT_DOUBLE_EQ(c.delta_c(), 0.35);
    EXPECT_DOUBLE_EQ(capability_law(c, c.t_cutoff, true), capability_law(c, c.t_cutoff, false));
    EXPECT_DOUBLE_EQ(capability_law(c, c.t_cutoff, true), c.base_capability + (c.t_cutoff - c.t_start) * c.delta_c());
    const double pre = capability_law(c, 2026.0, true) - capability_law(c, 2025.0, true);
    const double post = capability_law(c, 2029.0, true) - capability_law(c, 2028.0, true);
    EXPECT_NEAR(post / pre, 2.0, 1e-12);
    EXPECT_NEAR(capability_law(c, 2029.0, false) - capability_law(c, 2028.0, false), pre, 1e-12);
    EXPECT_NEAR(difficulty_law(c, 2021.0) - difficulty_law(c, 2020.0), 0.35, 1e-12);
}

TEST(Synth, ConfigValidation) {
    SyntheticConfig c;
    c.accel_factor = 2.0;
    c.t_cutoff = 2031.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.noise_sigma = -1.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.benchmarks_per_model_frac = 0.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.accel_fraction = 1.5;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.t_cutoff = 2040.0;  // irrelevant when N == 1
    EXPECT_NO_THROW(generate(c));
}

TEST(Synth, DeterministicAndClipped) {
    auto c = small(2.0, 0.05, 7);
    const auto a = generate(c);
    const auto b = generate(c);
    EXPECT_EQ(a.table.records(), b.table.records());
    EXPECT_EQ(a.truth.capability, b.truth.capability);
    c.seed = 8;
    EXPECT_NE(generate(c).table.records(), a.table.records());
    for (const auto& r : a.table.records()) {
        EXPECT_GT(r.score, c.score_clip);
        EXPECT_LT(r.score, 1.0 - c.score_clip);
    }
    EXPECT_EQ(a.table.size() + a.dropped_scores, 300u * 8u);
    EXPECT_EQ(a.truth.accelerating.size(), 300u);
    EXPECT_EQ(a.table.benchmarks().size(), 30u);
}

TEST(Synth, FullCoverageWithoutClipDropsNothing) {
    auto c = small(1.0, 0.05, 1);
    c.n_models = 50;
    c.benchmarks_per_model_frac = 1.0;
    c.score_clip = 0.0;
    const auto d = generate(c);
    EXPECT_EQ(d.dropped_scores, 0u);
    EXPECT_EQ(d.table.size(), 50u * 30u);
}

TEST(Synth, AccelerationFraction) {
    auto c = small(2.0, 0.05, 3);
    c.accel_fraction = 0.25;
    const auto d = generate(c);
    EXPECT_EQ(d.truth.accelerating.size(), 75u);
}

TEST(Synth, NoiselessScoresFollowTheLaws) {
    auto c = small(1.0, 0.0, 5);
    const auto d = generate(c);
    for (const auto& r : d.table.records()) {
        const double cm = capability_law(c, r.model_release.fractional_year(), false);
        const double db = difficulty_law(c, r.benchmark_release->fractional_year());
        EXPECT_DOUBLE_EQ(r.score, logistic(cm - db));
    }
}

TEST(Synth, NoiselessFitRecoversSlope) {
    const auto c = small(1.0, 0.0, 11);
    const auto d = generate(c);
    const auto result = fit(d.table, FitConfig{}, GaugeSpec::benchmark(most_covered_benchmark(d.table)));
    const auto align = align_to_truth(result.params.capability, d.truth.capability);
    EXPECT_GT(align.correlation, 0.999);
    const auto trend = fit_linear_trend(frontier(capability_points(result.params, d.table)));
    EXPECT_NEAR(trend.slope * align.to_truth.scale, c.delta_c(), 0.05 * c.delta_c());
}

TEST(Synth, NoiselessFitMatchesTruthAfterAlignment) {
    const auto d = generate(small(2.0, 0.0, 12));
    const auto result = fit(d.table, exact_fit(), GaugeSpec::benchmark(most_covered_benchmark(d.table)));
    const auto align = align_to_truth(result.params.capability, d.truth.capability);
    EXPECT_LE(align.max_abs_error, 0.05);
    EXPECT_EQ(align.n, d.table.models().size());
}

TEST(Detection, RequiresAcceleration) {
    EXPECT_THROW(detection_experiment(small(1.0, 0.05, 0), DetectorConfig{}), ConfigError);
}

TEST(Detection, NoiselessStrongAccelerationWithinOneStep) {
    // The detector cannot fire before min_segment post-break models exist, so
    // the bound is one step past the step holding that release.
    const auto det = exact_detector();
    std::size_t within_one = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        SyntheticConfig c;
        c.accel_factor = 4.0;
        c.noise_sigma = 0.0;
        c.seed = seed;
        const auto d = generate(c);
        std::vector<double> after;
        for (const auto& [m, t] : d.truth.model_t) {
            if (t > c.t_cutoff) after.push_back(t);
        }
        std::sort(after.begin(), after.end());
        ASSERT_GE(after.size(), det.min_segment);
        const double wait = std::ceil((after[det.min_segment - 1] - c.t_cutoff) * 12.0 / det.step_months - 1e-9);
        const auto out = detection_experiment(c, det);
        ASSERT_TRUE(out.detected) << "seed " << seed;
        ASSERT_TRUE(out.detection_lag_months);
        EXPECT_LE(*out.detection_lag_months, std::max(wait, 1.0) * det.step_months) << "seed " << seed;
        within_one += *out.detection_lag_months <= det.step_months;
    }
    EXPECT_GE(within_one, 5u);
}

TEST(Detection, ObservableRespectsReleaseDates) {
    const auto d = generate(small(2.0, 0.05, 4));
    DetectorConfig det;
    const auto sub = observable_at(d.table, 2024.5, det);
    ASSERT_FALSE(sub.empty());
    for (const auto& r : sub.records()) {
        EXPECT_LE(r.model_release.fractional_year(), 2024.5);
        EXPECT_LE(r.benchmark_release->fractional_year(), 2024.5);
    }
    det.respect_benchmark_release = false;
    EXPECT_GT(observable_at(d.table, 2024.5, det).size(), sub.size());
}

TEST(FalsePositives, DegenerateCases) {
    DetectorConfig det;
    det.threshold = std::numeric_limits<double>::infinity();
    const auto never = false_positive_rate(small(1.0, 0.05, 0), 20, det, {2027.0, 6.0}, 1);
    EXPECT_EQ(never.fired, 0u);
    EXPECT_EQ(never.rate, 0.0);
    EXPECT_EQ(never.ci.lo, 0.0);

    const auto noiseless = false_positive_rate(small(1.0, 0.0, 0), 20, exact_detector(), {2027.0, 6.0}, 2);
    EXPECT_EQ(noiseless.rate, 0.0);

    EXPECT_THROW(false_positive_rate(small(2.0, 0.05, 0), 20, DetectorConfig{}, {}, 0), ConfigError);
    EXPECT_THROW(false_positive_rate(small(1.0, 0.05, 0), 19, DetectorConfig{}, {}, 0), ConfigError);
}

TEST(Sweep, PresetsAndSingleCell) {
    SyntheticConfig base;
    EXPECT_EQ(preset_cells(SweepPreset::primary, base).size(), 24u);
    EXPECT_EQ(preset_cells(SweepPreset::data_volume, base).size(), 50u);
    EXPECT_EQ(parse_preset("data_volume"), SweepPreset::data_volume);
    EXPECT_THROW(parse_preset("bogus"), ConfigError);

    auto cfg = small(2.0, 0.0, 0);
    const std::vector<SweepCell> cells{{4.0, 1.0, 1.0, 300, 30}};
    const auto r = sweep(cfg, cells, 1, DetectorConfig{}, 5);
    ASSERT_EQ(r.summaries.size(), 1u);
    EXPECT_EQ(r.summaries[0].detected, 1u);
    EXPECT_EQ(r.summaries[0].iqr_lag, 0.0);
    EXPECT_FALSE(r.varies_data_volume);
    const auto again = sweep(cfg, cells, 1, DetectorConfig{}, 5);
    EXPECT_EQ(again.summaries[0].median_lag, r.summaries[0].median_lag);

    std::ostringstream out;
    write_sweep_rows(out, r);
    const auto text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "N,noise_mult,f,replica,detected,lag_months,t_break,ratio");
    EXPECT_THROW(sweep(cfg, cells, 0, DetectorConfig{}, 5), ConfigError);
}

TEST(Sweep, DataVolumeColumns) {
    auto cfg = small(4.0, 0.0, 0);
    const std::vector<SweepCell> cells{{4.0, 1.0, 1.0, 200, 20}, {4.0, 1.0, 1.0, 300, 30}};
    const auto r = sweep(cfg, cells, 1, DetectorConfig{}, 1);
    EXPECT_TRUE(r.varies_data_volume);
    std::ostringstream out;
    write_sweep_rows(out, r);
    EXPECT_NE(out.str().find(",n_models,n_benchmarks\n"), std::string::npos);
}
