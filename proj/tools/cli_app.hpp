#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "benchstitch/benchstitch.hpp"
#include "benchstitch/report.hpp"

#ifndef BENCHSTITCH_VERSION
#define BENCHSTITCH_VERSION "dev"
#endif

namespace benchstitch::cli {

using Json = report::Json;

struct Options {
    std::uint64_t seed = 0;
    std::string out = "out";
    std::string config;
    bool percent = false;
    std::size_t min_benchmarks = 4;
    std::string window_start;
    std::string window_end;
    std::string link = "sigmoid";
    std::string anchor;  // benchmark id, or "model=value,model=value"
    double l2_strength = 0.1;
    int max_iterations = 2000;

    std::string scores;
    std::string compute;
    std::string horizons;
    std::string labels;

    bool no_errors = false;
    double loss_bump = 0.05;
    std::size_t folds = 10;
    std::string target;
    double threshold = 2.0;
    std::size_t min_segment = 3;
    double train_frac = 0.6;
    std::string backtest_cutoff;
    double backtest_years = 1.0;

    std::string families;
    bool include_distilled = false;
    double bucket_width = 0.3;
    double bucket_step = 0.1;

    std::string experiment = "generate";
    std::string preset = "primary";
    double accel = 2.0;
    double noise_mult = 1.0;
    std::string noise_mults = "0.5,1,2,4";
    double fraction = 1.0;
    double t_cutoff = 2027.0;
    std::size_t models = 600;
    std::size_t benchmarks = 30;
    std::size_t replicas = 20;
    double step_months = 1.0;
    double fp_window_start = 2027.0;
    double fp_window_months = 36.0;

    std::string analysis = "all";
    std::string anchors;
    double drop_frac = 0.5;
    std::size_t runs = 100;
    std::size_t anchors_optimized = 9;
    std::size_t anchors_not_optimized = 10;
    std::size_t permutations = 100;
    double recency_cutoff = 2024.0;
};

// Files produced by a command, written only after the command succeeds.
struct Outputs {
    std::map<std::string, std::string> files;

    void json(const std::string& name, const Json& j) { files[name] = j.dump(2) + "\n"; }
    void text(const std::string& name, std::string s) { files[name] = std::move(s); }
};

inline std::string fnv1a_file(const std::filesystem::path& p, std::uintmax_t& bytes) {
    std::ifstream in(p, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ull;
    bytes = 0;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        bytes += static_cast<std::uintmax_t>(in.gcount());
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(csv::parse_double(item, 0, what));
    return out;
}

class App {
public:
    App() : app_("Benchmark stitching: fit a shared capability scale and analyse it", "benchstitch") {
        app_.require_subcommand(1, 1);
        app_.set_version_flag("--version", std::string(BENCHSTITCH_VERSION));

        bind(&app_, "--seed", o_.seed, "Master seed for every stochastic step");
        bind(&app_, "--out", o_.out, "Output directory");
        app_.add_option("--config", o_.config, "JSON file of option values; file values win over flags");
        bind_flag(&app_, "--percent", o_.percent, "Scores are percentages in [0, 100]");
        bind(&app_, "--min-benchmarks", o_.min_benchmarks, "Drop models evaluated on fewer benchmarks");
        bind(&app_, "--window-start", o_.window_start, "Keep models released on or after this date");
        bind(&app_, "--window-end", o_.window_end, "Keep models released on or before this date");
        bind(&app_, "--link", o_.link, "sigmoid or clipped_linear");
        bind(&app_, "--anchor", o_.anchor, "Anchor benchmark id, or model=value,model=value");
        bind(&app_, "--l2-strength", o_.l2_strength, "L2 regularization strength");
        bind(&app_, "--max-iterations", o_.max_iterations, "Solver iteration cap");
        bind(&app_, "--scores", o_.scores, "Scores CSV");
        bind(&app_, "--compute", o_.compute, "Training compute CSV");
        bind(&app_, "--horizons", o_.horizons, "Time horizon CSV");
        bind(&app_, "--labels", o_.labels, "Optimized-for labels CSV");

        auto* fit = sub("fit", "Fit capabilities and difficulties");
        bind_flag(fit, "--no-errors", o_.no_errors, "Skip sensitivity error bars");
        bind(fit, "--loss-bump", o_.loss_bump, "Relative loss increase defining error bars");

        auto* diag = sub("diagnose", "Fit diagnostics, cross-validation and link comparison");
        bind(diag, "--folds", o_.folds, "Cross-validation folds");

        auto* trends = sub("trends", "Frontier trend, horizon map and backtest");
        bind(trends, "--train-frac", o_.train_frac, "Horizon map training fraction");
        bind(trends, "--backtest-cutoff", o_.backtest_cutoff, "Backtest cutoff date");
        bind(trends, "--backtest-years", o_.backtest_years, "Backtest horizon in years");

        auto* fc = sub("forecast", "Extrapolate the frontier trend");
        bind(fc, "--target", o_.target, "Forecast date (YYYY-MM or YYYY-MM-DD)")->required();
        bind(fc, "--train-frac", o_.train_frac, "Horizon map training fraction");

        auto* det = sub("detect", "Single-breakpoint acceleration test on the frontier");
        bind(det, "--threshold", o_.threshold, "Slope ratio that counts as acceleration");
        bind(det, "--min-segment", o_.min_segment, "Minimum frontier points on each side of the break");

        auto* ap = sub("algoprog", "Compute slope and algorithmic progress");
        bind(ap, "--families", o_.families, "Comma-separated families (default: all with compute rows)");
        bind_flag(ap, "--include-distilled", o_.include_distilled, "Keep distilled models");
        bind(ap, "--bucket-width", o_.bucket_width, "Capability bucket width");
        bind(ap, "--bucket-step", o_.bucket_step, "Capability bucket step");

        auto* syn = sub("synth", "Synthetic data and detection experiments");
        bind(syn, "--experiment", o_.experiment, "generate, detect, sweep or false-positive");
        bind(syn, "--preset", o_.preset, "Sweep grid: primary or data_volume");
        bind(syn, "--accel", o_.accel, "Acceleration factor N");
        bind(syn, "--noise-mult", o_.noise_mult, "Noise as a multiple of sigma = 0.05");
        bind(syn, "--noise-mults", o_.noise_mults, "Noise multiples for false-positive runs");
        bind(syn, "--fraction", o_.fraction, "Fraction of models that accelerate");
        bind(syn, "--t-cutoff", o_.t_cutoff, "Acceleration onset (fractional year)");
        bind(syn, "--models", o_.models, "Number of models");
        bind(syn, "--benchmarks", o_.benchmarks, "Number of benchmarks");
        bind(syn, "--replicas", o_.replicas, "Replicas per cell");
        bind(syn, "--step-months", o_.step_months, "Observation step in months");
        bind(syn, "--threshold", o_.threshold, "Slope ratio that counts as acceleration");
        bind(syn, "--fp-window-start", o_.fp_window_start, "False-positive window start (fractional year)");
        bind(syn, "--fp-window-months", o_.fp_window_months, "False-positive window length in months");

        auto* rob = sub("robust", "Anchor sweeps, random subsets, optimized-for test, link comparison");
        bind(rob, "--analysis", o_.analysis, "anchors, subsets, optimized, links or all");
        bind(rob, "--anchors", o_.anchors, "Comma-separated anchor benchmarks for the sweep (default: all)");
        bind(rob, "--drop-frac", o_.drop_frac, "Fraction of benchmarks dropped per subset run");
        bind(rob, "--runs", o_.runs, "Subset runs");
        bind(rob, "--anchors-optimized", o_.anchors_optimized, "Optimized-for anchors");
        bind(rob, "--anchors-not-optimized", o_.anchors_not_optimized, "Not-optimized-for anchors");
        bind(rob, "--permutations", o_.permutations, "Permutations per anchor");
        bind(rob, "--recency-cutoff", o_.recency_cutoff, "Keep benchmarks released on or after (fractional year)");
        bind(rob, "--folds", o_.folds, "Cross-validation folds for link comparison");
    }

    int run(int argc, const char* const* argv, std::ostream& err) {
        try {
            app_.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app_.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app_.exit(e);
        } catch (const CLI::CallForVersion& e) {
            return app_.exit(e);
        } catch (const CLI::ParseError& e) {
            return fail(err, "usage", e.what(), 2);
        }
        try {
            if (!o_.config.empty()) apply_config(err);
            for (int i = 0; i < argc; ++i) argv_.push_back(argv[i]);
            Outputs outputs;
            const std::string cmd = app_.get_subcommands().front()->get_name();
            if (cmd == "fit") cmd_fit(outputs);
            else if (cmd == "diagnose") cmd_diagnose(outputs);
            else if (cmd == "trends") cmd_trends(outputs);
            else if (cmd == "forecast") cmd_forecast(outputs);
            else if (cmd == "detect") cmd_detect(outputs);
            else if (cmd == "algoprog") cmd_algoprog(outputs);
            else if (cmd == "synth") cmd_synth(outputs);
            else if (cmd == "robust") cmd_robust(outputs);
            outputs.json("manifest.json", manifest(cmd, outputs));
            write_atomically(outputs);
            return 0;
        } catch (const Error& e) {
            return fail(err, to_string(e.kind()), e.what(), e.numerical() ? 3 : 2);
        } catch (const nlohmann::json::exception& e) {
            return fail(err, "config", e.what(), 2);
        } catch (const std::filesystem::filesystem_error& e) {
            return fail(err, "io", e.what(), 2);
        }
    }

private:
    // ---- option plumbing

    template <class T>
    CLI::Option* bind(CLI::App* app, const std::string& flag, T& ref, const std::string& desc) {
        auto* opt = app->add_option(flag, ref, desc)->capture_default_str();
        register_key(flag, opt, ref);
        return opt;
    }

    CLI::Option* bind_flag(CLI::App* app, const std::string& flag, bool& ref, const std::string& desc) {
        auto* opt = app->add_flag(flag, ref, desc);
        register_key(flag, opt, ref);
        return opt;
    }

    template <class T>
    void register_key(const std::string& flag, CLI::Option* opt, T& ref) {
        std::string key = flag.substr(2);
        for (auto& c : key) {
            if (c == '-') c = '_';
        }
        auto& entry = keys_[key];
        entry.options.push_back(opt);
        entry.get = [&ref] { return Json(ref); };
        entry.set = [&ref](const Json& j) { ref = j.get<T>(); };
    }

    CLI::App* sub(const std::string& name, const std::string& desc) {
        auto* s = app_.add_subcommand(name, desc);
        s->fallthrough();
        return s;
    }

    void apply_config(std::ostream& err) {
        std::ifstream in(o_.config);
        if (!in) throw IoError("cannot open config file '" + o_.config + "'");
        const Json j = Json::parse(in);
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        for (const auto& [key, value] : j.items()) {
            auto it = keys_.find(key);
            if (it == keys_.end()) throw ConfigError("unknown config key '" + key + "'");
            bool given = false;
            for (const auto* opt : it->second.options) given = given || opt->count() > 0;
            const Json before = it->second.get();
            try {
                it->second.set(value);
            } catch (const nlohmann::json::exception&) {
                throw ConfigError("config key '" + key + "' has the wrong type");
            }
            if (given && before != it->second.get()) {
                err << "warning: config file overrides --" << key << " (" << before.dump() << " -> " << value.dump() << ")\n";
            }
        }
    }

    Json effective_config() const {
        Json j = Json::object();
        for (const auto& [key, entry] : keys_) j[key] = entry.get();
        return j;
    }

    // ---- shared pipeline

    FitConfig fit_config() const {
        FitConfig c;
        c.link = parse_link(o_.link);
        c.l2_strength = o_.l2_strength;
        c.max_iterations = o_.max_iterations;
        c.seed = o_.seed;
        c.validate();
        return c;
    }

    void note_input(const std::string& path) {
        std::uintmax_t bytes = 0;
        const auto hash = fnv1a_file(path, bytes);
        inputs_.push_back({{"path", path}, {"bytes", bytes}, {"fnv1a64", hash}});
    }

    ScoreTable load_table() {
        if (o_.scores.empty()) throw ConfigError("--scores is required");
        auto table = load_scores(o_.scores, {o_.percent, DuplicatePolicy::keep_max});
        note_input(o_.scores);
        if (!o_.window_start.empty() || !o_.window_end.empty()) {
            const Date start = o_.window_start.empty() ? Date{1, 1, 1} : Date::parse(o_.window_start);
            const Date end = o_.window_end.empty() ? Date{9999, 12, 31} : Date::parse(o_.window_end);
            table = date_window(table, start, end);
        }
        if (o_.min_benchmarks < 1) throw ConfigError("--min-benchmarks must be at least 1");
        table = filter_min_benchmarks(table, o_.min_benchmarks);
        if (table.empty()) throw InsufficientDataError("no records left after filtering");
        return table;
    }

    GaugeSpec gauge_for(const ScoreTable& table) const {
        if (o_.anchor.empty()) return GaugeSpec::benchmark(most_covered_benchmark(table));
        if (o_.anchor.find('=') == std::string::npos) return GaugeSpec::benchmark(o_.anchor);
        const auto parts = split_list(o_.anchor);
        if (parts.size() != 2) throw ConfigError("model anchors take the form model=value,model=value");
        std::vector<std::pair<std::string, double>> pairs;
        for (const auto& p : parts) {
            const auto eq = p.find('=');
            if (eq == std::string::npos) throw ConfigError("model anchor '" + p + "' lacks '='");
            pairs.push_back({p.substr(0, eq), csv::parse_double(p.substr(eq + 1), 0, "anchor")});
        }
        return GaugeSpec::model_pair(pairs[0].first, pairs[0].second, pairs[1].first, pairs[1].second);
    }

    struct Fitted {
        ScoreTable table;
        GaugeSpec gauge;
        FitResult result;
    };

    Fitted fit_inputs() {
        Fitted f;
        f.table = load_table();
        f.gauge = gauge_for(f.table);
        f.result = benchstitch::fit(f.table, fit_config(), f.gauge);
        return f;
    }

    static Json fit_summary(const Fitted& f) {
        return {{"n_models", f.table.models().size()},
                {"n_benchmarks", f.table.benchmarks().size()},
                {"n_obs", f.result.n_obs},
                {"gauge", report::gauge(f.result.params.gauge)},
                {"converged", f.result.converged},
                {"fingerprint", f.result.fingerprint}};
    }

    static double to_year(const std::string& s) { return Date::parse(s).fractional_year(); }

    // ---- commands

    void cmd_fit(Outputs& out) {
        const auto f = fit_inputs();
        std::optional<SensitivityReport> errors;
        if (!o_.no_errors && f.result.converged) errors = sensitivity_errors(f.result, f.table, o_.loss_bump);
        const auto d = benchstitch::diagnostics(f.result, f.table);
        out.json("fit.json", report::fit(f.result, f.table, errors, d));
        out.text("residuals.csv", report::residuals_csv(d));
        out.text("capabilities.csv", report::capabilities_csv(f.result, f.table, errors));
        out.text("difficulties.csv", report::difficulties_csv(f.result, f.table, errors));
    }

    void cmd_diagnose(Outputs& out) {
        const auto f = fit_inputs();
        const auto d = benchstitch::diagnostics(f.result, f.table);
        Json j{{"fit", fit_summary(f)}, {"diagnostics", report::diagnostics(d)}};
        try {
            const auto cv = cross_validate(f.table, fit_config(), f.gauge, o_.folds, o_.seed);
            Json folds = Json::array();
            for (std::size_t i = 0; i < cv.fold_mse.size(); ++i) {
                folds.push_back({{"size", cv.fold_size[i]}, {"mse", report::num(cv.fold_mse[i])}, {"r2", report::num(cv.fold_r2[i])}});
            }
            j["cross_validation"] = {{"folds", folds}, {"mean_mse", report::num(cv.mean_mse)},
                                     {"pooled_mse", report::num(cv.pooled_mse)}, {"partition_attempts", cv.partition_attempts}};
        } catch (const PartitionError& e) {
            j["cross_validation"] = {{"error", e.what()}};
        }
        j["link_comparison"] = report::link_comparison(robust::link_comparison(f.table, fit_config(), f.gauge, o_.folds, o_.seed));
        out.json("diagnostics.json", j);
        out.text("residuals.csv", report::residuals_csv(d));
    }

    void cmd_trends(Outputs& out) {
        const auto f = fit_inputs();
        const auto fr = frontier(capability_points(f.result.params, f.table));
        const auto tr = fit_linear_trend(fr);
        Json j{{"fit", fit_summary(f)}, {"trend", report::trend(tr)}, {"frontier", report::points(fr)}};
        if (!o_.horizons.empty()) {
            const auto h = load_horizons(o_.horizons);
            note_input(o_.horizons);
            const auto map = fit_horizon_map(f.result.params.capability, h, o_.train_frac, o_.seed);
            j["horizon_map"] = report::horizon_map(map);
            j["horizon_growth"] = report::growth(slope_to_growth(map, tr.slope));
        }
        if (!o_.backtest_cutoff.empty()) {
            j["backtest"] = report::backtest(backtest(capability_points(f.result.params, f.table), to_year(o_.backtest_cutoff),
                                                      o_.backtest_years));
        }
        out.json("trend.json", j);
        out.text("trend_plot.csv", report::trend_plot_csv(fr, tr));
    }

    void cmd_forecast(Outputs& out) {
        const auto f = fit_inputs();
        const auto fr = frontier(capability_points(f.result.params, f.table));
        const auto tr = fit_linear_trend(fr);
        const auto fc = forecast(tr, to_year(o_.target));
        Json j{{"fit", fit_summary(f)}, {"trend", report::trend(tr)}, {"target", o_.target}, {"forecast", report::forecast(fc)}};
        if (!o_.horizons.empty()) {
            const auto h = load_horizons(o_.horizons);
            note_input(o_.horizons);
            const auto map = fit_horizon_map(f.result.params.capability, h, o_.train_frac, o_.seed);
            j["horizon_map"] = report::horizon_map(map);
            j["forecast_horizon"] = {{"estimate", report::num(capability_to_horizon(map, fc.estimate))},
                                     {"interval", Json::array({report::num(capability_to_horizon(map, fc.interval.lo)),
                                                               report::num(capability_to_horizon(map, fc.interval.hi))})}};
        }
        out.json("forecast.json", j);
    }

    void cmd_detect(Outputs& out) {
        const auto f = fit_inputs();
        const auto fr = frontier(capability_points(f.result.params, f.table));
        const auto bp = detect_breakpoint(fr, o_.threshold, o_.min_segment);
        out.json("breakpoint.json", {{"fit", fit_summary(f)}, {"breakpoint", report::breakpoint(bp, o_.threshold)}});
        out.text("breakpoint_plot.csv", report::breakpoint_plot_csv(fr, bp));
    }

    void cmd_algoprog(Outputs& out) {
        if (o_.compute.empty()) throw ConfigError("--compute is required");
        const auto f = fit_inputs();
        const auto compute = load_compute(o_.compute);
        note_input(o_.compute);
        const auto points = algoprog::join_compute(f.result, f.table, compute);
        const bool exclude = !o_.include_distilled;

        std::vector<std::string> families = split_list(o_.families);
        if (families.empty()) {
            std::set<std::string> seen;
            for (const auto& p : points) {
                if (p.family) seen.insert(*p.family);
            }
            families.assign(seen.begin(), seen.end());
        }
        const auto k = algoprog::estimate_k(points, families, exclude);
        const auto bpts = algoprog::b_points(points, k.weighted_k, exclude);
        Json j{{"fit", fit_summary(f)},
               {"n_models_with_compute", points.size()},
               {"exclude_distilled", exclude},
               {"k", report::k_estimate(k)},
               {"progress_capability_frontier",
                report::progress(algoprog::delta_b_rate(bpts, algoprog::FrontierMode::capability, k.weighted_k))}};
        auto optional_section = [&](const char* name, const std::function<Json()>& make) {
            try {
                j[name] = make();
            } catch (const Error& e) {
                if (!e.numerical()) throw;
                j[name] = {{"error", e.what()}};
            }
        };
        optional_section("progress_quality_frontier", [&] {
            return report::progress(algoprog::delta_b_rate(bpts, algoprog::FrontierMode::quality, k.weighted_k));
        });
        optional_section("k_all_models", [&] { return report::family_fit(algoprog::estimate_k_all_models(points, exclude)); });
        optional_section("joint_ols", [&] {
            std::vector<algoprog::JointPoint> jp;
            for (const auto& p : points) {
                if (!(exclude && p.distilled)) jp.push_back({p.t, p.capability, p.log_flop});
            }
            return report::joint(algoprog::ols_joint(jp));
        });
        const auto cap_buckets = algoprog::bucket_fixed_capability(points, o_.bucket_width, o_.bucket_step);
        const auto flop_buckets = algoprog::bucket_fixed_compute(points);
        j["capability_buckets"] = cap_buckets.size();
        j["compute_buckets"] = flop_buckets.size();
        out.json("algoprog.json", j);
        out.text("capability_buckets.csv", report::capability_buckets_csv(cap_buckets));
        out.text("compute_buckets.csv", report::compute_buckets_csv(flop_buckets));
    }

    synth::SyntheticConfig synth_config() const {
        synth::SyntheticConfig c;
        c.accel_factor = o_.accel;
        c.noise_sigma = 0.05 * o_.noise_mult;
        c.accel_fraction = o_.fraction;
        c.t_cutoff = o_.t_cutoff;
        c.n_models = o_.models;
        c.n_benchmarks = o_.benchmarks;
        c.seed = o_.seed;
        c.validate();
        return c;
    }

    synth::DetectorConfig detector() const {
        synth::DetectorConfig d;
        d.step_months = o_.step_months;
        d.threshold = o_.threshold;
        d.fit = fit_config();
        d.validate();
        return d;
    }

    void cmd_synth(Outputs& out) {
        const auto& e = o_.experiment;
        if (e == "generate") {
            const auto data = synth::generate(synth_config());
            std::ostringstream scores, models, benches;
            write_scores(scores, data.table);
            models << "model_id,t,capability,accelerating\n";
            for (const auto& [id, c] : data.truth.capability) {
                models << id << ',' << report::cell(data.truth.model_t.at(id)) << ',' << report::cell(c) << ','
                       << (data.truth.accelerating.count(id) ? "true" : "false") << '\n';
            }
            benches << "benchmark_id,difficulty\n";
            for (const auto& [id, d] : data.truth.difficulty) benches << id << ',' << report::cell(d) << '\n';
            out.text("scores.csv", scores.str());
            out.text("truth_models.csv", models.str());
            out.text("truth_benchmarks.csv", benches.str());
            out.json("synth.json", {{"records", data.table.size()}, {"dropped_scores", data.dropped_scores},
                                    {"delta_c", report::num(data.config.delta_c())}});
        } else if (e == "detect") {
            const auto outcome = synth::detection_experiment(synth_config(), detector());
            out.json("detection.json", report::detection(outcome, o_.threshold));
        } else if (e == "sweep") {
            auto base = synth_config();
            const auto cells = synth::preset_cells(synth::parse_preset(o_.preset), base);
            const auto result = synth::sweep(base, cells, o_.replicas, detector(), o_.seed);
            std::ostringstream rows;
            synth::write_sweep_rows(rows, result);
            out.text("sweep_rows.csv", rows.str());
            Json summary = report::sweep_summary(result);
            summary["preset"] = o_.preset;
            summary["replicas"] = o_.replicas;
            out.json("sweep_summary.json", summary);
        } else if (e == "false-positive") {
            auto base = synth_config();
            base.accel_factor = 1.0;
            const synth::FalsePositiveWindow window{o_.fp_window_start, o_.fp_window_months};
            Json per = Json::array();
            double sum = 0.0;
            const auto mults = parse_list(o_.noise_mults, "noise_mults");
            if (mults.empty()) throw ConfigError("--noise-mults is empty");
            for (std::size_t i = 0; i < mults.size(); ++i) {
                auto cfg = base;
                cfg.noise_sigma = 0.05 * mults[i];
                const auto r = synth::false_positive_rate(cfg, o_.replicas, detector(), window, child_seed(o_.seed, i));
                Json row = report::false_positive(r, window);
                row["noise_mult"] = report::num(mults[i]);
                per.push_back(row);
                sum += r.rate;
            }
            out.json("false_positive.json", {{"configs", per}, {"mean_rate", report::num(sum / static_cast<double>(mults.size()))}});
        } else {
            throw ConfigError("unknown experiment '" + e + "' (expected generate, detect, sweep or false-positive)");
        }
    }

    void cmd_robust(Outputs& out) {
        const auto& a = o_.analysis;
        if (a != "all" && a != "anchors" && a != "subsets" && a != "optimized" && a != "links") {
            throw ConfigError("unknown analysis '" + a + "'");
        }
        const auto table = load_table();
        const auto gauge = gauge_for(table);
        const auto config = fit_config();
        Json j = Json::object();
        if (a == "all" || a == "anchors") {
            std::vector<GaugeSpec> anchors;
            auto ids = split_list(o_.anchors);
            if (ids.empty()) {
                if (gauge.mode == GaugeSpec::Mode::benchmark_anchor) ids.push_back(*gauge.anchor_benchmark);
                for (const auto& b : table.benchmarks()) {
                    if (ids.empty() || b.id != ids.front()) ids.push_back(b.id);
                }
            }
            for (const auto& id : ids) anchors.push_back(GaugeSpec::benchmark(id));
            const auto sweep = robust::anchor_sweep(table, anchors, config);
            j["anchor_sweep"] = report::anchor_sweep(sweep);
            out.text("anchor_spread.csv", report::anchor_spread_csv(sweep));
        }
        if (a == "all" || a == "subsets") {
            robust::SubsetOptions so;
            so.drop_frac = o_.drop_frac;
            so.n_runs = o_.runs;
            so.seed = o_.seed;
            const auto s = robust::random_subset_slopes(table, gauge, config, so);
            j["random_subsets"] = report::subset_slopes(s);
            out.text("subset_runs.csv", report::subset_runs_csv(s));
        }
        if (a == "optimized" || (a == "all" && !o_.labels.empty())) {
            if (o_.labels.empty()) throw ConfigError("--labels is required for the optimized-for test");
            const auto labels = load_labels(o_.labels);
            note_input(o_.labels);
            robust::PermutationOptions po;
            po.anchors_optimized = o_.anchors_optimized;
            po.anchors_not_optimized = o_.anchors_not_optimized;
            po.n_permutations = o_.permutations;
            po.recency_cutoff = o_.recency_cutoff;
            po.seed = o_.seed;
            j["optimized_for"] = report::permutation(robust::optimized_for_test(table, labels, config, po));
        }
        if (a == "all" || a == "links") {
            j["link_comparison"] = report::link_comparison(robust::link_comparison(table, config, gauge, o_.folds, o_.seed));
        }
        out.json("robustness.json", j);
    }

    // ---- output

    Json manifest(const std::string& cmd, const Outputs& outputs) const {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
        Json files = Json::array();
        for (const auto& [name, content] : outputs.files) files.push_back(name);
        return {{"tool", "benchstitch"},
                {"version", BENCHSTITCH_VERSION},
                {"command", cmd},
                {"argv", argv_},
                {"seed", o_.seed},
                {"config", effective_config()},
                {"inputs", inputs_},
                {"outputs", files},
                {"created_utc", stamp}};
    }

    void write_atomically(const Outputs& outputs) const {
        namespace fs = std::filesystem;
        const fs::path dir(o_.out);
        fs::create_directories(dir);
        std::vector<fs::path> staged;
        try {
            for (const auto& [name, content] : outputs.files) {
                const fs::path tmp = dir / ("." + name + ".tmp");
                std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                if (!f) throw IoError("cannot write '" + tmp.string() + "'");
                staged.push_back(tmp);
                f << content;
                f.close();
                if (!f) throw IoError("write failed for '" + tmp.string() + "'");
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& p : staged) fs::remove(p, ec);
            throw;
        }
        for (const auto& [name, content] : outputs.files) fs::rename(dir / ("." + name + ".tmp"), dir / name);
    }

    static int fail(std::ostream& err, const std::string& kind, const std::string& message, int code) {
        Json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
        err << j.dump() << '\n';
        return code;
    }

    struct Key {
        std::vector<CLI::Option*> options;
        std::function<Json()> get;
        std::function<void(const Json&)> set;
    };

    CLI::App app_;
    Options o_;
    std::map<std::string, Key> keys_;
    std::vector<std::string> argv_;
    Json inputs_ = Json::array();
};

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    App app;
    return app.run(argc, argv, err);
}

}  // namespace benchstitch::cli
