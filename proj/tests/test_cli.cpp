#include <gtest/gtest.h>

#include <cstdlib>

#include "cli_support.hpp"

namespace fs = std::filesystem;
using bstest::run_cli;

namespace {

std::string sample_dir() {
    const char* dir = std::getenv("BENCHSTITCH_SAMPLE_DIR");
    return dir ? dir : "data/sample";
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("benchstitch_test_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

}  // namespace

TEST(Cli, EveryCommandIsDeterministic) {
    for (const auto& c : bstest::cli_cases(sample_dir())) {
        EXPECT_EQ(bstest::check_deterministic(c, scratch("det")), "") << c.name;
    }
}

TEST(Cli, ManifestDescribesRun) {
    const auto out = scratch("manifest");
    const auto r = run_cli({"--scores", sample_dir() + "/scores.csv", "--out", out.string(), "fit", "--no-errors"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto files = bstest::snapshot(out);
    ASSERT_TRUE(files.count("manifest.json"));
    const auto m = nlohmann::json::parse(files.at("manifest.json"));
    EXPECT_EQ(m["command"], "fit");
    EXPECT_EQ(m["inputs"].size(), 1u);
    EXPECT_EQ(m["inputs"][0]["fnv1a64"].get<std::string>().size(), 16u);
    EXPECT_EQ(m["config"]["l2_strength"], 0.1);
    for (const auto& name : m["outputs"]) EXPECT_TRUE(files.count(name.get<std::string>())) << name;
    const auto fit = nlohmann::json::parse(files.at("fit.json"));
    EXPECT_TRUE(fit.is_object());
}

TEST(Cli, ErrorsMapToExitCodes) {
    const auto out = scratch("errors");
    auto missing = run_cli({"--scores", "/nonexistent/scores.csv", "--out", out.string(), "fit"});
    EXPECT_EQ(missing.code, 2);
    EXPECT_EQ(nlohmann::json::parse(missing.err)["error"]["kind"], "io");

    auto usage = run_cli({"--bogus", "fit"});
    EXPECT_EQ(usage.code, 2);
    EXPECT_EQ(nlohmann::json::parse(usage.err)["error"]["kind"], "usage");

    auto no_scores = run_cli({"--out", out.string(), "fit"});
    EXPECT_EQ(no_scores.code, 2);
    EXPECT_EQ(nlohmann::json::parse(no_scores.err)["error"]["kind"], "config");

    auto bad_anchor = run_cli({"--scores", sample_dir() + "/scores.csv", "--anchor", "nope", "--out", out.string(), "fit"});
    EXPECT_EQ(bad_anchor.code, 2);

    // Two frontier points cannot carry a trend: a numerical failure.
    const auto tiny = out.parent_path() / "tiny.csv";
    write_file(tiny,
               "model_id,benchmark_id,score,model_release,benchmark_release\n"
               "a,x,0.3,2023-01-01,\nb,x,0.6,2024-01-01,\n");
    auto numeric = run_cli({"--scores", tiny.string(), "--min-benchmarks", "1", "--out", out.string(), "forecast", "--target", "2026-01"});
    EXPECT_EQ(numeric.code, 3) << numeric.err;
    EXPECT_EQ(nlohmann::json::parse(numeric.err)["error"]["kind"], "insufficient_data");

    EXPECT_FALSE(fs::exists(out)) << "a failed command left outputs behind";
}

TEST(Cli, FailureLeavesExistingOutputsUntouched) {
    const auto out = scratch("keep");
    ASSERT_EQ(run_cli({"--scores", sample_dir() + "/scores.csv", "--out", out.string(), "detect"}).code, 0);
    const auto before = bstest::snapshot(out);
    const auto r = run_cli({"--scores", sample_dir() + "/scores.csv", "--out", out.string(), "detect", "--min-segment", "1"});
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(bstest::snapshot(out), before);
}

TEST(Cli, ConfigFileOverridesFlagsWithWarning) {
    const auto out = scratch("config");
    const auto cfg = out.parent_path() / "cfg.json";
    write_file(cfg, R"({"seed": 9, "folds": 4})");
    const auto r = run_cli({"--scores", sample_dir() + "/scores.csv", "--seed", "2", "--config", cfg.string(), "--out",
                            out.string(), "diagnose"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning: config file overrides --seed"), std::string::npos) << r.err;
    EXPECT_EQ(r.err.find("--folds"), std::string::npos) << "folds was not given on the command line";
    const auto m = nlohmann::json::parse(bstest::snapshot(out).at("manifest.json"));
    EXPECT_EQ(m["seed"], 9);
    EXPECT_EQ(m["config"]["folds"], 4);

    write_file(cfg, R"({"no_such_option": 1})");
    const auto bad = run_cli({"--scores", sample_dir() + "/scores.csv", "--config", cfg.string(), "--out", out.string(), "fit"});
    EXPECT_EQ(bad.code, 2);
    EXPECT_EQ(nlohmann::json::parse(bad.err)["error"]["kind"], "config");
}

TEST(Cli, SynthGenerateRoundTripsThroughFit) {
    const auto gen = scratch("gen");
    ASSERT_EQ(run_cli({"--seed", "1", "--out", gen.string(), "synth", "--experiment", "generate", "--models", "120"}).code, 0);
    const auto out = scratch("gen_fit");
    const auto r = run_cli({"--scores", (gen / "scores.csv").string(), "--min-benchmarks", "1", "--out", out.string(), "fit",
                            "--no-errors"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(out / "capabilities.csv"));
}
