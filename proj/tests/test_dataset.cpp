#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace benchstitch;

namespace {

const char* kScores =
    "model_id,benchmark_id,score,model_release,benchmark_release\n"
    "m1,b1,0.5,2023-01-10,2022-06-01\n"
    "m1,b2,0.25,2023-01-10,\n"
    "m2,b1,0.75,2024-03-01,2022-06-01\n"
    "m2,b1,0.7,2024-03-01,2022-06-01\n"
    "m3,b2,1,2024-08-15,2023-02-01\n";

ScoreTable parse(const std::string& text, LoadOptions opt = {}) {
    std::istringstream in(text);
    return read_scores(in, opt);
}

}  // namespace

TEST(Dataset, ReadsAndDeduplicatesKeepingMax) {
    const auto t = parse(kScores);
    ASSERT_EQ(t.size(), 4u);
    ASSERT_EQ(t.models().size(), 3u);
    ASSERT_EQ(t.benchmarks().size(), 2u);
    const auto& r = t.records();
    EXPECT_EQ(r[2].model_id, "m2");
    EXPECT_DOUBLE_EQ(r[2].score, 0.75);
    // b2's release date is filled from the later row.
    EXPECT_EQ(r[1].benchmark_release, Date::parse("2023-02-01"));
    EXPECT_EQ(t.benchmarks()[0].release, Date::parse("2022-06-01"));
    EXPECT_EQ(t.records_per_model(), (std::vector<std::size_t>{2, 1, 1}));
    EXPECT_EQ(t.records_per_benchmark(), (std::vector<std::size_t>{2, 2}));
}

TEST(Dataset, StrictDuplicatesAndValidation) {
    EXPECT_THROW(parse(kScores, {false, DuplicatePolicy::strict}), ValidationError);
    const std::string head = "model_id,benchmark_id,score,model_release,benchmark_release\n";
    EXPECT_THROW(parse(head + "m,b,1.2,2024-01-01,\n"), ValidationError);
    EXPECT_THROW(parse(head + "m,b,-0.1,2024-01-01,\n"), ValidationError);
    EXPECT_THROW(parse(head + "m,b,abc,2024-01-01,\n"), ParseError);
    EXPECT_THROW(parse(head + "m,b,0.5,2024-02-30,\n"), ParseError);
    EXPECT_THROW(parse(head + ",b,0.5,2024-01-01,\n"), ParseError);
    EXPECT_THROW(parse(head + "m,b,0.5,2024-01-01,\nm,c,0.5,2024-01-02,\n"), ValidationError);
    EXPECT_THROW(parse("model_id,score\nm,0.5\n"), SchemaError);
}

TEST(Dataset, PercentScaling) {
    const std::string text =
        "model_id,benchmark_id,score,model_release,benchmark_release\nm,b,55,2024-01-01,\n";
    EXPECT_DOUBLE_EQ(parse(text, {true, DuplicatePolicy::keep_max}).records()[0].score, 0.55);
    EXPECT_THROW(parse(text), ValidationError);
}

TEST(Dataset, WriteReadRoundTrip) {
    const auto t = parse(kScores);
    std::ostringstream out;
    write_scores(out, t);
    const auto back = parse(out.str());
    EXPECT_EQ(back.records(), t.records());
}

TEST(Dataset, FiltersAndOverlap) {
    const auto t = parse(kScores);
    const auto f = filter_min_benchmarks(t, 2);
    ASSERT_EQ(f.models().size(), 1u);
    EXPECT_EQ(f.models()[0].id, "m1");
    EXPECT_THROW(filter_min_benchmarks(t, 0), ConfigError);

    const auto w = date_window(t, Date::parse("2024-01-01"), Date::parse("2024-12-31"));
    EXPECT_EQ(w.models().size(), 2u);
    EXPECT_THROW(date_window(t, Date::parse("2025-01-01"), Date::parse("2024-01-01")), ConfigError);

    const auto o = overlap_matrix(t);
    ASSERT_EQ(o.benchmarks, (std::vector<std::string>{"b1", "b2"}));
    EXPECT_EQ(o.counts[0][0], 2u);
    EXPECT_EQ(o.counts[0][1], 1u);
    EXPECT_EQ(o.counts[1][0], 1u);

    const auto sub = t.with_benchmarks({"b2"});
    EXPECT_EQ(sub.size(), 2u);
    EXPECT_EQ(sub.benchmarks().size(), 1u);
}

TEST(Dataset, SideTables) {
    std::istringstream compute(
        "model_id,training_flop,family,distilled\n"
        "m1,1e24,llama,false\n"
        "m2,3e23,,true\n");
    const auto c = read_compute(compute);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].family, std::optional<std::string>("llama"));
    EXPECT_FALSE(c[1].family);
    EXPECT_TRUE(c[1].distilled);

    std::istringstream dup("model_id,training_flop,family,distilled\nm1,1e24,,false\nm1,2e24,,false\n");
    EXPECT_THROW(read_compute(dup), ValidationError);
    std::istringstream neg("model_id,training_flop,family,distilled\nm1,-1,,false\n");
    EXPECT_THROW(read_compute(neg), ValidationError);

    std::istringstream labels("benchmark_id,optimized_for\nb1,true\nb2,0\n");
    const auto l = read_labels(labels);
    ASSERT_EQ(l.size(), 2u);
    EXPECT_TRUE(l[0].optimized_for);
    EXPECT_FALSE(l[1].optimized_for);

    std::istringstream horizons("model_id,horizon\nm1,12.5\n");
    EXPECT_DOUBLE_EQ(read_horizons(horizons).at(0).horizon, 12.5);

    std::ostringstream out;
    write_compute(out, c);
    std::istringstream again(out.str());
    const auto c2 = read_compute(again);
    EXPECT_EQ(c2[0].training_flop, 1e24);
    EXPECT_EQ(c2[1].distilled, true);
}
