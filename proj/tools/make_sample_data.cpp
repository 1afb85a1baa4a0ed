// Writes a small synthetic dataset with the same file layout as a real
// snapshot: scores, training compute, time horizons and optimized-for labels.
//
//   make_sample_data <out_dir> [seed]

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "benchstitch/benchstitch.hpp"

namespace bs = benchstitch;

namespace {

struct Model {
    std::string id;
    bs::Date release;
    double capability = 0.0;
    double log_flop = 0.0;
    std::string family;
    bool distilled = false;
};

struct Benchmark {
    std::string id;
    bs::Date release;
    double difficulty = 0.0;
    double slope = 1.0;
};

constexpr double kT0 = 2019.0;
constexpr double kBreak = 2024.25;
constexpr double kSlope = 0.35;
constexpr double kAccel = 1.95;
constexpr double kComputeSlope = 0.168;
constexpr double kQualityRate = 0.297;

double trend_capability(double t) {
    if (t <= kBreak) return kSlope * (t - kT0);
    return kSlope * (kBreak - kT0) + kAccel * kSlope * (t - kBreak);
}

double quality(double t) { return kQualityRate * (t - kT0) - 8.0; }

void write(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw bs::IoError("cannot write " + p.string());
    f << content;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_sample_data <out_dir> [seed]\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 20250101;
    bs::Rng rng(seed);

    std::vector<Benchmark> benches;
    for (int b = 0; b < 38; ++b) {
        const double t = rng.uniform(2018.0, 2025.6);
        const auto date = bs::Date::from_fractional_year(t);
        const double tq = date.fractional_year();
        char id[16];
        std::snprintf(id, sizeof id, "bench%02d", b + 1);
        benches.push_back({id, date, 0.4 + kSlope * (tq - kT0) + rng.normal(0.0, 0.4), std::exp(rng.normal(0.0, 0.3))});
    }

    std::vector<Model> models;
    // Families: four sizes trained with one recipe at nearly the same time.
    const double family_times[] = {2021.3, 2022.6, 2023.4, 2024.1, 2024.6, 2025.2};
    for (int f = 0; f < 6; ++f) {
        for (int s = 0; s < 4; ++s) {
            const double t = family_times[f] + rng.uniform(0.0, 0.08);
            const auto date = bs::Date::from_fractional_year(t);
            const double log_flop = std::log(10.0) * (22.0 + 0.8 * s + 0.3 * f + rng.normal(0.0, 0.1));
            Model m;
            m.id = "fam" + std::to_string(f + 1) + "-" + std::to_string(s + 1);
            m.release = date;
            m.family = "family" + std::to_string(f + 1);
            m.log_flop = log_flop;
            m.capability = quality(date.fractional_year()) + kComputeSlope * log_flop + rng.normal(0.0, 0.04);
            models.push_back(m);
        }
    }
    for (int i = 0; i < 156; ++i) {
        const double t = rng.uniform(2019.5, 2025.9);
        const auto date = bs::Date::from_fractional_year(t);
        Model m;
        char id[16];
        std::snprintf(id, sizeof id, "model%03d", i + 1);
        m.id = id;
        m.release = date;
        // Most models sit below the trend line; the frontier tracks it.
        m.capability = trend_capability(date.fractional_year()) - std::abs(rng.normal(0.0, 0.45));
        m.distilled = rng.uniform(0.0, 1.0) < 0.08;
        m.log_flop = (m.capability - quality(date.fractional_year())) / kComputeSlope + rng.normal(0.0, 0.4) +
                     (m.distilled ? -1.5 : 0.0);
        models.push_back(m);
    }

    std::vector<bs::ScoreRecord> rows;
    for (const auto& m : models) {
        for (std::size_t b : rng.sample_without_replacement(benches.size(), 8)) {
            const auto& bench = benches[b];
            const double s = bs::logistic(bench.slope * (m.capability - bench.difficulty)) + rng.normal(0.0, 0.03);
            if (s <= 0.02 || s >= 0.98) continue;
            rows.push_back({m.id, bench.id, s, m.release, bench.release});
        }
    }
    const auto table = bs::ScoreTable::from_records(std::move(rows), bs::DuplicatePolicy::strict);

    std::vector<bs::ComputeRecord> compute;
    std::vector<bs::HorizonRecord> horizons;
    for (const auto& m : models) {
        if (!m.family.empty() || rng.uniform(0.0, 1.0) < 0.6) {
            compute.push_back({m.id, std::exp(m.log_flop), m.family.empty() ? std::nullopt : std::optional(m.family), m.distilled});
        }
        if (m.release.fractional_year() >= 2022.0 && rng.uniform(0.0, 1.0) < 0.25) {
            horizons.push_back({m.id, std::exp(3.69 * m.capability - 4.58 + rng.normal(0.0, 0.5))});
        }
    }
    std::vector<bs::BenchmarkLabel> labels;
    for (const auto& b : benches) labels.push_back({b.id, rng.uniform(0.0, 1.0) < 0.5});

    std::filesystem::create_directories(dir);
    std::ostringstream scores_out, compute_out, horizons_out, labels_out;
    bs::write_scores(scores_out, table);
    bs::write_compute(compute_out, compute);
    bs::write_horizons(horizons_out, horizons);
    bs::write_labels(labels_out, labels);
    write(dir / "scores.csv", scores_out.str());
    write(dir / "compute.csv", compute_out.str());
    write(dir / "horizons.csv", horizons_out.str());
    write(dir / "labels.csv", labels_out.str());
    std::cout << table.size() << " scores, " << table.models().size() << " models, " << table.benchmarks().size()
              << " benchmarks\n";
    return 0;
}
