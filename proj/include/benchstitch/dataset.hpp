#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "benchstitch/csv.hpp"
#include "benchstitch/dates.hpp"
#include "benchstitch/error.hpp"

namespace benchstitch {

struct ScoreRecord {
    std::string model_id;
    std::string benchmark_id;
    double score = 0.0;  // fraction in [0, 1]
    Date model_release;
    std::optional<Date> benchmark_release;

    bool operator==(const ScoreRecord&) const = default;
};

struct ModelInfo {
    std::string id;
    Date release;
    double t() const { return release.fractional_year(); }
    bool operator==(const ModelInfo&) const = default;
};

struct BenchmarkInfo {
    std::string id;
    std::optional<Date> release;
    bool operator==(const BenchmarkInfo&) const = default;
};

// Index form of a record, used by the fitter.
struct Observation {
    std::size_t model = 0;
    std::size_t benchmark = 0;
    double score = 0.0;
};

enum class DuplicatePolicy { keep_max, strict };

struct LoadOptions {
    bool percent = false;
    DuplicatePolicy duplicates = DuplicatePolicy::keep_max;
};

// Canonical model x benchmark score table: one record per (model, benchmark),
// records sorted by (model_id, benchmark_id), models and benchmarks sorted by id.
class ScoreTable {
public:
    ScoreTable() = default;

    static ScoreTable from_records(std::vector<ScoreRecord> rows,
                                   DuplicatePolicy duplicates = DuplicatePolicy::keep_max) {
        for (const auto& r : rows) {
            if (!(r.score >= 0.0 && r.score <= 1.0)) {
                throw ValidationError("score for (" + r.model_id + ", " + r.benchmark_id +
                                      ") outside [0, 1]: " + csv::format_double(r.score));
            }
            if (r.model_id.empty() || r.benchmark_id.empty()) throw ValidationError("empty model or benchmark id");
        }
        std::sort(rows.begin(), rows.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
            if (a.model_id != b.model_id) return a.model_id < b.model_id;
            if (a.benchmark_id != b.benchmark_id) return a.benchmark_id < b.benchmark_id;
            return a.score > b.score;
        });

        ScoreTable t;
        std::map<std::string, Date> model_dates;
        std::map<std::string, std::optional<Date>> bench_dates;
        for (auto& r : rows) {
            auto [mit, fresh_model] = model_dates.emplace(r.model_id, r.model_release);
            if (!fresh_model && mit->second != r.model_release) {
                throw ValidationError("model '" + r.model_id + "' has conflicting release dates " +
                                      mit->second.iso() + " and " + r.model_release.iso());
            }
            auto [bit, fresh_bench] = bench_dates.emplace(r.benchmark_id, r.benchmark_release);
            if (!fresh_bench && r.benchmark_release) {
                if (!bit->second) {
                    bit->second = r.benchmark_release;
                } else if (*bit->second != *r.benchmark_release) {
                    throw ValidationError("benchmark '" + r.benchmark_id + "' has conflicting release dates");
                }
            }
            if (!t.records_.empty() && t.records_.back().model_id == r.model_id &&
                t.records_.back().benchmark_id == r.benchmark_id) {
                if (duplicates == DuplicatePolicy::strict) {
                    throw ValidationError("duplicate record for (" + r.model_id + ", " + r.benchmark_id + ")");
                }
                continue;  // sorted by score descending within a key: first one is the max
            }
            t.records_.push_back(std::move(r));
        }
        for (auto& r : t.records_) r.benchmark_release = bench_dates.at(r.benchmark_id);
        for (const auto& [id, d] : model_dates) t.models_.push_back({id, d});
        for (const auto& [id, d] : bench_dates) t.benchmarks_.push_back({id, d});
        t.reindex();
        return t;
    }

    const std::vector<ScoreRecord>& records() const { return records_; }
    const std::vector<ModelInfo>& models() const { return models_; }
    const std::vector<BenchmarkInfo>& benchmarks() const { return benchmarks_; }
    const std::vector<Observation>& observations() const { return observations_; }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    std::optional<std::size_t> model_index(std::string_view id) const { return find(models_, id); }
    std::optional<std::size_t> benchmark_index(std::string_view id) const { return find(benchmarks_, id); }

    std::vector<std::size_t> records_per_model() const {
        std::vector<std::size_t> n(models_.size(), 0);
        for (const auto& o : observations_) ++n[o.model];
        return n;
    }

    std::vector<std::size_t> records_per_benchmark() const {
        std::vector<std::size_t> n(benchmarks_.size(), 0);
        for (const auto& o : observations_) ++n[o.benchmark];
        return n;
    }

    ScoreTable filter(const std::function<bool(const ScoreRecord&)>& keep) const {
        std::vector<ScoreRecord> rows;
        for (const auto& r : records_) {
            if (keep(r)) rows.push_back(r);
        }
        return from_records(std::move(rows));
    }

    ScoreTable with_benchmarks(const std::set<std::string>& ids) const {
        return filter([&](const ScoreRecord& r) { return ids.count(r.benchmark_id) != 0; });
    }

    bool operator==(const ScoreTable& other) const { return records_ == other.records_; }

private:
    template <class Info>
    static std::optional<std::size_t> find(const std::vector<Info>& v, std::string_view id) {
        auto it = std::lower_bound(v.begin(), v.end(), id, [](const Info& a, std::string_view b) { return a.id < b; });
        if (it == v.end() || it->id != id) return std::nullopt;
        return static_cast<std::size_t>(it - v.begin());
    }

    void reindex() {
        observations_.clear();
        observations_.reserve(records_.size());
        for (const auto& r : records_) {
            observations_.push_back({*model_index(r.model_id), *benchmark_index(r.benchmark_id), r.score});
        }
    }

    std::vector<ScoreRecord> records_;
    std::vector<ModelInfo> models_;
    std::vector<BenchmarkInfo> benchmarks_;
    std::vector<Observation> observations_;
};

// ---------------------------------------------------------------------------
// Side tables

struct ComputeRecord {
    std::string model_id;
    double training_flop = 0.0;
    std::optional<std::string> family;
    bool distilled = false;
};

struct HorizonRecord {
    std::string model_id;
    double horizon = 0.0;
};

struct BenchmarkLabel {
    std::string benchmark_id;
    bool optimized_for = false;
};

// ---------------------------------------------------------------------------
// Loaders

inline const std::vector<std::string>& score_columns() {
    static const std::vector<std::string> cols{"model_id", "benchmark_id", "score", "model_release",
                                               "benchmark_release"};
    return cols;
}

inline ScoreTable read_scores(std::istream& in, const LoadOptions& options = {}) {
    csv::Reader reader(in, score_columns());
    std::vector<ScoreRecord> rows;
    while (reader.next()) {
        const auto line = reader.line();
        ScoreRecord r;
        r.model_id = reader.get("model_id");
        r.benchmark_id = reader.get("benchmark_id");
        if (r.model_id.empty() || r.benchmark_id.empty()) throw ParseError(line, "empty model_id or benchmark_id");
        r.score = csv::parse_double(reader.get("score"), line, "score");
        if (options.percent) r.score /= 100.0;
        if (!(r.score >= 0.0 && r.score <= 1.0)) {
            throw ValidationError("line " + std::to_string(line) + ": score " + reader.get("score") +
                                  " outside [0, 1]" + (options.percent ? " after percent scaling" : ""));
        }
        try {
            r.model_release = Date::parse(reader.get("model_release"));
            const auto& br = reader.get("benchmark_release");
            if (!br.empty()) r.benchmark_release = Date::parse(br);
        } catch (const ValidationError& e) {
            throw ParseError(line, e.what());
        }
        rows.push_back(std::move(r));
    }
    return ScoreTable::from_records(std::move(rows), options.duplicates);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

inline ScoreTable load_scores(const std::filesystem::path& path, const LoadOptions& options = {}) {
    auto in = open_input(path);
    return read_scores(in, options);
}

inline void write_scores(std::ostream& out, const ScoreTable& table) {
    const auto& cols = score_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : table.records()) {
        out << csv::quote(r.model_id) << ',' << csv::quote(r.benchmark_id) << ',' << csv::format_double(r.score)
            << ',' << r.model_release.iso() << ',' << (r.benchmark_release ? r.benchmark_release->iso() : "")
            << '\n';
    }
}

inline std::vector<ComputeRecord> read_compute(std::istream& in) {
    csv::Reader reader(in, {"model_id", "training_flop", "family", "distilled"});
    std::vector<ComputeRecord> out;
    std::set<std::string> seen;
    while (reader.next()) {
        const auto line = reader.line();
        ComputeRecord r;
        r.model_id = reader.get("model_id");
        r.training_flop = csv::parse_double(reader.get("training_flop"), line, "training_flop");
        if (!(r.training_flop > 0.0) || !std::isfinite(std::log10(r.training_flop))) {
            throw ValidationError("line " + std::to_string(line) + ": training_flop must be positive and finite");
        }
        if (!reader.get("family").empty()) r.family = reader.get("family");
        r.distilled = reader.get("distilled").empty() ? false : csv::parse_bool(reader.get("distilled"), line, "distilled");
        if (!seen.insert(r.model_id).second) throw ValidationError("duplicate compute record for '" + r.model_id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<HorizonRecord> read_horizons(std::istream& in) {
    csv::Reader reader(in, {"model_id", "horizon"});
    std::vector<HorizonRecord> out;
    while (reader.next()) {
        const auto line = reader.line();
        HorizonRecord r{reader.get("model_id"), csv::parse_double(reader.get("horizon"), line, "horizon")};
        if (!(r.horizon > 0.0)) throw ValidationError("line " + std::to_string(line) + ": horizon must be positive");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<BenchmarkLabel> read_labels(std::istream& in) {
    csv::Reader reader(in, {"benchmark_id", "optimized_for"});
    std::vector<BenchmarkLabel> out;
    while (reader.next()) {
        out.push_back({reader.get("benchmark_id"), csv::parse_bool(reader.get("optimized_for"), reader.line(), "optimized_for")});
    }
    return out;
}

inline std::vector<ComputeRecord> load_compute(const std::filesystem::path& p) {
    auto in = open_input(p);
    return read_compute(in);
}
inline std::vector<HorizonRecord> load_horizons(const std::filesystem::path& p) {
    auto in = open_input(p);
    return read_horizons(in);
}
inline std::vector<BenchmarkLabel> load_labels(const std::filesystem::path& p) {
    auto in = open_input(p);
    return read_labels(in);
}

inline void write_compute(std::ostream& out, const std::vector<ComputeRecord>& rows) {
    out << "model_id,training_flop,family,distilled\n";
    for (const auto& r : rows) {
        out << csv::quote(r.model_id) << ',' << csv::format_double(r.training_flop) << ','
            << csv::quote(r.family.value_or("")) << ',' << (r.distilled ? "true" : "false") << '\n';
    }
}

inline void write_horizons(std::ostream& out, const std::vector<HorizonRecord>& rows) {
    out << "model_id,horizon\n";
    for (const auto& r : rows) out << csv::quote(r.model_id) << ',' << csv::format_double(r.horizon) << '\n';
}

inline void write_labels(std::ostream& out, const std::vector<BenchmarkLabel>& rows) {
    out << "benchmark_id,optimized_for\n";
    for (const auto& r : rows) out << csv::quote(r.benchmark_id) << ',' << (r.optimized_for ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------
// Table operations

// Keeps models evaluated on at least min_count benchmarks.
inline ScoreTable filter_min_benchmarks(const ScoreTable& table, std::size_t min_count) {
    if (min_count < 1) throw ConfigError("min_count must be at least 1");
    const auto counts = table.records_per_model();
    return table.filter([&](const ScoreRecord& r) { return counts[*table.model_index(r.model_id)] >= min_count; });
}

struct OverlapMatrix {
    std::vector<std::string> benchmarks;
    std::vector<std::vector<std::size_t>> counts;  // symmetric; diagonal = models per benchmark
};

inline OverlapMatrix overlap_matrix(const ScoreTable& table) {
    const std::size_t nb = table.benchmarks().size();
    OverlapMatrix out;
    for (const auto& b : table.benchmarks()) out.benchmarks.push_back(b.id);
    out.counts.assign(nb, std::vector<std::size_t>(nb, 0));
    std::vector<std::vector<std::size_t>> by_model(table.models().size());
    for (const auto& o : table.observations()) by_model[o.model].push_back(o.benchmark);
    for (const auto& bs : by_model) {
        for (std::size_t i : bs) {
            for (std::size_t j : bs) ++out.counts[i][j];
        }
    }
    return out;
}

// Keeps records whose model release lies in [start, end].
inline ScoreTable date_window(const ScoreTable& table, const Date& start, const Date& end) {
    if (end < start) throw ConfigError("date_window: start after end");
    return table.filter([&](const ScoreRecord& r) { return r.model_release >= start && r.model_release <= end; });
}

}  // namespace benchstitch
