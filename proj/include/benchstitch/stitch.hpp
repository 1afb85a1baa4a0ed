#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "benchstitch/dataset.hpp"
#include "benchstitch/error.hpp"
#include "benchstitch/rng.hpp"
#include "benchstitch/stats.hpp"

namespace benchstitch {

// ---------------------------------------------------------------------------
// Score model

enum class Link { sigmoid, clipped_linear };

inline const char* to_string(Link link) { return link == Link::sigmoid ? "sigmoid" : "clipped_linear"; }

inline Link parse_link(std::string_view s) {
    if (s == "sigmoid") return Link::sigmoid;
    if (s == "clipped_linear" || s == "clipped") return Link::clipped_linear;
    throw ConfigError("unknown link '" + std::string(s) + "' (expected sigmoid or clipped_linear)");
}

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double link_value(Link link, double x) {
    if (link == Link::sigmoid) return logistic(x);
    return std::clamp(x, 0.0, 1.0);
}

// d link / dx given x and link_value(x). Clipped regions get 0; the closed
// interval [0, 1] gets the interior slope.
inline double link_slope(Link link, double x, double value) {
    if (link == Link::sigmoid) return value * (1.0 - value);
    return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Parameters and gauge

struct GaugeSpec {
    enum class Mode { benchmark_anchor, model_pair_anchor };

    Mode mode = Mode::benchmark_anchor;
    std::optional<std::string> anchor_benchmark;
    std::vector<std::pair<std::string, double>> anchor_models;

    static GaugeSpec benchmark(std::string id) {
        GaugeSpec g;
        g.anchor_benchmark = std::move(id);
        return g;
    }

    static GaugeSpec model_pair(std::string first, double first_value, std::string second, double second_value) {
        GaugeSpec g;
        g.mode = Mode::model_pair_anchor;
        g.anchor_models = {{std::move(first), first_value}, {std::move(second), second_value}};
        return g;
    }

    void validate() const {
        if (mode == Mode::benchmark_anchor) {
            if (!anchor_benchmark || anchor_benchmark->empty() || !anchor_models.empty()) {
                throw ConfigError("benchmark-anchor gauge needs exactly one anchor benchmark");
            }
        } else if (anchor_benchmark || anchor_models.size() != 2) {
            throw ConfigError("model-pair gauge needs exactly two anchor models");
        }
    }

    std::string describe() const {
        if (mode == Mode::benchmark_anchor) return "benchmark:" + anchor_benchmark.value_or("");
        return "models:" + anchor_models.at(0).first + "=" + csv::format_double(anchor_models.at(0).second) + "," +
               anchor_models.at(1).first + "=" + csv::format_double(anchor_models.at(1).second);
    }

    bool operator==(const GaugeSpec&) const = default;
};

struct StitchParams {
    std::map<std::string, double> capability;  // C_m
    std::map<std::string, double> difficulty;  // D_b
    std::map<std::string, double> slope;       // alpha_b > 0
    GaugeSpec gauge;

    bool operator==(const StitchParams&) const = default;
};

inline double lookup(const std::map<std::string, double>& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw LookupError(std::string("unknown ") + what + " '" + id + "'");
    return it->second;
}

inline double predict_score(const StitchParams& p, const std::string& model_id, const std::string& benchmark_id,
                            Link link = Link::sigmoid) {
    const double c = lookup(p.capability, model_id, "model");
    const double d = lookup(p.difficulty, benchmark_id, "benchmark");
    const double a = lookup(p.slope, benchmark_id, "benchmark");
    return link_value(link, a * (c - d));
}

// Affine change of latent scale: C' = scale * C + shift, D' = scale * D + shift,
// alpha' = alpha / scale. Predictions are unchanged for scale > 0.
inline StitchParams apply_affine(const StitchParams& p, const stats::Affine& t) {
    StitchParams out = p;
    for (auto& [id, c] : out.capability) c = t(c);
    for (auto& [id, d] : out.difficulty) d = t(d);
    for (auto& [id, a] : out.slope) a /= t.scale;
    return out;
}

inline stats::Affine gauge_transform(const StitchParams& p, const GaugeSpec& gauge) {
    gauge.validate();
    if (gauge.mode == GaugeSpec::Mode::benchmark_anchor) {
        const auto& id = *gauge.anchor_benchmark;
        if (!p.slope.count(id)) throw ConfigError("anchor benchmark '" + id + "' not present");
        const double k = p.slope.at(id);
        if (!(k > 0.0)) throw GaugeError("anchor slope must be positive");
        // Rescale so alpha_anchor = 1, then shift so D_anchor = 0.
        return {k, -k * p.difficulty.at(id)};
    }
    const auto& [m1, v1] = gauge.anchor_models[0];
    const auto& [m2, v2] = gauge.anchor_models[1];
    if (!p.capability.count(m1) || !p.capability.count(m2)) {
        throw ConfigError("anchor models '" + m1 + "', '" + m2 + "' not both present");
    }
    const double c1 = p.capability.at(m1), c2 = p.capability.at(m2);
    if (c1 == c2) throw GaugeError("anchor models have equal capability; gauge is degenerate");
    const double scale = (v2 - v1) / (c2 - c1);
    if (!(scale > 0.0)) throw GaugeError("anchor model values would reverse the capability ordering");
    return {scale, v1 - scale * c1};
}

inline StitchParams apply_gauge(const StitchParams& p, const GaugeSpec& gauge) {
    StitchParams out = apply_affine(p, gauge_transform(p, gauge));
    out.gauge = gauge;
    if (gauge.mode == GaugeSpec::Mode::benchmark_anchor) {
        out.slope[*gauge.anchor_benchmark] = 1.0;
        out.difficulty[*gauge.anchor_benchmark] = 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fitting

struct FitConfig {
    Link link = Link::sigmoid;
    double l2_strength = 0.1;
    int max_iterations = 2000;
    double convergence_tol = 1e-10;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(l2_strength >= 0.0)) throw ConfigError("l2_strength must be non-negative");
        if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be positive");
        if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    }
};

struct FitResult {
    StitchParams params;        // gauged
    StitchParams raw;           // optimizer frame: internal anchor slope fixed at 1
    stats::Affine to_gauged;    // raw -> gauged capability map
    double rss = 0.0;           // data residuals only
    double loss = 0.0;          // rss + regularization, in the optimizer frame
    std::size_t n_obs = 0;
    std::size_t n_params = 0;
    bool converged = false;
    int iterations = 0;
    Link link = Link::sigmoid;
    double l2_strength = 0.0;
    std::string internal_anchor;
    std::string fingerprint;
};

inline std::string most_covered_benchmark(const ScoreTable& table) {
    if (table.benchmarks().empty()) throw InsufficientDataError("table has no benchmarks");
    const auto counts = table.records_per_benchmark();
    std::size_t best = 0;
    for (std::size_t b = 1; b < counts.size(); ++b) {
        if (counts[b] > counts[best]) best = b;
    }
    return table.benchmarks()[best].id;
}

inline std::string fingerprint_of(const StitchParams& p, Link link, double l2) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_bytes = [&](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    };
    auto mix_str = [&](const std::string& s) { mix_bytes(s.data(), s.size() + 1); };
    auto mix_map = [&](const std::map<std::string, double>& m) {
        for (const auto& [k, v] : m) {
            mix_str(k);
            mix_bytes(&v, sizeof v);
        }
    };
    mix_str(to_string(link));
    mix_bytes(&l2, sizeof l2);
    mix_str(p.gauge.describe());
    mix_map(p.capability);
    mix_map(p.difficulty);
    mix_map(p.slope);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

// Raw optimizer state: capabilities, difficulties and log-slopes, indexed as
// in the ScoreTable. The internal anchor's log-slope stays 0.
struct RawState {
    std::vector<double> c, d, u;
};

struct Objective {
    double rss = 0.0;
    double loss = 0.0;
};

inline Objective evaluate(const ScoreTable& table, const RawState& s, Link link, double lambda) {
    Objective out;
    for (const auto& o : table.observations()) {
        const double a = std::exp(s.u[o.benchmark]);
        const double r = link_value(link, a * (s.c[o.model] - s.d[o.benchmark])) - o.score;
        out.rss += r * r;
    }
    double reg = 0.0;
    for (double c : s.c) reg += c * c;
    for (double d : s.d) reg += d * d;
    for (double u : s.u) {
        const double e = std::exp(u) - 1.0;
        reg += e * e;
    }
    out.loss = out.rss + lambda * reg;
    return out;
}

// Levenberg-Marquardt on the stacked residual vector (data residuals and
// sqrt(lambda)-scaled penalty residuals). The capability block of J^T J is
// diagonal, so each step eliminates it and solves the small dense system over
// benchmark parameters (Schur complement).
class Solver {
public:
    Solver(const ScoreTable& table, Link link, double lambda, std::size_t anchor)
        : table_(table), link_(link), lambda_(lambda), anchor_(anchor) {
        M_ = table.models().size();
        B_ = table.benchmarks().size();
        zu_.assign(B_, -1);
        std::size_t next = B_;
        for (std::size_t b = 0; b < B_; ++b) {
            if (b != anchor_) zu_[b] = static_cast<int>(next++);
        }
        nz_ = next;
        by_model_.assign(M_, {});
        for (std::size_t i = 0; i < table.observations().size(); ++i) by_model_[table.observations()[i].model].push_back(i);
    }

    struct Outcome {
        RawState state;
        Objective objective;
        bool converged = false;
        int iterations = 0;
    };

    Outcome run(RawState s, int max_iterations, double tol) {
        Objective cur = evaluate(table_, s, link_, lambda_);
        double mu = -1.0, nu = 2.0;
        Outcome out;
        int iterations = 0;
        bool converged = false;

        std::vector<double> hcc(M_), gc(M_);
        std::vector<std::vector<std::pair<int, double>>> w(M_);
        Eigen::MatrixXd hzz(nz_, nz_);
        Eigen::VectorXd gz(nz_);

        while (iterations < max_iterations && !converged) {
            build(s, hcc, gc, w, hzz, gz);
            double gmax = 0.0;
            for (double g : gc) gmax = std::max(gmax, std::abs(g));
            gmax = std::max(gmax, gz.cwiseAbs().maxCoeff());
            if (gmax <= 1e-15 * std::max(1.0, cur.loss) || cur.loss < kAbsoluteLoss) {
                converged = true;
                break;
            }
            if (mu < 0.0) {
                double dmax = 0.0;
                for (double h : hcc) dmax = std::max(dmax, h);
                dmax = std::max(dmax, hzz.diagonal().maxCoeff());
                mu = 1e-3 * std::max(dmax, 1e-12);
            }
            bool accepted = false;
            while (!accepted && iterations < max_iterations) {
                ++iterations;
                RawState trial = s;
                double g_dot = 0.0, step_sq = 0.0;
                if (!solve_step(mu, hcc, gc, w, hzz, gz, s, trial, g_dot, step_sq)) {
                    mu *= nu;
                    nu *= 2.0;
                    continue;
                }
                const Objective next = evaluate(table_, trial, link_, lambda_);
                const double predicted = -g_dot + mu * step_sq;
                const double actual = cur.loss - next.loss;
                const double rho = predicted > 0.0 ? actual / predicted : -1.0;
                if (std::isfinite(next.loss) && actual > 0.0 && rho > 0.0) {
                    accepted = true;
                    const double rel = actual / std::max(cur.loss, std::numeric_limits<double>::min());
                    s = std::move(trial);
                    cur = next;
                    const double t = 2.0 * rho - 1.0;
                    mu *= std::max(1.0 / 3.0, 1.0 - t * t * t);
                    nu = 2.0;
                    if (rel < tol || cur.loss < kAbsoluteLoss) converged = true;
                } else {
                    mu *= nu;
                    nu *= 2.0;
                    if (mu > 1e30) {
                        // No descent possible at any damping: a numerical stationary point.
                        converged = true;
                        break;
                    }
                }
            }
        }
        out.state = std::move(s);
        out.objective = cur;
        out.converged = converged;
        out.iterations = iterations;
        return out;
    }

private:
    static constexpr double kAbsoluteLoss = 1e-25;

    void build(const RawState& s, std::vector<double>& hcc, std::vector<double>& gc,
               std::vector<std::vector<std::pair<int, double>>>& w, Eigen::MatrixXd& hzz, Eigen::VectorXd& gz) const {
        hzz.setZero();
        gz.setZero();
        const auto& obs = table_.observations();
        for (std::size_t m = 0; m < M_; ++m) {
            double h = lambda_, g = lambda_ * s.c[m];
            auto& row = w[m];
            row.clear();
            for (std::size_t i : by_model_[m]) {
                const auto& o = obs[i];
                const std::size_t b = o.benchmark;
                const double a = std::exp(s.u[b]);
                const double gap = s.c[m] - s.d[b];
                const double x = a * gap;
                const double v = link_value(link_, x);
                const double r = v - o.score;
                const double ds = link_slope(link_, x, v);
                const double jc = a * ds, jd = -a * ds, ju = gap * a * ds;
                h += jc * jc;
                g += jc * r;
                const int zd = static_cast<int>(b), zu = zu_[b];
                row.emplace_back(zd, jc * jd);
                hzz(zd, zd) += jd * jd;
                gz(zd) += jd * r;
                if (zu >= 0) {
                    row.emplace_back(zu, jc * ju);
                    hzz(zd, zu) += jd * ju;
                    hzz(zu, zd) += jd * ju;
                    hzz(zu, zu) += ju * ju;
                    gz(zu) += ju * r;
                }
            }
            hcc[m] = h;
            gc[m] = g;
        }
        for (std::size_t b = 0; b < B_; ++b) {
            hzz(b, b) += lambda_;
            gz(b) += lambda_ * s.d[b];
            if (zu_[b] >= 0) {
                const double a = std::exp(s.u[b]);
                hzz(zu_[b], zu_[b]) += lambda_ * a * a;
                gz(zu_[b]) += lambda_ * a * (a - 1.0);
            }
        }
    }

    bool solve_step(double mu, const std::vector<double>& hcc, const std::vector<double>& gc,
                    const std::vector<std::vector<std::pair<int, double>>>& w, const Eigen::MatrixXd& hzz,
                    const Eigen::VectorXd& gz, const RawState& s, RawState& trial, double& g_dot,
                    double& step_sq) const {
        Eigen::MatrixXd schur = hzz;
        schur.diagonal().array() += mu;
        Eigen::VectorXd rhs = -gz;
        for (std::size_t m = 0; m < M_; ++m) {
            const double inv = 1.0 / (hcc[m] + mu);
            const auto& row = w[m];
            for (const auto& [i, vi] : row) {
                rhs(i) += vi * gc[m] * inv;
                for (const auto& [j, vj] : row) schur(i, j) -= vi * vj * inv;
            }
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
        const Eigen::VectorXd dz = ldlt.solve(rhs);
        if (!dz.allFinite()) return false;
        g_dot = 0.0;
        step_sq = 0.0;
        for (std::size_t m = 0; m < M_; ++m) {
            double acc = -gc[m];
            for (const auto& [i, vi] : w[m]) acc -= vi * dz(i);
            const double dc = acc / (hcc[m] + mu);
            trial.c[m] = s.c[m] + dc;
            g_dot += gc[m] * dc;
            step_sq += dc * dc;
        }
        for (std::size_t b = 0; b < B_; ++b) {
            trial.d[b] = s.d[b] + dz(b);
            g_dot += gz(b) * dz(b);
            step_sq += dz(b) * dz(b);
            if (zu_[b] >= 0) {
                const double du = dz(zu_[b]);
                trial.u[b] = s.u[b] + du;
                g_dot += gz(zu_[b]) * du;
                step_sq += du * du;
            }
        }
        return true;
    }

    const ScoreTable& table_;
    Link link_;
    double lambda_;
    std::size_t anchor_;
    std::size_t M_ = 0, B_ = 0, nz_ = 0;
    std::vector<int> zu_;
    std::vector<std::vector<std::size_t>> by_model_;
};

inline StitchParams to_params(const ScoreTable& table, const RawState& s) {
    StitchParams p;
    for (std::size_t m = 0; m < table.models().size(); ++m) p.capability[table.models()[m].id] = s.c[m];
    for (std::size_t b = 0; b < table.benchmarks().size(); ++b) {
        p.difficulty[table.benchmarks()[b].id] = s.d[b];
        p.slope[table.benchmarks()[b].id] = std::exp(s.u[b]);
    }
    return p;
}

}  // namespace detail

inline std::size_t parameter_count(std::size_t models, std::size_t benchmarks) {
    return models + 2 * benchmarks - 2;
}

// Regularized least-squares fit of the score model. `warm_start` (gauged or
// not) seeds the optimizer; without it C = 0, D = 0, alpha = 1.
inline FitResult fit(const ScoreTable& table, const FitConfig& config, const GaugeSpec& gauge,
                     const std::optional<StitchParams>& warm_start = std::nullopt) {
    config.validate();
    gauge.validate();
    if (table.empty()) throw InsufficientDataError("fit: table has no records");

    std::string anchor_id;
    if (gauge.mode == GaugeSpec::Mode::benchmark_anchor) {
        anchor_id = *gauge.anchor_benchmark;
        if (!table.benchmark_index(anchor_id)) throw ConfigError("anchor benchmark '" + anchor_id + "' not in table");
    } else {
        for (const auto& [m, v] : gauge.anchor_models) {
            if (!table.model_index(m)) throw ConfigError("anchor model '" + m + "' not in table");
        }
        anchor_id = most_covered_benchmark(table);
    }
    const std::size_t anchor = *table.benchmark_index(anchor_id);

    detail::RawState init;
    init.c.assign(table.models().size(), 0.0);
    init.d.assign(table.benchmarks().size(), 0.0);
    init.u.assign(table.benchmarks().size(), 0.0);
    if (warm_start) {
        // Bring the start point into the optimizer frame (anchor slope 1).
        StitchParams start = *warm_start;
        if (auto it = start.slope.find(anchor_id); it != start.slope.end() && it->second > 0.0) {
            start = apply_affine(start, {it->second, 0.0});
        }
        for (std::size_t m = 0; m < table.models().size(); ++m) {
            if (auto it = start.capability.find(table.models()[m].id); it != start.capability.end()) init.c[m] = it->second;
        }
        for (std::size_t b = 0; b < table.benchmarks().size(); ++b) {
            const auto& id = table.benchmarks()[b].id;
            if (auto it = start.difficulty.find(id); it != start.difficulty.end()) init.d[b] = it->second;
            if (auto it = start.slope.find(id); it != start.slope.end() && it->second > 0.0 && b != anchor) {
                init.u[b] = std::log(it->second);
            }
        }
    }

    detail::Solver solver(table, config.link, config.l2_strength, anchor);
    auto outcome = solver.run(std::move(init), config.max_iterations, config.convergence_tol);

    FitResult result;
    result.raw = detail::to_params(table, outcome.state);
    result.raw.gauge = GaugeSpec::benchmark(anchor_id);
    result.to_gauged = gauge_transform(result.raw, gauge);
    result.params = apply_gauge(result.raw, gauge);
    result.rss = outcome.objective.rss;
    result.loss = outcome.objective.loss;
    result.n_obs = table.size();
    result.n_params = parameter_count(table.models().size(), table.benchmarks().size());
    result.converged = outcome.converged;
    result.iterations = outcome.iterations;
    result.link = config.link;
    result.l2_strength = config.l2_strength;
    result.internal_anchor = anchor_id;
    result.fingerprint = fingerprint_of(result.params, config.link, config.l2_strength);
    return result;
}

// ---------------------------------------------------------------------------
// Sensitivity error bars

struct BumpOffset {
    double delta = 0.0;
    bool capped = false;  // loss never reached the target within the search bound
};

// Smallest |delta| in [0, bound] along `direction` (+1 or -1) at which the
// loss reaches (1 + bump) * base_loss, by bisection.
inline BumpOffset loss_bump_offset(const std::function<double(double)>& loss_at, double base_loss, double bump,
                                   double bound, double direction) {
    if (bump <= 0.0) return {0.0, false};
    const double target = (1.0 + bump) * base_loss;
    if (loss_at(direction * bound) < target) return {bound, true};
    double lo = 0.0, hi = bound;
    for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (loss_at(direction * mid) >= target ? hi : lo) = mid;
    }
    return {0.5 * (lo + hi), false};
}

struct SensitivityInterval {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool capped = false;
};

struct SensitivityReport {
    std::map<std::string, SensitivityInterval> capability;
    std::map<std::string, SensitivityInterval> difficulty;
};

// Per-entity intervals: each capability (difficulty) is perturbed alone, other
// parameters fixed, until the total loss rises by loss_bump relative to the
// optimum. Computed in the optimizer frame and mapped through the gauge.
inline SensitivityReport sensitivity_errors(const FitResult& fit, const ScoreTable& table, double loss_bump = 0.05,
                                            double search_bound = 10.0) {
    if (!fit.converged) throw ValidationError("sensitivity_errors requires a converged fit");
    if (!(loss_bump >= 0.0)) throw ConfigError("loss_bump must be non-negative");
    const auto& raw = fit.raw;
    const double lambda = fit.l2_strength;
    const Link link = fit.link;
    const auto& obs = table.observations();

    std::vector<double> c(table.models().size()), d(table.benchmarks().size()), a(table.benchmarks().size());
    for (std::size_t m = 0; m < c.size(); ++m) c[m] = lookup(raw.capability, table.models()[m].id, "model");
    for (std::size_t b = 0; b < d.size(); ++b) {
        d[b] = lookup(raw.difficulty, table.benchmarks()[b].id, "benchmark");
        a[b] = lookup(raw.slope, table.benchmarks()[b].id, "benchmark");
    }
    std::vector<std::vector<std::size_t>> by_model(c.size()), by_bench(d.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        by_model[obs[i].model].push_back(i);
        by_bench[obs[i].benchmark].push_back(i);
    }
    const double base = fit.loss;
    const stats::Affine& t = fit.to_gauged;

    auto interval = [&](double value, const std::function<double(double)>& local) {
        const double local0 = local(0.0);
        auto loss_at = [&](double delta) { return base - local0 + local(delta); };
        const auto up = loss_bump_offset(loss_at, base, loss_bump, search_bound, +1.0);
        const auto down = loss_bump_offset(loss_at, base, loss_bump, search_bound, -1.0);
        return SensitivityInterval{t(value), t(value - down.delta), t(value + up.delta), up.capped || down.capped};
    };

    SensitivityReport report;
    for (std::size_t m = 0; m < c.size(); ++m) {
        auto local = [&](double delta) {
            const double cm = c[m] + delta;
            double s = lambda * cm * cm;
            for (std::size_t i : by_model[m]) {
                const auto& o = obs[i];
                const double r = link_value(link, a[o.benchmark] * (cm - d[o.benchmark])) - o.score;
                s += r * r;
            }
            return s;
        };
        report.capability[table.models()[m].id] = interval(c[m], local);
    }
    for (std::size_t b = 0; b < d.size(); ++b) {
        auto local = [&](double delta) {
            const double db = d[b] + delta;
            double s = lambda * db * db;
            for (std::size_t i : by_bench[b]) {
                const auto& o = obs[i];
                const double r = link_value(link, a[b] * (c[o.model] - db)) - o.score;
                s += r * r;
            }
            return s;
        };
        report.difficulty[table.benchmarks()[b].id] = interval(d[b], local);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct Residual {
    std::string model_id;
    std::string benchmark_id;
    double observed = 0.0;
    double predicted = 0.0;
    double residual = 0.0;  // observed - predicted
};

struct Diagnostics {
    double r2 = stats::nan;
    double mse = stats::nan;
    double rss = stats::nan;
    double aic = stats::nan;  // n ln(rss/n) + 2p
    double bic = stats::nan;  // n ln(rss/n) + p ln(n)
    bool information_criteria_reliable = true;  // false when n_obs <= n_params
    std::map<std::string, double> per_benchmark_r2;  // benchmarks with >= 3 scores
    std::vector<Residual> residuals;
    double ks_statistic = stats::nan;
    double ks_p_value = stats::nan;
};

inline Diagnostics diagnostics(const FitResult& fit, const ScoreTable& table) {
    Diagnostics out;
    std::vector<double> observed, predicted, resid;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_bench;
    for (const auto& r : table.records()) {
        const double p = predict_score(fit.params, r.model_id, r.benchmark_id, fit.link);
        out.residuals.push_back({r.model_id, r.benchmark_id, r.score, p, r.score - p});
        observed.push_back(r.score);
        predicted.push_back(p);
        resid.push_back(r.score - p);
        by_bench[r.benchmark_id].first.push_back(r.score);
        by_bench[r.benchmark_id].second.push_back(p);
    }
    const auto n = static_cast<double>(observed.size());
    double rss = 0.0;
    for (double e : resid) rss += e * e;
    out.rss = rss;
    out.mse = rss / n;
    out.r2 = stats::r_squared(observed, predicted);
    const auto p = static_cast<double>(fit.n_params);
    const double ll = n * std::log(rss / n);
    out.aic = ll + 2.0 * p;
    out.bic = ll + p * std::log(n);
    out.information_criteria_reliable = observed.size() > fit.n_params;
    for (const auto& [id, v] : by_bench) {
        if (v.first.size() >= 3) out.per_benchmark_r2[id] = stats::r_squared(v.first, v.second);
    }
    const auto ks = stats::ks_normal(resid);
    out.ks_statistic = ks.statistic;
    out.ks_p_value = ks.p_value;
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CrossValidation {
    std::vector<double> fold_mse;
    std::vector<double> fold_r2;  // NaN for folds with fewer than two held-out records
    std::vector<std::size_t> fold_size;
    double mean_mse = stats::nan;
    double pooled_mse = stats::nan;
    int partition_attempts = 0;
};

inline CrossValidation cross_validate(const ScoreTable& table, const FitConfig& config, const GaugeSpec& gauge,
                                      std::size_t folds = 10, std::uint64_t seed = 0, int max_attempts = 200) {
    if (folds < 2) throw ConfigError("cross_validate: folds must be at least 2");
    const std::size_t n = table.size();
    if (folds > n) throw PartitionError("cross_validate: more folds than records");
    const auto& obs = table.observations();

    Rng rng(seed);
    std::vector<std::size_t> assignment(n);
    std::string offender;
    int attempt = 0;
    for (; attempt < max_attempts; ++attempt) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t pos = 0; pos < n; ++pos) assignment[order[pos]] = pos % folds;
        // Every entity needs a training record in every fold: its records may
        // not all sit in one fold.
        offender.clear();
        std::vector<std::vector<std::size_t>> model_folds(table.models().size()), bench_folds(table.benchmarks().size());
        for (std::size_t i = 0; i < n; ++i) {
            model_folds[obs[i].model].push_back(assignment[i]);
            bench_folds[obs[i].benchmark].push_back(assignment[i]);
        }
        auto single_fold = [](const std::vector<std::size_t>& f) {
            return std::all_of(f.begin(), f.end(), [&](std::size_t x) { return x == f.front(); });
        };
        for (std::size_t m = 0; m < model_folds.size() && offender.empty(); ++m) {
            if (single_fold(model_folds[m])) offender = "model '" + table.models()[m].id + "'";
        }
        for (std::size_t b = 0; b < bench_folds.size() && offender.empty(); ++b) {
            if (single_fold(bench_folds[b])) offender = "benchmark '" + table.benchmarks()[b].id + "'";
        }
        if (offender.empty()) break;
    }
    if (!offender.empty()) {
        throw PartitionError("cross_validate: no valid partition after " + std::to_string(max_attempts) +
                             " attempts; " + offender + " would lose all training records");
    }

    CrossValidation cv;
    cv.partition_attempts = attempt + 1;
    double pooled = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<ScoreRecord> train, test;
        for (std::size_t i = 0; i < n; ++i) (assignment[i] == f ? test : train).push_back(table.records()[i]);
        const auto train_table = ScoreTable::from_records(std::move(train));
        const FitResult fr = fit(train_table, config, gauge);
        std::vector<double> y, yhat;
        double sse = 0.0;
        for (const auto& r : test) {
            const double p = predict_score(fr.params, r.model_id, r.benchmark_id, config.link);
            y.push_back(r.score);
            yhat.push_back(p);
            sse += (r.score - p) * (r.score - p);
        }
        pooled += sse;
        cv.fold_mse.push_back(sse / static_cast<double>(test.size()));
        cv.fold_r2.push_back(test.size() >= 2 ? stats::r_squared(y, yhat) : stats::nan);
        cv.fold_size.push_back(test.size());
    }
    cv.mean_mse = stats::mean(cv.fold_mse);
    cv.pooled_mse = pooled / static_cast<double>(n);
    return cv;
}

}  // namespace benchstitch
