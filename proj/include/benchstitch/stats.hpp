#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "benchstitch/error.hpp"

namespace benchstitch::stats {

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct Interval {
    double lo = nan;
    double hi = nan;
};

inline double student_t_quantile(double p, double df) {
    return boost::math::quantile(boost::math::students_t(df), p);
}

inline double normal_cdf(double z) {
    return boost::math::cdf(boost::math::normal(0.0, 1.0), z);
}

inline double mean(std::span<const double> v) {
    if (v.empty()) return nan;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); zero for fewer than two values.
inline double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Linear-interpolated quantile (the "type 7" definition).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return nan;
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double r_squared(std::span<const double> observed, std::span<const double> predicted) {
    const double m = mean(observed);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        ss_res += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
        ss_tot += (observed[i] - m) * (observed[i] - m);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : nan;
    return 1.0 - ss_res / ss_tot;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Simple OLS y = intercept + slope * x with the usual standard errors.
struct LineFit {
    double slope = nan;
    double intercept = nan;
    double slope_se = nan;
    std::size_t n = 0;
    double x_mean = nan;
    double y_mean = nan;
    double sxx = nan;
    double ss_res = nan;
    double ss_tot = nan;
    double residual_std = nan;  // sqrt(ss_res / (n - 2)); NaN when n == 2

    double r2() const { return ss_tot == 0.0 ? (ss_res == 0.0 ? 1.0 : nan) : 1.0 - ss_res / ss_tot; }
    double predict(double x) const { return y_mean + slope * (x - x_mean); }

    Interval slope_ci(double level = 0.95) const {
        if (n < 3) return {};
        const double q = student_t_quantile(0.5 + level / 2.0, static_cast<double>(n - 2));
        return {slope - q * slope_se, slope + q * slope_se};
    }
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("fit_line: x and y differ in length");
    if (x.size() < 2) throw InsufficientDataError("fit_line: need at least 2 points");
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    if (*xmin == *xmax) throw SingularError("fit_line: zero variance in the regressor");
    LineFit f;
    f.n = x.size();
    f.x_mean = mean(x);
    f.y_mean = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - f.x_mean, dy = y[i] - f.y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw SingularError("fit_line: zero variance in the regressor");
    f.sxx = sxx;
    f.slope = sxy / sxx;
    f.intercept = f.y_mean - f.slope * f.x_mean;
    f.ss_tot = syy;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.predict(x[i]);
        ss_res += r * r;
    }
    f.ss_res = ss_res;
    if (f.n > 2) {
        f.residual_std = std::sqrt(ss_res / static_cast<double>(f.n - 2));
        f.slope_se = f.residual_std / std::sqrt(sxx);
    }
    return f;
}

// Least-squares affine map y ~ scale * x + shift.
struct Affine {
    double scale = 1.0;
    double shift = 0.0;
    double operator()(double x) const { return scale * x + shift; }
};

inline Affine fit_affine(std::span<const double> x, std::span<const double> y) {
    if (x.size() == 1) return {1.0, y[0] - x[0]};
    const LineFit f = fit_line(x, y);
    return {f.slope, f.intercept};
}

// Multiple regression with intercept column supplied by the caller.
struct OlsResult {
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::MatrixXd cov;
    double ss_res = nan;
    double sigma = nan;
    std::size_t df = 0;
    double condition = nan;  // 2-norm condition of the column-normalized design
};

inline double column_normalized_condition(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Xn = X;
    for (Eigen::Index j = 0; j < Xn.cols(); ++j) {
        const double norm = Xn.col(j).norm();
        if (norm == 0.0) return std::numeric_limits<double>::infinity();
        Xn.col(j) /= norm;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xn);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / s(s.size() - 1);
}

inline OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double max_condition = 1e10) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (n <= p) throw InsufficientDataError("ols: need more observations than regressors");
    OlsResult r;
    r.condition = column_normalized_condition(X);
    if (!(r.condition < max_condition)) {
        throw SingularError("ols: collinear regressors (condition number " + std::to_string(r.condition) + ")");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    r.coef = qr.solve(y);
    const Eigen::VectorXd resid = y - X * r.coef;
    r.ss_res = resid.squaredNorm();
    r.df = n - p;
    r.sigma = std::sqrt(r.ss_res / static_cast<double>(r.df));
    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
    r.cov = r.sigma * r.sigma * xtx_inv;
    r.se = r.cov.diagonal().cwiseSqrt();
    return r;
}

// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
    if (lambda < 1e-3) return 1.0;
    if (lambda < 1.18) {
        // Small-lambda form converges faster here.
        const double c = std::sqrt(2.0 * M_PI) / lambda;
        const double w = M_PI * M_PI / (8.0 * lambda * lambda);
        double cdf = 0.0;
        for (int k = 1; k <= 50; k += 2) cdf += std::exp(-static_cast<double>(k * k) * w);
        return std::clamp(1.0 - c * cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = nan;
    double p_value = nan;
};

// One-sample KS test of standardized values against N(0,1). Mean and sd are
// estimated from the sample; the p-value uses Stephens' finite-n correction.
inline KsResult ks_normal(std::span<const double> values) {
    KsResult out;
    const std::size_t n = values.size();
    if (n < 2) return out;
    const double m = mean(values);
    const double sd = stddev(values);
    if (!(sd > 0.0)) return out;
    std::vector<double> z(values.begin(), values.end());
    for (double& v : z) v = (v - m) / sd;
    std::sort(z.begin(), z.end());
    double d = 0.0;
    const auto nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = normal_cdf(z[i]);
        d = std::max({d, static_cast<double>(i + 1) / nn - f, f - static_cast<double>(i) / nn});
    }
    out.statistic = d;
    const double rn = std::sqrt(nn);
    out.p_value = kolmogorov_q((rn + 0.12 + 0.11 / rn) * d);
    return out;
}

// Exact (Clopper-Pearson) binomial interval.
inline Interval clopper_pearson(std::size_t successes, std::size_t trials, double level = 0.95) {
    if (trials == 0) return {};
    const double alpha = 1.0 - level;
    const auto k = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    Interval ci;
    ci.lo = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(k, n - k + 1), alpha / 2);
    ci.hi = successes == trials ? 1.0
                                : boost::math::quantile(boost::math::beta_distribution<>(k + 1, n - k), 1 - alpha / 2);
    return ci;
}

// Permutation p-value with the +1 correction, so it is never zero.
inline double permutation_p_value(double observed, std::span<const double> null_draws) {
    std::size_t at_least = 0;
    for (double v : null_draws) at_least += (v >= observed) ? 1 : 0;
    return static_cast<double>(at_least + 1) / static_cast<double>(null_draws.size() + 1);
}

}  // namespace benchstitch::stats
