#include "sfclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sfclab/rng.hpp"

namespace sfclab {

namespace {

// two-sided 95% t quantiles for df = 1..30; 1.96 beyond.
constexpr double kT95[30] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                             2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                             2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                             2.060,  2.056, 2.052, 2.048, 2.045, 2.042};

double t95(std::size_t df) {
    if (df == 0) return 12.706;
    if (df <= 30) return kT95[df - 1];
    return 1.96;
}

}  // namespace

double sample_mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("sample_mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least two values");
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) {
        const double d = x - m;
        s += d * d;
    }
    return s / static_cast<double>(xs.size() - 1);
}

Summary summarize(std::span<const double> xs) {
    Summary out;
    out.n = xs.size();
    out.mean = sample_mean(xs);
    out.var = xs.size() >= 2 ? sample_variance(xs) : 0.0;
    out.sd = std::sqrt(out.var);
    out.se = out.sd / std::sqrt(static_cast<double>(xs.size()));
    return out;
}

double sample_covariance(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("sample_covariance: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("sample_covariance: need at least two values");
    const double mx = sample_mean(xs);
    const double my = sample_mean(ys);
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (xs[i] - mx) * (ys[i] - my);
    return s / static_cast<double>(xs.size() - 1);
}

double sample_correlation(std::span<const double> xs, std::span<const double> ys, bool* degenerate) {
    const double vx = sample_variance(xs);
    const double vy = sample_variance(ys);
    if (degenerate) *degenerate = false;
    if (!(vx > 0.0) || !(vy > 0.0)) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const double c = sample_covariance(xs, ys) / std::sqrt(vx * vy);
    return std::clamp(c, -1.0, 1.0);
}

double root_mean_square(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("root_mean_square: empty input");
    double s = 0.0;
    for (double x : xs) s += x * x;
    return std::sqrt(s / static_cast<double>(xs.size()));
}

SlopeFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_line: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw std::invalid_argument("fit_line: need at least three points");
    const double mx = sample_mean(x);
    const double my = sample_mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: degenerate abscissa");
    SlopeFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    const double sigma2 = sse / static_cast<double>(n - 2);
    fit.se_slope = std::sqrt(sigma2 / sxx);
    const double half = t95(n - 2) * fit.se_slope;
    fit.ci_lo = fit.slope - half;
    fit.ci_hi = fit.slope + half;
    return fit;
}

SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("fit_loglog: inputs must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_line(lx, ly);
}

double bootstrap_se(std::size_t n, const std::function<double(std::span<const std::size_t>)>& stat,
                    std::uint64_t seed, std::size_t replicates) {
    if (n < 2) throw std::invalid_argument("bootstrap_se: need at least two observations");
    replicates = std::max<std::size_t>(replicates, 200);
    std::vector<double> reps(replicates);
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < replicates; ++b) {
        RandomStream rs(derive_seed(seed, 0xB007u), b);
        for (std::size_t i = 0; i < n; ++i) idx[i] = rs.index(i, n);
        reps[b] = stat(idx);
    }
    return std::sqrt(sample_variance(reps));
}

double bootstrap_se_stat(std::span<const double> xs,
                         const std::function<double(std::span<const double>)>& stat,
                         std::uint64_t seed, std::size_t replicates) {
    std::vector<double> buf(xs.size());
    return bootstrap_se(
        xs.size(),
        [&](std::span<const std::size_t> idx) {
            for (std::size_t i = 0; i < idx.size(); ++i) buf[i] = xs[idx[i]];
            return stat(buf);
        },
        seed, replicates);
}

double bootstrap_se_stat2(std::span<const double> xs, std::span<const double> ys,
                          const std::function<double(std::span<const double>, std::span<const double>)>& stat,
                          std::uint64_t seed, std::size_t replicates) {
    if (xs.size() != ys.size()) throw std::invalid_argument("bootstrap_se_stat2: length mismatch");
    std::vector<double> bx(xs.size()), by(ys.size());
    return bootstrap_se(
        xs.size(),
        [&](std::span<const std::size_t> idx) {
            for (std::size_t i = 0; i < idx.size(); ++i) {
                bx[i] = xs[idx[i]];
                by[i] = ys[idx[i]];
            }
            return stat(bx, by);
        },
        seed, replicates);
}

}  // namespace sfclab
