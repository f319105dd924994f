#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sfclab {

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
    double sd = 0.0;
    double se = 0.0;  // standard error of the mean
};

Summary summarize(std::span<const double> xs);

double sample_mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);
double sample_covariance(std::span<const double> xs, std::span<const double> ys);

// Pearson correlation, clamped to [-1, 1]. Returns 0 and sets *degenerate
// (when given) if either variance underflows to ~0.
double sample_correlation(std::span<const double> xs, std::span<const double> ys,
                          bool* degenerate = nullptr);

double root_mean_square(std::span<const double> xs);

// Ordinary least squares y = a + b x with a 95% confidence interval on the
// slope (t quantile at n-2 degrees of freedom).
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se_slope = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;
};

SlopeFit fit_line(std::span<const double> x, std::span<const double> y);
SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y);

// Bootstrap standard error of a statistic computed from per-path values.
// The callback receives a resampled index set (size n); resampling is
// deterministic in (seed). At least 200 replicates are used.
double bootstrap_se(std::size_t n, const std::function<double(std::span<const std::size_t>)>& stat,
                    std::uint64_t seed, std::size_t replicates = 200);

// Convenience: bootstrap SE of a statistic of one or two aligned series.
double bootstrap_se_stat(std::span<const double> xs,
                         const std::function<double(std::span<const double>)>& stat,
                         std::uint64_t seed, std::size_t replicates = 200);
double bootstrap_se_stat2(std::span<const double> xs, std::span<const double> ys,
                          const std::function<double(std::span<const double>, std::span<const double>)>& stat,
                          std::uint64_t seed, std::size_t replicates = 200);

}  // namespace sfclab
