#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sfclab/bs_analytics.hpp"
#include "sfclab/market_model.hpp"
#include "sfclab/stats.hpp"

namespace sfclab {

// Drift and diffusion integrands of the holding process
// theta_t = -w1_t - beta_t, so that d(theta) = kappa dt + lambda dW:
//   kappa  = [(x-b)(w12 + w111 sigma^2 x^2 / 2 + w11 x mu) + w11 sigma^2 x^2] / b
//   lambda = ((x-b)/b) w11 x sigma
// mu is the drift of the simulating measure, not r.
struct KappaLambda {
    double kappa = 0.0;
    double lambda = 0.0;
};

KappaLambda kappa_lambda(double x, double t, const OptionSpec& spec, double mu);

namespace detail {
// Hot-path evaluator shared by kappa_lambda and the path integrators; only
// pdf-based Greeks, no normal CDF calls. tau must be positive.
inline KappaLambda kl_eval(double x, double tau, const OptionSpec& spec, double mu) {
    const double sqrt_tau = std::sqrt(tau);
    const double srt = spec.sigma * sqrt_tau;
    const double d1 = (std::log(x / spec.k) + (spec.r + 0.5 * spec.sigma * spec.sigma) * tau) / srt;
    const double d2 = d1 - srt;
    const double b = std::exp(-spec.r * tau) * spec.k;
    const double pdf = norm_pdf(d1);
    const double w11 = pdf / (x * srt);
    const double w111 = -(w11 / x) * (d1 / srt + 1.0);
    const double w12 = -pdf * (2.0 * spec.r * tau - d2 * srt) / (2.0 * spec.sigma * tau * sqrt_tau);
    const double s2x2 = spec.sigma * spec.sigma * x * x;
    KappaLambda out;
    out.lambda = ((x - b) / b) * w11 * x * spec.sigma;
    out.kappa = ((x - b) * (w12 + 0.5 * w111 * s2x2 + w11 * x * mu) + w11 * s2x2) / b;
    return out;
}
}  // namespace detail

// theta at a node, terminal evaluation clamped at tau_floor.
double theta_value(double x, double t, const OptionSpec& spec, double tau_floor = 1e-8);

// Full per-path series; for diagnostics and dumps, not for large ensembles.
struct DecompositionSeries {
    std::vector<double> kappa;   // nodes 0..n-1 (left points)
    std::vector<double> lambda;  // nodes 0..n-1
    std::vector<double> theta;   // nodes 0..n
    double i_kappa = 0.0;        // left-point Riemann sum of kappa dt
    double i_lambda = 0.0;       // left-point Ito sum of lambda dW
    double defect = 0.0;         // theta_T - theta_0 - i_kappa - i_lambda
};

DecompositionSeries decompose_path(const PathSet& paths, std::size_t path, const OptionSpec& spec);

// Segment integrals per path, split at t1 (a grid node): head = [t0, t1),
// tail = [t1, T). With t1 = t0 the head is empty.
struct DecompositionIntegrals {
    double i_kappa_head = 0.0;
    double i_lambda_head = 0.0;
    double i_kappa_tail = 0.0;
    double i_lambda_tail = 0.0;
    double theta0 = 0.0;
    double theta1 = 0.0;  // at the split node
    double thetaT = 0.0;
    double defect = 0.0;
    double x_T = 0.0;
};

// Node index of t1 on the grid; throws if t1 is not a grid instant.
std::size_t split_index(const TimeGrid& grid, double t1);

std::vector<DecompositionIntegrals> integrate_decomposition(const PathSet& paths,
                                                            const OptionSpec& spec, double t1);

// Streaming variant for grids too large to materialize; same numbers as
// integrate_decomposition over simulate_paths with the same seed.
std::vector<DecompositionIntegrals> integrate_decomposition_streaming(
    const GbmParams& params, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
    const OptionSpec& spec, double t1);

// One row of the ensemble statistics table.
struct StatRow {
    std::string quantity;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::string conditioning;
};

// Sample covariances, variances and the tail correlation of the segment
// integrals, all estimated across paths started from t0 (so conditioned on
// F_t0 only). Standard errors are bootstrap (>= 200 resamples).
std::vector<StatRow> ensemble_statistics(const std::vector<DecompositionIntegrals>& recs,
                                         std::uint64_t seed);

// Correlation of the tail integrals conditional on F_t1, realized by
// restarting n_paths fresh paths from the fixed state (t1, x1).
struct ConditionalCorrelation {
    double correlation = 0.0;
    double std_error = 0.0;  // bootstrap
    bool degenerate = false;
    double theta_t1 = 0.0;
    double closure_rms = 0.0;  // RMS of i_kappa + i_lambda + theta_t1
    Summary i_kappa;
    Summary i_lambda;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
};

ConditionalCorrelation conditional_correlation(double x1, double t1, const OptionSpec& spec,
                                               double mu, std::size_t n_paths,
                                               std::size_t n_steps, std::uint64_t seed);

}  // namespace sfclab
