#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfclab/rng.hpp"

namespace sfclab {

// Geometric Brownian motion dx/x = mu dt + sigma dW plus the risk-free rate
// of the accompanying bond.
struct GbmParams {
    double x0 = 100.0;   // initial stock price
    double mu = 0.10;    // percentage drift, per year
    double sigma = 0.2;  // percentage volatility, per sqrt(year)
    double r = 0.05;     // risk-free rate, per year

    void validate() const;
};

// Uniform grid of n_steps+1 instants on [t0, T].
struct TimeGrid {
    double t0 = 0.0;
    double T = 1.0;
    std::size_t n_steps = 1;
    std::vector<double> times;

    double dt() const { return (T - t0) / static_cast<double>(n_steps); }
};

TimeGrid build_time_grid(double t0, double T, std::size_t n_steps);

// Simulated GBM paths with their Wiener increments. prices is
// n_paths x (n_steps+1) row-major, wiener is n_paths x n_steps.
// Immutable after construction; safe to share across threads.
struct PathSet {
    GbmParams params;
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> prices;
    std::vector<double> wiener;

    double price(std::size_t path, std::size_t node) const {
        return prices[path * (grid.n_steps + 1) + node];
    }
    double dw(std::size_t path, std::size_t step) const {
        return wiener[path * grid.n_steps + step];
    }
    std::span<const double> path_prices(std::size_t path) const {
        return {prices.data() + path * (grid.n_steps + 1), grid.n_steps + 1};
    }
    std::span<const double> path_wiener(std::size_t path) const {
        return {wiener.data() + path * grid.n_steps, grid.n_steps};
    }
};

// Log-exact stepping: x_{i+1} = x_i * exp((mu - sigma^2/2) dt + sigma dW_i),
// so the terminal distribution is exact at every grid node. Path p draws its
// normals from stream (seed, p); results do not depend on thread count.
PathSet simulate_paths(const GbmParams& params, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed, unsigned n_threads = 0);

// Streaming per-path walk for operations that must not materialize a PathSet.
// Visits nodes in order; identical numbers to simulate_paths for the same
// (params, grid, seed, path).
class GbmPathWalker {
public:
    GbmPathWalker(const GbmParams& params, const TimeGrid& grid, std::uint64_t seed,
                  std::size_t path)
        : stream_(seed, path), params_(params), dt_(grid.dt()), sqrt_dt_(std::sqrt(grid.dt())),
          drift_((params.mu - 0.5 * params.sigma * params.sigma) * grid.dt()), x_(params.x0) {}

    // Advances one step; returns the Wiener increment used.
    double step(std::size_t i) {
        const double dw = sqrt_dt_ * stream_.normal(i);
        x_ *= std::exp(drift_ + params_.sigma * dw);
        return dw;
    }
    double x() const { return x_; }

private:
    RandomStream stream_;
    GbmParams params_;
    double dt_, sqrt_dt_, drift_, x_;
};

struct QuadraticVariation {
    std::vector<double> realized;     // per path: sum of (dx)^2
    std::vector<double> compensator;  // per path: sum of sigma^2 x^2 dt (left point)
};

QuadraticVariation quadratic_variation(const PathSet& paths);

// CSV dump with header `path,step,time,price,dW`; one row per (path, step).
void dump_paths_csv(const PathSet& paths, const std::string& file);

}  // namespace sfclab
