#include "sfclab/market_model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "sfclab/parallel.hpp"

namespace sfclab {

namespace {
// Guards simulate_paths against absurd allocations (each double is 8 bytes;
// prices + wiener together stay under ~2 GB).
constexpr std::size_t kMaxDoubles = 250'000'000;
}  // namespace

void GbmParams::validate() const {
    if (!std::isfinite(x0) || !std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(r))
        throw std::invalid_argument("GbmParams: all parameters must be finite");
    if (!(x0 > 0.0)) throw std::invalid_argument("GbmParams: x0 must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("GbmParams: sigma must be positive");
}

TimeGrid build_time_grid(double t0, double T, std::size_t n_steps) {
    if (!std::isfinite(t0) || !std::isfinite(T))
        throw std::invalid_argument("build_time_grid: bounds must be finite");
    if (!(T > t0)) throw std::invalid_argument("build_time_grid: need T > t0");
    if (n_steps == 0) throw std::invalid_argument("build_time_grid: need n_steps >= 1");
    TimeGrid grid;
    grid.t0 = t0;
    grid.T = T;
    grid.n_steps = n_steps;
    grid.times.resize(n_steps + 1);
    const double dt = (T - t0) / static_cast<double>(n_steps);
    for (std::size_t i = 0; i <= n_steps; ++i) grid.times[i] = t0 + static_cast<double>(i) * dt;
    return grid;
}

PathSet simulate_paths(const GbmParams& params, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed, unsigned n_threads) {
    params.validate();
    if (grid.times.size() != grid.n_steps + 1)
        throw std::invalid_argument("simulate_paths: malformed time grid");
    if (n_paths == 0) throw std::invalid_argument("simulate_paths: need n_paths >= 1");
    const std::size_t doubles = n_paths * (2 * grid.n_steps + 1);
    if (doubles > kMaxDoubles)
        throw std::invalid_argument("simulate_paths: requested path set exceeds the memory budget");

    PathSet out;
    out.params = params;
    out.grid = grid;
    out.n_paths = n_paths;
    out.seed = seed;
    out.prices.resize(n_paths * (grid.n_steps + 1));
    out.wiener.resize(n_paths * grid.n_steps);

    const std::size_t n = grid.n_steps;
    parallel_for(
        n_paths,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                GbmPathWalker walker(params, grid, seed, p);
                double* px = out.prices.data() + p * (n + 1);
                double* pw = out.wiener.data() + p * n;
                px[0] = params.x0;
                for (std::size_t i = 0; i < n; ++i) {
                    pw[i] = walker.step(i);
                    px[i + 1] = walker.x();
                }
            }
        },
        n_threads);
    return out;
}

QuadraticVariation quadratic_variation(const PathSet& paths) {
    if (paths.n_paths == 0 || paths.prices.empty())
        throw std::invalid_argument("quadratic_variation: empty path set");
    const std::size_t n = paths.grid.n_steps;
    const double dt = paths.grid.dt();
    const double s2 = paths.params.sigma * paths.params.sigma;
    QuadraticVariation qv;
    qv.realized.resize(paths.n_paths);
    qv.compensator.resize(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const auto px = paths.path_prices(p);
        double rv = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = px[i + 1] - px[i];
            rv += dx * dx;
            comp += s2 * px[i] * px[i] * dt;
        }
        qv.realized[p] = rv;
        qv.compensator[p] = comp;
    }
    return qv;
}

void dump_paths_csv(const PathSet& paths, const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("dump_paths_csv: cannot open " + file);
    std::fputs("path,step,time,price,dW\n", f);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        for (std::size_t i = 0; i < paths.grid.n_steps; ++i) {
            std::fprintf(f, "%zu,%zu,%.17g,%.17g,%.17g\n", p, i, paths.grid.times[i],
                         paths.price(p, i), paths.dw(p, i));
        }
        std::fprintf(f, "%zu,%zu,%.17g,%.17g,\n", p, paths.grid.n_steps,
                     paths.grid.times[paths.grid.n_steps], paths.price(p, paths.grid.n_steps));
    }
    std::fclose(f);
}

}  // namespace sfclab
