#include "sfclab/decomposition_lab.hpp"

#include <algorithm>
#include <stdexcept>

#include "sfclab/parallel.hpp"

namespace sfclab {

namespace {

void check_grid(const TimeGrid& grid, const OptionSpec& spec) {
    spec.validate();
    if (std::abs(grid.T - spec.T) > 1e-12 * std::max(1.0, std::abs(spec.T)))
        throw std::invalid_argument("decomposition_lab: grid terminal time must equal the option maturity");
}

// integrates one path given a node visitor; x_at(i) must be monotone in calls
template <typename PriceAt>
DecompositionIntegrals integrate_one(const TimeGrid& grid, const OptionSpec& spec, double mu,
                                     std::size_t split, PriceAt&& x_at,
                                     const double* dw, std::size_t dw_stride) {
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    DecompositionIntegrals rec;
    double x0 = 0.0, x1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = x_at(i);
        if (i == 0) x0 = x;
        if (i == split) x1 = x;
        const double tau = spec.T - grid.times[i];
        const KappaLambda kl = detail::kl_eval(x, tau, spec, mu);
        const double dwi = dw[i * dw_stride];
        if (i < split) {
            rec.i_kappa_head += kl.kappa * dt;
            rec.i_lambda_head += kl.lambda * dwi;
        } else {
            rec.i_kappa_tail += kl.kappa * dt;
            rec.i_lambda_tail += kl.lambda * dwi;
        }
    }
    const double xT = x_at(n);
    if (split == n) x1 = xT;
    rec.x_T = xT;
    rec.theta0 = theta_value(x0, grid.times[0], spec);
    rec.theta1 = theta_value(x1, grid.times[split], spec);
    rec.thetaT = theta_value(xT, grid.times[n], spec);
    rec.defect = rec.thetaT - rec.theta0 -
                 (rec.i_kappa_head + rec.i_kappa_tail + rec.i_lambda_head + rec.i_lambda_tail);
    return rec;
}

double covariance_of(std::span<const std::size_t> idx, const std::vector<double>& xs,
                     const std::vector<double>& ys) {
    double mx = 0.0, my = 0.0;
    for (auto i : idx) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double acc = 0.0;
    for (auto i : idx) acc += (xs[i] - mx) * (ys[i] - my);
    return acc / static_cast<double>(idx.size() - 1);
}

}  // namespace

KappaLambda kappa_lambda(double x, double t, const OptionSpec& spec, double mu) {
    spec.validate();
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::invalid_argument("kappa_lambda: price must be positive and finite");
    if (!std::isfinite(mu)) throw std::invalid_argument("kappa_lambda: drift must be finite");
    const double tau = spec.T - t;
    if (!(tau > 0.0))
        throw std::invalid_argument("kappa_lambda: needs strictly positive time to maturity");
    return detail::kl_eval(x, tau, spec, mu);
}

double theta_value(double x, double t, const OptionSpec& spec, double tau_floor) {
    const Greeks g = greeks_clamped(x, t, spec, tau_floor);
    return -g.w1 - g.beta;
}

DecompositionSeries decompose_path(const PathSet& paths, std::size_t path, const OptionSpec& spec) {
    check_grid(paths.grid, spec);
    if (path >= paths.n_paths)
        throw std::invalid_argument("decompose_path: path index out of range");
    const std::size_t n = paths.grid.n_steps;
    const double dt = paths.grid.dt();
    const double mu = paths.params.mu;

    DecompositionSeries out;
    out.kappa.resize(n);
    out.lambda.resize(n);
    out.theta.resize(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = paths.price(path, i);
        const KappaLambda kl = detail::kl_eval(x, spec.T - paths.grid.times[i], spec, mu);
        out.kappa[i] = kl.kappa;
        out.lambda[i] = kl.lambda;
        out.theta[i] = theta_value(x, paths.grid.times[i], spec);
        out.i_kappa += kl.kappa * dt;
        out.i_lambda += kl.lambda * paths.dw(path, i);
    }
    out.theta[n] = theta_value(paths.price(path, n), paths.grid.times[n], spec);
    out.defect = out.theta[n] - out.theta[0] - out.i_kappa - out.i_lambda;
    return out;
}

std::size_t split_index(const TimeGrid& grid, double t1) {
    const double dt = grid.dt();
    for (std::size_t i = 0; i < grid.times.size(); ++i)
        if (std::abs(grid.times[i] - t1) <= 1e-9 * std::max(1.0, dt)) return i;
    throw std::invalid_argument("split time t1 is not a grid instant");
}

std::vector<DecompositionIntegrals> integrate_decomposition(const PathSet& paths,
                                                            const OptionSpec& spec, double t1) {
    check_grid(paths.grid, spec);
    const std::size_t split = split_index(paths.grid, t1);
    std::vector<DecompositionIntegrals> recs(paths.n_paths);
    parallel_for(paths.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            recs[p] = integrate_one(
                paths.grid, spec, paths.params.mu, split,
                [&](std::size_t i) { return paths.price(p, i); },
                paths.wiener.data() + p * paths.grid.n_steps, 1);
        }
    });
    return recs;
}

std::vector<DecompositionIntegrals> integrate_decomposition_streaming(
    const GbmParams& params, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
    const OptionSpec& spec, double t1) {
    check_grid(grid, spec);
    params.validate();
    if (n_paths == 0)
        throw std::invalid_argument("integrate_decomposition_streaming: need at least one path");
    const std::size_t split = split_index(grid, t1);
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();

    std::vector<DecompositionIntegrals> recs(n_paths);
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            GbmPathWalker walker(params, grid, seed, p);
            DecompositionIntegrals rec;
            double x = params.x0;
            rec.theta0 = theta_value(x, grid.times[0], spec);
            for (std::size_t i = 0; i < n; ++i) {
                if (i == split) rec.theta1 = theta_value(x, grid.times[i], spec);
                const KappaLambda kl = detail::kl_eval(x, spec.T - grid.times[i], spec, params.mu);
                const double dwi = walker.step(i);
                if (i < split) {
                    rec.i_kappa_head += kl.kappa * dt;
                    rec.i_lambda_head += kl.lambda * dwi;
                } else {
                    rec.i_kappa_tail += kl.kappa * dt;
                    rec.i_lambda_tail += kl.lambda * dwi;
                }
                x = walker.x();
            }
            rec.x_T = x;
            if (split == n) rec.theta1 = theta_value(x, grid.times[n], spec);
            rec.thetaT = theta_value(x, grid.times[n], spec);
            rec.defect = rec.thetaT - rec.theta0 -
                         (rec.i_kappa_head + rec.i_kappa_tail + rec.i_lambda_head + rec.i_lambda_tail);
            recs[p] = rec;
        }
    });
    return recs;
}

std::vector<StatRow> ensemble_statistics(const std::vector<DecompositionIntegrals>& recs,
                                         std::uint64_t seed) {
    if (recs.size() < 3)
        throw std::invalid_argument("ensemble_statistics: need at least 3 paths");
    const std::size_t n = recs.size();

    std::vector<double> kh(n), lh(n), kt(n), lt(n), head_sum(n);
    for (std::size_t i = 0; i < n; ++i) {
        kh[i] = recs[i].i_kappa_head;
        lh[i] = recs[i].i_lambda_head;
        kt[i] = recs[i].i_kappa_tail;
        lt[i] = recs[i].i_lambda_tail;
        head_sum[i] = kh[i] + lh[i];
    }

    std::vector<StatRow> rows;
    std::uint64_t tag = 0;
    auto add_cov = [&](const std::string& name, const std::vector<double>& a,
                       const std::vector<double>& b) {
        StatRow row;
        row.quantity = name;
        row.estimate = sample_covariance(a, b);
        row.std_error = bootstrap_se(
            n, [&](std::span<const std::size_t> idx) { return covariance_of(idx, a, b); },
            derive_seed(seed, 0xC0F0 + tag));
        row.n_paths = n;
        row.conditioning = "F_t0";
        rows.push_back(row);
        ++tag;
    };
    auto add_var = [&](const std::string& name, const std::vector<double>& a) { add_cov(name, a, a); };

    add_cov("cov(int_kappa_head, int_kappa_head + int_lambda_head)", kh, head_sum);
    add_cov("cov(int_kappa_head, int_kappa_tail)", kh, kt);

    {
        StatRow row;
        row.quantity = "cor(int_kappa_tail, int_lambda_tail)";
        bool degenerate = false;
        row.estimate = sample_correlation(kt, lt, &degenerate);
        row.std_error = bootstrap_se_stat2(
            kt, lt,
            [](std::span<const double> a, std::span<const double> b) {
                return sample_correlation(a, b);
            },
            derive_seed(seed, 0xC0F0 + tag));
        ++tag;
        row.n_paths = n;
        row.conditioning = degenerate ? "F_t0 (degenerate)" : "F_t0";
        rows.push_back(row);
    }

    add_var("var(int_kappa_head)", kh);
    add_var("var(int_lambda_head)", lh);
    add_var("var(int_kappa_tail)", kt);
    add_var("var(int_lambda_tail)", lt);
    add_var("var(int_kappa_head + int_lambda_head)", head_sum);
    return rows;
}

ConditionalCorrelation conditional_correlation(double x1, double t1, const OptionSpec& spec,
                                               double mu, std::size_t n_paths,
                                               std::size_t n_steps, std::uint64_t seed) {
    spec.validate();
    if (!(x1 > 0.0) || !std::isfinite(x1))
        throw std::invalid_argument("conditional_correlation: price must be positive and finite");
    if (!(t1 < spec.T))
        throw std::invalid_argument("conditional_correlation: split time must precede maturity");
    if (n_paths < 1000)
        throw std::invalid_argument("conditional_correlation: need at least 1000 paths");
    if (n_steps < 1) throw std::invalid_argument("conditional_correlation: need at least one step");

    const TimeGrid grid = build_time_grid(t1, spec.T, n_steps);
    const GbmParams params{x1, mu, spec.sigma, spec.r};
    const double dt = grid.dt();

    ConditionalCorrelation out;
    out.n_paths = n_paths;
    out.n_steps = n_steps;
    out.theta_t1 = theta_value(x1, t1, spec);

    std::vector<double> ik(n_paths), il(n_paths);
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            GbmPathWalker walker(params, grid, seed, p);
            double x = x1, acc_k = 0.0, acc_l = 0.0;
            for (std::size_t i = 0; i < n_steps; ++i) {
                const KappaLambda kl = detail::kl_eval(x, spec.T - grid.times[i], spec, mu);
                const double dwi = walker.step(i);
                acc_k += kl.kappa * dt;
                acc_l += kl.lambda * dwi;
                x = walker.x();
            }
            ik[p] = acc_k;
            il[p] = acc_l;
        }
    });

    out.i_kappa = summarize(ik);
    out.i_lambda = summarize(il);
    out.correlation = sample_correlation(ik, il, &out.degenerate);
    if (!out.degenerate)
        out.std_error = bootstrap_se_stat2(
            ik, il,
            [](std::span<const double> a, std::span<const double> b) {
                return sample_correlation(a, b);
            },
            derive_seed(seed, 0xC0DE));
    double acc = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double closure = ik[p] + il[p] + out.theta_t1;
        acc += closure * closure;
    }
    out.closure_rms = std::sqrt(acc / static_cast<double>(n_paths));
    return out;
}

}  // namespace sfclab
