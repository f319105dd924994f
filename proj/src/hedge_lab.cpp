#include "sfclab/hedge_lab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "sfclab/parallel.hpp"

namespace sfclab {

namespace {

void check_compatible(const GbmParams& params, const TimeGrid& grid, const OptionSpec& spec) {
    spec.validate();
    params.validate();
    if (std::abs(grid.T - spec.T) > 1e-12 * std::max(1.0, std::abs(spec.T)))
        throw std::invalid_argument("hedge_lab: grid terminal time must equal the option maturity");
    if (std::abs(params.r - spec.r) > 1e-15)
        throw std::invalid_argument("hedge_lab: simulated rate must equal the option spec rate");
}

std::vector<double> bond_curve(const TimeGrid& grid, const OptionSpec& spec) {
    std::vector<double> bond(grid.times.size());
    for (size_t i = 0; i < grid.times.size(); ++i)
        bond[i] = std::exp(-spec.r * (spec.T - grid.times[i])) * spec.k;
    return bond;
}

// Sequential per-path hedge kernel shared by the materialized and streaming
// runners. NodeSink receives (node, alpha, beta) and StepSink (step, residual,
// plus the running wealth after the step).
struct PathHedger {
    const OptionSpec& spec;
    const std::vector<double>& times;
    const std::vector<double>& bond;
    HedgeMode mode;
    HedgeTiming timing;
    double tau_floor;

    double a_prev = 0.0, be_prev = 0.0, x_prev = 0.0, wealth = 0.0;
    double res_sum = 0.0, res_abs_sum = 0.0, res_comp = 0.0, res_max = 0.0;

    // holdings decided for the interval starting at node i, given the price
    // observed there (and the previous node's state under LAGGED timing)
    std::pair<double, double> target(size_t i, double x_i) const {
        double x_eval = x_i, t_eval = times[i];
        if (timing == HedgeTiming::LAGGED && i > 0) {
            x_eval = x_prev;
            t_eval = times[i - 1];
        }
        const Greeks g = greeks_clamped(x_eval, t_eval, spec, tau_floor);
        return {g.w1, g.beta};
    }

    // returns (alpha_0, beta_0)
    std::pair<double, double> start(double x0) {
        auto [a, be] = target(0, x0);
        a_prev = a;
        be_prev = be;
        x_prev = x0;
        wealth = a * x0 + be * bond[0];
        return {a, be};
    }

    // advances from node i to node i+1; returns (alpha, beta, residual)
    struct Step {
        double alpha, beta, residual;
    };
    Step step(size_t i, double x_next) {
        const size_t j = i + 1;
        auto [a, be] = target(j, x_next);
        if (mode == HedgeMode::BUDGET_SOLVED)
            be = (a_prev * x_next + be_prev * bond[j] - a * x_next) / bond[j];
        const double res = (a - a_prev) * x_next + (be - be_prev) * bond[j];
        wealth += a_prev * (x_next - x_prev) + be_prev * (bond[j] - bond[j - 1]);
        res_sum += res;
        res_abs_sum += std::abs(res);
        // previously compounded injections sit at node j-1; roll them to j
        res_comp = res_comp * (bond[j] / bond[j - 1]) + res;
        res_max = std::max(res_max, std::abs(res));
        a_prev = a;
        be_prev = be;
        x_prev = x_next;
        return {a, be, res};
    }
};

}  // namespace

std::vector<double> HedgeLedger::wealth_path(size_t p) const {
    const size_t n = n_steps();
    std::vector<double> w(n + 1);
    w[0] = v(p, 0);
    for (size_t i = 0; i < n; ++i)
        w[i + 1] = w[i] + get_alpha(p, i) * (x(p, i + 1) - x(p, i)) +
                   get_beta(p, i) * (bond[i + 1] - bond[i]);
    return w;
}

HedgeLedger run_hedge(const PathSet& paths, const OptionSpec& spec, HedgeMode mode,
                      HedgeTiming timing, double tau_floor) {
    check_compatible(paths.params, paths.grid, spec);
    const size_t n = paths.grid.n_steps;
    const size_t np = paths.n_paths;

    HedgeLedger led;
    led.paths = &paths;
    led.spec = spec;
    led.mode = mode;
    led.timing = timing;
    led.tau_floor = tau_floor;
    led.bond = bond_curve(paths.grid, spec);
    led.alpha.resize(np * (n + 1));
    led.beta.resize(np * (n + 1));
    led.residual.resize(np * n);
    led.payoff.resize(np);
    led.v_terminal.resize(np);
    led.wealth_terminal.resize(np);

    parallel_for(np, [&](size_t begin, size_t end) {
        for (size_t p = begin; p < end; ++p) {
            PathHedger h{spec, paths.grid.times, led.bond, mode, timing, tau_floor};
            double* ap = &led.alpha[p * (n + 1)];
            double* bp = &led.beta[p * (n + 1)];
            double* rp = &led.residual[p * n];
            auto [a0, be0] = h.start(paths.price(p, 0));
            ap[0] = a0;
            bp[0] = be0;
            for (size_t i = 0; i < n; ++i) {
                const auto s = h.step(i, paths.price(p, i + 1));
                ap[i + 1] = s.alpha;
                bp[i + 1] = s.beta;
                rp[i] = s.residual;
            }
            const double xT = paths.price(p, n);
            led.payoff[p] = call_payoff(xT, spec.k);
            led.v_terminal[p] = ap[n] * xT + bp[n] * led.bond[n];
            led.wealth_terminal[p] = h.wealth;
        }
    });
    return led;
}

ResidualSeries sfc_residual_series(const HedgeLedger& ledger, bool include_bond_cross) {
    const size_t n = ledger.n_steps();
    const size_t np = ledger.n_paths();
    ResidualSeries out;
    out.include_bond_cross = include_bond_cross;
    out.n_paths = np;
    out.n_steps = n;
    out.per_step.resize(np * n);
    out.cumulative.resize(np * n);
    out.compounded.resize(np * n);

    parallel_for(np, [&](size_t begin, size_t end) {
        for (size_t p = begin; p < end; ++p) {
            double cum = 0.0, comp = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double da = ledger.get_alpha(p, i + 1) - ledger.get_alpha(p, i);
                const double db = ledger.get_beta(p, i + 1) - ledger.get_beta(p, i);
                const double dx = ledger.x(p, i + 1) - ledger.x(p, i);
                const double dbond = ledger.bond[i + 1] - ledger.bond[i];
                double res = da * ledger.x(p, i) + da * dx + db * ledger.bond[i];
                if (include_bond_cross) res += db * dbond;
                cum += res;
                // roll previous injections forward one period at the bond
                comp = comp * (ledger.bond[i + 1] / ledger.bond[i]) + res;
                out.per_step[p * n + i] = res;
                out.cumulative[p * n + i] = cum;
                out.compounded[p * n + i] = comp;
            }
        }
    });
    return out;
}

ThetaCheck theta_process(const HedgeLedger& ledger, double eps_frac) {
    const size_t n = ledger.n_steps();
    const size_t np = ledger.n_paths();
    ThetaCheck out;
    out.eps = eps_frac * ledger.spec.k;
    out.terminal.resize(np);
    out.theta_t0 = np ? ledger.theta(0, 0) : 0.0;
    for (size_t p = 0; p < np; ++p) {
        out.terminal[p] = ledger.theta(p, n);
        if (std::abs(ledger.x(p, n) - ledger.spec.k) <= out.eps) {
            ++out.n_excluded;
            continue;
        }
        out.max_abs_terminal = std::max(out.max_abs_terminal, std::abs(out.terminal[p]));
    }
    return out;
}

IncrementComparison merton_increment_comparison(const PathSet& paths, size_t path,
                                                const OptionSpec& spec, const AlphaRule& rule) {
    check_compatible(paths.params, paths.grid, spec);
    if (path >= paths.n_paths)
        throw std::invalid_argument("merton_increment_comparison: path index out of range");
    if (rule.kind == AlphaRule::Kind::DETERMINISTIC && !rule.f)
        throw std::invalid_argument("merton_increment_comparison: deterministic rule needs a function");

    const size_t n = paths.grid.n_steps;
    const auto& times = paths.grid.times;
    const double dt = paths.grid.dt();
    const double sig2 = spec.sigma * spec.sigma;

    std::vector<double> alpha(n + 1);
    IncrementComparison out;
    out.post.resize(n);
    out.pre.resize(n);
    out.diff.resize(n);

    for (size_t i = 0; i <= n; ++i) {
        const double x = paths.price(path, i);
        if (rule.kind == AlphaRule::Kind::DETERMINISTIC) {
            alpha[i] = rule.f(times[i]);
        } else {
            const Greeks g = greeks_clamped(x, times[i], spec);
            alpha[i] = g.w1;
            if (i < n) out.compensator += g.w11 * sig2 * x * x * dt;
        }
    }
    for (size_t i = 1; i <= n; ++i) {
        const double da = alpha[i] - alpha[i - 1];
        out.post[i - 1] = da * paths.price(path, i);
        out.pre[i - 1] = da * paths.price(path, i - 1);
        out.diff[i - 1] = out.post[i - 1] - out.pre[i - 1];
        out.cumulative += out.diff[i - 1];
    }
    return out;
}

ExAnteResult ex_ante_residual(double x, double t, const OptionSpec& spec, double mu, double dt,
                              size_t n_inner, std::uint64_t seed, const AlphaRule& rule) {
    spec.validate();
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::invalid_argument("ex_ante_residual: price must be positive and finite");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("ex_ante_residual: dt must be positive");
    if (!(t + dt < spec.T))
        throw std::invalid_argument("ex_ante_residual: t + dt must stay before maturity");
    if (n_inner < 1000)
        throw std::invalid_argument("ex_ante_residual: need at least 1000 inner draws");
    if (!std::isfinite(mu))
        throw std::invalid_argument("ex_ante_residual: drift must be finite");
    if (rule.kind == AlphaRule::Kind::DETERMINISTIC && !rule.f)
        throw std::invalid_argument("ex_ante_residual: deterministic rule needs a function");

    const Greeks g0 = (rule.kind == AlphaRule::Kind::DELTA) ? greeks(x, t, spec) : Greeks{};
    const double b0 = std::exp(-spec.r * (spec.T - t)) * spec.k;
    const double b1 = std::exp(-spec.r * (spec.T - t - dt)) * spec.k;
    const double da_det =
        (rule.kind == AlphaRule::Kind::DETERMINISTIC) ? rule.f(t + dt) - rule.f(t) : 0.0;

    const double drift = (mu - 0.5 * spec.sigma * spec.sigma) * dt;
    const double vol = spec.sigma * std::sqrt(dt);
    RandomStream stream(derive_seed(seed, 0xEAA7u), 0);

    // Welford accumulation; n_inner can reach 1e7, no need to materialize
    double mean_f = 0.0, m2_f = 0.0, mean_c = 0.0, m2_c = 0.0;
    for (size_t i = 0; i < n_inner; ++i) {
        const double z = stream.normal(i);
        const double x1 = x * std::exp(drift + vol * z);
        const double dx = x1 - x;
        double full, cross;
        if (rule.kind == AlphaRule::Kind::DELTA) {
            const Greeks g1 = greeks(x1, t + dt, spec);
            const double da = g1.w1 - g0.w1;
            const double db = g1.beta - g0.beta;
            full = da * x + da * dx + db * b0 + db * (b1 - b0);
            cross = da * dx;
        } else {
            full = da_det * x + da_det * dx;
            cross = da_det * dx;
        }
        const double cnt = static_cast<double>(i + 1);
        double delta = full - mean_f;
        mean_f += delta / cnt;
        m2_f += delta * (full - mean_f);
        delta = cross - mean_c;
        mean_c += delta / cnt;
        m2_c += delta * (cross - mean_c);
    }

    auto finish = [n_inner](double mean, double m2, double scale) {
        Summary s;
        s.n = n_inner;
        s.mean = mean * scale;
        s.var = (n_inner > 1) ? m2 / static_cast<double>(n_inner - 1) * scale * scale : 0.0;
        s.sd = std::sqrt(s.var);
        s.se = s.sd / std::sqrt(static_cast<double>(n_inner));
        return s;
    };
    ExAnteResult out;
    out.full = finish(mean_f, m2_f, 1.0);
    out.cross_over_dt = finish(mean_c, m2_c, 1.0 / dt);
    return out;
}

TwoStepCheck two_step_identity(const HedgeLedger& ledger) {
    if (ledger.mode != HedgeMode::BUDGET_SOLVED)
        throw std::invalid_argument("two_step_identity: needs a budget-solved ledger");
    const size_t n = ledger.n_steps();
    if (n < 2) throw std::invalid_argument("two_step_identity: needs at least two steps");
    const size_t np = ledger.n_paths();

    TwoStepCheck out;
    out.cross_rms_by_step.assign(n - 1, 0.0);
    double cross_sq = 0.0;
    for (size_t p = 0; p < np; ++p) {
        for (size_t i = 1; i < n; ++i) {
            const double x_next = ledger.x(p, i + 1);
            const double b_next = ledger.bond[i + 1];
            const double da = ledger.get_alpha(p, i) - ledger.get_alpha(p, i - 1);
            const double db = ledger.get_beta(p, i) - ledger.get_beta(p, i - 1);
            const double cross_x = da * (x_next - ledger.x(p, i));
            const double cross_b = db * (b_next - ledger.bond[i]);
            const double rhs = ledger.get_alpha(p, i - 1) * x_next +
                               ledger.get_beta(p, i - 1) * b_next + cross_x + cross_b;
            out.max_violation = std::max(out.max_violation, std::abs(ledger.v(p, i + 1) - rhs));
            out.cross_rms_by_step[i - 1] += cross_x * cross_x;
            cross_sq += cross_x * cross_x;
        }
    }
    if (np) {
        for (auto& v : out.cross_rms_by_step) v = std::sqrt(v / static_cast<double>(np));
        out.cross_rms = std::sqrt(cross_sq / static_cast<double>(np * (n - 1)));
    }
    return out;
}

std::vector<HedgeTerminal> hedge_terminal_stats(const GbmParams& params, const TimeGrid& grid,
                                                size_t n_paths, std::uint64_t seed,
                                                const OptionSpec& spec, HedgeMode mode,
                                                HedgeTiming timing, double tau_floor) {
    check_compatible(params, grid, spec);
    if (n_paths == 0) throw std::invalid_argument("hedge_terminal_stats: need at least one path");
    const size_t n = grid.n_steps;
    const std::vector<double> bond = bond_curve(grid, spec);

    std::vector<HedgeTerminal> out(n_paths);
    parallel_for(n_paths, [&](size_t begin, size_t end) {
        for (size_t p = begin; p < end; ++p) {
            GbmPathWalker walker(params, grid, seed, p);
            PathHedger h{spec, grid.times, bond, mode, timing, tau_floor};
            h.start(params.x0);
            double a_last = h.a_prev, be_last = h.be_prev;
            for (size_t i = 0; i < n; ++i) {
                walker.step(i);
                const auto s = h.step(i, walker.x());
                a_last = s.alpha;
                be_last = s.beta;
            }
            HedgeTerminal& rec = out[p];
            rec.x_T = walker.x();
            rec.payoff = call_payoff(rec.x_T, spec.k);
            rec.v_T = a_last * rec.x_T + be_last * bond[n];
            rec.wealth_T = h.wealth;
            rec.theta_T = -(a_last + be_last);
            rec.residual_sum = h.res_sum;
            rec.residual_abs_sum = h.res_abs_sum;
            rec.residual_compounded = h.res_comp;
            rec.max_abs_residual = h.res_max;
        }
    });
    return out;
}

void dump_ledger_csv(const HedgeLedger& ledger, std::ostream& os) {
    os << "path,step,time,x,b,alpha,beta,v,residual,theta\n";
    char buf[400];
    const size_t n = ledger.n_steps();
    for (size_t p = 0; p < ledger.n_paths(); ++p) {
        for (size_t i = 0; i <= n; ++i) {
            if (i < n) {
                std::snprintf(buf, sizeof buf,
                              "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p, i,
                              ledger.paths->grid.times[i], ledger.x(p, i), ledger.bond[i],
                              ledger.get_alpha(p, i), ledger.get_beta(p, i), ledger.v(p, i),
                              ledger.get_residual(p, i), ledger.theta(p, i));
            } else {
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,,%.17g\n",
                              p, i, ledger.paths->grid.times[i], ledger.x(p, i), ledger.bond[i],
                              ledger.get_alpha(p, i), ledger.get_beta(p, i), ledger.v(p, i),
                              ledger.theta(p, i));
            }
            os << buf;
        }
    }
}

}  // namespace sfclab
