// Acceptance gate: runs the full battery of correctness criteria at
// production scales and prints one PASS/FAIL line per criterion with the
// measured values and the pinned tolerance. Returns nonzero if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "sfclab/binomial_engine.hpp"
#include "sfclab/bs_analytics.hpp"
#include "sfclab/decomposition_lab.hpp"
#include "sfclab/experiment.hpp"
#include "sfclab/hedge_lab.hpp"
#include "sfclab/market_model.hpp"
#include "sfclab/rng.hpp"
#include "sfclab/stats.hpp"

using namespace sfclab;
namespace fs = std::filesystem;

namespace {

int g_index = 0;
int g_failures = 0;

void report(bool ok, const char* fmt, ...) {
    ++g_index;
    if (!ok) ++g_failures;
    char buf[768];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    std::printf("[%2d/12] %s  %s\n", g_index, ok ? "PASS" : "FAIL", buf);
    std::fflush(stdout);
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

struct RandomState {
    double x;
    OptionSpec spec;
};

// x/k in [0.5, 2], sigma in [0.05, 0.6], r in [0, 0.1], tau in [tau_lo, 3]
RandomState draw_state(const RandomStream& rs, std::uint64_t i, double tau_lo) {
    RandomState s;
    s.spec.k = 100.0;
    s.x = s.spec.k * (0.5 + 1.5 * rs.uniform(4 * i));
    s.spec.sigma = 0.05 + 0.55 * rs.uniform(4 * i + 1);
    s.spec.r = 0.1 * rs.uniform(4 * i + 2);
    s.spec.T = tau_lo + (3.0 - tau_lo) * rs.uniform(4 * i + 3);
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1. closed-form price against the lognormal quadrature oracle
void criterion_price() {
    Timer timer;
    const RandomStream rs(101, 0);
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const RandomState s = draw_state(rs, i, 0.05);
        worst = std::max(worst, std::abs(bs_price(s.x, 0.0, s.spec) -
                                         oracle::call_price(s.x, 0.0, s.spec)));
    }
    const double t = timer.s();
    report(worst <= 1e-8 && t < 1.0,
           "price vs quadrature on 1000 states: max gap %.3g (tol 1e-8), %.2fs (budget 1s)",
           worst, t);
}

// 2. all six partials against finite differences of independent evaluations
void criterion_partials() {
    Timer timer;
    const RandomStream rs(102, 0);
    constexpr double eps = 2.3e-16;
    double worst[6] = {0, 0, 0, 0, 0, 0};
    std::size_t counts[6] = {0, 0, 0, 0, 0, 0};
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const RandomState s = draw_state(rs, i, 1e-3);
        const OptionSpec spec = s.spec;
        const double x = s.x, t = 0.0, tau = spec.T;
        const Greeks g = greeks(x, t, spec);
        const double srt = spec.sigma * std::sqrt(tau);
        const double feature = std::min(srt, 1.0);

        const double hx = 0.01 * x * feature / (1.0 + std::abs(g.d1));
        const auto price_x = [&](double xx) { return bs_price(xx, t, spec); };
        const double fd_w1 = oracle::fd1(price_x, x, hx);
        const double fd_w11 = oracle::fd2(price_x, x, hx);
        const auto gamma_x = [&](double xx) { return greeks(xx, t, spec).w11; };
        const double fd_w111 = oracle::fd1(gamma_x, x, hx);

        const double ht = 0.01 * tau / (1.0 + g.d1 * g.d1);
        const auto price_t = [&](double tt) { return bs_price(x, tt, spec); };
        const double fd_w2 = oracle::fd1(price_t, t, ht);
        const auto delta_t = [&](double tt) { return greeks(x, tt, spec).w1; };
        const double fd_w12 = oracle::fd1(delta_t, t, ht);

        const double hk = 0.01 * spec.k * feature / (1.0 + std::abs(g.d2));
        const auto price_k = [&](double kk) {
            OptionSpec bumped = spec;
            bumped.k = kk;
            return bs_price(x, t, bumped);
        };
        const double fd_beta = std::exp(spec.r * tau) * oracle::fd1(price_k, spec.k, hk);

        const double pd1 = norm_pdf(g.d1);
        const double scale[6] = {
            std::abs(g.w1),
            std::abs(g.w11),
            (g.w11 / x) * (std::abs(g.d1) / srt + 1.0),
            x * pd1 * spec.sigma / (2.0 * std::sqrt(tau)) + std::abs(g.beta * g.b * spec.r),
            pd1 * (2.0 * spec.r * tau + std::abs(g.d2) * srt) /
                (2.0 * spec.sigma * tau * std::sqrt(tau)),
            std::abs(g.beta)};
        const double noise[6] = {1.5 * eps * x / hx,          5.0 * eps * x / (hx * hx),
                                 1.5 * eps * (3.0 * g.w11) / hx, 1.5 * eps * x / ht,
                                 1.5 * eps * 1.0 / ht,         1.5 * eps * x / hk};
        const double got[6] = {fd_w1, fd_w11, fd_w111, fd_w2, fd_w12, fd_beta};
        const double want[6] = {g.w1, g.w11, g.w111, g.w2, g.w12, g.beta};
        for (int j = 0; j < 6; ++j) {
            if (scale[j] > 1e-250 && noise[j] <= 1e-7 * scale[j]) {
                worst[j] = std::max(worst[j], std::abs(got[j] - want[j]) / scale[j]);
                ++counts[j];
            }
        }
    }
    const double t = timer.s();
    double worst_all = 0.0;
    std::size_t min_count = 1000, total = 0;
    for (int j = 0; j < 6; ++j) {
        worst_all = std::max(worst_all, worst[j]);
        min_count = std::min(min_count, counts[j]);
        total += counts[j];
    }
    report(worst_all <= 1e-6 && min_count >= 300 && t < 5.0,
           "six partials vs finite differences: worst rel %.3g (tol 1e-6), "
           "%zu comparisons (min %zu per partial) on 1000 states, %.2fs (budget 5s)",
           worst_all, total, min_count, t);
}

// 3. value and drift identities at random states, pde residual on a mesh
void criterion_identities() {
    const RandomStream rs(103, 0);
    double worst_value = 0.0, worst_drift = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const RandomState s = draw_state(rs, i, 0.05);
        const auto [value_gap, drift_gap] = decomposition_identity(s.x, 0.0, s.spec);
        worst_value = std::max(worst_value, std::abs(value_gap) / s.x);
        worst_drift = std::max(worst_drift, std::abs(drift_gap) / s.x);
    }
    const OptionSpec spec;
    double worst_pde = 0.0;
    for (int ix = 0; ix < 100; ++ix) {
        const double x = 50.0 + 150.0 * ix / 99.0;
        for (int it = 0; it < 100; ++it) {
            const double t = 0.99 * it / 99.0;
            worst_pde = std::max(worst_pde, std::abs(pde_residual(x, t, spec)) / x);
        }
    }
    report(worst_value <= 1e-12 && worst_drift <= 1e-10 && worst_pde <= 1e-10,
           "value/drift identities on 1000 states and pde residual on a 100x100 mesh: "
           "%.3g (tol 1e-12), %.3g (tol 1e-10), %.3g (tol 1e-10), all per unit of x",
           worst_value, worst_drift, worst_pde);
}

// 4. one-period tree hand value, error decay rate, agreement at n = 4096
void criterion_tree_convergence() {
    Timer timer;
    const TreeParams tree{100.0, 1.1, 0.9, 1.05, 1};
    const double hand = crr_step(10.0, 0.0, tree);
    const double hand_gap = std::abs(hand - 50.0 / 7.0);

    const OptionSpec spec;
    const ConvergenceStudy study =
        convergence_study(spec, 100.0, {16, 32, 64, 128, 256, 512, 1024, 2048, 4096});
    const double slope = study.slope.slope;
    const double final_err = study.rows.back().abs_error;
    const double t = timer.s();
    report(hand_gap <= 1e-12 && slope >= -1.3 && slope <= -0.7 && final_err < 5e-3 && t < 10.0,
           "binomial tree: hand value gap %.3g (tol 1e-12), error slope %.3f "
           "(band [-1.3,-0.7]), error at n=4096 %.3g (tol 5e-3), %.2fs (budget 10s)",
           hand_gap, slope, final_err, t);
}

// 5. hedge-ratio consistency across branches, and its failure off the root
void criterion_beta_relation() {
    const TreeParams tree{100.0, 1.1, 0.9, 1.05, 1};
    const MarketTree market{100.0, 110.0, 90.0};
    const double cu = call_payoff(110.0, 100.0), cd = call_payoff(90.0, 100.0);
    const double c = crr_step(cu, cd, tree);
    const BetaRelation at = beta_relation_check(tree, market, cu, cd, c);
    const BetaRelation off = beta_relation_check(tree, market, cu, cd, c + 0.01);
    report(std::abs(at.gap) <= 1e-12 && std::abs(off.gap) >= 1e-4,
           "branch hedge ratios: gap %.3g at the solution (tol 1e-12), "
           "gap %.3g after a +0.01 value shift (floor 1e-4)",
           std::abs(at.gap), std::abs(off.gap));
}

// 6. per-step budget residual, portfolio increment identity, two-step chain
void criterion_ledger_identities() {
    Timer timer;
    const GbmParams params{100.0, 0.10, 0.2, 0.05};
    const OptionSpec spec;
    const TimeGrid grid = build_time_grid(0.0, 1.0, 1024);
    const PathSet paths = simulate_paths(params, grid, 10000, 606);
    const double x0 = params.x0;

    auto dv_gap = [&](const HedgeLedger& ledger) {
        double worst = 0.0;
        for (std::size_t p = 0; p < ledger.n_paths(); ++p)
            for (std::size_t i = 0; i < ledger.n_steps(); ++i) {
                const double dv = ledger.v(p, i + 1) - ledger.v(p, i);
                const double rhs =
                    ledger.get_alpha(p, i) * (ledger.x(p, i + 1) - ledger.x(p, i)) +
                    ledger.get_beta(p, i) * (ledger.b(i + 1) - ledger.b(i)) +
                    ledger.get_residual(p, i);
                worst = std::max(worst, std::abs(dv - rhs));
            }
        return worst;
    };

    double max_residual = 0.0, dv_budget = 0.0, two_step = 0.0;
    {
        const HedgeLedger budget = run_hedge(paths, spec, HedgeMode::BUDGET_SOLVED);
        for (const double r : budget.residual) max_residual = std::max(max_residual, std::abs(r));
        dv_budget = dv_gap(budget);
        two_step = two_step_identity(budget).max_violation;
    }
    const HedgeLedger formula = run_hedge(paths, spec, HedgeMode::FORMULA_PRESCRIBED);
    const double dv_formula = dv_gap(formula);
    const double t = timer.s();
    report(max_residual <= 1e-12 * x0 && dv_budget <= 1e-12 * x0 && dv_formula <= 1e-12 * x0 &&
               two_step <= 1e-11 * x0,
           "ledger on 10000 paths x 1024 steps: budget residual %.3g (tol 1e-12 x0), "
           "increment identity %.3g/%.3g budget/formula (tol 1e-12 x0), "
           "two-step chain %.3g (tol 1e-11 x0), %.1fs",
           max_residual, dv_budget, dv_formula, two_step, t);
}

// 7. ex-ante conditional expectation of the cross term
void criterion_ex_ante() {
    Timer timer;
    const OptionSpec spec;
    const ExAnteResult res =
        ex_ante_residual(100.0, 0.0, spec, 0.10, 1e-4, 1000000, 707, AlphaRule::delta());
    const double target = 7.5048069383387581;  // w11 sigma^2 x^2 at the state
    const double z = (res.cross_over_dt.mean - target) / res.cross_over_dt.se;
    const double t = timer.s();
    report(std::abs(z) <= 3.0 && t < 30.0,
           "ex-ante cross term over 1000000 draws at dt=1e-4: estimate %.6f vs %.6f, "
           "z %.2f (gate 3 se), %.2fs (budget 30s)",
           res.cross_over_dt.mean, target, z, t);
}

// 8. terminal collapse of the holding process away from the strike
void criterion_theta_collapse() {
    Timer timer;
    const GbmParams params{100.0, 0.10, 0.2, 0.05};
    const OptionSpec spec;
    const TimeGrid grid = build_time_grid(0.0, 1.0, 256);
    const auto rows = hedge_terminal_stats(params, grid, 100000, 808, spec,
                                           HedgeMode::FORMULA_PRESCRIBED, HedgeTiming::CURRENT, 1e-8);
    double worst = 0.0;
    std::size_t excluded = 0;
    for (const auto& row : rows) {
        if (std::abs(row.x_T - spec.k) <= 0.5) {
            ++excluded;
            continue;
        }
        worst = std::max(worst, std::abs(row.theta_T));
    }
    const double t = timer.s();
    report(worst <= 1e-6,
           "terminal holdings on 100000 paths: max |theta_T| %.3g (tol 1e-6) "
           "outside the 0.5-wide strike band, %zu excluded, %.1fs",
           worst, excluded, t);
}

// 9. diffusion coefficient identity, conditional tail correlation, ensemble table
void criterion_decomposition() {
    Timer timer;
    const OptionSpec spec;
    const double mu = 0.10;

    double worst_lambda = 0.0;
    auto check_lambda = [&](double x, double t) {
        const KappaLambda kl = kappa_lambda(x, t, spec, mu);
        const Greeks g = greeks(x, t, spec);
        const double lhs = kl.lambda * g.b;
        const double rhs = (x - g.b) * g.w11 * x * spec.sigma;
        if (std::abs(lhs) < 1e-300 && std::abs(rhs) < 1e-300) return;
        worst_lambda = std::max(worst_lambda, std::abs(lhs - rhs) / std::abs(rhs));
    };
    for (int ix = 0; ix < 100; ++ix)
        for (int it = 0; it < 100; ++it)
            check_lambda(50.0 + 150.0 * ix / 99.0, 0.99 * it / 99.0);
    const GbmParams params{100.0, mu, 0.2, 0.05};
    const TimeGrid grid = build_time_grid(0.0, 1.0, 256);
    const PathSet paths = simulate_paths(params, grid, 50, 909);
    for (std::size_t p = 0; p < paths.n_paths; ++p)
        for (std::size_t i = 0; i < grid.n_steps; ++i)
            check_lambda(paths.price(p, i), grid.times[i]);

    const auto recs = integrate_decomposition_streaming(params, build_time_grid(0.0, 1.0, 1024),
                                                        10000, 910, spec, 0.5);
    const auto stats = ensemble_statistics(recs, 911);
    bool se_ok = stats.size() >= 7;
    for (const auto& row : stats) se_ok = se_ok && row.std_error > 0.0;

    const ConditionalCorrelation cc =
        conditional_correlation(100.0, 0.5, spec, mu, 100000, 16384, 912);
    const double t = timer.s();
    report(worst_lambda <= 1e-12 && se_ok && !cc.degenerate && cc.correlation >= -1.0 &&
               cc.correlation <= -0.99 && t < 300.0,
           "holding decomposition: diffusion identity %.3g rel (tol 1e-12) on mesh and paths, "
           "%zu ensemble rows with positive bootstrap se, conditional tail correlation %.5f "
           "(band [-1,-0.99]) on 100000 paths x 16384 steps, %.0fs (budget 300s)",
           worst_lambda, stats.size(), cc.correlation, t);
}

// 10. physical-measure expected payoff: risk-neutral reduction, quadrature, mc
void criterion_expected_payoff() {
    const RandomStream rs(110, 0);
    double worst_rn = 0.0;
    std::size_t compared = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const RandomState s = draw_state(rs, i, 0.05);
        const double lhs = expected_payoff_physical(s.x, 0.0, s.spec, s.spec.r);
        const double rhs = std::exp(s.spec.r * s.spec.T) * bs_price(s.x, 0.0, s.spec);
        if (rhs < 1e-200) continue;
        worst_rn = std::max(worst_rn, std::abs(lhs - rhs) / rhs);
        ++compared;
    }

    const OptionSpec spec;
    const double mu = 0.10;
    const double ep = expected_payoff_physical(100.0, 0.0, spec, mu);
    const double quad = oracle::expected_payoff(100.0, 0.0, spec, mu);
    const double rel_quad = std::abs(ep - quad) / quad;

    const GbmParams params{100.0, mu, 0.2, 0.05};
    const PathSet paths = simulate_paths(params, build_time_grid(0.0, 1.0, 1), 1000000, 1010);
    std::vector<double> payoffs(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p)
        payoffs[p] = call_payoff(paths.price(p, 1), spec.k);
    const Summary mc = summarize(payoffs);
    const double z = (mc.mean - ep) / mc.se;
    report(worst_rn <= 1e-10 && compared >= 900 && rel_quad <= 1e-6 && std::abs(z) <= 3.0,
           "expected payoff under drift: risk-neutral reduction %.3g rel on %zu states "
           "(tol 1e-10), vs quadrature %.3g rel (tol 1e-6), mc z %.2f on 1000000 paths "
           "(gate 3 se)",
           worst_rn, compared, rel_quad, z);
}

// 11. discounted payoff is a martingale under the risk-neutral drift
void criterion_martingale() {
    const OptionSpec spec;
    const GbmParams params{100.0, spec.r, 0.2, 0.05};
    const PathSet paths = simulate_paths(params, build_time_grid(0.0, 1.0, 1), 1000000, 1111);
    const double disc = std::exp(-spec.r * spec.T);
    std::vector<double> discounted(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p)
        discounted[p] = disc * call_payoff(paths.price(p, 1), spec.k);
    const Summary mc = summarize(discounted);
    const double ref = bs_price(100.0, 0.0, spec);
    const double z = (mc.mean - ref) / mc.se;
    report(std::abs(z) <= 3.0,
           "martingale pricing: discounted mean payoff %.6f vs %.6f over 1000000 paths, "
           "z %.2f (gate 3 se)",
           mc.mean, ref, z);
}

// 12. identical runs are byte-identical across thread counts
void criterion_determinism() {
    const fs::path base = fs::temp_directory_path() / "sfclab_acceptance";
    fs::remove_all(base);
    std::size_t files_compared = 0, bytes = 0;
    bool ok = true;
    const std::vector<std::pair<std::string, std::map<std::string, std::string>>> runs = {
        {"hedge", {{"n_paths", "500"}, {"n_steps", "256"}, {"seed", "1212"}}},
        {"decompose", {{"n_paths", "400"}, {"n_steps", "512"}, {"seed", "1212"}}},
    };
    for (const auto& [name, cfg] : runs) {
        std::vector<std::vector<std::string>> emitted;
        for (const char* threads : {"1", "4"}) {
            auto c = cfg;
            c["threads"] = threads;
            const Report rep = run_experiment(name, c);
            const fs::path dir = base / (name + std::string("_t") + threads);
            emitted.push_back(emit_report(rep, dir.string(), "csv"));
        }
        ok = ok && emitted[0].size() == emitted[1].size();
        for (std::size_t i = 0; ok && i < emitted[0].size(); ++i) {
            const std::string a = slurp(emitted[0][i]), b = slurp(emitted[1][i]);
            ok = ok && !a.empty() && a == b;
            ++files_compared;
            bytes += a.size();
        }
    }
    fs::remove_all(base);
    report(ok,
           "reruns across 1 and 4 worker threads: %zu csv files byte-identical "
           "(%zu bytes compared)",
           files_compared, bytes);
}

}  // namespace

int main() {
    criterion_price();
    criterion_partials();
    criterion_identities();
    criterion_tree_convergence();
    criterion_beta_relation();
    criterion_ledger_identities();
    criterion_ex_ante();
    criterion_theta_collapse();
    criterion_decomposition();
    criterion_expected_payoff();
    criterion_martingale();
    criterion_determinism();
    if (g_failures == 0)
        std::printf("all 12 criteria passed\n");
    else
        std::printf("%d of 12 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
