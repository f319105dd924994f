#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "sfclab/hedge_lab.hpp"
#include "sfclab/market_model.hpp"
#include "sfclab/stats.hpp"

using namespace sfclab;

namespace {

const GbmParams kParams{100.0, 0.10, 0.2, 0.05};
const OptionSpec kSpec;

PathSet small_paths(std::size_t n_paths = 200, std::size_t n_steps = 128,
                    std::uint64_t seed = 7) {
    return simulate_paths(kParams, build_time_grid(0.0, 1.0, n_steps), n_paths, seed);
}

}  // namespace

TEST_CASE("budget mode self-finances to rounding") {
    const PathSet paths = small_paths();
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::BUDGET_SOLVED);
    for (std::size_t p = 0; p < led.n_paths(); ++p)
        for (std::size_t i = 0; i < led.n_steps(); ++i)
            CHECK(std::abs(led.get_residual(p, i)) <= 1e-12 * kParams.x0);
}

TEST_CASE("initial portfolio value equals the closed-form price in both modes") {
    const PathSet paths = small_paths(50, 64);
    const double w0 = 10.450583572185565;
    for (const HedgeMode mode : {HedgeMode::BUDGET_SOLVED, HedgeMode::FORMULA_PRESCRIBED}) {
        const HedgeLedger led = run_hedge(paths, kSpec, mode);
        for (std::size_t p = 0; p < led.n_paths(); ++p)
            CHECK(led.v(p, 0) == doctest::Approx(w0).epsilon(1e-13));
    }
}

TEST_CASE("value change decomposes into asset returns plus the trade residual") {
    const PathSet paths = small_paths(100, 64);
    for (const HedgeMode mode : {HedgeMode::BUDGET_SOLVED, HedgeMode::FORMULA_PRESCRIBED}) {
        const HedgeLedger led = run_hedge(paths, kSpec, mode);
        for (std::size_t p = 0; p < led.n_paths(); ++p)
            for (std::size_t i = 0; i < led.n_steps(); ++i) {
                const double dv = led.v(p, i + 1) - led.v(p, i);
                const double gains = led.get_alpha(p, i) * (led.x(p, i + 1) - led.x(p, i)) +
                                     led.get_beta(p, i) * (led.b(i + 1) - led.b(i));
                CHECK(std::abs(dv - gains - led.get_residual(p, i)) <= 1e-12 * kParams.x0);
            }
    }
}

TEST_CASE("residual series definition matches the ledger and isolates the bond cross term") {
    const PathSet paths = small_paths(60, 64);
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED);
    const ResidualSeries full = sfc_residual_series(led, true);
    const ResidualSeries no_cross = sfc_residual_series(led, false);
    for (std::size_t p = 0; p < led.n_paths(); ++p) {
        double run = 0.0;
        for (std::size_t i = 0; i < led.n_steps(); ++i) {
            CHECK(full.at(p, i) == doctest::Approx(led.get_residual(p, i)).epsilon(1e-12));
            const double db = led.b(i + 1) - led.b(i);
            const double dbeta = led.get_beta(p, i + 1) - led.get_beta(p, i);
            CHECK(full.at(p, i) - no_cross.at(p, i) ==
                  doctest::Approx(dbeta * db).epsilon(1e-10));
            run += full.at(p, i);
            CHECK(full.cum(p, i) == doctest::Approx(run).epsilon(1e-12));
        }
    }
}

TEST_CASE("formula and budget terminal values differ by the compounded residuals") {
    const PathSet paths = small_paths(150, 128);
    const HedgeLedger formula = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED);
    const HedgeLedger budget = run_hedge(paths, kSpec, HedgeMode::BUDGET_SOLVED);
    const ResidualSeries series = sfc_residual_series(formula, true);
    const std::size_t n = formula.n_steps();
    for (std::size_t p = 0; p < formula.n_paths(); ++p) {
        const double gap = formula.v_terminal[p] - budget.v_terminal[p];
        CHECK(std::abs(gap - series.comp(p, n - 1)) <= 1e-10 * kParams.x0);
    }
}

TEST_CASE("self-financed wealth equals value minus the running residual sum") {
    const PathSet paths = small_paths(80, 64);
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED);
    const ResidualSeries series = sfc_residual_series(led, true);
    const std::size_t n = led.n_steps();
    for (std::size_t p = 0; p < led.n_paths(); ++p) {
        const std::vector<double> w = led.wealth_path(p);
        REQUIRE(w.size() == n + 1);
        CHECK(w[0] == doctest::Approx(led.v(p, 0)).epsilon(1e-14));
        CHECK(w[n] == doctest::Approx(led.wealth_terminal[p]).epsilon(1e-14));
        CHECK(std::abs(w[n] - (led.v(p, n) - series.cum(p, n - 1))) <= 1e-11 * kParams.x0);
        CHECK(led.tracking_error(p) == led.wealth_terminal[p] - led.payoff[p]);
    }
}

TEST_CASE("budget mode wealth coincides with portfolio value") {
    const PathSet paths = small_paths(60, 64);
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::BUDGET_SOLVED);
    for (std::size_t p = 0; p < led.n_paths(); ++p) {
        CHECK(std::abs(led.wealth_terminal[p] - led.v_terminal[p]) <= 1e-10 * kParams.x0);
        const std::vector<double> w = led.wealth_path(p);
        for (std::size_t i = 0; i <= led.n_steps(); ++i)
            CHECK(std::abs(w[i] - led.v(p, i)) <= 1e-10 * kParams.x0);
    }
}

TEST_CASE("terminal holdings collapse away from the strike") {
    const PathSet paths = small_paths(400, 128, 21);
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED);
    const ThetaCheck check = theta_process(led, 0.005);
    CHECK(check.max_abs_terminal <= 1e-6);
    CHECK(check.eps == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(check.n_excluded < led.n_paths() / 10);
    // theta_0 = -(N(d1) - N(d2)) at the canonical state
    CHECK(check.theta_t0 == doctest::Approx(-0.077212958805376597).epsilon(1e-12));
    for (std::size_t p = 0; p < led.n_paths(); ++p) {
        const double xt = led.x(p, led.n_steps());
        if (std::abs(xt - kSpec.k) > 0.5) {
            const double a = led.get_alpha(p, led.n_steps());
            const double b = led.get_beta(p, led.n_steps());
            if (xt > kSpec.k) {
                CHECK(a == doctest::Approx(1.0).epsilon(1e-9));
                CHECK(b == doctest::Approx(-1.0).epsilon(1e-9));
            } else {
                CHECK(std::abs(a) <= 1e-9);
                CHECK(std::abs(b) <= 1e-9);
            }
        }
    }
}

TEST_CASE("two-step identity is exact in budget mode") {
    const PathSet paths = small_paths(100, 128);
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::BUDGET_SOLVED);
    const TwoStepCheck check = two_step_identity(led);
    CHECK(check.max_violation <= 1e-11 * kParams.x0);
    CHECK(check.cross_rms > 0.0);
    CHECK(check.cross_rms_by_step.size() == led.n_steps() - 1);
}

TEST_CASE("dropped second-order cross terms shrink linearly with the step") {
    std::vector<double> dts, rms;
    for (const std::size_t n : {64ul, 128ul, 256ul, 512ul}) {
        const TimeGrid grid = build_time_grid(0.0, 1.0, n);
        const PathSet paths = simulate_paths(kParams, grid, 300, 5);
        const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::BUDGET_SOLVED);
        const TwoStepCheck check = two_step_identity(led);
        dts.push_back(grid.dt());
        rms.push_back(check.cross_rms);
    }
    const SlopeFit fit = fit_loglog(dts, rms);
    CHECK(fit.slope > 0.8);
    CHECK(fit.slope < 1.2);
}

TEST_CASE("constant holding rule produces no increments") {
    const PathSet paths = small_paths(1, 256);
    const auto cmp =
        merton_increment_comparison(paths, 0, kSpec, AlphaRule::deterministic([](double) {
            return 1.0;
        }));
    CHECK(cmp.cumulative == 0.0);
    for (double d : cmp.diff) CHECK(d == 0.0);
}

TEST_CASE("linear holding rule telescopes exactly") {
    const PathSet paths = small_paths(1, 256, 13);
    const auto cmp = merton_increment_comparison(paths, 0, kSpec,
                                                 AlphaRule::deterministic([](double t) {
                                                     return t;
                                                 }));
    const double dt = paths.grid.dt();
    const double expect = dt * (paths.price(0, 256) - paths.price(0, 0));
    CHECK(cmp.cumulative == doctest::Approx(expect).epsilon(1e-10));
    // pre and post valuations of each trade bracket the same increment
    for (std::size_t i = 0; i < cmp.diff.size(); ++i)
        CHECK(cmp.diff[i] == doctest::Approx(cmp.post[i] - cmp.pre[i]).epsilon(1e-12));
}

TEST_CASE("delta rule cumulative increment difference tracks the gamma compensator") {
    const TimeGrid grid = build_time_grid(0.0, 1.0, 1u << 14);
    const PathSet paths = simulate_paths(kParams, grid, 1, 99);
    const auto cmp = merton_increment_comparison(paths, 0, kSpec, AlphaRule::delta());
    CHECK(cmp.compensator > 0.0);
    CHECK(cmp.cumulative / cmp.compensator == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("ex-ante residual from the canonical state matches the gamma term") {
    const auto res = ex_ante_residual(100.0, 0.0, kSpec, 0.10, 1e-4, 200000, 42);
    const double gamma_term = 7.5048069383387581;  // w11 sigma^2 x^2
    CHECK(std::abs(res.cross_over_dt.mean - gamma_term) <= 3.0 * res.cross_over_dt.se);
    // the conditional mean of the full residual carries no order-dt term
    CHECK(std::abs(res.full.mean) <= 4.0 * res.full.se);
    CHECK(res.full.n == 200000);
}

TEST_CASE("deterministic rule ex-ante residual is pure drift") {
    const double x = 100.0, dt = 1e-4, mu = 0.10;
    const auto res = ex_ante_residual(x, 0.0, kSpec, mu, dt, 10000, 11,
                                      AlphaRule::deterministic([](double t) { return t; }));
    // cross term over dt has conditional mean x (e^{mu dt} - 1) ~ 1e-3,
    // invisible at this sample size
    CHECK(std::abs(res.cross_over_dt.mean) <= 3.0 * res.cross_over_dt.se);
    // the full residual is dalpha x', whose mean is dt x e^{mu dt}
    const double expect = dt * x * std::exp(mu * dt);
    CHECK(std::abs(res.full.mean - expect) <= 3.0 * res.full.se);
}

TEST_CASE("ex-ante estimator rejects bad inputs") {
    CHECK_THROWS_AS(ex_ante_residual(100.0, 0.0, kSpec, 0.1, 1e-4, 10, 1),
                    std::invalid_argument);  // too few inner draws
    CHECK_THROWS_AS(ex_ante_residual(100.0, 0.9999, kSpec, 0.1, 1e-3, 2000, 1),
                    std::invalid_argument);  // step crosses maturity
    CHECK_THROWS_AS(ex_ante_residual(100.0, 0.0, kSpec, 0.1, 0.0, 2000, 1),
                    std::invalid_argument);
}

TEST_CASE("near-zero volatility replicates the deterministic payoff") {
    // pricing and simulating volatilities must agree for replication
    const GbmParams params{100.0, 0.05, 1e-12, 0.05};
    OptionSpec spec = kSpec;
    spec.sigma = 1e-12;
    const TimeGrid grid = build_time_grid(0.0, 1.0, 64);
    const PathSet paths = simulate_paths(params, grid, 10, 3);
    for (const HedgeMode mode : {HedgeMode::BUDGET_SOLVED, HedgeMode::FORMULA_PRESCRIBED}) {
        const HedgeLedger led = run_hedge(paths, spec, mode);
        for (std::size_t p = 0; p < led.n_paths(); ++p) {
            CHECK(std::abs(led.v_terminal[p] - led.payoff[p]) <= 1e-8);
            CHECK(std::abs(led.tracking_error(p)) <= 1e-8);
        }
    }
}

TEST_CASE("streaming terminal stats reproduce the materialized ledger bit for bit") {
    const TimeGrid grid = build_time_grid(0.0, 1.0, 128);
    const std::size_t np = 50;
    const std::uint64_t seed = 17;
    const PathSet paths = simulate_paths(kParams, grid, np, seed);
    for (const HedgeMode mode : {HedgeMode::BUDGET_SOLVED, HedgeMode::FORMULA_PRESCRIBED}) {
        const HedgeLedger led = run_hedge(paths, kSpec, mode);
        const ResidualSeries series = sfc_residual_series(led, true);
        const auto recs = hedge_terminal_stats(kParams, grid, np, seed, kSpec, mode);
        REQUIRE(recs.size() == np);
        for (std::size_t p = 0; p < np; ++p) {
            CHECK(recs[p].x_T == led.x(p, 128));
            CHECK(recs[p].payoff == led.payoff[p]);
            CHECK(recs[p].v_T == led.v_terminal[p]);
            CHECK(recs[p].wealth_T == led.wealth_terminal[p]);
            CHECK(recs[p].theta_T == led.theta(p, 128));
            CHECK(recs[p].residual_compounded ==
                  doctest::Approx(series.comp(p, 127)).epsilon(1e-12));
        }
    }
}

TEST_CASE("lagged timing rebalances on stale states") {
    const PathSet paths = small_paths(40, 64);
    const HedgeLedger current = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED,
                                          HedgeTiming::CURRENT);
    const HedgeLedger lagged = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED,
                                         HedgeTiming::LAGGED);
    CHECK(lagged.get_alpha(0, 0) == current.get_alpha(0, 0));
    bool differs = false;
    for (std::size_t p = 0; p < 40 && !differs; ++p)
        for (std::size_t i = 1; i <= 64 && !differs; ++i)
            if (lagged.get_alpha(p, i) != current.get_alpha(p, i)) differs = true;
    CHECK(differs);
    // stale hedging still lands near the payoff, just with more noise
    std::vector<double> te_cur(40), te_lag(40);
    for (std::size_t p = 0; p < 40; ++p) {
        te_cur[p] = current.tracking_error(p);
        te_lag[p] = lagged.tracking_error(p);
    }
    CHECK(root_mean_square(te_lag) > root_mean_square(te_cur));
    CHECK(root_mean_square(te_lag) < 20.0);
}

TEST_CASE("ledger csv dump carries the documented schema") {
    const PathSet paths = small_paths(2, 4);
    const HedgeLedger led = run_hedge(paths, kSpec, HedgeMode::FORMULA_PRESCRIBED);
    std::ostringstream os;
    dump_ledger_csv(led, os);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "path,step,time,x,b,alpha,beta,v,residual,theta");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 * 5);
}

TEST_CASE("incompatible grids and specs are rejected") {
    const TimeGrid grid = build_time_grid(0.0, 0.5, 16);  // ends before maturity
    const PathSet paths = simulate_paths(kParams, grid, 4, 1);
    CHECK_THROWS_AS(run_hedge(paths, kSpec, HedgeMode::BUDGET_SOLVED), std::invalid_argument);

    const GbmParams off_rate{100.0, 0.10, 0.2, 0.06};
    const PathSet paths2 = simulate_paths(off_rate, build_time_grid(0.0, 1.0, 16), 4, 1);
    CHECK_THROWS_AS(run_hedge(paths2, kSpec, HedgeMode::BUDGET_SOLVED), std::invalid_argument);
}
