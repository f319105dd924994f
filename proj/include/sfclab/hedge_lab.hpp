#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sfclab/bs_analytics.hpp"
#include "sfclab/market_model.hpp"
#include "sfclab/stats.hpp"

namespace sfclab {

// How the bond leg is chosen at each rebalancing node.
//   BUDGET_SOLVED: alpha from delta, beta solved so each trade costs nothing
//   (the discrete budget constraint holds exactly ex post).
//   FORMULA_PRESCRIBED: alpha = N(d1) and beta = -N(d2), both read from the
//   closed form; trades then carry a financing residual.
enum class HedgeMode { BUDGET_SOLVED, FORMULA_PRESCRIBED };

// When the holdings applied over [t_i, t_{i+1}) are decided.
//   CURRENT: from the state observed at node i (trade at known current prices).
//   LAGGED: from the state one node earlier (index-shifted convention).
enum class HedgeTiming { CURRENT, LAGGED };

inline double call_payoff(double x, double k) { return x > k ? x - k : 0.0; }

// Per-step accounting record of a discretely rebalanced replicating
// portfolio. alpha/beta are row-major n_paths x (n_steps+1); residual is
// n_paths x n_steps and stores the full trade cost at node i+1:
//   residual[i] = (alpha_{i+1}-alpha_i) x_{i+1} + (beta_{i+1}-beta_i) b_{i+1}.
// The ledger borrows the PathSet; keep it alive while the ledger is in use.
struct HedgeLedger {
    const PathSet* paths = nullptr;
    OptionSpec spec;
    HedgeMode mode = HedgeMode::BUDGET_SOLVED;
    HedgeTiming timing = HedgeTiming::CURRENT;
    double tau_floor = 1e-8;

    std::vector<double> bond;      // per node, exp(-r(T-t_i)) k
    std::vector<double> alpha;     // holdings applied over [t_i, t_{i+1})
    std::vector<double> beta;
    std::vector<double> residual;  // trade cost injected at node i+1

    std::vector<double> payoff;           // per path, max(x_T - k, 0)
    std::vector<double> v_terminal;       // per path, alpha_n x_n + beta_n b_n
    std::vector<double> wealth_terminal;  // per path, self-financed wealth at T

    size_t n_paths() const { return paths ? paths->n_paths : 0; }
    size_t n_steps() const { return paths ? paths->grid.n_steps : 0; }

    double x(size_t p, size_t i) const { return paths->price(p, i); }
    double b(size_t i) const { return bond[i]; }
    double get_alpha(size_t p, size_t i) const { return alpha[p * (n_steps() + 1) + i]; }
    double get_beta(size_t p, size_t i) const { return beta[p * (n_steps() + 1) + i]; }
    double get_residual(size_t p, size_t i) const { return residual[p * n_steps() + i]; }
    double v(size_t p, size_t i) const { return get_alpha(p, i) * x(p, i) + get_beta(p, i) * b(i); }
    double theta(size_t p, size_t i) const { return -(get_alpha(p, i) + get_beta(p, i)); }
    // self-financed wealth series: starts at v(p,0), accrues only asset returns
    std::vector<double> wealth_path(size_t p) const;
    double tracking_error(size_t p) const { return wealth_terminal[p] - payoff[p]; }
};

HedgeLedger run_hedge(const PathSet& paths, const OptionSpec& spec, HedgeMode mode,
                      HedgeTiming timing = HedgeTiming::CURRENT, double tau_floor = 1e-8);

// Per-step self-financing residuals recomputed from the holdings:
//   res_i = dalpha_i x_i + dalpha_i dx_i + dbeta_i b_i (+ dbeta_i db_i if
//   include_bond_cross), with forward differences df_i = f_{i+1} - f_i.
// cumulative is the plain running sum; compounded rolls each injection
// forward at the bond, comp_j = sum_{i<=j} res_i b_{j+1}/b_{i+1}, so its last
// entry equals v_T(formula) - v_T(budget) for matched alpha sequences.
struct ResidualSeries {
    bool include_bond_cross = true;
    size_t n_paths = 0;
    size_t n_steps = 0;
    std::vector<double> per_step;    // n_paths x n_steps
    std::vector<double> cumulative;  // n_paths x n_steps
    std::vector<double> compounded;  // n_paths x n_steps

    double at(size_t p, size_t i) const { return per_step[p * n_steps + i]; }
    double cum(size_t p, size_t i) const { return cumulative[p * n_steps + i]; }
    double comp(size_t p, size_t i) const { return compounded[p * n_steps + i]; }
};

ResidualSeries sfc_residual_series(const HedgeLedger& ledger, bool include_bond_cross = true);

// Terminal check of theta_t = -(alpha_t + beta_t): at expiry the holdings
// collapse to (1,-1) in the money and (0,0) out, so theta_T = 0 away from the
// strike. Paths inside the band |x_T - k| <= eps are excluded.
struct ThetaCheck {
    std::vector<double> terminal;    // theta_T per path
    double max_abs_terminal = 0.0;   // over included paths
    double theta_t0 = 0.0;           // common initial value
    size_t n_excluded = 0;
    double eps = 0.0;
};

ThetaCheck theta_process(const HedgeLedger& ledger, double eps_frac = 0.005);

// Stock-holding rule for the increment comparison and the ex-ante estimator:
// either a deterministic function of time or the delta rule alpha = N(d1).
struct AlphaRule {
    enum class Kind { DETERMINISTIC, DELTA };
    Kind kind = Kind::DELTA;
    std::function<double(double)> f;  // t -> alpha, DETERMINISTIC only

    static AlphaRule delta() { return {Kind::DELTA, {}}; }
    static AlphaRule deterministic(std::function<double(double)> g) {
        return {Kind::DETERMINISTIC, std::move(g)};
    }
};

// Backward- vs forward-priced trade increments along one path:
//   post_i = (alpha_i - alpha_{i-1}) x_i      (trade valued at post-move price)
//   pre_i  = (alpha_i - alpha_{i-1}) x_{i-1}  (valued at pre-move price)
// so post - pre = dalpha_{i-1} dx_{i-1}. For the delta rule the cumulative
// difference estimates the gamma compensator sum w11 sigma^2 x^2 dt.
struct IncrementComparison {
    std::vector<double> post;  // i = 1..n
    std::vector<double> pre;
    std::vector<double> diff;
    double cumulative = 0.0;
    double compensator = 0.0;  // left-point sum of w11 sigma^2 x^2 dt (delta rule)
};

IncrementComparison merton_increment_comparison(const PathSet& paths, size_t path,
                                                const OptionSpec& spec, const AlphaRule& rule);

// One-step nested Monte Carlo from the fixed state (t, x): draws dx over dt
// under drift mu, evaluates the holding changes the rule prescribes, and
// estimates E[full residual | F_t] and E[dalpha dx | F_t]/dt with standard
// errors. For a DETERMINISTIC rule the bond leg is zero by convention.
struct ExAnteResult {
    Summary full;           // dalpha x + dalpha dx + dbeta b + dbeta db
    Summary cross_over_dt;  // dalpha dx / dt
};

ExAnteResult ex_ante_residual(double x, double t, const OptionSpec& spec, double mu, double dt,
                              size_t n_inner, std::uint64_t seed,
                              const AlphaRule& rule = AlphaRule::delta());

// Two-step rebalancing identity on a budget-solved ledger: at every interior
// node, v_{i+1} = alpha_{i-1} x_{i+1} + beta_{i-1} b_{i+1}
//                 + dalpha_{i-1} dx_i + dbeta_{i-1} db_i
// exactly, because consecutive budget constraints chain. Also reports the
// size of the cross terms dalpha_{i-1} dx_i that a first-order reading drops.
struct TwoStepCheck {
    double max_violation = 0.0;
    double cross_rms = 0.0;
    std::vector<double> cross_rms_by_step;  // interior nodes i = 1..n-1
};

TwoStepCheck two_step_identity(const HedgeLedger& ledger);

// Streaming hedge run: same numbers as run_hedge on a simulated PathSet with
// the same seed, but O(n_paths) memory; for step-count scans where
// materializing paths would not fit.
struct HedgeTerminal {
    double x_T = 0.0;
    double payoff = 0.0;
    double v_T = 0.0;
    double wealth_T = 0.0;
    double theta_T = 0.0;              // -(alpha_n + beta_n)
    double residual_sum = 0.0;         // plain sum of per-step residuals
    double residual_abs_sum = 0.0;     // sum of |residual|
    double residual_compounded = 0.0;  // rolled forward at the bond to T
    double max_abs_residual = 0.0;
};

std::vector<HedgeTerminal> hedge_terminal_stats(const GbmParams& params, const TimeGrid& grid,
                                                size_t n_paths, std::uint64_t seed,
                                                const OptionSpec& spec, HedgeMode mode,
                                                HedgeTiming timing = HedgeTiming::CURRENT,
                                                double tau_floor = 1e-8);

// CSV dump, header: path,step,time,x,b,alpha,beta,v,residual,theta
// (terminal rows leave the residual field empty).
void dump_ledger_csv(const HedgeLedger& ledger, std::ostream& os);

}  // namespace sfclab
