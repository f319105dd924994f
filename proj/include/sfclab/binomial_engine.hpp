#pragma once

#include <vector>

#include "sfclab/bs_analytics.hpp"
#include "sfclab/stats.hpp"

namespace sfclab {

// One-period lattice: price moves S -> uS or S -> dS, a bond grows by the
// gross factor r_star. No arbitrage needs u > r_star > d > 0.
struct TreeParams {
    double s = 100.0;
    double u = 1.1;
    double d = 0.9;
    double r_star = 1.05;
    int n = 1;

    void validate() const;
    // risk-neutral up probability (r_star - d)/(u - d), in (0,1) when valid
    double p() const { return (r_star - d) / (u - d); }
};

// Market portfolio over the same period; only the gross returns matter.
struct MarketTree {
    double m = 100.0;
    double m_up = 110.0;
    double m_down = 90.0;

    void validate(double r_star) const;
};

// One-period claim value: C = [p Cu + (1-p) Cd] / r_star.
double crr_step(double cu, double cd, const TreeParams& params);

// n-period call value, standard lattice calibration u = exp(sigma sqrt(dt)),
// d = 1/u, r_star = exp(r dt) with dt = T/n. Rejects calibrations that break
// the ordering invariant (sigma too small for the rate).
double crr_price(const OptionSpec& spec, double x0, int n);

// Same backward induction with explicit factors; used by tests and the
// one-step hand case.
double crr_price_explicit(double s, double k, double u, double d, double r_star, int n);

struct ConvergenceRow {
    int n = 0;
    double crr = 0.0;
    double bs = 0.0;
    double abs_error = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    SlopeFit slope;  // log|error| vs log n
};

ConvergenceStudy convergence_study(const OptionSpec& spec, double x0,
                                   const std::vector<int>& n_list);

// Hedge-ratio consistency: with rho = C beta_C / (S beta_S), the up branch
// gives rho_up = (Cu - C r*)/(uS - S r*), the down branch
// rho_down = (Cd - C r*)/(dS - S r*). The two agree exactly when C solves the
// one-period difference equation, and eliminating rho gives
// implied_value = [Cu (r*-d) + Cd (u-r*)] / (r* (u-d)).
struct BetaRelation {
    double rho_up = 0.0;
    double rho_down = 0.0;
    double gap = 0.0;  // rho_up - rho_down
    double implied_value = 0.0;
};

BetaRelation beta_relation_check(const TreeParams& tree, const MarketTree& market,
                                 double cu, double cd, double c);

}  // namespace sfclab
