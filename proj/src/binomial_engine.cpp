#include "sfclab/binomial_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfclab {

void TreeParams::validate() const {
    if (!(s > 0.0) || !std::isfinite(s))
        throw std::invalid_argument("TreeParams: spot must be positive and finite");
    if (!std::isfinite(u) || !std::isfinite(d) || !std::isfinite(r_star))
        throw std::invalid_argument("TreeParams: factors must be finite");
    if (!(d > 0.0 && d < r_star && r_star < u))
        throw std::invalid_argument("TreeParams: need u > r_star > d > 0, otherwise the lattice admits arbitrage");
    if (n < 1)
        throw std::invalid_argument("TreeParams: need at least one period");
}

void MarketTree::validate(double r_star) const {
    if (!(m > 0.0) || !(m_down > 0.0) || !std::isfinite(m_up))
        throw std::invalid_argument("MarketTree: levels must be positive and finite");
    if (!(m_up > m_down))
        throw std::invalid_argument("MarketTree: up state must exceed down state");
    if (!(m_up / m > r_star && r_star > m_down / m))
        throw std::invalid_argument("MarketTree: market returns must straddle r_star");
}

double crr_step(double cu, double cd, const TreeParams& params) {
    params.validate();
    const double p = params.p();
    return (p * cu + (1.0 - p) * cd) / params.r_star;
}

double crr_price_explicit(double s, double k, double u, double d, double r_star, int n) {
    TreeParams probe{s, u, d, r_star, n};
    probe.validate();
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("crr_price: strike must be positive and finite");

    const double p = probe.p();
    const double q = 1.0 - p;

    // terminal payoffs; node j holds price s u^j d^(n-j)
    std::vector<double> v(static_cast<size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) {
        const double st = s * std::pow(u, j) * std::pow(d, n - j);
        v[static_cast<size_t>(j)] = std::max(st - k, 0.0);
    }
    for (int step = n; step > 0; --step)
        for (int j = 0; j < step; ++j)
            v[static_cast<size_t>(j)] =
                (p * v[static_cast<size_t>(j) + 1] + q * v[static_cast<size_t>(j)]) / r_star;
    return v[0];
}

double crr_price(const OptionSpec& spec, double x0, int n) {
    spec.validate();
    if (!(x0 > 0.0) || !std::isfinite(x0))
        throw std::invalid_argument("crr_price: spot must be positive and finite");
    if (n < 1)
        throw std::invalid_argument("crr_price: need at least one period");
    const double dt = spec.T / n;
    const double u = std::exp(spec.sigma * std::sqrt(dt));
    const double d = 1.0 / u;
    const double r_star = std::exp(spec.r * dt);
    if (!(d < r_star && r_star < u))
        throw std::invalid_argument(
            "crr_price: calibration violates u > r_star > d (volatility too small for the rate at this step size)");
    return crr_price_explicit(x0, spec.k, u, d, r_star, n);
}

ConvergenceStudy convergence_study(const OptionSpec& spec, double x0,
                                   const std::vector<int>& n_list) {
    if (n_list.empty())
        throw std::invalid_argument("convergence_study: empty step list");
    ConvergenceStudy out;
    out.rows.reserve(n_list.size());
    const double bs = bs_price(x0, 0.0, spec);
    std::vector<double> xs, ys;
    for (int n : n_list) {
        ConvergenceRow row;
        row.n = n;
        row.crr = crr_price(spec, x0, n);
        row.bs = bs;
        row.abs_error = std::abs(row.crr - bs);
        out.rows.push_back(row);
        if (row.abs_error > 0.0) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(row.abs_error);
        }
    }
    if (xs.size() >= 3)
        out.slope = fit_loglog(xs, ys);
    return out;
}

BetaRelation beta_relation_check(const TreeParams& tree, const MarketTree& market,
                                 double cu, double cd, double c) {
    tree.validate();
    market.validate(tree.r_star);
    const double up_leg = tree.u * tree.s - tree.s * tree.r_star;
    const double down_leg = tree.d * tree.s - tree.s * tree.r_star;
    if (up_leg == 0.0 || down_leg == 0.0)
        throw std::invalid_argument("beta_relation_check: degenerate branch, stock return equals r_star");
    BetaRelation out;
    out.rho_up = (cu - c * tree.r_star) / up_leg;
    out.rho_down = (cd - c * tree.r_star) / down_leg;
    out.gap = out.rho_up - out.rho_down;
    out.implied_value =
        (cu * (tree.r_star - tree.d) + cd * (tree.u - tree.r_star)) / (tree.r_star * (tree.u - tree.d));
    return out;
}

}  // namespace sfclab
