#include "sfclab/bs_analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfclab {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_state(double x, double t, const OptionSpec& spec) {
    spec.validate();
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::invalid_argument("bs_analytics: price must be positive and finite");
    if (!std::isfinite(t) || t > spec.T)
        throw std::invalid_argument("bs_analytics: valuation date past maturity");
}
}  // namespace

void OptionSpec::validate() const {
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("OptionSpec: strike must be positive and finite");
    if (!(T > 0.0) || !std::isfinite(T))
        throw std::invalid_argument("OptionSpec: maturity must be positive and finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("OptionSpec: volatility must be positive and finite");
    if (!std::isfinite(r))
        throw std::invalid_argument("OptionSpec: rate must be finite");
}

double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double norm_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

std::pair<double, double> d_values(double x, double t, const OptionSpec& spec) {
    check_state(x, t, spec);
    const double tau = spec.T - t;
    if (!(tau > 0.0))
        throw std::invalid_argument("bs_analytics: d_values needs strictly positive time to maturity");
    const double srt = spec.sigma * std::sqrt(tau);
    const double d1 = (std::log(x / spec.k) + (spec.r + 0.5 * spec.sigma * spec.sigma) * tau) / srt;
    return {d1, d1 - srt};
}

double bs_price(double x, double t, const OptionSpec& spec) {
    check_state(x, t, spec);
    const double tau = spec.T - t;
    if (tau == 0.0)
        return std::max(x - spec.k, 0.0);
    const auto [d1, d2] = d_values(x, t, spec);
    return norm_cdf(d1) * x - std::exp(-spec.r * tau) * norm_cdf(d2) * spec.k;
}

Greeks greeks(double x, double t, const OptionSpec& spec) {
    check_state(x, t, spec);
    const double tau = spec.T - t;
    if (!(tau > 0.0))
        throw std::invalid_argument("bs_analytics: greeks need strictly positive time to maturity; use greeks_clamped at expiry");

    Greeks g;
    const double srt = spec.sigma * std::sqrt(tau);
    g.d1 = (std::log(x / spec.k) + (spec.r + 0.5 * spec.sigma * spec.sigma) * tau) / srt;
    g.d2 = g.d1 - srt;
    g.b = std::exp(-spec.r * tau) * spec.k;

    const double nd1 = norm_cdf(g.d1);
    const double nd2 = norm_cdf(g.d2);
    const double pd1 = norm_pdf(g.d1);

    g.w1 = nd1;
    g.beta = -nd2;
    g.w = nd1 * x + g.beta * g.b;
    g.w11 = pd1 / (x * srt);
    g.w111 = -(g.w11 / x) * (g.d1 / srt + 1.0);
    // theta: dw/dt with b carrying the discounting, so the bond term enters as beta * b * r.
    g.w2 = -x * pd1 * spec.sigma / (2.0 * std::sqrt(tau)) + g.beta * g.b * spec.r;
    // charm: time derivative of N(d1).
    g.w12 = -pd1 * (2.0 * spec.r * tau - g.d2 * srt) / (2.0 * spec.sigma * tau * std::sqrt(tau));
    return g;
}

Greeks greeks_clamped(double x, double t, const OptionSpec& spec, double tau_floor) {
    const double tau = spec.T - t;
    if (tau >= tau_floor)
        return greeks(x, t, spec);
    return greeks(x, spec.T - tau_floor, spec);
}

std::pair<double, double> decomposition_identity(double x, double t, const OptionSpec& spec) {
    const Greeks g = greeks(x, t, spec);
    const double value_gap = g.w - (g.w1 * x + g.beta * g.b);
    const double drift_gap = g.w2 + 0.5 * spec.sigma * spec.sigma * x * x * g.w11 - spec.r * g.beta * g.b;
    return {value_gap, drift_gap};
}

double pde_residual(double x, double t, const OptionSpec& spec) {
    const Greeks g = greeks(x, t, spec);
    return g.w2 - (spec.r * g.w - spec.r * g.w1 * x - 0.5 * g.w11 * spec.sigma * spec.sigma * x * x);
}

double expected_payoff_physical(double x, double t, const OptionSpec& spec, double mu) {
    check_state(x, t, spec);
    if (!std::isfinite(mu))
        throw std::invalid_argument("bs_analytics: drift must be finite");
    const double tau = spec.T - t;
    if (tau == 0.0)
        return std::max(x - spec.k, 0.0);
    const double srt = spec.sigma * std::sqrt(tau);
    const double d1s = (std::log(x / spec.k) + (mu + 0.5 * spec.sigma * spec.sigma) * tau) / srt;
    const double d2s = d1s - srt;
    return std::exp(mu * tau) * norm_cdf(d1s) * x - norm_cdf(d2s) * spec.k;
}

double implied_option_drift(double x, double t, const OptionSpec& spec, double mu) {
    const double tau = spec.T - t;
    if (!(tau > 0.0))
        throw std::invalid_argument("bs_analytics: implied drift needs strictly positive time to maturity");
    const double w = bs_price(x, t, spec);
    const double ep = expected_payoff_physical(x, t, spec, mu);
    if (!(w > 0.0) || !(ep > 0.0))
        throw std::domain_error("bs_analytics: implied drift undefined for non-positive value or expected payoff");
    return std::log(ep / w) / tau;
}

double instantaneous_option_drift(double x, double t, const OptionSpec& spec, double mu) {
    const Greeks g = greeks(x, t, spec);
    const double leverage = g.w1 * x / g.w;
    return spec.r + leverage * (mu - spec.r);
}

}  // namespace sfclab
