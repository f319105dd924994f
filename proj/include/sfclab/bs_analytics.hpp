#pragma once

#include <utility>

namespace sfclab {

// European call contract terms. The bond backing the replicating portfolio
// is b_t = exp(-r(T-t)) * k, so db = r b dt and b_T = k.
struct OptionSpec {
    double k = 100.0;     // strike
    double T = 1.0;       // maturity date, years
    double r = 0.05;      // risk-free rate
    double sigma = 0.2;   // volatility

    void validate() const;
};

// Standard normal CDF/pdf, erf-based, |error| <= 1e-15.
double norm_cdf(double x);
double norm_pdf(double x);

// Closed-form call value and every partial derivative the hedging and
// decomposition machinery consumes.
struct Greeks {
    double w = 0.0;     // option value
    double w1 = 0.0;    // delta, N(d1)
    double w11 = 0.0;   // gamma
    double w111 = 0.0;  // speed, third x-derivative
    double w2 = 0.0;    // theta, dw/dt
    double w12 = 0.0;   // charm, d(delta)/dt
    double beta = 0.0;  // bond holding, -N(d2)
    double b = 0.0;     // bond value, exp(-r(T-t)) k
    double d1 = 0.0;
    double d2 = 0.0;
};

std::pair<double, double> d_values(double x, double t, const OptionSpec& spec);

double bs_price(double x, double t, const OptionSpec& spec);

Greeks greeks(double x, double t, const OptionSpec& spec);

// Greeks with the remaining maturity floored at tau_floor; used for
// expiry-node evaluation where N(d1), N(d2) collapse to indicators.
Greeks greeks_clamped(double x, double t, const OptionSpec& spec, double tau_floor = 1e-8);

// Residuals of w = w1 x + beta b and of w2 + sigma^2 x^2 w11 / 2 - r beta b;
// both vanish identically for the closed forms.
std::pair<double, double> decomposition_identity(double x, double t, const OptionSpec& spec);

// w2 - (r w - r w1 x - w11 sigma^2 x^2 / 2); zero when the value function
// satisfies the Black-Scholes differential equation.
double pde_residual(double x, double t, const OptionSpec& spec);

// Expected payoff at maturity under drift mu (undiscounted):
// exp(mu (T-t)) N(d1*) x - N(d2*) k with the drift-adjusted arguments.
double expected_payoff_physical(double x, double t, const OptionSpec& spec, double mu);

// Annualized average-to-maturity drift mu_w that discounts the expected
// payoff back to the closed-form value:
// mu_w = ln(expected_payoff / price) / (T-t).
double implied_option_drift(double x, double t, const OptionSpec& spec, double mu);

// Instantaneous option drift (r + leverage * (mu - r)); reported alongside
// the average-to-maturity number as a diagnostic.
double instantaneous_option_drift(double x, double t, const OptionSpec& spec, double mu);

}  // namespace sfclab
