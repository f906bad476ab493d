#ifndef SHORTFALL_ANALYTIC_HPP
#define SHORTFALL_ANALYTIC_HPP

#include <cmath>
#include <stdexcept>

#include "shortfall/rng.hpp"

namespace shortfall {

// Black-Scholes call on the scaled asset lambda * x with zero rates. tau is
// the remaining time to expiry; tau = 0 returns the payoff.
inline double bs_call_price(double x, double strike, double sigma, double tau, double lambda = 1.0) {
    if (!(x > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(lambda >= 0.0) || tau < 0.0)
        throw std::domain_error("bs_call_price: invalid inputs");
    const double fwd = lambda * x;
    if (tau == 0.0 || lambda == 0.0) return std::max(fwd - strike, 0.0);
    const double sq = sigma * std::sqrt(tau);
    const double d1 = std::log(fwd / strike) / sq + 0.5 * sq;
    const double d2 = d1 - sq;
    return fwd * normal_cdf(d1) - strike * normal_cdf(d2);
}

// d/dx of the call value; note the chain-rule factor lambda.
inline double bs_delta(double x, double strike, double sigma, double tau, double lambda = 1.0) {
    if (!(x > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(lambda > 0.0) || tau < 0.0)
        throw std::domain_error("bs_delta: invalid inputs");
    if (tau == 0.0) {
        const double fwd = lambda * x;
        if (fwd == strike) throw std::domain_error("bs_delta: undefined at the kink");
        return fwd > strike ? lambda : 0.0;
    }
    const double sq = sigma * std::sqrt(tau);
    const double d1 = std::log(lambda * x / strike) / sq + 0.5 * sq;
    return lambda * normal_cdf(d1);
}

inline double bs_gamma(double x, double strike, double sigma, double tau, double lambda = 1.0) {
    if (!(x > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(lambda > 0.0))
        throw std::domain_error("bs_gamma: invalid inputs");
    if (!(tau > 0.0)) throw std::domain_error("bs_gamma: requires tau > 0");
    const double sq = sigma * std::sqrt(tau);
    const double d1 = std::log(lambda * x / strike) / sq + 0.5 * sq;
    return lambda * normal_pdf(d1) / (x * sq);
}

inline double bs_theta(double x, double strike, double sigma, double tau, double lambda = 1.0) {
    if (!(x > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(lambda > 0.0))
        throw std::domain_error("bs_theta: invalid inputs");
    if (!(tau > 0.0)) throw std::domain_error("bs_theta: requires tau > 0");
    const double sq = sigma * std::sqrt(tau);
    const double d1 = std::log(lambda * x / strike) / sq + 0.5 * sq;
    return -lambda * x * normal_pdf(d1) * sigma / (2.0 * std::sqrt(tau));
}

}  // namespace shortfall

#endif
