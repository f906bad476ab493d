#ifndef SHORTFALL_MODEL_HPP
#define SHORTFALL_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "shortfall/errors.hpp"
#include "shortfall/quadrature.hpp"

namespace shortfall {

// Geometric Brownian motion dX = mu X dt + sigma X dW under the physical
// measure; rates are zero throughout.
struct ModelParams {
    double mu = 0.0;
    double sigma = 0.0;

    double theta() const { return mu / sigma; }

    void validate() const {
        if (!(sigma > 0.0)) throw std::invalid_argument("ModelParams: sigma must be positive");
        if (!std::isfinite(mu)) throw std::invalid_argument("ModelParams: mu must be finite");
    }
};

// Shortfall penalty l(u) = u^k / k applied to the positive part of the
// terminal hedging error, capital bounded below by the credit line -kappa.
struct LossSpec {
    double k = 2.0;
    double kappa = 0.0;

    void validate() const {
        if (!(k > 1.0)) throw std::invalid_argument("LossSpec: k must exceed 1");
        if (!(kappa > 0.0)) throw std::invalid_argument("LossSpec: kappa must be positive");
    }
};

inline double loss(double u, double k) {
    return (u > 0.0) ? std::pow(u, k) / k : 0.0;
}

inline double loss_inv(double l, double k) {
    return (l > 0.0) ? std::pow(k * l, 1.0 / k) : 0.0;
}

// Call on the scaled asset lambda * X with strike K; the scale lambda is
// revealed only at the intermediate date T <= T_star (option expiry).
struct OptionSpec {
    double strike = 0.0;
    double T = 0.0;
    double T_star = 0.0;

    void validate() const {
        if (!(strike > 0.0)) throw std::invalid_argument("OptionSpec: strike must be positive");
        if (!(T > 0.0)) throw std::invalid_argument("OptionSpec: T must be positive");
        if (!(T_star >= T)) throw std::invalid_argument("OptionSpec: T_star must be >= T");
    }
};

struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    std::size_t n_steps = 0;

    double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
    double t_end() const { return time(n_steps); }

    // n_steps = 0 is legal: a grid that is all terminal layer.
    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
    }
};

// Exact GBM increment over dt driven by a standard normal shock.
inline double gbm_step(double x, double mu, double sigma, double dt, double eps) {
    return x * std::exp((mu - 0.5 * sigma * sigma) * dt + sigma * std::sqrt(dt) * eps);
}

inline double beta_log_pdf(double u, double alpha, double beta) {
    if (!(u > 0.0 && u < 1.0)) return -std::numeric_limits<double>::infinity();
    const double lbeta = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
    return (alpha - 1.0) * std::log(u) + (beta - 1.0) * std::log1p(-u) - lbeta;
}

// Law of the multiplicative scale revealed at T.
struct ShapingLaw {
    enum class Kind { degenerate, scaled_beta, empirical };

    Kind kind = Kind::degenerate;
    double value = 1.0;                 // degenerate
    double alpha = 0.0, beta = 0.0;     // scaled beta
    double scale = 1.0;                 // beta support is [0, scale]
    std::vector<double> atoms, probs;   // empirical

    static ShapingLaw degenerate(double v) {
        if (!(v > 0.0)) throw std::invalid_argument("ShapingLaw: degenerate value must be positive");
        ShapingLaw law;
        law.kind = Kind::degenerate;
        law.value = v;
        return law;
    }

    static ShapingLaw scaled_beta(double alpha, double beta, double scale) {
        if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("ShapingLaw: beta shape parameters must be positive");
        if (!(scale > 0.0)) throw std::invalid_argument("ShapingLaw: scale must be positive");
        ShapingLaw law;
        law.kind = Kind::scaled_beta;
        law.alpha = alpha;
        law.beta = beta;
        law.scale = scale;
        return law;
    }

    static ShapingLaw empirical(std::vector<double> atoms, std::vector<double> probs);

    double support_min() const;
    double support_max() const;
    double mean() const;

    // Quantile transform of a uniform draw.
    double sample(double u) const;

    // Discretization with weights summing to 1: atoms for degenerate /
    // empirical laws, a Gauss-Legendre rule against the density for the beta.
    QuadRule quadrature(std::size_t n) const;
};

}  // namespace shortfall

#endif
