#ifndef SHORTFALL_COMPLETE_MARKET_HPP
#define SHORTFALL_COMPLETE_MARKET_HPP

#include <cmath>
#include <stdexcept>

#include "shortfall/analytic.hpp"
#include "shortfall/model.hpp"

namespace shortfall {

// Closed-form solution of the shortfall-constrained pricing problem when the
// scale lambda is already known: minimal capital V(t,x,p) covering the call
// lambda*X with expected loss bounded by p (p < 0), the conjugate map U in
// the loss direction, the auxiliary threshold process P, and the optimal
// controls. States: x > 0 asset level, p < 0 running loss budget.
class CompleteMarket {
public:
    CompleteMarket(ModelParams model, double k, double strike, double T_star)
        : model_(model), k_(k), strike_(strike), T_star_(T_star) {
        model_.validate();
        if (!(k_ > 1.0)) throw std::invalid_argument("CompleteMarket: k must exceed 1");
        if (!(strike_ > 0.0)) throw std::invalid_argument("CompleteMarket: strike must be positive");
        if (!(T_star_ > 0.0)) throw std::invalid_argument("CompleteMarket: T_star must be positive");
    }

    double k() const { return k_; }
    double strike() const { return strike_; }
    double T_star() const { return T_star_; }
    const ModelParams& model() const { return model_; }

    // exp{theta^2 (T_star - t) / (2(k-1))}: growth of the certainty
    // equivalent of the loss budget under the optimal threshold dynamics.
    double penalty_factor(double t) const {
        const double th = model_.theta();
        return std::exp(th * th * tau(t) / (2.0 * (k_ - 1.0)));
    }

    double call(double t, double x, double lambda) const {
        return bs_call_price(x, strike_, model_.sigma, tau(t), lambda);
    }

    // V(t,x,p) = C(t,x,lambda) - (-kp)^{1/k} * penalty_factor(t)
    double value(double t, double x, double p, double lambda) const {
        check_p(p, true);
        return call(t, x, lambda) - root(p) * penalty_factor(t);
    }

    double value_x(double t, double x, double p, double lambda) const {
        check_p(p, true);
        return bs_delta(x, strike_, model_.sigma, tau(t), lambda);
    }

    double value_xx(double t, double x, double p, double lambda) const {
        check_p(p, true);
        return bs_gamma(x, strike_, model_.sigma, tau(t), lambda);
    }

    double value_p(double t, double p) const {
        check_p(p, false);
        return std::pow(-k_ * p, 1.0 / k_ - 1.0) * penalty_factor(t);
    }

    double value_pp(double t, double p) const {
        check_p(p, false);
        return (k_ - 1.0) * std::pow(-k_ * p, 1.0 / k_ - 2.0) * penalty_factor(t);
    }

    // Cross derivative vanishes: the budget term does not involve x.
    double value_xp(double, double, double) const { return 0.0; }

    double value_t(double t, double x, double p, double lambda) const {
        check_p(p, true);
        const double th = model_.theta();
        const double decay = root(p) * th * th / (2.0 * (k_ - 1.0)) * penalty_factor(t);
        return bs_theta(x, strike_, model_.sigma, tau(t), lambda) + decay;
    }

    // p * V_p and p^2 * V_pp in forms that stay finite as p -> 0-.
    double p_value_p(double t, double p) const {
        check_p(p, true);
        return -root(p) * penalty_factor(t) / k_;
    }

    double p2_value_pp(double t, double p) const {
        check_p(p, true);
        return (k_ - 1.0) / (k_ * k_) * root(p) * penalty_factor(t);
    }

    // Conjugate map: largest loss budget compatible with capital y, i.e.
    // U(t, x, V(t,x,p), lambda) = p.
    double conjugate(double t, double x, double y, double lambda) const {
        const double gap = call(t, x, lambda) - y;
        if (gap <= 0.0) return 0.0;
        const double th = model_.theta();
        const double damp = std::exp(-k_ * th * th * tau(t) / (2.0 * (k_ - 1.0)));
        return -std::pow(gap, k_) / k_ * damp;
    }

    // Optimal volatility loading of the threshold process (constant here).
    double optimal_a() const { return -k_ * model_.theta() / (k_ - 1.0); }

    // Hedge ratio nu = V_x + a p V_p / (x sigma) at the feedback control a.
    double hedge_ratio(double t, double x, double p, double lambda) const {
        return value_x(t, x, p, lambda) +
               optimal_a() * p_value_p(t, p) / (x * model_.sigma);
    }

    // Closed-form threshold path: from state (t, x, p), the optimal P at a
    // later time s given the asset moved to xs. A martingale under the
    // physical measure.
    double p_explicit(double t, double x, double p, double s, double xs) const {
        check_p(p, true);
        if (!(s >= t)) throw std::invalid_argument("p_explicit: s must be >= t");
        if (p == 0.0) return 0.0;
        const double th = model_.theta();
        const double km1 = k_ - 1.0;
        const double b = -(k_ / km1) * model_.mu / (model_.sigma * model_.sigma);
        const double gamma = k_ * (th * th - model_.mu) / (2.0 * km1) -
                             k_ * th * th / (2.0 * km1 * km1);
        return p * std::pow(xs / x, b) * std::exp(gamma * (s - t));
    }

private:
    double tau(double t) const {
        if (!(t <= T_star_)) throw std::invalid_argument("CompleteMarket: t must be <= T_star");
        return T_star_ - t;
    }

    double root(double p) const { return std::pow(-k_ * p, 1.0 / k_); }

    static void check_p(double p, bool allow_zero) {
        if (allow_zero ? !(p <= 0.0) : !(p < 0.0))
            throw std::domain_error("CompleteMarket: loss budget p must be negative");
    }

    ModelParams model_;
    double k_;
    double strike_;
    double T_star_;
};

// One risk-neutral step of the pair (X, P): same shock drives both, the
// threshold loading a is the control. X is driftless under pricing dynamics;
// P compensates so that V(t, X, P) is a martingale.
inline double q_step_x(double x, double sigma, double dt, double eps) {
    return x * std::exp(sigma * std::sqrt(dt) * eps - 0.5 * sigma * sigma * dt);
}

inline double step_p(double p, double a, double theta, double dt, double eps) {
    return p * std::exp(a * std::sqrt(dt) * eps - a * (theta + 0.5 * a) * dt);
}

}  // namespace shortfall

#endif
