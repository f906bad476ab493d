#include "shortfall/facelift.hpp"

#include <algorithm>
#include <cmath>

#include "shortfall/analytic.hpp"
#include "shortfall/errors.hpp"

namespace shortfall {

FaceliftTarget::FaceliftTarget(ModelParams model, LossSpec loss, OptionSpec opt, ShapingLaw law,
                               std::size_t lambda_nodes)
    : model_(model),
      loss_(loss),
      opt_(opt),
      law_(std::move(law)),
      rule_(law_.quadrature(lambda_nodes)),
      cm_(model, loss.k, opt.strike, opt.T_star) {
    model_.validate();
    loss_.validate();
    opt_.validate();
    const double th = model_.theta();
    damp_ = std::exp(-loss_.k * th * th * (opt_.T_star - opt_.T) / (2.0 * (loss_.k - 1.0)));
}

std::vector<double> FaceliftTarget::call_cache(double x) const {
    if (!(x > 0.0)) throw std::domain_error("FaceliftTarget: x must be positive");
    const double gap = opt_.T_star - opt_.T;
    std::vector<double> calls(rule_.size());
    for (std::size_t j = 0; j < rule_.size(); ++j)
        calls[j] = bs_call_price(x, opt_.strike, model_.sigma, gap, rule_.nodes[j]);
    return calls;
}

double FaceliftTarget::xi_cached(const std::vector<double>& calls, double y) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < calls.size(); ++j) {
        const double gap = calls[j] - y;
        if (gap > 0.0) acc += rule_.weights[j] * std::pow(gap, loss_.k);
    }
    return -damp_ * acc / loss_.k;
}

double FaceliftTarget::xi(double x, double y) const {
    if (y < -loss_.kappa) throw std::domain_error("FaceliftTarget: y below the credit line");
    return xi_cached(call_cache(x), y);
}

double FaceliftTarget::xi_robust(double x, double y, std::size_t grid_size) const {
    if (y < -loss_.kappa) throw std::domain_error("FaceliftTarget: y below the credit line");
    if (grid_size < 2) throw std::invalid_argument("FaceliftTarget: robust grid needs >= 2 points");
    const double lo = law_.support_min();
    const double hi = law_.support_max();
    double best = cm_.conjugate(opt_.T, x, y, std::max(lo, 1e-300));
    if (hi > lo) {
        for (std::size_t i = 1; i < grid_size; ++i) {
            const double lambda = lo + (hi - lo) * static_cast<double>(i) /
                                           static_cast<double>(grid_size - 1);
            best = std::max(best, cm_.conjugate(opt_.T, x, y, lambda));
        }
    }
    return best;
}

double FaceliftTarget::inverse_cached(const std::vector<double>& calls, double x, double p) const {
    if (!(x > 0.0)) throw std::domain_error("FaceliftTarget: x must be positive");
    if (p > 0.0) throw std::domain_error("FaceliftTarget: budget p must be <= 0");
    const double y_max = *std::max_element(calls.begin(), calls.end());
    if (p == 0.0) return std::max(y_max, -loss_.kappa);
    double lo = -loss_.kappa;
    if (xi_cached(calls, lo) >= p) return lo;  // budget generous enough at the credit line
    double hi = y_max;
    constexpr double tol = 1e-10;
    constexpr int cap = 200;
    int iter = 0;
    while (hi - lo > tol && iter++ < cap) {
        const double mid = 0.5 * (lo + hi);
        if (xi_cached(calls, mid) >= p)
            hi = mid;
        else
            lo = mid;
    }
    if (hi - lo > tol)
        throw numerical_error("FaceliftTarget: bisection failed to reach tolerance");
    // Newton polish: the slope d Xi / d y = damp * f_{k-1} is available in
    // closed form, so a couple of steps take the bracketed root to machine
    // precision (the derivative formulas downstream are sensitive to root bias).
    double y = hi;
    for (int step = 0; step < 3; ++step) {
        double slope = 0.0;
        for (std::size_t j = 0; j < calls.size(); ++j) {
            const double gap = calls[j] - y;
            if (gap > 0.0) slope += rule_.weights[j] * std::pow(gap, loss_.k - 1.0);
        }
        slope *= damp_;
        if (!(slope > 0.0)) break;
        const double resid = xi_cached(calls, y) - p;
        const double next = y - resid / slope;
        if (!(next > -loss_.kappa) || !(next < y_max) || !std::isfinite(next)) break;
        y = next;
        if (std::fabs(resid) <= 1e-15 * std::fabs(p)) break;
    }
    return y;
}

double FaceliftTarget::xi_inverse(double x, double p) const {
    return inverse_cached(call_cache(x), x, p);
}

FaceliftTarget::Moments FaceliftTarget::moments_cached(const std::vector<double>& calls, double x,
                                                       double y) const {
    if (loss_.k < 2.0)
        throw std::invalid_argument("FaceliftTarget: gap moments require k >= 2");
    const double gap_t = opt_.T_star - opt_.T;
    Moments m{0.0, 0.0, 0.0, 0.0};
    bool active = false;
    for (std::size_t j = 0; j < calls.size(); ++j) {
        const double gap = calls[j] - y;
        if (!(gap > 0.0)) continue;
        active = true;
        const double lambda = rule_.nodes[j];
        double dcdx;
        if (gap_t > 0.0 && lambda > 0.0) {
            dcdx = bs_delta(x, opt_.strike, model_.sigma, gap_t, lambda);
        } else {
            dcdx = (lambda * x > opt_.strike) ? lambda : 0.0;
        }
        const double w = rule_.weights[j];
        const double g1 = std::pow(gap, loss_.k - 1.0);
        const double g2 = std::pow(gap, loss_.k - 2.0);
        m.f_km1 += w * g1;
        m.ft_km1 += w * dcdx * g1;
        m.f_km2 += w * g2;
        m.ft_km2 += w * dcdx * g2;
    }
    if (!active)
        throw numerical_error("FaceliftTarget: empty active set (budget too close to 0)");
    return m;
}

FaceliftTarget::Moments FaceliftTarget::f_moments(double x, double p) const {
    const auto calls = call_cache(x);
    return moments_cached(calls, x, inverse_cached(calls, x, p));
}

FaceliftTarget::InverseDerivs FaceliftTarget::xi_inverse_derivatives(double x, double p) const {
    const auto calls = call_cache(x);
    const double y = inverse_cached(calls, x, p);
    if (y <= -loss_.kappa) {
        // constraint slack at the credit line: target locally flat
        return InverseDerivs{y, 0.0, 0.0, 0.0, 0.0, true};
    }
    const Moments m = moments_cached(calls, x, y);
    if (!(m.f_km1 > 0.0))
        throw numerical_error("FaceliftTarget: vanishing gap moment f_{k-1}");
    const double k = loss_.k;
    InverseDerivs d;
    d.y = y;
    d.at_credit_line = false;
    d.y_x = m.ft_km1 / m.f_km1;
    d.y_p = 1.0 / (damp_ * m.f_km1);
    d.y_pp = (k - 1.0) * (m.f_km2 / m.f_km1) * d.y_p * d.y_p;
    d.y_xp = (k - 1.0) * d.y_p * (m.ft_km1 * m.f_km2 - m.ft_km2 * m.f_km1) /
             (m.f_km1 * m.f_km1);
    return d;
}

}  // namespace shortfall
