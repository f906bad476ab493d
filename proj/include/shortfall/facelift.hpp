#ifndef SHORTFALL_FACELIFT_HPP
#define SHORTFALL_FACELIFT_HPP

#include <cstddef>
#include <vector>

#include "shortfall/complete_market.hpp"
#include "shortfall/model.hpp"

namespace shortfall {

// Intermediary target at the revelation date T: the expected largest loss
// budget Xi(x, y) compatible with capital y once the scale law is integrated
// out, its generalized inverse (minimal capital for budget p), and the
// derivative fields the backward solver needs on its terminal layer.
class FaceliftTarget {
public:
    FaceliftTarget(ModelParams model, LossSpec loss, OptionSpec opt, ShapingLaw law,
                   std::size_t lambda_nodes = 128);

    // Xi(x,y) = E_law[ conjugate(T, x, y, lambda) ] <= 0, concave increasing in y.
    double xi(double x, double y) const;

    // Worst-case variant: max over the law's support of the conjugate map.
    double xi_robust(double x, double y, std::size_t grid_size = 513) const;

    // Minimal capital at T with budget p < 0: root of Xi(x, .) = p, clamped
    // at the credit line -kappa. p = 0 returns the superhedging face-lift.
    double xi_inverse(double x, double p) const;

    // Partial moments of the capital gap over the active set {C(lambda) > y}:
    // f_n = sum w (C - y)^n, with the tilde versions carrying d C / d x.
    struct Moments {
        double f_km1, ft_km1;  // exponent k-1
        double f_km2, ft_km2;  // exponent k-2
    };
    Moments f_moments(double x, double p) const;

    struct InverseDerivs {
        double y;  // xi_inverse itself
        double y_x, y_p, y_pp, y_xp;
        bool at_credit_line;
    };
    InverseDerivs xi_inverse_derivatives(double x, double p) const;

    const ShapingLaw& law() const { return law_; }
    const QuadRule& lambda_rule() const { return rule_; }
    const OptionSpec& option() const { return opt_; }
    const LossSpec& loss_spec() const { return loss_; }
    const CompleteMarket& complete_market() const { return cm_; }

private:
    std::vector<double> call_cache(double x) const;
    double xi_cached(const std::vector<double>& calls, double y) const;
    double inverse_cached(const std::vector<double>& calls, double x, double p) const;
    Moments moments_cached(const std::vector<double>& calls, double x, double y) const;

    ModelParams model_;
    LossSpec loss_;
    OptionSpec opt_;
    ShapingLaw law_;
    QuadRule rule_;
    CompleteMarket cm_;
    double damp_;  // exp{-k theta^2 (T*-T) / (2(k-1))}
};

}  // namespace shortfall

#endif
