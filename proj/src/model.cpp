#include "shortfall/model.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <limits>
#include <numeric>

namespace shortfall {

ShapingLaw ShapingLaw::empirical(std::vector<double> atoms, std::vector<double> probs) {
    if (atoms.empty() || atoms.size() != probs.size())
        throw std::invalid_argument("ShapingLaw: empirical law needs matching non-empty atoms/probs");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (!(atoms[i] > 0.0)) throw std::invalid_argument("ShapingLaw: atoms must be positive");
        if (!(probs[i] >= 0.0)) throw std::invalid_argument("ShapingLaw: probs must be non-negative");
        total += probs[i];
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("ShapingLaw: empirical probs must sum to 1");
    for (double& p : probs) p /= total;
    ShapingLaw law;
    law.kind = Kind::empirical;
    law.atoms = std::move(atoms);
    law.probs = std::move(probs);
    return law;
}

double ShapingLaw::support_min() const {
    switch (kind) {
        case Kind::degenerate: return value;
        case Kind::scaled_beta: return 0.0;
        case Kind::empirical: return *std::min_element(atoms.begin(), atoms.end());
    }
    return 0.0;
}

double ShapingLaw::support_max() const {
    switch (kind) {
        case Kind::degenerate: return value;
        case Kind::scaled_beta: return scale;
        case Kind::empirical: return *std::max_element(atoms.begin(), atoms.end());
    }
    return 0.0;
}

double ShapingLaw::mean() const {
    switch (kind) {
        case Kind::degenerate:
            return value;
        case Kind::scaled_beta:
            return scale * alpha / (alpha + beta);
        case Kind::empirical:
            return std::inner_product(atoms.begin(), atoms.end(), probs.begin(), 0.0);
    }
    return 0.0;
}

double ShapingLaw::sample(double u) const {
    switch (kind) {
        case Kind::degenerate:
            return value;
        case Kind::scaled_beta:
            return scale * boost::math::ibeta_inv(alpha, beta, u);
        case Kind::empirical: {
            double acc = 0.0;
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                acc += probs[i];
                if (u <= acc) return atoms[i];
            }
            return atoms.back();
        }
    }
    return value;
}

QuadRule ShapingLaw::quadrature(std::size_t n) const {
    QuadRule rule;
    switch (kind) {
        case Kind::degenerate:
            rule.nodes = {value};
            rule.weights = {1.0};
            return rule;
        case Kind::empirical:
            rule.nodes = atoms;
            rule.weights = probs;
            return rule;
        case Kind::scaled_beta:
            break;
    }
    if (n < 2) throw std::invalid_argument("ShapingLaw: beta quadrature needs at least 2 nodes");
    rule = gauss_legendre(n, 0.0, scale);
    const double log_scale = std::log(scale);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rule.nodes[i] / scale;
        rule.weights[i] *= std::exp(beta_log_pdf(u, alpha, beta) - log_scale);
        mass += rule.weights[i];
    }
    // The raw rule must already capture essentially all the mass; a visible
    // defect means the node count under-resolves the density.
    if (std::fabs(mass - 1.0) > 1e-6)
        throw numerical_error("ShapingLaw: quadrature mass defect " + std::to_string(mass - 1.0) +
                              "; increase node count");
    for (double& w : rule.weights) w /= mass;
    return rule;
}

}  // namespace shortfall
