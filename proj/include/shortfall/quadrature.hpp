#ifndef SHORTFALL_QUADRATURE_HPP
#define SHORTFALL_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace shortfall {

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

// Gauss-Legendre rule on [a, b]; weights sum to b - a.
QuadRule gauss_legendre(std::size_t n, double a, double b);

// Gauss-Hermite rule in probabilists' form: nodes are standard-normal
// abscissae, weights sum to 1, so sum_i w_i f(x_i) ~ E[f(Z)], Z ~ N(0,1).
QuadRule gauss_hermite_prob(std::size_t n);

}  // namespace shortfall

#endif
