#include "shortfall/quadrature.hpp"

namespace shortfall {

QuadRule gauss_legendre(std::size_t n, double a, double b) {
    if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
    if (!(b > a)) throw std::invalid_argument("gauss_legendre: need b > a");
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    const double xm = 0.5 * (b + a);
    const double xl = 0.5 * (b - a);
    for (std::size_t i = 0; i < m; ++i) {
        // Tricomi initial guess for the i-th root of P_n, refined by Newton.
        double z = std::cos(3.141592653589793 * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double dj = static_cast<double>(j);
                p1 = ((2.0 * dj - 1.0) * z * p2 - (dj - 1.0) * p3) / dj;
            }
            pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::fabs(dz) < 1e-15) break;
        }
        rule.nodes[i] = xm - xl * z;
        rule.nodes[n - 1 - i] = xm + xl * z;
        const double w = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

QuadRule gauss_hermite_prob(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_hermite_prob: n must be positive");
    // Physicists' rule (weight e^{-x^2}) via Newton on the orthonormal
    // recurrence, then map x -> sqrt(2) x, w -> w / sqrt(pi).
    std::vector<double> x(n), w(n);
    const std::size_t m = (n + 1) / 2;
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dn = static_cast<double>(n);
        if (i == 0) {
            z = std::sqrt(2.0 * dn + 1.0) - 1.85575 * std::pow(2.0 * dn + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(dn, 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * x[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * x[1];
        } else {
            z = 2.0 * z - x[i - 2];
        }
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = pim4;
            double p2 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double dj = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / dj) * p2 - std::sqrt((dj - 1.0) / dj) * p3;
            }
            pp = std::sqrt(2.0 * dn) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::fabs(dz) < 1e-14 * std::max(1.0, std::fabs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double inv_sqrt_pi = 0.5641895835477563;
    for (std::size_t i = 0; i < n; ++i) {
        // store ascending
        rule.nodes[i] = 1.4142135623730951 * x[n - 1 - i];
        rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
    }
    return rule;
}

}  // namespace shortfall
