#ifndef SHORTFALL_RNG_HPP
#define SHORTFALL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace shortfall {

// Counter-based uniform/Gaussian stream (Philox4x32-10). Every draw is a pure
// function of (seed, stream, index), so replays and per-path/per-node streams
// are reproducible under any thread count.

namespace detail {

struct PhiloxBlock {
    std::uint32_t w[4];
};

inline PhiloxBlock philox4x32(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint32_t c0 = static_cast<std::uint32_t>(index);
    std::uint32_t c1 = static_cast<std::uint32_t>(index >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(seed);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
    for (int round = 0; round < 10; ++round) {
        std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c0;
        std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c2;
        std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
        std::uint32_t n1 = static_cast<std::uint32_t>(p1);
        std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
        std::uint32_t n3 = static_cast<std::uint32_t>(p0);
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return PhiloxBlock{{c0, c1, c2, c3}};
}

}  // namespace detail

// Standard normal CDF, abs error ~1e-16 via erfc.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730951);
}

inline double normal_pdf(double x) {
    return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

// Inverse standard normal CDF (Wichura AS241, double precision).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");
    const double r = p - 0.5;
    if (std::fabs(r) <= 0.425) {
        const double s = 0.180625 - r * r;
        return r *
            (((((((2.5090809287301226727e+3 * s + 3.3430575583588128105e+4) * s +
                  6.7265770927008700853e+4) * s + 4.5921953931549871457e+4) * s +
                1.3731693765509461125e+4) * s + 1.9715909503065514427e+3) * s +
              1.3314166789178437745e+2) * s + 3.3871328727963666080e+0) /
            (((((((5.2264952788528545610e+3 * s + 2.8729085735721942674e+4) * s +
                  3.9307895800092710610e+4) * s + 2.1213794301586595867e+4) * s +
                5.3941960214247511077e+3) * s + 6.8718700749205790830e+2) * s +
              4.2313330701600911252e+1) * s + 1.0);
    }
    double q = (r < 0.0) ? p : 1.0 - p;
    double s = std::sqrt(-std::log(q));
    double value;
    if (s <= 5.0) {
        s -= 1.6;
        value =
            (((((((7.74545014278341407640e-4 * s + 2.27238449892691845833e-2) * s +
                  2.41780725177450611770e-1) * s + 1.27045825245236838258e+0) * s +
                3.64784832476320460504e+0) * s + 5.76949722146069140550e+0) * s +
              4.63033784615654529590e+0) * s + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * s + 5.47593808499534494600e-4) * s +
                  1.51986665636164571966e-2) * s + 1.48103976427480074590e-1) * s +
                6.89767334985100004550e-1) * s + 1.67638483018380384940e+0) * s +
              2.05319162663775882187e+0) * s + 1.0);
    } else {
        s -= 5.0;
        value =
            (((((((2.01033439929228813265e-7 * s + 2.71155556874348757815e-5) * s +
                  1.24266094738807843860e-3) * s + 2.65321895265761230930e-2) * s +
                2.96560571828504891230e-1) * s + 1.78482653991729133580e+0) * s +
              5.46378491116411436990e+0) * s + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * s + 1.42151175831644588870e-7) * s +
                  1.84631831751005468180e-5) * s + 7.86869131145613259100e-4) * s +
                1.48753612908506148525e-2) * s + 1.36929880922735805310e-1) * s +
              5.99832206555887937690e-1) * s + 1.0);
    }
    return (r < 0.0) ? -value : value;
}

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream), block_index_(0), sub_(0) {}

    // i-th raw 64-bit word of this stream, independent of draw order.
    std::uint64_t word_at(std::uint64_t i) const {
        const detail::PhiloxBlock b = detail::philox4x32(seed_, stream_, i >> 1);
        const int half = static_cast<int>(i & 1u) * 2;
        return static_cast<std::uint64_t>(b.w[half]) |
               (static_cast<std::uint64_t>(b.w[half + 1]) << 32);
    }

    double uniform_at(std::uint64_t i) const {
        // 53-bit mantissa, strictly inside (0,1)
        return static_cast<double>(word_at(i) >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double gaussian_at(std::uint64_t i) const { return normal_quantile(uniform_at(i)); }

    double uniform() { return uniform_at(next_index()); }
    double gaussian() { return gaussian_at(next_index()); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t next_index() {
        const std::uint64_t i = (block_index_ << 1) | sub_;
        sub_ ^= 1u;
        if (sub_ == 0) ++block_index_;
        return i;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_index_;
    std::uint64_t sub_;
};

}  // namespace shortfall

#endif
