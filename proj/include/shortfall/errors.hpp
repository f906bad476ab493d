#ifndef SHORTFALL_ERRORS_HPP
#define SHORTFALL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shortfall {

// Breakdown of a numerical procedure (quadrature defect, interpolation far
// outside the grid, loss of convexity, ...). Distinct from invalid_argument /
// domain_error so the CLI can map it to its own exit code.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shortfall

#endif
