#ifndef SHORTFALL_SOLVER_HPP
#define SHORTFALL_SOLVER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shortfall/facelift.hpp"
#include "shortfall/model.hpp"

namespace shortfall {

struct SolverConfig {
    std::size_t n_x = 81;
    std::size_t n_p = 41;
    double x_lo_mult = 0.5;    // x grid spans [x0 * lo, x0 * hi]
    double x_hi_mult = 2.0;
    double p_lo_mult = 0.01;   // |p| grid spans [|p0| * lo, |p0| * hi]
    double p_hi_mult = 100.0;
    std::size_t gh_nodes = 64;       // quadrature engine order
    std::size_t mc_particles = 0;    // > 0 switches the one-step expectations to Monte Carlo
    std::uint64_t seed = 7789;       // Monte Carlo engine only
    double fp_tol = 1e-3;            // fixed-point stop on |a' - a|
    std::size_t fp_max_iters = 3;
    double extrap_mult = 4.0;        // error if a transition lands further than this factor
                                     // beyond the grid edge (flat clamp inside)
    std::size_t lambda_nodes = 128;  // facelift quadrature at the terminal layer
    std::size_t threads = 0;         // 0 = env/hardware

    void validate() const;
};

// Backward-in-time stack of value, budget derivatives, and control on a fixed
// tensor grid in (log x, log(-p)). Layer i corresponds to time t_i = i dt;
// layer N is the face-lifted terminal condition at T.
class ValueSurface {
public:
    std::vector<double> log_x;   // ascending, uniform
    std::vector<double> log_mp;  // log(-p), ascending, uniform
    TimeGrid tgrid;
    ModelParams model;
    double k = 2.0;

    // fields[layer][ix * n_p + jp]
    std::vector<std::vector<double>> v, vp, vpp, vxp, a;
    std::vector<std::vector<double>> vx;                 // derived: d v / d x
    std::vector<std::vector<std::uint8_t>> fp_iters;     // fixed-point iterations used
    std::vector<std::vector<std::uint8_t>> fp_converged;
    std::vector<std::string> warnings;

    std::size_t n_x() const { return log_x.size(); }
    std::size_t n_p() const { return log_mp.size(); }
    std::size_t n_layers() const { return v.size(); }
    std::size_t idx(std::size_t ix, std::size_t jp) const { return ix * n_p() + jp; }

    double x_node(std::size_t ix) const;
    double p_node(std::size_t jp) const;

    struct Eval {
        double v, vp, vpp, vxp, a;
    };
    // bilinear in (log x, log(-p)) with flat extrapolation at the edges;
    // throws numerical_error when (x, p) lies beyond extrap_mult times the range
    Eval at(std::size_t layer, double x, double p) const;

    double value_at(std::size_t layer, double x, double p) const { return at(layer, x, p).v; }
    double control_at(std::size_t layer, double x, double p) const { return at(layer, x, p).a; }
    double vx_at(std::size_t layer, double x, double p) const;

    // hedge ratio nu = V_x + a p V_p / (x sigma) from interpolated fields
    double hedge_at(std::size_t layer, double x, double p) const;

    double extrap_mult = 4.0;

private:
    friend ValueSurface solve_backward(const ModelParams&, const LossSpec&, const OptionSpec&,
                                       const ShapingLaw&, double, double, const TimeGrid&,
                                       const SolverConfig&);
    void locate(double logv, const std::vector<double>& axis, std::size_t& i0, double& w) const;
};

// Backward sweep from the face-lifted terminal layer at T down to 0. The time
// grid must end at the option's revelation date T. x0, p0 center the grids.
ValueSurface solve_backward(const ModelParams& model, const LossSpec& loss, const OptionSpec& opt,
                            const ShapingLaw& law, double x0, double p0, const TimeGrid& tgrid,
                            const SolverConfig& cfg);

// CSV export with columns (i, t_i, x, p, V, V_p, V_xp, V_pp, a).
void write_surface_csv(const ValueSurface& surface, const std::string& path);

}  // namespace shortfall

#endif
