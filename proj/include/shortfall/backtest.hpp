#ifndef SHORTFALL_BACKTEST_HPP
#define SHORTFALL_BACKTEST_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shortfall/model.hpp"
#include "shortfall/solver.hpp"

namespace shortfall {

struct BacktestConfig {
    ModelParams model;
    LossSpec loss;
    OptionSpec opt;
    ShapingLaw law;
    double x0 = 50.89;
    double lambda0 = 1.0012;  // the naive agent's point belief about the scale
    std::size_t n_paths = 10000;
    double dt = 1.0 / 250.0;
    std::uint64_t seed = 20240814;
    // After the revelation the naive agent prices on the realized scale; the
    // alternative (keep trading on lambda0) is exposed as a switch.
    bool naive_realized_lambda = true;
    std::size_t threads = 0;

    void validate() const;
    std::size_t steps_to_T() const;
    std::size_t steps_T_to_horizon() const;
};

struct HedgeReport {
    std::string strategy;  // "SR" or "BS"
    double initial_capital = 0.0;
    double expected_loss = 0.0;   // mean of l(e+)
    double shortfall_risk = 0.0;  // (mean of l(e+))^{1/k}
    double mean_error = 0.0;
    double stddev_error = 0.0;
    double ci_halfwidth = 0.0;  // 1.96 sd / sqrt(M) for the mean error
    std::vector<double> cvar_levels{0.90, 0.95, 0.99};
    std::vector<double> cvar_values;
    std::size_t breach_count = 0;   // paths whose wealth crossed the credit line
    std::size_t clamped_steps = 0;  // surface queries projected back onto the grid
    std::vector<double> errors;     // terminal error per path, path order
};

// (E[l(e+)])^{1/k}: currency-homogeneous shortfall statistic.
double shortfall_risk(const std::vector<double>& errors, const LossSpec& spec);

// Mean of the worst (1-q) fraction of errors (empirical expected shortfall).
double cvar(const std::vector<double>& errors, double q);

// Shortfall-risk strategy: surface-driven on [0, T], threshold reset at the
// revelation, closed-form complete-market continuation on [T, T*].
HedgeReport run_sr(const BacktestConfig& cfg, const ValueSurface& surface, double p0);

// Naive benchmark: Black-Scholes capital and delta under the point belief.
HedgeReport run_bs_naive(const BacktestConfig& cfg);

// Complete-market leg in isolation: hedge a known scale over [0, horizon]
// from the closed-form capital for budget p. refine subdivides each dt into
// equal substeps while reusing the same Brownian path (shocks are drawn on
// the finest grid, refine <= max_refine, and aggregated), so constraint
// attainment can be tracked across rebalancing frequencies without
// resampling noise.
HedgeReport run_complete_leg(const ModelParams& model, const LossSpec& loss, double strike,
                             double horizon, double x_start, double lambda, double p, double dt,
                             std::size_t n_paths, std::uint64_t seed, std::size_t refine = 1,
                             std::size_t max_refine = 1, std::size_t threads = 0);

// |p| such that the solved surface prices at target_capital at (0, x0).
double match_capital(const ValueSurface& surface, double x0, double target_capital);

struct PairedComparison {
    double mean_loss_diff = 0.0;  // mean over paths of l(e+_a) - l(e+_b)
    double ci_halfwidth = 0.0;
    bool significant() const { return mean_loss_diff + ci_halfwidth < 0.0; }
};

// Paired per-path comparison on the loss scale; both reports must come from
// runs with the same seed (common random numbers).
PairedComparison paired_loss_comparison(const HedgeReport& a, const HedgeReport& b, double k);

void write_paths_csv(const HedgeReport& report, const std::string& path);
void write_summary_csv(const std::vector<HedgeReport>& reports, const std::string& path);

}  // namespace shortfall

#endif
