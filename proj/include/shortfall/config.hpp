#ifndef SHORTFALL_CONFIG_HPP
#define SHORTFALL_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shortfall/model.hpp"
#include "shortfall/solver.hpp"

namespace shortfall {

struct PricePoint {
    double t = 0.0;
    double x = 50.89;
    double p = -0.1;
    double lambda = 1.0;
};

struct PriceSection {
    std::vector<PricePoint> points{PricePoint{}};
};

struct FaceliftSection {
    std::size_t n_x = 41;
    double x_lo_mult = 0.5;
    double x_hi_mult = 2.0;
    std::vector<double> p_values{-0.1};
};

struct BacktestSection {
    double lambda0 = 1.0012;
    std::size_t n_paths = 10000;
    bool naive_realized_lambda = true;
    // strikes K = gamma * lambda0 * x0 for the capital/risk sweep
    std::vector<double> gammas{0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2};
    // explicit loss budgets |p| for the capital sweep; empty = matched mode only
    std::vector<double> p_abs;
    bool match_capital = true;
    std::vector<double> cvar_levels{0.90, 0.95, 0.99};
};

struct CalibrateSection {
    std::string month_quotes;
    std::string quarter_quotes;
};

struct ValidateSection {
    double tol_value = 0.01;
    double tol_strategy = 0.05;
    std::vector<std::size_t> layers{1, 5, 10, 15, 19};
    double x_lo_rel = 0.7;  // evaluation window around x0, relative
    double x_hi_rel = 1.3;
    std::size_t n_eval = 121;
};

// One experiment bundle: sections model/option/loss/law/solver plus the
// command-specific blocks. Every command reads the same file; flags override
// individual keys.
struct AppConfig {
    ModelParams model{0.1, 0.28};
    OptionSpec opt{50.89, 128.0 / 250.0, 184.0 / 250.0};
    LossSpec loss{2.0, 50.0};
    ShapingLaw law = ShapingLaw::degenerate(1.0012);
    SolverConfig solver;
    double x0 = 50.89;
    double p0 = -0.1;
    double dt = 1.0 / 250.0;          // time-layer spacing and rebalancing step
    std::uint64_t seed = 20240814;    // feeds both the solver engine and the backtest draws
    PriceSection price;
    FaceliftSection facelift;
    BacktestSection backtest;
    CalibrateSection calibrate;
    ValidateSection validate;

    TimeGrid time_grid() const;  // [0, T] in steps of dt; T must align
};

// Strict parse: unknown keys, wrong types, and out-of-range values are
// rejected with the JSON path in the message (std::invalid_argument).
AppConfig parse_config_json(const std::string& text, const std::string& origin);
AppConfig load_config(const std::string& path);

}  // namespace shortfall

#endif
