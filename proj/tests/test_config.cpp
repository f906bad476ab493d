#include <cmath>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "shortfall/config.hpp"

using namespace shortfall;

TEST_CASE("empty document keeps the defaults") {
    const AppConfig cfg = parse_config_json("{}", "test");
    CHECK(cfg.model.mu == 0.1);
    CHECK(cfg.model.sigma == 0.28);
    CHECK(cfg.opt.strike == 50.89);
    CHECK(cfg.loss.k == 2.0);
    CHECK(cfg.law.kind == ShapingLaw::Kind::degenerate);
    CHECK(cfg.solver.n_x == 81);
    CHECK(cfg.solver.n_p == 41);
    CHECK(cfg.backtest.gammas.size() == 8);
    CHECK(cfg.backtest.match_capital);
    CHECK(cfg.p0 == -0.1);
    CHECK(cfg.solver.seed == cfg.seed);
    CHECK(cfg.validate.layers == std::vector<std::size_t>{1, 5, 10, 15, 19});
}

TEST_CASE("full document round trip") {
    const std::string doc = R"({
        "model": {"mu": 0.1, "sigma": 0.28},
        "option": {"strike": 50.89, "T": 0.08, "T_star": 0.16},
        "loss": {"k": 2, "kappa": 50},
        "law": {"kind": "scaled_beta", "alpha": 114, "beta": 227, "scale": 3},
        "solver": {"n_x": 201, "n_p": 61, "x_lo_mult": 0.5, "x_hi_mult": 2.0,
                   "p_lo_mult": 0.1, "p_hi_mult": 10.0, "gh_nodes": 64, "threads": 4},
        "x0": 50.89, "p0": -0.1, "dt": 0.004, "seed": 12345,
        "backtest": {"lambda0": 1.0012, "n_paths": 10000, "gammas": [0.85, 1.2],
                     "p_abs": [0.05, 0.1], "match_capital": false},
        "price": {"points": [{"t": 0, "x": 50.89, "p": -0.1, "lambda": 1}]},
        "calibrate": {"month_quotes": "m.csv", "quarter_quotes": "q.csv"},
        "validate": {"tol_value": 0.01, "tol_strategy": 0.05, "layers": [1, 5], "n_eval": 61}
    })";
    const AppConfig cfg = parse_config_json(doc, "test");
    CHECK(cfg.law.kind == ShapingLaw::Kind::scaled_beta);
    CHECK(cfg.law.alpha == 114.0);
    CHECK(cfg.solver.n_x == 201);
    CHECK(cfg.solver.threads == 4);
    CHECK(cfg.solver.seed == 12345);
    CHECK(cfg.backtest.p_abs == std::vector<double>{0.05, 0.1});
    CHECK(!cfg.backtest.match_capital);
    CHECK(cfg.calibrate.month_quotes == "m.csv");
    CHECK(cfg.validate.n_eval == 61);
    const TimeGrid g = cfg.time_grid();
    CHECK(g.n_steps == 20);
    CHECK(g.dt == 0.004);
}

TEST_CASE("strictness: unknown keys, types, and domains are rejected") {
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"solver": {"n_xx": 10}})", "test"),
                         doctest::Contains("test.solver.n_xx"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"model": {"sigma": "wide"}})", "test"),
                         doctest::Contains("expected a number"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"seed": -3})", "test"),
                         doctest::Contains("nonnegative integer"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"p0": 0.1})", "test"),
                         doctest::Contains("negative"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"law": {"kind": "cauchy"}})", "test"),
                         doctest::Contains("unknown law kind"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"law": {"value": 1.0}})", "test"),
                         doctest::Contains("missing required key"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_json("[1,2]", "test"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json("{not json", "test"), doctest::Contains("test"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"model": {"sigma": -1}})", "test"),
                         doctest::Contains("sigma"), std::invalid_argument);
    // T that does not sit on the dt lattice is caught when the grid is built
    const AppConfig cfg =
        parse_config_json(R"({"option": {"T": 0.1, "T_star": 0.2}, "dt": 0.03})", "test");
    CHECK_THROWS_WITH_AS(cfg.time_grid(), doctest::Contains("integer number"),
                         std::invalid_argument);
}

TEST_CASE("empirical law block") {
    const AppConfig cfg = parse_config_json(
        R"({"law": {"kind": "empirical", "atoms": [0.9, 1.2], "probs": [0.5, 0.5]}})", "test");
    CHECK(cfg.law.kind == ShapingLaw::Kind::empirical);
    CHECK(cfg.law.mean() == doctest::Approx(1.05));
}

TEST_CASE("missing config file reports the path") {
    CHECK_THROWS_WITH_AS(load_config("no_such_config.json"),
                         doctest::Contains("no_such_config.json"), std::invalid_argument);
}
