#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <string>

#include "shortfall/complete_market.hpp"
#include "shortfall/errors.hpp"
#include "shortfall/facelift.hpp"
#include "shortfall/solver.hpp"

using namespace shortfall;

namespace {
const ModelParams kModel{0.1, 0.28};
const LossSpec kLoss{2.0, 50.0};
constexpr double x0 = 50.89;
constexpr double p0 = -0.1;
constexpr double lambda0 = 1.0;

SolverConfig small_config() {
    SolverConfig cfg;
    cfg.n_x = 61;
    cfg.n_p = 31;
    cfg.x_lo_mult = 0.6;
    cfg.x_hi_mult = 1.7;
    cfg.p_lo_mult = 0.3;
    cfg.p_hi_mult = 3.0;
    cfg.gh_nodes = 32;
    cfg.threads = 2;
    return cfg;
}
}  // namespace

TEST_CASE("terminal layer reproduces the face-lift and its constant control") {
    const OptionSpec opt{50.89, 20.0 / 250.0, 40.0 / 250.0};
    const auto law = ShapingLaw::degenerate(lambda0);
    const auto cfg = small_config();
    const TimeGrid grid{opt.T, 1.0, 0};  // N = 0: all terminal
    const auto s = solve_backward(kModel, kLoss, opt, law, x0, p0, grid, cfg);
    REQUIRE(s.n_layers() == 1);
    const FaceliftTarget ft(kModel, kLoss, opt, law, cfg.lambda_nodes);
    const double a_star = -kLoss.k * kModel.theta() / (kLoss.k - 1.0);
    for (std::size_t ix = 0; ix < s.n_x(); ix += 7) {
        for (std::size_t jp = 0; jp < s.n_p(); jp += 5) {
            const std::size_t n = s.idx(ix, jp);
            const auto d = ft.xi_inverse_derivatives(s.x_node(ix), s.p_node(jp));
            CHECK(s.v[0][n] == d.y);
            CHECK(s.vp[0][n] == d.y_p);
            CHECK(s.a[0][n] == doctest::Approx(a_star).epsilon(1e-8));
            CHECK(s.vpp[0][n] > 0.0);
        }
    }
}

TEST_CASE("a vanishing time step is the identity transition") {
    const OptionSpec opt{50.89, 1e-14, 40.0 / 250.0};
    const auto cfg = small_config();
    const TimeGrid grid{0.0, 1e-14, 1};
    const auto s =
        solve_backward(kModel, kLoss, opt, ShapingLaw::degenerate(lambda0), x0, p0, grid, cfg);
    REQUIRE(s.n_layers() == 2);
    // away from the grid edges the one-step operator is the identity; at the
    // edges the interpolation kink contributes O(sqrt(dt)) noise
    for (std::size_t ix = 0; ix < s.n_x(); ++ix) {
        if (std::fabs(std::log(s.x_node(ix) / x0)) > 0.3) continue;
        for (std::size_t jp = 0; jp < s.n_p(); ++jp) {
            const std::size_t n = s.idx(ix, jp);
            CHECK(s.v[0][n] == doctest::Approx(s.v[1][n]).epsilon(1e-6));
            CHECK(s.vp[0][n] == doctest::Approx(s.vp[1][n]).epsilon(1e-5));
        }
    }
}

TEST_CASE("one backward step matches the closed form away from the edges") {
    const double dt = 1.0 / 250.0;
    const OptionSpec opt{50.89, dt, 40.0 / 250.0};
    const auto cfg = small_config();
    const TimeGrid grid{0.0, dt, 1};
    const auto s =
        solve_backward(kModel, kLoss, opt, ShapingLaw::degenerate(lambda0), x0, p0, grid, cfg);
    const CompleteMarket cm(kModel, kLoss.k, opt.strike, opt.T_star);
    double max_err = 0.0, max_ref = 0.0;
    for (std::size_t ix = 0; ix < s.n_x(); ++ix) {
        const double x = s.x_node(ix);
        if (std::fabs(std::log(x / x0)) > 0.3) continue;
        for (std::size_t jp = 0; jp < s.n_p(); ++jp) {
            const double p = s.p_node(jp);
            const double ref = cm.value(0.0, x, p, lambda0);
            max_err = std::max(max_err, std::fabs(s.v[0][s.idx(ix, jp)] - ref));
            max_ref = std::max(max_ref, std::fabs(ref));
        }
    }
    CHECK(max_err < 1e-3 * max_ref);
}

TEST_CASE("zero drift pins the control at zero in one iteration") {
    const ModelParams flat{0.0, 0.28};
    const OptionSpec opt{50.89, 2.0 / 250.0, 40.0 / 250.0};
    auto cfg = small_config();
    cfg.n_x = 21;
    cfg.n_p = 11;
    const TimeGrid grid{0.0, 1.0 / 250.0, 2};
    const auto s =
        solve_backward(flat, kLoss, opt, ShapingLaw::degenerate(lambda0), x0, p0, grid, cfg);
    for (std::size_t layer = 0; layer < 2; ++layer) {
        for (std::size_t n = 0; n < s.a[layer].size(); ++n) {
            CHECK(std::fabs(s.a[layer][n]) < 1e-12);
            CHECK(s.fp_converged[layer][n] == 1);
            CHECK(s.fp_iters[layer][n] == 1);
        }
    }
}

TEST_CASE("interpolation hits nodes exactly and is bilinear in the log axes") {
    const OptionSpec opt{50.89, 2.0 / 250.0, 40.0 / 250.0};
    auto cfg = small_config();
    cfg.n_x = 21;
    cfg.n_p = 11;
    const TimeGrid grid{0.0, 1.0 / 250.0, 2};
    const auto s =
        solve_backward(kModel, kLoss, opt, ShapingLaw::degenerate(lambda0), x0, p0, grid, cfg);
    const std::size_t ix = 9, jp = 4;
    const auto e = s.at(0, s.x_node(ix), s.p_node(jp));
    CHECK(e.v == s.v[0][s.idx(ix, jp)]);
    CHECK(e.vp == s.vp[0][s.idx(ix, jp)]);
    CHECK(e.a == s.a[0][s.idx(ix, jp)]);
    // midpoint in log x at a fixed p node: exact average of the two nodes
    const double xm = std::exp(0.5 * (s.log_x[ix] + s.log_x[ix + 1]));
    const auto em = s.at(0, xm, s.p_node(jp));
    CHECK(em.v == doctest::Approx(0.5 * (s.v[0][s.idx(ix, jp)] + s.v[0][s.idx(ix + 1, jp)]))
                      .epsilon(1e-13));
    // far outside the allowed extrapolation margin
    CHECK_THROWS_AS(s.at(0, x0 * 1e4, p0), numerical_error);
    CHECK_THROWS_AS(s.at(0, x0, -1e6), numerical_error);
    CHECK_THROWS_AS(s.at(0, x0, 0.5), std::domain_error);
}

TEST_CASE("quadrature and monte-carlo engines agree") {
    const OptionSpec opt{50.89, 2.0 / 250.0, 40.0 / 250.0};
    auto cfg = small_config();
    cfg.n_x = 15;
    cfg.n_p = 9;
    const TimeGrid grid{0.0, 1.0 / 250.0, 2};
    const auto law = ShapingLaw::degenerate(lambda0);
    const auto gh = solve_backward(kModel, kLoss, opt, law, x0, p0, grid, cfg);
    auto cfg_mc = cfg;
    cfg_mc.mc_particles = 20000;
    cfg_mc.seed = 99101;
    const auto mc = solve_backward(kModel, kLoss, opt, law, x0, p0, grid, cfg_mc);
    for (std::size_t n = 0; n < gh.v[0].size(); ++n)
        CHECK(mc.v[0][n] == doctest::Approx(gh.v[0][n]).epsilon(0.02));
    // Monte Carlo engine is reproducible under a fixed seed
    const auto mc2 = solve_backward(kModel, kLoss, opt, law, x0, p0, grid, cfg_mc);
    CHECK(mc2.v[0] == mc.v[0]);
    CHECK(mc2.a[0] == mc.a[0]);
}

TEST_CASE("surfaces are identical across thread counts") {
    const OptionSpec opt{50.89, 2.0 / 250.0, 40.0 / 250.0};
    auto cfg = small_config();
    cfg.n_x = 15;
    cfg.n_p = 9;
    const TimeGrid grid{0.0, 1.0 / 250.0, 2};
    const auto law = ShapingLaw::degenerate(lambda0);
    auto cfg1 = cfg;
    cfg1.threads = 1;
    auto cfg4 = cfg;
    cfg4.threads = 4;
    const auto s1 = solve_backward(kModel, kLoss, opt, law, x0, p0, grid, cfg1);
    const auto s4 = solve_backward(kModel, kLoss, opt, law, x0, p0, grid, cfg4);
    CHECK(s1.v[0] == s4.v[0]);
    CHECK(s1.vp[0] == s4.vp[0]);
    CHECK(s1.a[0] == s4.a[0]);
}

TEST_CASE("surface csv export has the contracted shape") {
    const OptionSpec opt{50.89, 1.0 / 250.0, 40.0 / 250.0};
    auto cfg = small_config();
    cfg.n_x = 5;
    cfg.n_p = 3;
    const TimeGrid grid{0.0, 1.0 / 250.0, 1};
    const auto s =
        solve_backward(kModel, kLoss, opt, ShapingLaw::degenerate(lambda0), x0, p0, grid, cfg);
    const std::string path = "solver_test_surface.csv";
    write_surface_csv(s, path);
    std::FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    char line[512];
    REQUIRE(std::fgets(line, sizeof line, f) != nullptr);
    CHECK(std::string(line) == "i,t_i,x,p,V,V_p,V_xp,V_pp,a\n");
    std::size_t rows = 0;
    while (std::fgets(line, sizeof line, f)) ++rows;
    std::fclose(f);
    std::remove(path.c_str());
    CHECK(rows == s.n_layers() * s.n_x() * s.n_p());
}
