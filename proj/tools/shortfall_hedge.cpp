#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shortfall/analytic.hpp"
#include "shortfall/backtest.hpp"
#include "shortfall/calibrate.hpp"
#include "shortfall/complete_market.hpp"
#include "shortfall/config.hpp"
#include "shortfall/errors.hpp"
#include "shortfall/facelift.hpp"
#include "shortfall/solver.hpp"

namespace {

using namespace shortfall;

class CsvFile {
public:
    CsvFile(const std::string& path) : f_(std::fopen(path.c_str(), "wb")), path_(path) {
        if (!f_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    ~CsvFile() {
        if (f_) std::fclose(f_);
    }
    CsvFile(const CsvFile&) = delete;
    CsvFile& operator=(const CsvFile&) = delete;
    std::FILE* get() { return f_; }

private:
    std::FILE* f_;
    std::string path_;
};

int cmd_price(const AppConfig& cfg, const std::string& out) {
    const CompleteMarket cm(cfg.model, cfg.loss.k, cfg.opt.strike, cfg.opt.T_star);
    struct Row {
        PricePoint pt;
        double call, value;
    };
    std::vector<Row> rows;
    for (const PricePoint& pt : cfg.price.points) {
        if (!(pt.p < 0.0))
            throw std::domain_error("price: loss budget p must be strictly negative");
        rows.push_back({pt, cm.call(pt.t, pt.x, pt.lambda),
                        cm.value(pt.t, pt.x, pt.p, pt.lambda)});
    }
    std::printf("%12s %12s %12s %12s %14s %14s\n", "t", "x", "p", "lambda", "call", "value");
    for (const Row& r : rows)
        std::printf("%12g %12g %12g %12g %14.8f %14.8f\n", r.pt.t, r.pt.x, r.pt.p, r.pt.lambda,
                    r.call, r.value);
    if (!out.empty()) {
        CsvFile f(out);
        std::fprintf(f.get(), "t,x,p,lambda,call,value\n");
        for (const Row& r : rows)
            std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.pt.t, r.pt.x, r.pt.p,
                         r.pt.lambda, r.call, r.value);
        std::printf("wrote %s\n", out.c_str());
    }
    return 0;
}

int cmd_facelift(const AppConfig& cfg, const std::string& out) {
    const FaceliftTarget target(cfg.model, cfg.loss, cfg.opt, cfg.law, cfg.solver.lambda_nodes);
    const std::string path = out.empty() ? "facelift.csv" : out;
    CsvFile f(path);
    std::fprintf(f.get(), "x,p,y,y_x,y_p,y_pp,y_xp,at_credit_line\n");
    const double lo = std::log(cfg.x0 * cfg.facelift.x_lo_mult);
    const double hi = std::log(cfg.x0 * cfg.facelift.x_hi_mult);
    const std::size_t n = cfg.facelift.n_x;
    for (double p : cfg.facelift.p_values) {
        for (std::size_t i = 0; i < n; ++i) {
            const double x =
                std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
            const auto d = target.xi_inverse_derivatives(x, p);
            std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", x, p, d.y,
                         d.y_x, d.y_p, d.y_pp, d.y_xp, d.at_credit_line ? 1 : 0);
        }
    }
    std::printf("tabulated the face-lifted target on %zu x-points x %zu budgets -> %s\n", n,
                cfg.facelift.p_values.size(), path.c_str());
    return 0;
}

int cmd_solve(const AppConfig& cfg, const std::string& out) {
    const TimeGrid grid = cfg.time_grid();
    const ValueSurface surface =
        solve_backward(cfg.model, cfg.loss, cfg.opt, cfg.law, cfg.x0, cfg.p0, grid, cfg.solver);
    for (const std::string& w : surface.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    const std::string path = out.empty() ? "surface.csv" : out;
    write_surface_csv(surface, path);
    std::printf("solved %zu layers on a %zu x %zu grid -> %s\n", surface.n_layers(),
                surface.n_x(), surface.n_p(), path.c_str());
    return 0;
}

int cmd_validate(const AppConfig& cfg, const std::string& out, const double* tol_flag) {
    if (cfg.law.kind != ShapingLaw::Kind::degenerate)
        throw std::invalid_argument("validate: needs a degenerate shaping law (known scale)");
    const double tol_value = tol_flag ? *tol_flag : cfg.validate.tol_value;
    const double tol_strategy = cfg.validate.tol_strategy;
    const TimeGrid grid = cfg.time_grid();
    const ValueSurface surface =
        solve_backward(cfg.model, cfg.loss, cfg.opt, cfg.law, cfg.x0, cfg.p0, grid, cfg.solver);
    const CompleteMarket cm(cfg.model, cfg.loss.k, cfg.opt.strike, cfg.opt.T_star);
    const double lambda = cfg.law.value;

    CsvFile f(out.empty() ? "validate.csv" : out);
    std::fprintf(f.get(), "i,t_i,x,u_exact,u_numeric,nu_exact,nu_numeric\n");

    double worst_value = 0.0, worst_strategy = 0.0;
    for (std::size_t layer : cfg.validate.layers) {
        if (layer >= surface.n_layers())
            throw std::invalid_argument("validate: layer index beyond the time grid");
        const double t = grid.time(layer);
        double max_u = 0.0, max_nu = 0.0, err_u = 0.0, err_nu = 0.0;
        for (std::size_t i = 0; i < cfg.validate.n_eval; ++i) {
            const double x = cfg.x0 * (cfg.validate.x_lo_rel +
                                       (cfg.validate.x_hi_rel - cfg.validate.x_lo_rel) *
                                           static_cast<double>(i) /
                                           static_cast<double>(cfg.validate.n_eval - 1));
            const double ue = cm.value(t, x, cfg.p0, lambda);
            const double un = surface.value_at(layer, x, cfg.p0);
            const double ne = cm.hedge_ratio(t, x, cfg.p0, lambda);
            const double nn = surface.hedge_at(layer, x, cfg.p0);
            max_u = std::max(max_u, std::fabs(ue));
            max_nu = std::max(max_nu, std::fabs(ne));
            err_u = std::max(err_u, std::fabs(un - ue));
            err_nu = std::max(err_nu, std::fabs(nn - ne));
            std::fprintf(f.get(), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", layer, t, x, ue,
                         un, ne, nn);
        }
        const double rel_u = err_u / max_u;
        const double rel_nu = err_nu / max_nu;
        worst_value = std::max(worst_value, rel_u);
        worst_strategy = std::max(worst_strategy, rel_nu);
        std::printf("layer %2zu (t = %.6f): value rel err %.3e, strategy rel err %.3e\n", layer, t,
                    rel_u, rel_nu);
    }
    std::printf("max value rel err %.3e (tol %.3e), max strategy rel err %.3e (tol %.3e)\n",
                worst_value, tol_value, worst_strategy, tol_strategy);
    if (worst_value > tol_value || worst_strategy > tol_strategy) {
        std::fprintf(stderr, "validate: tolerance exceeded\n");
        return 1;
    }
    return 0;
}

void write_gnuplot_script(const std::string& prefix) {
    CsvFile f(prefix + "_plots.gp");
    std::fprintf(f.get(),
                 "set datafile separator ','\n"
                 "set key outside\n"
                 "set term pngcairo size 900,600\n"
                 "set output '%s_capital_vs_risk.png'\n"
                 "set xlabel 'initial capital'\n"
                 "set ylabel 'shortfall risk'\n"
                 "plot '%s_figure3.csv' using 5:6 every ::1 with points title 'runs'\n"
                 "set output '%s_cvar.png'\n"
                 "set xlabel 'quantile level'\n"
                 "set ylabel 'CVaR'\n"
                 "plot '%s_figure4.csv' using 3:4 every ::1 with points title 'SR', \\\n"
                 "     '%s_figure4.csv' using 3:5 every ::1 with points title 'BS'\n",
                 prefix.c_str(), prefix.c_str(), prefix.c_str(), prefix.c_str(), prefix.c_str());
}

int cmd_backtest(const AppConfig& cfg, const std::string& out) {
    const std::string prefix = out.empty() ? "backtest" : out;
    BacktestConfig bt;
    bt.model = cfg.model;
    bt.loss = cfg.loss;
    bt.law = cfg.law;
    bt.x0 = cfg.x0;
    bt.lambda0 = cfg.backtest.lambda0;
    bt.n_paths = cfg.backtest.n_paths;
    bt.dt = cfg.dt;
    bt.seed = cfg.seed;
    bt.naive_realized_lambda = cfg.backtest.naive_realized_lambda;
    bt.threads = cfg.solver.threads;

    CsvFile fig3(prefix + "_figure3.csv");
    std::fprintf(fig3.get(),
                 "gamma,strike,strategy,p,initial_capital,shortfall_risk,expected_loss,"
                 "stddev,ci_halfwidth\n");
    CsvFile fig4(prefix + "_figure4.csv");
    std::fprintf(fig4.get(), "gamma,strike,quantile,cvar_sr,cvar_bs\n");

    auto fig3_row = [&](double gamma, double strike, const HedgeReport& r, double p) {
        std::fprintf(fig3.get(), "%.17g,%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", gamma,
                     strike, r.strategy.c_str(), p, r.initial_capital, r.shortfall_risk,
                     r.expected_loss, r.stddev_error, r.ci_halfwidth);
    };

    std::size_t significant = 0;
    for (double gamma : cfg.backtest.gammas) {
        BacktestConfig btg = bt;
        btg.opt = OptionSpec{gamma * bt.lambda0 * bt.x0, cfg.opt.T, cfg.opt.T_star};
        const TimeGrid grid{0.0, btg.dt, btg.steps_to_T()};
        const ValueSurface surface = solve_backward(btg.model, btg.loss, btg.opt, btg.law, btg.x0,
                                                    cfg.p0, grid, cfg.solver);
        for (const std::string& w : surface.warnings)
            std::fprintf(stderr, "warning: gamma %.4g: %s\n", gamma, w.c_str());

        const HedgeReport bs = run_bs_naive(btg);
        fig3_row(gamma, btg.opt.strike, bs, 0.0);

        for (double pa : cfg.backtest.p_abs) {
            const HedgeReport sr = run_sr(btg, surface, -pa);
            fig3_row(gamma, btg.opt.strike, sr, -pa);
        }

        if (cfg.backtest.match_capital) {
            const double p_match = match_capital(surface, btg.x0, bs.initial_capital);
            HedgeReport sr = run_sr(btg, surface, p_match);
            fig3_row(gamma, btg.opt.strike, sr, p_match);
            const auto cmp = paired_loss_comparison(sr, bs, btg.loss.k);
            if (cmp.significant()) ++significant;
            std::printf(
                "gamma %.4g: capital %.6f, |p| %.6f, SR risk %.6f, BS risk %.6f, "
                "loss diff %.6g +- %.6g%s\n",
                gamma, sr.initial_capital, -p_match, sr.shortfall_risk, bs.shortfall_risk,
                cmp.mean_loss_diff, cmp.ci_halfwidth, cmp.significant() ? " (significant)" : "");

            for (double q = 0.50; q < 0.995; q += 0.01) {
                if ((1.0 - q) * static_cast<double>(btg.n_paths) < 1.0) break;
                std::fprintf(fig4.get(), "%.17g,%.17g,%.2f,%.17g,%.17g\n", gamma, btg.opt.strike,
                             q, cvar(sr.errors, q), cvar(bs.errors, q));
            }
            char tag[64];
            std::snprintf(tag, sizeof tag, "%s_g%.4g", prefix.c_str(), gamma);
            write_paths_csv(sr, std::string(tag) + "_sr_paths.csv");
            write_paths_csv(bs, std::string(tag) + "_bs_paths.csv");
            write_summary_csv({sr, bs}, std::string(tag) + "_summary.csv");
        }
    }
    write_gnuplot_script(prefix);
    if (cfg.backtest.match_capital)
        std::printf("paired loss reduction significant for %zu of %zu strikes\n", significant,
                    cfg.backtest.gammas.size());
    std::printf("wrote %s_figure3.csv, %s_figure4.csv, %s_plots.gp\n", prefix.c_str(),
                prefix.c_str(), prefix.c_str());
    return 0;
}

int cmd_calibrate(const AppConfig& cfg, const std::string& out) {
    if (cfg.calibrate.month_quotes.empty() || cfg.calibrate.quarter_quotes.empty())
        throw std::invalid_argument(
            "calibrate: config must set calibrate.month_quotes and calibrate.quarter_quotes");
    const CalibrationResult res =
        calibrate_from_quotes(cfg.calibrate.month_quotes, cfg.calibrate.quarter_quotes);
    std::printf("contracts: %zu, pooled returns: %zu\n", res.lambda_samples.size(), res.n_returns);
    std::printf("sigma_hat (annualized): %.6f\n", res.model.sigma);
    std::printf("mu_hat (annualized):    %.6f\n", res.model.mu);
    std::printf("lambda mean: %.6f, variance: %.6g\n", res.lambda_mean, res.lambda_variance);
    if (!out.empty()) {
        CsvFile f(out);
        std::fprintf(f.get(), "sample_id,lambda\n");
        for (std::size_t i = 0; i < res.lambda_samples.size(); ++i)
            std::fprintf(f.get(), "%zu,%.17g\n", i, res.lambda_samples[i]);
        std::printf("wrote %s\n", out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"partial hedging under a shortfall constraint: pricing, solving, backtesting"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out;
    std::uint64_t seed = 0;
    double tol = 0.0;
    std::size_t threads = 0;
    auto* cfg_opt = app.add_option("--config", config_path, "JSON configuration file");
    auto* out_opt = app.add_option("--out", out, "output CSV path (or prefix for backtest)");
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    auto* tol_opt = app.add_option("--tol", tol, "override the validate value tolerance");
    auto* thr_opt = app.add_option("--threads", threads,
                                   "worker threads (0 = SHORTFALL_HEDGE_THREADS or hardware)");

    auto* price = app.add_subcommand("price", "closed-form call and constrained capital");
    double pt_t = 0.0, pt_x = 0.0, pt_p = 0.0, pt_lambda = 0.0;
    auto* t_opt = price->add_option("--t", pt_t, "evaluation time");
    auto* x_opt = price->add_option("--x", pt_x, "asset level");
    auto* p_opt = price->add_option("--p", pt_p, "loss budget (negative)");
    auto* l_opt = price->add_option("--lambda", pt_lambda, "scale factor");
    auto* facelift = app.add_subcommand("facelift", "tabulate the face-lifted terminal target");
    auto* solve = app.add_subcommand("solve", "backward solve of the value surface");
    auto* backtest = app.add_subcommand("backtest", "hedging comparison vs the naive benchmark");
    auto* calibrate = app.add_subcommand("calibrate", "scale law and GBM parameters from quotes");
    auto* validate = app.add_subcommand("validate", "solver vs closed form on a known scale");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // usage problems are configuration errors
    }

    try {
        AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
        if (seed_opt->count()) {
            cfg.seed = seed;
            cfg.solver.seed = seed;
        }
        if (thr_opt->count()) cfg.solver.threads = threads;
        (void)cfg_opt;
        (void)out_opt;

        if (*price) {
            if (t_opt->count() || x_opt->count() || p_opt->count() || l_opt->count()) {
                PricePoint pt;  // flag-specified single point on top of the defaults
                if (t_opt->count()) pt.t = pt_t;
                if (x_opt->count()) pt.x = pt_x;
                if (p_opt->count()) pt.p = pt_p;
                if (l_opt->count()) pt.lambda = pt_lambda;
                cfg.price.points = {pt};
            }
            return cmd_price(cfg, out);
        }
        if (*facelift) return cmd_facelift(cfg, out);
        if (*solve) return cmd_solve(cfg, out);
        if (*backtest) return cmd_backtest(cfg, out);
        if (*calibrate) return cmd_calibrate(cfg, out);
        if (*validate) {
            const double tol_val = tol;
            return cmd_validate(cfg, out, tol_opt->count() ? &tol_val : nullptr);
        }
        return 2;
    } catch (const numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 4;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "domain error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
