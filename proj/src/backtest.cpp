#include "shortfall/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "shortfall/analytic.hpp"
#include "shortfall/complete_market.hpp"
#include "shortfall/errors.hpp"
#include "shortfall/parallel.hpp"
#include "shortfall/rng.hpp"

namespace shortfall {

namespace {

// Compensated accumulation keeps report means independent of chunking.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

std::size_t aligned_steps(double span, double dt, const char* what) {
    const double ratio = span / dt;
    const double rounded = std::round(ratio);
    if (std::fabs(ratio - rounded) > 1e-6 * std::max(1.0, std::fabs(ratio)))
        throw std::invalid_argument(std::string("backtest: ") + what +
                                    " is not an integer number of rebalancing steps");
    return static_cast<std::size_t>(rounded);
}

double positive_part(double u) { return u > 0.0 ? u : 0.0; }

double loss_of_error(double e, double k) { return std::pow(positive_part(e), k) / k; }

HedgeReport finalize_report(std::string strategy, double capital, std::vector<double> errors,
                            const LossSpec& loss, std::size_t breaches, std::size_t clamps) {
    HedgeReport r;
    r.strategy = std::move(strategy);
    r.initial_capital = capital;
    r.errors = std::move(errors);
    r.breach_count = breaches;
    r.clamped_steps = clamps;

    const double n = static_cast<double>(r.errors.size());
    KahanSum mean_acc, loss_acc;
    for (double e : r.errors) {
        mean_acc.add(e);
        loss_acc.add(loss_of_error(e, loss.k));
    }
    r.mean_error = mean_acc.value() / n;
    r.expected_loss = loss_acc.value() / n;
    r.shortfall_risk = std::pow(r.expected_loss, 1.0 / loss.k);

    KahanSum var_acc;
    for (double e : r.errors) {
        const double d = e - r.mean_error;
        var_acc.add(d * d);
    }
    r.stddev_error = r.errors.size() > 1 ? std::sqrt(var_acc.value() / (n - 1.0)) : 0.0;
    r.ci_halfwidth = 1.96 * r.stddev_error / std::sqrt(n);

    // keep only the levels whose tail holds at least one sample
    std::vector<double> levels, values;
    for (double q : r.cvar_levels) {
        if ((1.0 - q) * n >= 1.0) {
            levels.push_back(q);
            values.push_back(cvar(r.errors, q));
        }
    }
    r.cvar_levels = std::move(levels);
    r.cvar_values = std::move(values);
    return r;
}

struct GridBox {
    double x_lo, x_hi, mp_lo, mp_hi;
};

GridBox grid_box(const ValueSurface& s) {
    return {std::exp(s.log_x.front()), std::exp(s.log_x.back()), std::exp(s.log_mp.front()),
            std::exp(s.log_mp.back())};
}

// Project a state onto the grid before querying the surface; excursions are
// counted and reported rather than silently absorbed.
bool clamp_state(const GridBox& box, double& x, double& p) {
    bool moved = false;
    if (x < box.x_lo) x = box.x_lo, moved = true;
    if (x > box.x_hi) x = box.x_hi, moved = true;
    double mp = -p;
    if (mp < box.mp_lo) mp = box.mp_lo, moved = true;
    if (mp > box.mp_hi) mp = box.mp_hi, moved = true;
    p = -mp;
    return moved;
}

}  // namespace

void BacktestConfig::validate() const {
    model.validate();
    loss.validate();
    opt.validate();
    if (!(x0 > 0.0)) throw std::invalid_argument("backtest: x0 must be positive");
    if (!(lambda0 > 0.0)) throw std::invalid_argument("backtest: lambda0 must be positive");
    if (n_paths < 2) throw std::invalid_argument("backtest: need at least two paths");
    if (!(dt > 0.0)) throw std::invalid_argument("backtest: dt must be positive");
    steps_to_T();
    steps_T_to_horizon();
}

std::size_t BacktestConfig::steps_to_T() const {
    return aligned_steps(opt.T, dt, "the span [0, T]");
}

std::size_t BacktestConfig::steps_T_to_horizon() const {
    const std::size_t n = aligned_steps(opt.T_star - opt.T, dt, "the span [T, T_star]");
    if (n == 0)
        throw std::invalid_argument("backtest: the hedge needs at least one step after T");
    return n;
}

double shortfall_risk(const std::vector<double>& errors, const LossSpec& spec) {
    if (errors.empty()) throw std::invalid_argument("shortfall_risk: no errors");
    KahanSum acc;
    for (double e : errors) acc.add(loss_of_error(e, spec.k));
    return std::pow(acc.value() / static_cast<double>(errors.size()), 1.0 / spec.k);
}

double cvar(const std::vector<double>& errors, double q) {
    if (errors.empty()) throw std::invalid_argument("cvar: no errors");
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("cvar: quantile must lie in (0, 1)");
    const double n = static_cast<double>(errors.size());
    const double tail = (1.0 - q) * n;
    if (tail < 1.0)
        throw std::invalid_argument("cvar: fewer than one sample in the (1 - q) tail");
    const std::size_t m = static_cast<std::size_t>(std::ceil(tail - 1e-12));
    std::vector<double> sorted(errors);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    KahanSum acc;
    for (std::size_t i = 0; i < m; ++i) acc.add(sorted[i]);
    return acc.value() / static_cast<double>(m);
}

HedgeReport run_sr(const BacktestConfig& cfg, const ValueSurface& surface, double p0) {
    cfg.validate();
    if (!(p0 < 0.0)) throw std::domain_error("run_sr: loss budget p0 must be negative");
    const std::size_t n1 = cfg.steps_to_T();
    const std::size_t n2 = cfg.steps_T_to_horizon();
    if (surface.n_layers() != n1 + 1)
        throw std::invalid_argument("run_sr: surface layers do not match the rebalancing grid");
    if (n1 > 0 && std::fabs(surface.tgrid.dt - cfg.dt) > 1e-12 * cfg.dt)
        throw std::invalid_argument("run_sr: surface time step does not match the backtest step");

    const CompleteMarket cm(cfg.model, cfg.loss.k, cfg.opt.strike, cfg.opt.T_star);
    const double capital = surface.value_at(0, cfg.x0, p0);
    const GridBox box = grid_box(surface);
    const double theta = cfg.model.theta();
    const double sq_dt = std::sqrt(cfg.dt);

    std::vector<double> errors(cfg.n_paths);
    std::vector<std::uint8_t> breached(cfg.n_paths, 0);
    std::vector<std::uint32_t> clamps(cfg.n_paths, 0);

    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
            RngStream shocks(cfg.seed, 2 * m);
            RngStream scale_draw(cfg.seed, 2 * m + 1);
            double x = cfg.x0;
            double p = p0;
            double w = capital;
            for (std::size_t i = 0; i < n1; ++i) {
                double xq = x, pq = p;
                if (clamp_state(box, xq, pq)) ++clamps[m];
                const double a = surface.control_at(i, xq, pq);
                const double nu = surface.hedge_at(i, xq, pq);
                const double xi = shocks.gaussian_at(i);
                const double xn = gbm_step(x, cfg.model.mu, cfg.model.sigma, cfg.dt, xi);
                // the surface dynamics are risk-neutral: shift the physical
                // shock by theta sqrt(dt) before stepping the threshold
                p = step_p(p, a, theta, cfg.dt, xi + theta * sq_dt);
                w += nu * (xn - x);
                x = xn;
                if (w < -cfg.loss.kappa) breached[m] = 1;
            }
            const double lambda = cfg.law.sample(scale_draw.uniform_at(0));
            const double y = std::max(w, -cfg.loss.kappa);
            const double p_reveal = cm.conjugate(cfg.opt.T, x, y, lambda);
            const double x_reveal = x;
            for (std::size_t j = 0; j < n2; ++j) {
                const double t = cfg.opt.T + static_cast<double>(j) * cfg.dt;
                const double pj = cm.p_explicit(cfg.opt.T, x_reveal, p_reveal, t, x);
                const double nu = cm.hedge_ratio(t, x, pj, lambda);
                const double xi = shocks.gaussian_at(n1 + j);
                const double xn = gbm_step(x, cfg.model.mu, cfg.model.sigma, cfg.dt, xi);
                w += nu * (xn - x);
                x = xn;
                if (w < -cfg.loss.kappa) breached[m] = 1;
            }
            errors[m] = positive_part(lambda * x - cfg.opt.strike) - w;
        }
    });

    const std::size_t breaches = std::accumulate(breached.begin(), breached.end(), std::size_t{0});
    const std::size_t clamped =
        std::accumulate(clamps.begin(), clamps.end(), std::size_t{0});
    return finalize_report("SR", capital, std::move(errors), cfg.loss, breaches, clamped);
}

HedgeReport run_bs_naive(const BacktestConfig& cfg) {
    cfg.validate();
    const std::size_t n1 = cfg.steps_to_T();
    const std::size_t n2 = cfg.steps_T_to_horizon();
    const double capital =
        bs_call_price(cfg.x0, cfg.opt.strike, cfg.model.sigma, cfg.opt.T_star, cfg.lambda0);

    std::vector<double> errors(cfg.n_paths);
    std::vector<std::uint8_t> breached(cfg.n_paths, 0);

    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
            RngStream shocks(cfg.seed, 2 * m);
            RngStream scale_draw(cfg.seed, 2 * m + 1);
            double x = cfg.x0;
            double w = capital;
            for (std::size_t i = 0; i < n1; ++i) {
                const double t = static_cast<double>(i) * cfg.dt;
                const double nu =
                    bs_delta(x, cfg.opt.strike, cfg.model.sigma, cfg.opt.T_star - t, cfg.lambda0);
                const double xi = shocks.gaussian_at(i);
                const double xn = gbm_step(x, cfg.model.mu, cfg.model.sigma, cfg.dt, xi);
                w += nu * (xn - x);
                x = xn;
                if (w < -cfg.loss.kappa) breached[m] = 1;
            }
            const double lambda = cfg.law.sample(scale_draw.uniform_at(0));
            const double lambda_used = cfg.naive_realized_lambda ? lambda : cfg.lambda0;
            for (std::size_t j = 0; j < n2; ++j) {
                const double t = cfg.opt.T + static_cast<double>(j) * cfg.dt;
                const double nu =
                    bs_delta(x, cfg.opt.strike, cfg.model.sigma, cfg.opt.T_star - t, lambda_used);
                const double xi = shocks.gaussian_at(n1 + j);
                const double xn = gbm_step(x, cfg.model.mu, cfg.model.sigma, cfg.dt, xi);
                w += nu * (xn - x);
                x = xn;
                if (w < -cfg.loss.kappa) breached[m] = 1;
            }
            errors[m] = positive_part(lambda * x - cfg.opt.strike) - w;
        }
    });

    const std::size_t breaches = std::accumulate(breached.begin(), breached.end(), std::size_t{0});
    return finalize_report("BS", capital, std::move(errors), cfg.loss, breaches, 0);
}

HedgeReport run_complete_leg(const ModelParams& model, const LossSpec& loss, double strike,
                             double horizon, double x_start, double lambda, double p, double dt,
                             std::size_t n_paths, std::uint64_t seed, std::size_t refine,
                             std::size_t max_refine, std::size_t threads) {
    model.validate();
    loss.validate();
    if (!(strike > 0.0)) throw std::invalid_argument("run_complete_leg: strike must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("run_complete_leg: horizon must be positive");
    if (!(x_start > 0.0)) throw std::invalid_argument("run_complete_leg: x_start must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("run_complete_leg: lambda must be positive");
    if (!(p <= 0.0)) throw std::domain_error("run_complete_leg: loss budget must be <= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("run_complete_leg: dt must be positive");
    if (n_paths < 2) throw std::invalid_argument("run_complete_leg: need at least two paths");
    if (refine == 0 || max_refine % refine != 0 || refine > max_refine)
        throw std::invalid_argument("run_complete_leg: refine must divide max_refine");
    const std::size_t n_base = aligned_steps(horizon, dt, "the leg horizon");
    if (n_base == 0) throw std::invalid_argument("run_complete_leg: horizon shorter than dt");

    const CompleteMarket cm(model, loss.k, strike, horizon);
    const double capital = cm.value(0.0, x_start, p, lambda);
    const std::size_t steps = n_base * refine;
    const std::size_t agg = max_refine / refine;  // fine shocks folded into one step
    const double dt_step = dt / static_cast<double>(refine);
    const double inv_sqrt_agg = 1.0 / std::sqrt(static_cast<double>(agg));

    std::vector<double> errors(n_paths);
    std::vector<std::uint8_t> breached(n_paths, 0);

    parallel_for(n_paths, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
            RngStream shocks(seed, 2 * m);
            double x = x_start;
            double w = capital;
            for (std::size_t s = 0; s < steps; ++s) {
                const double t = static_cast<double>(s) * dt_step;
                const double ps = cm.p_explicit(0.0, x_start, p, t, x);
                const double nu = cm.hedge_ratio(t, x, ps, lambda);
                // shocks live on the finest grid so that coarser runs walk
                // the same Brownian path
                double z = 0.0;
                for (std::size_t u = 0; u < agg; ++u)
                    z += shocks.gaussian_at(s * agg + u);
                z *= inv_sqrt_agg;
                const double xn = gbm_step(x, model.mu, model.sigma, dt_step, z);
                w += nu * (xn - x);
                x = xn;
                if (w < -loss.kappa) breached[m] = 1;
            }
            errors[m] = positive_part(lambda * x - strike) - w;
        }
    });

    const std::size_t breaches = std::accumulate(breached.begin(), breached.end(), std::size_t{0});
    return finalize_report("SR", capital, std::move(errors), loss, breaches, 0);
}

double match_capital(const ValueSurface& surface, double x0, double target_capital) {
    const double q_lo = surface.log_mp.front();
    const double q_hi = surface.log_mp.back();
    const auto value_at_q = [&](double q) { return surface.value_at(0, x0, -std::exp(q)); };
    // the surface value decreases as the budget loosens (|p| grows)
    if (value_at_q(q_lo) < target_capital || value_at_q(q_hi) > target_capital)
        throw numerical_error(
            "match_capital: target capital lies outside the budget range of the surface");
    double lo = q_lo, hi = q_hi;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (value_at_q(mid) >= target_capital)
            lo = mid;
        else
            hi = mid;
    }
    return -std::exp(0.5 * (lo + hi));
}

PairedComparison paired_loss_comparison(const HedgeReport& a, const HedgeReport& b, double k) {
    if (a.errors.size() != b.errors.size() || a.errors.empty())
        throw std::invalid_argument("paired_loss_comparison: reports must hold matched paths");
    const double n = static_cast<double>(a.errors.size());
    KahanSum mean_acc;
    for (std::size_t m = 0; m < a.errors.size(); ++m)
        mean_acc.add(loss_of_error(a.errors[m], k) - loss_of_error(b.errors[m], k));
    PairedComparison out;
    out.mean_loss_diff = mean_acc.value() / n;
    KahanSum var_acc;
    for (std::size_t m = 0; m < a.errors.size(); ++m) {
        const double d =
            loss_of_error(a.errors[m], k) - loss_of_error(b.errors[m], k) - out.mean_loss_diff;
        var_acc.add(d * d);
    }
    const double sd = a.errors.size() > 1 ? std::sqrt(var_acc.value() / (n - 1.0)) : 0.0;
    out.ci_halfwidth = 1.96 * sd / std::sqrt(n);
    return out;
}

void write_paths_csv(const HedgeReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_paths_csv: cannot open " + path);
    std::fprintf(f, "path_id,terminal_error\n");
    for (std::size_t m = 0; m < report.errors.size(); ++m)
        std::fprintf(f, "%zu,%.17g\n", m, report.errors[m]);
    std::fclose(f);
}

void write_summary_csv(const std::vector<HedgeReport>& reports, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_summary_csv: cannot open " + path);
    std::fprintf(f, "strategy,initial_capital,expected_loss,shortfall_risk");
    if (!reports.empty())
        for (double q : reports.front().cvar_levels) std::fprintf(f, ",cvar@%.2f", q);
    std::fprintf(f, ",stddev,ci_halfwidth\n");
    for (const auto& r : reports) {
        std::fprintf(f, "%s,%.17g,%.17g,%.17g", r.strategy.c_str(), r.initial_capital,
                     r.expected_loss, r.shortfall_risk);
        for (double c : r.cvar_values) std::fprintf(f, ",%.17g", c);
        std::fprintf(f, ",%.17g,%.17g\n", r.stddev_error, r.ci_halfwidth);
    }
    std::fclose(f);
}

}  // namespace shortfall
