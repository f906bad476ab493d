#include "shortfall/solver.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <mutex>

#include "shortfall/errors.hpp"
#include "shortfall/parallel.hpp"
#include "shortfall/quadrature.hpp"
#include "shortfall/rng.hpp"

namespace shortfall {

void SolverConfig::validate() const {
    if (n_x < 2 || n_p < 2) throw std::invalid_argument("SolverConfig: need at least 2x2 grid nodes");
    if (!(x_lo_mult > 0.0 && x_hi_mult > x_lo_mult))
        throw std::invalid_argument("SolverConfig: bad x grid range");
    if (!(p_lo_mult > 0.0 && p_hi_mult > p_lo_mult))
        throw std::invalid_argument("SolverConfig: bad p grid range");
    if (gh_nodes < 2 && mc_particles == 0)
        throw std::invalid_argument("SolverConfig: quadrature engine needs >= 2 nodes");
    if (!(fp_tol > 0.0)) throw std::invalid_argument("SolverConfig: fixed-point tolerance must be positive");
    if (fp_max_iters == 0) throw std::invalid_argument("SolverConfig: fixed-point cap must be >= 1");
    if (!(extrap_mult >= 1.0)) throw std::invalid_argument("SolverConfig: extrap_mult must be >= 1");
    if (lambda_nodes == 0) throw std::invalid_argument("SolverConfig: lambda_nodes must be >= 1");
}

double ValueSurface::x_node(std::size_t ix) const { return std::exp(log_x[ix]); }
double ValueSurface::p_node(std::size_t jp) const { return -std::exp(log_mp[jp]); }

void ValueSurface::locate(double logv, const std::vector<double>& axis, std::size_t& i0,
                          double& w) const {
    const double du = axis[1] - axis[0];
    double pos = (logv - axis.front()) / du;
    if (pos < 0.0) pos = 0.0;
    const double hi = static_cast<double>(axis.size() - 1);
    if (pos > hi) pos = hi;
    double fl = std::floor(pos);
    if (fl > hi - 1.0) fl = hi - 1.0;
    i0 = static_cast<std::size_t>(fl);
    w = pos - fl;
    // snap to the node so grid points evaluate to stored values exactly
    if (w < 1e-9) w = 0.0;
    if (w > 1.0 - 1e-9) w = 1.0;
}

ValueSurface::Eval ValueSurface::at(std::size_t layer, double x, double p) const {
    if (layer >= n_layers()) throw std::invalid_argument("ValueSurface: layer out of range");
    if (!(x > 0.0) || !(p < 0.0))
        throw std::domain_error("ValueSurface: need x > 0 and p < 0");
    const double u = std::log(x);
    const double q = std::log(-p);
    const double margin = std::log(extrap_mult);
    if (u < log_x.front() - margin || u > log_x.back() + margin || q < log_mp.front() - margin ||
        q > log_mp.back() + margin)
        throw numerical_error("ValueSurface: state far outside the grid (x=" + std::to_string(x) +
                              ", p=" + std::to_string(p) + ")");
    std::size_t i0, j0;
    double wu, wq;
    locate(u, log_x, i0, wu);
    locate(q, log_mp, j0, wq);
    const std::size_t np = n_p();
    const std::size_t i00 = i0 * np + j0;
    const std::size_t i01 = i00 + 1;
    const std::size_t i10 = i00 + np;
    const std::size_t i11 = i10 + 1;
    const double w00 = (1.0 - wu) * (1.0 - wq);
    const double w01 = (1.0 - wu) * wq;
    const double w10 = wu * (1.0 - wq);
    const double w11 = wu * wq;
    auto blend = [&](const std::vector<double>& f) {
        return w00 * f[i00] + w01 * f[i01] + w10 * f[i10] + w11 * f[i11];
    };
    Eval e;
    e.v = blend(v[layer]);
    e.vp = blend(vp[layer]);
    e.vpp = blend(vpp[layer]);
    e.vxp = blend(vxp[layer]);
    e.a = blend(a[layer]);
    return e;
}

double ValueSurface::vx_at(std::size_t layer, double x, double p) const {
    if (layer >= n_layers()) throw std::invalid_argument("ValueSurface: layer out of range");
    if (!(x > 0.0) || !(p < 0.0))
        throw std::domain_error("ValueSurface: need x > 0 and p < 0");
    std::size_t i0, j0;
    double wu, wq;
    locate(std::log(x), log_x, i0, wu);
    locate(std::log(-p), log_mp, j0, wq);
    const std::size_t np = n_p();
    const std::vector<double>& f = vx[layer];
    return (1.0 - wu) * ((1.0 - wq) * f[i0 * np + j0] + wq * f[i0 * np + j0 + 1]) +
           wu * ((1.0 - wq) * f[(i0 + 1) * np + j0] + wq * f[(i0 + 1) * np + j0 + 1]);
}

double ValueSurface::hedge_at(std::size_t layer, double x, double p) const {
    const Eval e = at(layer, x, p);
    return vx_at(layer, x, p) + e.a * p * e.vp / (x * model.sigma);
}

namespace {

struct StepMoments {
    double mv = 0.0;   // E[V_next]
    double mp = 0.0;   // E[P_next V_p,next]
    double mxp = 0.0;  // E[X_next P_next V_xp,next]
    double mpp = 0.0;  // E[P_next^2 V_pp,next]
};

// shared per-sweep context for one backward layer
struct LayerSweep {
    const ValueSurface& surf;
    std::size_t next_layer;
    double dt;
    double sigma;
    double theta;
    // grid box: transition states are projected onto it before lookup (the
    // interpolant is flat beyond the edges anyway, and quadrature tails at
    // edge nodes always step outside)
    double x_lo = 0.0, x_hi = 0.0, mp_lo = 0.0, mp_hi = 0.0;
    // quadrature engine: precomputed X factors and P exponent pieces
    const std::vector<double>* weights;  // null => Monte Carlo engine
    std::vector<double> xfac;            // exp(sigma sqrt(dt) e - sigma^2 dt / 2)
    std::vector<double> gfac;            // sqrt(dt) e - theta dt
    // Monte Carlo engine
    std::uint64_t seed = 0;
    std::size_t particles = 0;
    std::uint64_t stream_base = 0;
};

double clamp_to(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

StepMoments step_moments(const LayerSweep& ctx, double x, double p, double a,
                         std::uint64_t node_stream) {
    StepMoments m;
    const double half_a2_dt = 0.5 * a * a * ctx.dt;
    // the martingale factors keep the true transition state; only the field
    // lookup is projected onto the grid box
    auto accumulate = [&](double w, double xn, double pn) {
        const double xq = clamp_to(xn, ctx.x_lo, ctx.x_hi);
        const double pq = -clamp_to(-pn, ctx.mp_lo, ctx.mp_hi);
        const ValueSurface::Eval e = ctx.surf.at(ctx.next_layer, xq, pq);
        m.mv += w * e.v;
        m.mp += w * pn * e.vp;
        m.mxp += w * xn * pn * e.vxp;
        m.mpp += w * pn * pn * e.vpp;
    };
    if (ctx.weights) {
        const std::size_t n = ctx.weights->size();
        for (std::size_t q = 0; q < n; ++q)
            accumulate((*ctx.weights)[q], x * ctx.xfac[q],
                       p * std::exp(a * ctx.gfac[q] - half_a2_dt));
    } else {
        RngStream stream(ctx.seed, ctx.stream_base + node_stream);
        const double w = 1.0 / static_cast<double>(ctx.particles);
        const double sq = std::sqrt(ctx.dt);
        for (std::size_t q = 0; q < ctx.particles; ++q) {
            const double eps = stream.gaussian_at(q);
            const double xn =
                x * std::exp(ctx.sigma * sq * eps - 0.5 * ctx.sigma * ctx.sigma * ctx.dt);
            const double pn = p * std::exp(a * (sq * eps - ctx.theta * ctx.dt) - half_a2_dt);
            accumulate(w, xn, pn);
        }
    }
    return m;
}

}  // namespace

ValueSurface solve_backward(const ModelParams& model, const LossSpec& loss, const OptionSpec& opt,
                            const ShapingLaw& law, double x0, double p0, const TimeGrid& tgrid,
                            const SolverConfig& cfg) {
    model.validate();
    loss.validate();
    opt.validate();
    tgrid.validate();
    cfg.validate();
    if (!(x0 > 0.0)) throw std::invalid_argument("solve_backward: x0 must be positive");
    if (!(p0 < 0.0)) throw std::invalid_argument("solve_backward: p0 must be negative");
    if (std::fabs(tgrid.t_end() - opt.T) > 1e-9)
        throw std::invalid_argument("solve_backward: time grid must end at the revelation date T");

    const std::size_t N = tgrid.n_steps;
    const std::size_t nx = cfg.n_x, np = cfg.n_p, nn = nx * np;
    const std::size_t threads = resolve_threads(cfg.threads);
    const double theta = model.theta();
    const double k = loss.k;

    ValueSurface s;
    s.model = model;
    s.k = k;
    s.tgrid = tgrid;
    s.extrap_mult = cfg.extrap_mult;
    s.log_x.resize(nx);
    s.log_mp.resize(np);
    {
        const double u0 = std::log(x0 * cfg.x_lo_mult), u1 = std::log(x0 * cfg.x_hi_mult);
        for (std::size_t i = 0; i < nx; ++i)
            s.log_x[i] = u0 + (u1 - u0) * static_cast<double>(i) / static_cast<double>(nx - 1);
        const double q0 = std::log(-p0 * cfg.p_lo_mult), q1 = std::log(-p0 * cfg.p_hi_mult);
        for (std::size_t j = 0; j < np; ++j)
            s.log_mp[j] = q0 + (q1 - q0) * static_cast<double>(j) / static_cast<double>(np - 1);
    }
    const auto alloc = [&](std::vector<std::vector<double>>& f) {
        f.assign(N + 1, std::vector<double>(nn, 0.0));
    };
    alloc(s.v);
    alloc(s.vp);
    alloc(s.vpp);
    alloc(s.vxp);
    alloc(s.a);
    alloc(s.vx);
    s.fp_iters.assign(N + 1, std::vector<std::uint8_t>(nn, 0));
    s.fp_converged.assign(N + 1, std::vector<std::uint8_t>(nn, 1));

    std::mutex warn_mutex;
    std::size_t n_nonconverged = 0, n_envelope = 0;
    const double a_envelope = 10.0 * k * std::fabs(theta) / (k - 1.0) + 1.0;
    auto record_warning = [&](const std::string& msg, std::size_t& counter) {
        std::lock_guard<std::mutex> lock(warn_mutex);
        ++counter;
        if (s.warnings.size() < 50) s.warnings.push_back(msg);
    };

    // terminal layer: face-lifted target and its derivative fields
    const FaceliftTarget facelift(model, loss, opt, law, cfg.lambda_nodes);
    parallel_for(nx, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ix = lo; ix < hi; ++ix) {
            const double x = s.x_node(ix);
            for (std::size_t jp = 0; jp < np; ++jp) {
                const double p = s.p_node(jp);
                const auto d = facelift.xi_inverse_derivatives(x, p);
                if (d.at_credit_line)
                    throw numerical_error(
                        "solve_backward: terminal target clamped at the credit line at x=" +
                        std::to_string(x) + ", p=" + std::to_string(p) +
                        "; widen the p grid or raise kappa");
                const std::size_t n = s.idx(ix, jp);
                s.v[N][n] = d.y;
                s.vp[N][n] = d.y_p;
                s.vpp[N][n] = d.y_pp;
                s.vxp[N][n] = d.y_xp;
                const double denom = p * p * d.y_pp;
                if (!(denom > 0.0))
                    throw numerical_error("solve_backward: non-convex terminal layer at x=" +
                                          std::to_string(x) + ", p=" + std::to_string(p));
                s.a[N][n] = (theta * p * d.y_p - model.sigma * x * p * d.y_xp) / denom;
            }
        }
    });

    // backward sweep
    LayerSweep ctx{s,
                   N,
                   tgrid.dt,
                   model.sigma,
                   theta,
                   std::exp(s.log_x.front()),
                   std::exp(s.log_x.back()),
                   std::exp(s.log_mp.front()),
                   std::exp(s.log_mp.back()),
                   nullptr,
                   {},
                   {},
                   cfg.seed,
                   cfg.mc_particles,
                   0};
    QuadRule gh;
    if (cfg.mc_particles == 0) {
        gh = gauss_hermite_prob(cfg.gh_nodes);
        ctx.weights = &gh.weights;
        ctx.xfac.resize(gh.size());
        ctx.gfac.resize(gh.size());
        const double sq = std::sqrt(tgrid.dt);
        for (std::size_t q = 0; q < gh.size(); ++q) {
            ctx.xfac[q] = std::exp(model.sigma * sq * gh.nodes[q] -
                                   0.5 * model.sigma * model.sigma * tgrid.dt);
            ctx.gfac[q] = sq * gh.nodes[q] - theta * tgrid.dt;
        }
    }

    for (std::size_t layer = N; layer-- > 0;) {
        ctx.next_layer = layer + 1;
        ctx.stream_base = static_cast<std::uint64_t>(layer) * nn;
        parallel_for(nx, threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t ix = lo; ix < hi; ++ix) {
                const double x = s.x_node(ix);
                for (std::size_t jp = 0; jp < np; ++jp) {
                    const double p = s.p_node(jp);
                    const std::size_t n = s.idx(ix, jp);
                    double a = s.a[layer + 1][n];  // warm start from the next layer
                    std::size_t iters = 0;
                    bool converged = false;
                    double residual = 0.0;
                    while (iters < cfg.fp_max_iters) {
                        const StepMoments m = step_moments(ctx, x, p, a, n);
                        if (!(m.mpp > 0.0))
                            throw numerical_error(
                                "solve_backward: loss of convexity in the control update at layer " +
                                std::to_string(layer) + ", x=" + std::to_string(x) +
                                ", p=" + std::to_string(p));
                        const double a_new = (theta * m.mp - model.sigma * m.mxp) / m.mpp;
                        ++iters;
                        residual = std::fabs(a_new - a);
                        a = a_new;
                        if (residual <= cfg.fp_tol) {
                            converged = true;
                            break;
                        }
                    }
                    if (!converged)
                        record_warning("fixed point not converged at layer " +
                                           std::to_string(layer) + ", node (" + std::to_string(ix) +
                                           "," + std::to_string(jp) +
                                           "), residual=" + std::to_string(residual),
                                       n_nonconverged);
                    if (std::fabs(a) > a_envelope)
                        record_warning("control outside sanity envelope at layer " +
                                           std::to_string(layer) + ": a=" + std::to_string(a),
                                       n_envelope);
                    const StepMoments m = step_moments(ctx, x, p, a, n);
                    if (!(m.mpp > 0.0))
                        throw numerical_error("solve_backward: non-convex value update at layer " +
                                              std::to_string(layer));
                    s.v[layer][n] = m.mv;
                    s.vp[layer][n] = m.mp / p;
                    s.vxp[layer][n] = m.mxp / (x * p);
                    s.vpp[layer][n] = m.mpp / (p * p);
                    s.a[layer][n] = a;
                    s.fp_iters[layer][n] = static_cast<std::uint8_t>(std::min<std::size_t>(iters, 255));
                    s.fp_converged[layer][n] = converged ? 1 : 0;
                }
            }
        });
    }

    // structure audits: convexity and monotonicity in p at every node
    for (std::size_t layer = 0; layer <= N; ++layer) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            for (std::size_t jp = 0; jp < np; ++jp) {
                const std::size_t n = s.idx(ix, jp);
                if (!(s.vpp[layer][n] > 0.0))
                    throw numerical_error("solve_backward: V_pp <= 0 at layer " +
                                          std::to_string(layer));
                if (!(s.vp[layer][n] > 0.0))
                    throw numerical_error("solve_backward: V_p <= 0 at layer " +
                                          std::to_string(layer));
                // log_mp ascending means p decreasing: value must not increase
                if (jp + 1 < np) {
                    const double slack =
                        1e-10 * std::max(1.0, std::fabs(s.v[layer][n]));
                    if (s.v[layer][n + 1] > s.v[layer][n] + slack)
                        throw numerical_error(
                            "solve_backward: value not monotone in p at layer " +
                            std::to_string(layer));
                }
            }
        }
    }

    // derived d/dx field (central differences on the log-x axis)
    const double du = s.log_x[1] - s.log_x[0];
    for (std::size_t layer = 0; layer <= N; ++layer) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double x = s.x_node(ix);
            for (std::size_t jp = 0; jp < np; ++jp) {
                const std::size_t n = s.idx(ix, jp);
                double dvdu;
                if (ix == 0)
                    dvdu = (s.v[layer][s.idx(1, jp)] - s.v[layer][n]) / du;
                else if (ix == nx - 1)
                    dvdu = (s.v[layer][n] - s.v[layer][s.idx(nx - 2, jp)]) / du;
                else
                    dvdu = (s.v[layer][s.idx(ix + 1, jp)] - s.v[layer][s.idx(ix - 1, jp)]) /
                           (2.0 * du);
                s.vx[layer][n] = dvdu / x;
            }
        }
    }

    if (n_nonconverged > 0)
        s.warnings.push_back("fixed point: " + std::to_string(n_nonconverged) +
                             " node update(s) hit the iteration cap");
    if (n_envelope > 0)
        s.warnings.push_back("control sanity envelope exceeded at " + std::to_string(n_envelope) +
                             " node update(s)");
    return s;
}

void write_surface_csv(const ValueSurface& s, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_surface_csv: cannot open " + path);
    std::fputs("i,t_i,x,p,V,V_p,V_xp,V_pp,a\n", f);
    for (std::size_t layer = 0; layer < s.n_layers(); ++layer) {
        const double t = s.tgrid.time(layer);
        for (std::size_t ix = 0; ix < s.n_x(); ++ix) {
            for (std::size_t jp = 0; jp < s.n_p(); ++jp) {
                const std::size_t n = s.idx(ix, jp);
                std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", layer, t,
                             s.x_node(ix), s.p_node(jp), s.v[layer][n], s.vp[layer][n],
                             s.vxp[layer][n], s.vpp[layer][n], s.a[layer][n]);
            }
        }
    }
    std::fclose(f);
}

}  // namespace shortfall
