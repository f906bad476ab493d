#include "shortfall/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace shortfall {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw std::invalid_argument(where + ": " + what);
}

// Object walker that records consumed keys so typos surface as errors.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    double num(const char* key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        return v.get<double>();
    }

    std::uint64_t uint(const char* key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_unsigned()) fail(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool flag(const char* key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) fail(at(key), "expected a boolean");
        return v.get<bool>();
    }

    std::string str(const char* key, std::string fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_string()) fail(at(key), "expected a string");
        return v.get<std::string>();
    }

    std::string str_req(const char* key) {
        if (!has(key)) fail(at(key), "missing required key");
        return str(key, "");
    }

    std::vector<double> num_list(const char* key, std::vector<double> fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (const json& e : v) {
            if (!e.is_number()) fail(at(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::size_t> uint_list(const char* key, std::vector<std::size_t> fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array of nonnegative integers");
        std::vector<std::size_t> out;
        for (const json& e : v) {
            if (!e.is_number_unsigned()) fail(at(key), "expected an array of nonnegative integers");
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string at(const char* key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) fail(path_ + "." + item.key(), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

ShapingLaw parse_law(Node& n, const std::string& where) {
    const std::string kind = n.str_req("kind");
    if (kind == "degenerate") {
        const ShapingLaw law = ShapingLaw::degenerate(n.num("value", 1.0));
        n.finish();
        return law;
    }
    if (kind == "scaled_beta") {
        const ShapingLaw law =
            ShapingLaw::scaled_beta(n.num("alpha", 0.0), n.num("beta", 0.0), n.num("scale", 1.0));
        n.finish();
        return law;
    }
    if (kind == "empirical") {
        const ShapingLaw law =
            ShapingLaw::empirical(n.num_list("atoms", {}), n.num_list("probs", {}));
        n.finish();
        return law;
    }
    fail(where + ".kind", "unknown law kind '" + kind + "'");
}

}  // namespace

TimeGrid AppConfig::time_grid() const {
    const double ratio = opt.T / dt;
    const double rounded = std::round(ratio);
    if (std::fabs(ratio - rounded) > 1e-6 * std::max(1.0, std::fabs(ratio)))
        throw std::invalid_argument("config: option.T is not an integer number of dt steps");
    return TimeGrid{0.0, dt, static_cast<std::size_t>(rounded)};
}

AppConfig parse_config_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(origin + ": " + e.what());
    }

    AppConfig cfg;
    Node root(j, origin);

    if (root.has("model")) {
        Node n(root.raw("model"), origin + ".model");
        cfg.model.mu = n.num("mu", cfg.model.mu);
        cfg.model.sigma = n.num("sigma", cfg.model.sigma);
        n.finish();
    }
    cfg.model.validate();

    if (root.has("option")) {
        Node n(root.raw("option"), origin + ".option");
        cfg.opt.strike = n.num("strike", cfg.opt.strike);
        cfg.opt.T = n.num("T", cfg.opt.T);
        cfg.opt.T_star = n.num("T_star", cfg.opt.T_star);
        n.finish();
    }
    cfg.opt.validate();

    if (root.has("loss")) {
        Node n(root.raw("loss"), origin + ".loss");
        cfg.loss.k = n.num("k", cfg.loss.k);
        cfg.loss.kappa = n.num("kappa", cfg.loss.kappa);
        n.finish();
    }
    cfg.loss.validate();

    if (root.has("law")) {
        Node n(root.raw("law"), origin + ".law");
        cfg.law = parse_law(n, origin + ".law");
    }

    if (root.has("solver")) {
        Node n(root.raw("solver"), origin + ".solver");
        SolverConfig& s = cfg.solver;
        s.n_x = n.uint("n_x", s.n_x);
        s.n_p = n.uint("n_p", s.n_p);
        s.x_lo_mult = n.num("x_lo_mult", s.x_lo_mult);
        s.x_hi_mult = n.num("x_hi_mult", s.x_hi_mult);
        s.p_lo_mult = n.num("p_lo_mult", s.p_lo_mult);
        s.p_hi_mult = n.num("p_hi_mult", s.p_hi_mult);
        s.gh_nodes = n.uint("gh_nodes", s.gh_nodes);
        s.mc_particles = n.uint("mc_particles", s.mc_particles);
        s.fp_tol = n.num("fp_tol", s.fp_tol);
        s.fp_max_iters = n.uint("fp_max_iters", s.fp_max_iters);
        s.extrap_mult = n.num("extrap_mult", s.extrap_mult);
        s.lambda_nodes = n.uint("lambda_nodes", s.lambda_nodes);
        s.threads = n.uint("threads", s.threads);
        n.finish();
        s.validate();
    }

    cfg.x0 = root.num("x0", cfg.x0);
    cfg.p0 = root.num("p0", cfg.p0);
    cfg.dt = root.num("dt", cfg.dt);
    cfg.seed = root.uint("seed", cfg.seed);
    if (!(cfg.x0 > 0.0)) fail(origin + ".x0", "must be positive");
    if (!(cfg.p0 < 0.0)) fail(origin + ".p0", "loss budget must be negative");
    if (!(cfg.dt > 0.0)) fail(origin + ".dt", "must be positive");

    if (root.has("price")) {
        Node n(root.raw("price"), origin + ".price");
        if (n.has("points")) {
            const json& pts = n.raw("points");
            if (!pts.is_array()) fail(origin + ".price.points", "expected an array");
            cfg.price.points.clear();
            std::size_t i = 0;
            for (const json& e : pts) {
                Node pn(e, origin + ".price.points[" + std::to_string(i++) + "]");
                PricePoint pt;
                pt.t = pn.num("t", pt.t);
                pt.x = pn.num("x", pt.x);
                pt.p = pn.num("p", pt.p);
                pt.lambda = pn.num("lambda", pt.lambda);
                pn.finish();
                cfg.price.points.push_back(pt);
            }
            if (cfg.price.points.empty()) fail(origin + ".price.points", "expected at least one point");
        }
        n.finish();
    }

    if (root.has("facelift")) {
        Node n(root.raw("facelift"), origin + ".facelift");
        cfg.facelift.n_x = n.uint("n_x", cfg.facelift.n_x);
        cfg.facelift.x_lo_mult = n.num("x_lo_mult", cfg.facelift.x_lo_mult);
        cfg.facelift.x_hi_mult = n.num("x_hi_mult", cfg.facelift.x_hi_mult);
        cfg.facelift.p_values = n.num_list("p_values", cfg.facelift.p_values);
        n.finish();
        if (cfg.facelift.n_x < 2) fail(origin + ".facelift.n_x", "need at least two points");
        if (!(cfg.facelift.x_lo_mult > 0.0 && cfg.facelift.x_hi_mult > cfg.facelift.x_lo_mult))
            fail(origin + ".facelift", "x multipliers must satisfy 0 < lo < hi");
    }

    if (root.has("backtest")) {
        Node n(root.raw("backtest"), origin + ".backtest");
        BacktestSection& b = cfg.backtest;
        b.lambda0 = n.num("lambda0", b.lambda0);
        b.n_paths = n.uint("n_paths", b.n_paths);
        b.naive_realized_lambda = n.flag("naive_realized_lambda", b.naive_realized_lambda);
        b.gammas = n.num_list("gammas", b.gammas);
        b.p_abs = n.num_list("p_abs", b.p_abs);
        b.match_capital = n.flag("match_capital", b.match_capital);
        b.cvar_levels = n.num_list("cvar_levels", b.cvar_levels);
        n.finish();
        if (!(b.lambda0 > 0.0)) fail(origin + ".backtest.lambda0", "must be positive");
        for (double g : b.gammas)
            if (!(g > 0.0)) fail(origin + ".backtest.gammas", "strike factors must be positive");
        for (double pa : b.p_abs)
            if (!(pa > 0.0)) fail(origin + ".backtest.p_abs", "budgets are absolute values, > 0");
        for (double q : b.cvar_levels)
            if (!(q > 0.0 && q < 1.0)) fail(origin + ".backtest.cvar_levels", "levels lie in (0,1)");
    }

    if (root.has("calibrate")) {
        Node n(root.raw("calibrate"), origin + ".calibrate");
        cfg.calibrate.month_quotes = n.str("month_quotes", "");
        cfg.calibrate.quarter_quotes = n.str("quarter_quotes", "");
        n.finish();
    }

    if (root.has("validate")) {
        Node n(root.raw("validate"), origin + ".validate");
        ValidateSection& v = cfg.validate;
        v.tol_value = n.num("tol_value", v.tol_value);
        v.tol_strategy = n.num("tol_strategy", v.tol_strategy);
        v.layers = n.uint_list("layers", v.layers);
        v.x_lo_rel = n.num("x_lo_rel", v.x_lo_rel);
        v.x_hi_rel = n.num("x_hi_rel", v.x_hi_rel);
        v.n_eval = n.uint("n_eval", v.n_eval);
        n.finish();
        if (!(v.tol_value > 0.0 && v.tol_strategy > 0.0))
            fail(origin + ".validate", "tolerances must be positive");
        if (!(v.x_lo_rel > 0.0 && v.x_hi_rel > v.x_lo_rel))
            fail(origin + ".validate", "x window must satisfy 0 < lo < hi");
        if (v.n_eval < 2) fail(origin + ".validate.n_eval", "need at least two points");
    }

    root.finish();
    cfg.solver.seed = cfg.seed;
    return cfg;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str(), path);
}

}  // namespace shortfall
