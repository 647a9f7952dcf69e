#include "config.hpp"

#include "heatprice/errors.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace heatprice::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

const json& section(const json& j, const char* name) {
    if (!j.contains(name) || !j[name].is_object()) fail(std::string("missing section '") + name + "'");
    return j[name];
}

double number(const json& j, const std::string& key) {
    if (!j.contains(key)) fail("missing key '" + key + "'");
    if (!j[key].is_number()) fail("key '" + key + "' must be a number");
    return j[key].get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    return j.contains(key) ? number(j, key) : fallback;
}

std::size_t count_or(const json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer() || j[key].get<long long>() <= 0) fail("key '" + key + "' must be a positive integer");
    return j[key].get<std::size_t>();
}

bool flag_or(const json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) fail("key '" + key + "' must be true or false");
    return j[key].get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_array()) fail("key '" + key + "' must be an array");
    std::vector<double> v;
    for (const json& x : j[key]) {
        if (!x.is_number()) fail("array '" + key + "' must hold numbers");
        v.push_back(x.get<double>());
    }
    if (v.empty()) fail("array '" + key + "' is empty");
    return v;
}

// Volatility is absolute; "sigma_lognormal" with "sigma_level" converts a lognormal proxy at load time.
std::vector<double> sigmas(const json& m, std::size_t n) {
    std::vector<double> s;
    if (m.contains("sigma")) {
        s = numbers(m, "sigma");
    } else if (m.contains("sigma_lognormal")) {
        double level = number(m, "sigma_level");
        s = numbers(m, "sigma_lognormal");
        for (double& x : s) x *= level;
    } else {
        fail("model needs 'sigma' or 'sigma_lognormal' with 'sigma_level'");
    }
    if (s.size() != n) fail("sigma array length does not match the knots");
    return s;
}

std::vector<Coeffs> knot_values(const json& m, std::size_t n) {
    std::vector<double> r = numbers(m, "r"), q = numbers(m, "q"), s = sigmas(m, n);
    if (r.size() != n || q.size() != n) fail("r and q arrays must match the knots");
    std::vector<Coeffs> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = {r[i], q[i], s[i]};
    return v;
}

CoefficientCurve parse_model(const json& m, double horizon) {
    if (!m.contains("family") || !m["family"].is_string()) fail("model.family must be a string");
    const std::string family = m["family"].get<std::string>();
    horizon = number_or(m, "horizon", horizon);
    if (family == "exponential") {
        ExponentialParams p;
        p.r0 = number(m, "r0");
        p.q0 = number(m, "q0");
        if (m.contains("sigma0"))
            p.sigma0 = number(m, "sigma0");
        else if (m.contains("sigma0_lognormal"))
            p.sigma0 = number(m, "sigma0_lognormal") * number(m, "sigma_level");
        else
            fail("model needs 'sigma0' or 'sigma0_lognormal' with 'sigma_level'");
        p.r_k = number_or(m, "r_k", 0.0);
        p.sigma_k = number_or(m, "sigma_k", 0.0);
        return CoefficientCurve::exponential(p, horizon);
    }
    if (family == "piecewise_constant") {
        std::vector<double> knots = numbers(m, "knots");
        return CoefficientCurve::piecewise_constant(knots, knot_values(m, knots.size()), horizon);
    }
    if (family == "sampled") {
        std::vector<double> times = numbers(m, "times");
        return CoefficientCurve::sampled(times, knot_values(m, times.size()), horizon);
    }
    fail("unknown model family '" + family + "'");
}

TransformChoice parse_transform(const json& n) {
    TransformChoice c;
    std::string mode = n.value("transform", std::string("riccati"));
    if (mode == "riccati")
        c.mode = TransformMode::RiccatiNumeric;
    else if (mode == "closed_form")
        c.mode = TransformMode::ClosedFormExponential;
    else if (mode == "small_drift")
        c.mode = TransformMode::SmallDriftApprox, c.D = number(n, "D");
    else
        fail("unknown transform '" + mode + "'");
    if (n.contains("w0")) c.w0 = number(n, "w0");
    c.grid_steps = count_or(n, "grid_steps", c.grid_steps);
    return c;
}

Penalty parse_penalty(const json& n) {
    std::string p = n.value("penalty", std::string("diagonal"));
    if (p == "diagonal") return Penalty::Diagonal;
    if (p == "identity") return Penalty::Identity;
    if (p == "first_difference") return Penalty::FirstDifference;
    fail("unknown penalty '" + p + "'");
}

} // namespace

static RunConfig parse_checked(const json& j) {
    if (!j.is_object()) fail("config must be an object");
    if (!j.contains("version") || !j["version"].is_number_integer()) fail("missing integer 'version'");
    if (j["version"].get<int>() != kConfigVersion)
        fail("unsupported config version " + std::to_string(j["version"].get<int>()));

    RunConfig cfg;
    const json& prod = section(j, "product");
    if (!prod.contains("type") || !prod["type"].is_string()) fail("product.type must be a string");
    try {
        cfg.request.product = product_from_string(prod["type"].get<std::string>());
    } catch (const Error& e) {
        fail(e.detail());
    }
    cfg.request.S0 = number(prod, "S0");
    cfg.request.strikes = numbers(prod, "strikes");
    cfg.request.maturities = numbers(prod, "maturities");
    const bool barrier = cfg.request.product == Product::UpOutCall || cfg.request.product == Product::DownOutCall;
    cfg.request.H = barrier ? number(prod, "H") : number_or(prod, "H", 0.0);

    if (!(cfg.request.S0 > 0.0)) fail("S0 must be positive");
    for (double K : cfg.request.strikes)
        if (!(K > 0.0)) fail("strikes must be positive");
    for (double T : cfg.request.maturities)
        if (!(T > 0.0)) fail("maturities must be positive");
    if (std::set<double>(cfg.request.strikes.begin(), cfg.request.strikes.end()).size() != cfg.request.strikes.size())
        fail("strikes must be distinct");
    if (std::set<double>(cfg.request.maturities.begin(), cfg.request.maturities.end()).size() !=
        cfg.request.maturities.size())
        fail("maturities must be distinct");
    if (barrier) {
        if (!(cfg.request.S0 < cfg.request.H)) fail("S0 must lie below the barrier H");
        if (cfg.request.product == Product::UpOutCall)
            for (double K : cfg.request.strikes)
                if (!(K < cfg.request.H)) fail("strikes must lie below the barrier H");
    }

    const double Tmax = *std::max_element(cfg.request.maturities.begin(), cfg.request.maturities.end());
    try {
        cfg.curve = parse_model(section(j, "model"), Tmax);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        fail("model: " + e.detail());
    }
    if (Tmax > cfg.curve.horizon()) fail("maturities exceed the model horizon");

    if (j.contains("numerics")) {
        const json& n = section(j, "numerics");
        cfg.semi.transform = parse_transform(n);
        BarrierNumerics& b = cfg.semi.barrier;
        b.n_p = count_or(n, "n_p", b.n_p);
        b.n_tau = count_or(n, "n_tau", b.n_tau);
        b.n_z = count_or(n, "n_z", b.n_z);
        if (b.n_z < 3 || b.n_z % 2 == 0) fail("n_z must be odd and at least 3");
        b.no_psi = flag_or(n, "no_psi", b.no_psi);
        b.closure = flag_or(n, "closure", b.closure);
        b.penalty = parse_penalty(n);
        if (n.contains("lambda")) {
            if (n["lambda"].is_string()) {
                if (n["lambda"].get<std::string>() != "auto") fail("lambda must be a number or \"auto\"");
            } else {
                b.lambda = number(n, "lambda");
                if (!(*b.lambda >= 0.0)) fail("lambda must be non-negative");
            }
        }
        if (n.contains("american")) {
            const json& a = n["american"];
            if (!a.is_object()) fail("numerics.american must be an object");
            AmericanNumerics& am = cfg.semi.american;
            am.n_nodes = count_or(a, "n_nodes", am.n_nodes);
            am.gl_points = count_or(a, "gl_points", am.gl_points);
            am.damping = number_or(a, "damping", am.damping);
            am.tol = number_or(a, "tol", am.tol);
            am.max_iter = count_or(a, "max_iter", am.max_iter);
            if (!(am.damping > 0.0 && am.damping < 1.0)) fail("damping must lie in (0, 1)");
        }
        if (n.contains("fd")) {
            const json& f = n["fd"];
            if (!f.is_object()) fail("numerics.fd must be an object");
            cfg.fd.N = count_or(f, "N", cfg.fd.N);
            if (f.contains("M"))
                cfg.fd.dt = Tmax / static_cast<double>(count_or(f, "M", 1));
            else
                cfg.fd.dt = number_or(f, "dt", cfg.fd.dt);
            cfg.fd.rannacher_steps = f.contains("rannacher_steps") ? f["rannacher_steps"].get<std::size_t>()
                                                                   : cfg.fd.rannacher_steps;
            if (cfg.fd.N < 51) fail("fd.N must be at least 51");
            if (!(cfg.fd.dt > 0.0)) fail("fd time step must be positive");
        }
    }
    if (j.contains("output")) {
        const json& o = section(j, "output");
        if (o.contains("directory")) {
            if (!o["directory"].is_string()) fail("output.directory must be a string");
            cfg.output.directory = o["directory"].get<std::string>();
        }
        cfg.output.timing_in_csv = flag_or(o, "timing_in_csv", cfg.output.timing_in_csv);
        cfg.output.diagnostics = flag_or(o, "diagnostics", cfg.output.diagnostics);
    }
    return cfg;
}

RunConfig parse_config(const json& j) {
    try {
        return parse_checked(j);
    } catch (const json::exception& e) {
        fail(std::string("config has a wrong type: ") + e.what());
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

} // namespace heatprice::cli
