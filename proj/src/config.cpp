#include "svlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace svlab {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double to_double(const std::string& text) {
    std::string t = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw std::invalid_argument("not a finite number: '" + t + "'");
    return v;
}

long long to_integer(const std::string& text) {
    std::string t = trim(text);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw std::invalid_argument("not an integer: '" + t + "'");
    return v;
}

int to_int(const std::string& text) {
    long long v = to_integer(text);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw std::invalid_argument("integer out of range: '" + trim(text) + "'");
    return static_cast<int>(v);
}

bool to_bool(const std::string& text) {
    std::string t = lower(trim(text));
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw std::invalid_argument("not a boolean: '" + trim(text) + "'");
}

std::vector<double> to_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(to_double(cell));
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::vector<double> broadcast(const std::vector<double>& v, std::size_t n, const char* what) {
    if (v.size() == n) return v;
    if (v.size() == 1) return std::vector<double>(n, v[0]);
    throw ConfigError(std::string(what) + " needs 1 or " + std::to_string(n) + " values, got " +
                      std::to_string(v.size()));
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

FunctionSpec FunctionSpec::parse(const std::string& text) {
    std::string t = lower(trim(text));
    FunctionSpec s;
    if (t == "zero" || t == "0") return s;
    auto open = t.find('(');
    if (open == std::string::npos) {
        s.kind = Kind::Constant;
        s.c = to_double(t);
        return s;
    }
    if (t.back() != ')') throw std::invalid_argument("unbalanced parentheses in '" + trim(text) + "'");
    std::string name = trim(t.substr(0, open));
    auto args = to_list(t.substr(open + 1, t.size() - open - 2));
    auto want = [&](std::size_t n) {
        if (args.size() != n)
            throw std::invalid_argument(name + " takes " + std::to_string(n) + " argument(s)");
    };
    if (name == "const") {
        want(1);
        s.kind = Kind::Constant;
        s.c = args[0];
    } else if (name == "power") {
        want(2);
        s.kind = Kind::Power;
        s.c = args[0];
        s.a = args[1];
    } else if (name == "exp") {
        want(2);
        s.kind = Kind::Exponential;
        s.c = args[0];
        s.a = args[1];
    } else {
        throw std::invalid_argument("unknown function '" + name + "'");
    }
    return s;
}

ScalarFunction FunctionSpec::make(double scale) const {
    switch (kind) {
        case Kind::Zero:
            return ScalarFunction::zero();
        case Kind::Constant:
            return ScalarFunction::constant(scale * c);
        case Kind::Power:
            return ScalarFunction::power(scale * c, a);
        case Kind::Exponential:
            return ScalarFunction::exponential(scale * c, a);
    }
    return ScalarFunction::zero();
}

ScalarFunction FunctionSpec::make_abs(double scale) const {
    FunctionSpec s = *this;
    s.c = std::abs(c);
    return s.make(std::abs(scale));
}

std::string FunctionSpec::str() const {
    switch (kind) {
        case Kind::Zero:
            return "zero";
        case Kind::Constant:
            return "const(" + fmt(c) + ")";
        case Kind::Power:
            return "power(" + fmt(c) + "," + fmt(a) + ")";
        case Kind::Exponential:
            return "exp(" + fmt(c) + "," + fmt(a) + ")";
    }
    return "zero";
}

KernelSpec KernelConfig::spec() const {
    if (family == "zero") return KernelSpec::constant(0.0);
    if (family == "constant") return KernelSpec::constant(c);
    if (family == "convolution") return KernelSpec::convolution(f.make());
    if (family == "separated") return KernelSpec::separated(k0.make(), k1.make());
    if (family == "fractional") return KernelSpec::fractional(alpha, beta, gamma);
    throw ConfigError("unknown kernel family '" + family + "'");
}

std::vector<double> CoefficientConfig::xi_vector() const { return broadcast(xi, m, "xi"); }
std::vector<double> CoefficientConfig::kappa_vector() const { return broadcast(kappa, m, "kappa"); }
std::vector<double> CoefficientConfig::eta_matrix(int d) const {
    return broadcast(eta, static_cast<std::size_t>(m) * d, "eta");
}

CoefficientSpec CoefficientConfig::spec(int d) const {
    CoefficientSpec coef = CoefficientSpec::zero(m, d);
    auto& e = std::get<ExemplaryCoefficients>(coef.family);
    const int mm = m;
    e.f = f.make();
    e.g = g.make();
    auto k = kappa_vector();
    if (std::any_of(k.begin(), k.end(), [](double v) { return v != 0.0; }))
        e.kappa = [k](double, double* out) { std::copy(k.begin(), k.end(), out); };
    auto h = eta_matrix(d);
    if (std::any_of(h.begin(), h.end(), [](double v) { return v != 0.0; }))
        e.eta = [h](double, double* out) { std::copy(h.begin(), h.end(), out); };
    auto linear = [mm](double a) {
        return MapSpec{[a, mm](const double* x, const double*, double* out) {
                           for (int i = 0; i < mm; ++i) out[i] = a * x[i];
                       },
                       std::abs(a)};
    };
    auto diagonal = [mm, d](double a) {
        return MapSpec{[a, mm, d](const double* x, const double*, double* out) {
                           std::fill(out, out + static_cast<std::size_t>(mm) * d, 0.0);
                           for (int i = 0; i < std::min(mm, d); ++i) out[static_cast<std::size_t>(i) * d + i] = a * x[i];
                       },
                       std::abs(a)};
    };
    if (f1 != 0.0) e.f1 = linear(f1);
    if (f2 != 0.0) e.f2 = linear(f2);
    if (g1 != 0.0) e.g1 = diagonal(g1);
    if (g2 != 0.0) e.g2 = diagonal(g2);
    return coef;
}

double AnalysisConfig::wp() const { return w_p > 0.0 ? w_p : default_wp(p); }

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig cfg;
    using Setter = std::function<void(const std::string&)>;
    std::map<std::string, Setter> keys;
    auto& K = cfg.kernel;
    auto& C = cfg.coefficients;
    auto& A = cfg.analysis;
    keys["kernel.family"] = [&](const std::string& v) { K.family = lower(trim(v)); };
    keys["kernel.c"] = [&](const std::string& v) { K.c = to_double(v); };
    keys["kernel.f"] = [&](const std::string& v) { K.f = FunctionSpec::parse(v); };
    keys["kernel.k0"] = [&](const std::string& v) { K.k0 = FunctionSpec::parse(v); };
    keys["kernel.k1"] = [&](const std::string& v) { K.k1 = FunctionSpec::parse(v); };
    keys["kernel.alpha"] = [&](const std::string& v) { K.alpha = to_double(v); };
    keys["kernel.beta"] = [&](const std::string& v) { K.beta = to_double(v); };
    keys["kernel.gamma"] = [&](const std::string& v) { K.gamma = to_double(v); };
    keys["kernel.iterates"] = [&](const std::string& v) { K.iterates = to_int(v); };
    keys["kernel.n_max"] = [&](const std::string& v) { K.n_max = to_int(v); };
    keys["kernel.tol"] = [&](const std::string& v) { K.tol = to_double(v); };
    keys["coefficients.m"] = [&](const std::string& v) { C.m = to_int(v); };
    keys["coefficients.xi"] = [&](const std::string& v) { C.xi = to_list(v); };
    keys["coefficients.f"] = [&](const std::string& v) { C.f = FunctionSpec::parse(v); };
    keys["coefficients.g"] = [&](const std::string& v) { C.g = FunctionSpec::parse(v); };
    keys["coefficients.kappa"] = [&](const std::string& v) { C.kappa = to_list(v); };
    keys["coefficients.eta"] = [&](const std::string& v) { C.eta = to_list(v); };
    keys["coefficients.f1"] = [&](const std::string& v) { C.f1 = to_double(v); };
    keys["coefficients.f2"] = [&](const std::string& v) { C.f2 = to_double(v); };
    keys["coefficients.g1"] = [&](const std::string& v) { C.g1 = to_double(v); };
    keys["coefficients.g2"] = [&](const std::string& v) { C.g2 = to_double(v); };
    keys["coefficients.drift_rule"] = [&](const std::string& v) {
        std::string t = lower(trim(v));
        if (t == "trapezoid")
            C.drift_rule = DriftRule::KernelTrapezoid;
        else if (t == "left_point")
            C.drift_rule = DriftRule::LeftPoint;
        else
            throw std::invalid_argument("drift_rule is trapezoid or left_point");
    };
    keys["coefficients.diffusion_rule"] = [&](const std::string& v) {
        std::string t = lower(trim(v));
        if (t == "point")
            C.diffusion_rule = DiffusionRule::Point;
        else if (t == "cell_averaged")
            C.diffusion_rule = DiffusionRule::CellAveraged;
        else
            throw std::invalid_argument("diffusion_rule is point or cell_averaged");
    };
    keys["grid.t"] = [&](const std::string& v) { cfg.grid.T = to_double(v); };
    keys["grid.steps"] = [&](const std::string& v) { cfg.grid.steps = to_int(v); };
    keys["mc.n"] = [&](const std::string& v) { cfg.mc.N = to_int(v); };
    keys["mc.seed"] = [&](const std::string& v) {
        long long s = to_integer(v);
        if (s < 0) throw std::invalid_argument("seed must be non-negative");
        cfg.mc.seed = static_cast<std::uint64_t>(s);
    };
    keys["mc.d"] = [&](const std::string& v) { cfg.mc.d = to_int(v); };
    keys["analysis.p"] = [&](const std::string& v) { A.p = to_double(v); };
    keys["analysis.w_p"] = [&](const std::string& v) { A.w_p = to_double(v); };
    keys["analysis.tol"] = [&](const std::string& v) { A.tol = to_double(v); };
    keys["analysis.slack"] = [&](const std::string& v) { A.slack = to_double(v); };
    keys["analysis.max_iters"] = [&](const std::string& v) { A.max_iters = to_int(v); };
    keys["analysis.seminorm"] = [&](const std::string& v) {
        std::string t = lower(trim(v));
        if (t != "sup" && t != "integrated") throw std::invalid_argument("seminorm is sup or integrated");
        A.integrated_seminorm = t == "integrated";
    };
    keys["analysis.iterates"] = [&](const std::string& v) { A.iterates = to_int(v); };
    keys["analysis.ledger_p"] = [&](const std::string& v) { A.ledger_p = to_double(v); };
    keys["analysis.eps"] = [&](const std::string& v) { A.eps = to_double(v); };
    keys["analysis.m_max"] = [&](const std::string& v) { A.m_max = to_int(v); };
    keys["analysis.n_max"] = [&](const std::string& v) { A.n_max = to_int(v); };
    keys["analysis.beta"] = [&](const std::string& v) { A.beta = to_double(v); };
    keys["analysis.v"] = [&](const std::string& v) { A.v = to_double(v); };
    keys["analysis.m0"] = [&](const std::string& v) { A.m0 = to_double(v); };
    keys["analysis.sequence_length"] = [&](const std::string& v) { A.sequence_length = to_int(v); };
    keys["analysis.holder"] = [&](const std::string& v) { A.holder = to_bool(v); };
    keys["analysis.lag_min"] = [&](const std::string& v) { A.lag_min = to_int(v); };
    keys["analysis.lag_max"] = [&](const std::string& v) { A.lag_max = to_int(v); };
    keys["output.dir"] = [&](const std::string& v) { cfg.output.dir = trim(v); };
    keys["output.paths"] = [&](const std::string& v) { cfg.output.paths = to_bool(v); };

    const std::vector<std::string> sections{"kernel", "coefficients", "grid", "mc", "analysis", "output"};
    std::map<std::string, std::string> entries;  // canonical key -> raw value
    std::map<std::string, int> where;
    std::string section;
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        std::string line = raw;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header", lineno);
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (std::find(sections.begin(), sections.end(), section) == sections.end())
                throw ConfigError("unknown section [" + section + "]", lineno);
            if (section == "kernel") K.present = true;
            if (section == "coefficients") C.present = true;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
        if (section.empty()) throw ConfigError("key outside of any section", lineno);
        std::string key = section + "." + lower(trim(line.substr(0, eq)));
        std::string value = trim(line.substr(eq + 1));
        auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError("unknown key '" + key + "'", lineno);
        if (entries.count(key)) throw ConfigError("duplicate key '" + key + "'", lineno);
        try {
            it->second(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key + ": " + e.what(), lineno);
        } catch (const ConfigError& e) {
            throw ConfigError(key + ": " + e.what(), lineno);
        }
        entries[key] = value;
        where[key] = lineno;
    }

    auto fail = [&](const std::string& key, const std::string& msg) {
        auto w = where.find(key);
        throw ConfigError(msg, w == where.end() ? 0 : w->second);
    };
    if (K.present) {
        const std::vector<std::string> families{"zero", "constant", "convolution", "separated", "fractional"};
        if (std::find(families.begin(), families.end(), K.family) == families.end())
            fail("kernel.family", "unknown kernel family '" + K.family + "'");
        if (K.iterates < 1) fail("kernel.iterates", "kernel.iterates must be >= 1");
        if (K.n_max < 1) fail("kernel.n_max", "kernel.n_max must be >= 1");
        if (!(K.tol > 0.0)) fail("kernel.tol", "kernel.tol must be positive");
    }
    if (C.m < 1) fail("coefficients.m", "coefficients.m must be >= 1");
    try {
        C.xi_vector();
        C.kappa_vector();
        C.eta_matrix(cfg.mc.d);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("coefficients: ") + e.what());
    }
    if (!(cfg.grid.T > 0.0)) fail("grid.t", "grid.T must be positive");
    if (cfg.grid.steps < 1) fail("grid.steps", "grid.steps must be >= 1");
    if (cfg.mc.N < 1) fail("mc.n", "mc.N must be >= 1");
    if (cfg.mc.d < 1) fail("mc.d", "mc.d must be >= 1");
    if (A.p < 2.0) fail("analysis.p", "analysis.p must be >= 2");
    if (A.w_p < 0.0) fail("analysis.w_p", "analysis.w_p must be positive");
    if (!(A.tol > 0.0)) fail("analysis.tol", "analysis.tol must be positive");
    if (!(A.slack >= 1.0)) fail("analysis.slack", "analysis.slack must be >= 1");
    if (A.max_iters < 1) fail("analysis.max_iters", "analysis.max_iters must be >= 1");
    if (A.iterates < 1) fail("analysis.iterates", "analysis.iterates must be >= 1");
    if (A.ledger_p < 1.0) fail("analysis.ledger_p", "analysis.ledger_p must be >= 1");
    if (!(A.eps > 0.0)) fail("analysis.eps", "analysis.eps must be positive");
    if (A.m_max < 1 || A.n_max < 1) fail(A.m_max < 1 ? "analysis.m_max" : "analysis.n_max", "ledger sizes must be >= 1");
    if (A.beta < 1.0 || A.beta > A.p) fail("analysis.beta", "analysis.beta must lie in [1, p]");
    if (A.v < 0.0 || A.m0 < 0.0) fail(A.v < 0.0 ? "analysis.v" : "analysis.m0", "moment data must be non-negative");
    if (A.sequence_length < 1) fail("analysis.sequence_length", "analysis.sequence_length must be >= 1");
    if (A.holder && (A.lag_min < 1 || A.lag_max < 2 * A.lag_min || A.lag_max > cfg.grid.steps))
        fail("analysis.lag_max", "need 1 <= lag_min, 2 lag_min <= lag_max <= grid.steps");

    std::string canon;
    for (const auto& [key, value] : entries) {
        if (key == "mc.seed" || key.rfind("output.", 0) == 0) continue;
        canon += key + "=" + value + "\n";
    }
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canon);
    cfg.hash = h.str();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

}  // namespace svlab
