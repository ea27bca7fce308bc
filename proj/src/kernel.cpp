#include "svlab/kernel.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <charconv>
#include <cmath>

namespace svlab {

namespace {

std::string num(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double tanh_sinh_integral(const std::function<double(double)>& f, double lo, double hi) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, lo, hi);
}

double powq(double v, double q) { return v == 0.0 ? 0.0 : (q == 1.0 ? v : std::pow(v, q)); }

// Model-scaled integral of (dist)^x between two distances d0 < d1.
double power_moment(double d0, double d1, double x) {
    if (x == -1.0) return d0 == 0.0 ? kInf : std::log(d1 / d0);
    if (x < -1.0 && d0 == 0.0) return kInf;
    return (std::pow(d1, x + 1.0) - std::pow(d0, x + 1.0)) / (x + 1.0);
}

}  // namespace

// ---------------------------------------------------------------- ScalarFunction

ScalarFunction ScalarFunction::constant(double c) {
    ScalarFunction f;
    f.kind_ = Kind::Constant;
    f.c_ = c;
    return f;
}

ScalarFunction ScalarFunction::power(double c, double a) {
    ScalarFunction f;
    f.kind_ = a == 0.0 ? Kind::Constant : Kind::Power;
    f.c_ = c;
    f.a_ = a;
    return f;
}

ScalarFunction ScalarFunction::exponential(double c, double lambda) {
    ScalarFunction f;
    f.kind_ = Kind::Exponential;
    f.c_ = c;
    f.a_ = lambda;
    return f;
}

ScalarFunction ScalarFunction::custom(std::function<double(double)> fn, std::optional<double> exponent_at_zero,
                                      std::string name) {
    ScalarFunction f;
    f.kind_ = Kind::Custom;
    f.fn_ = std::move(fn);
    f.custom_exponent_ = exponent_at_zero;
    f.name_ = std::move(name);
    return f;
}

double ScalarFunction::operator()(double u) const {
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return c_;
        case Kind::Power:
            if (c_ == 0.0) return 0.0;
            return c_ * std::pow(u, a_);
        case Kind::Exponential: return c_ * std::exp(a_ * u);
        case Kind::Custom: return fn_(u);
    }
    return 0.0;
}

std::optional<double> ScalarFunction::exponent_at_zero() const {
    switch (kind_) {
        case Kind::Power: return a_;
        case Kind::Custom: return custom_exponent_;
        default: return 0.0;
    }
}

double ScalarFunction::integral_abs_pow(double lo, double hi, double q) const {
    if (hi <= lo || is_zero()) return 0.0;
    double cq = std::pow(std::abs(c_), q);
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return cq * (hi - lo);
        case Kind::Power: return cq * power_moment(lo, hi, q * a_);
        case Kind::Exponential: {
            double r = q * a_;
            if (r == 0.0) return cq * (hi - lo);
            return cq * (std::exp(r * hi) - std::exp(r * lo)) / r;
        }
        case Kind::Custom: {
            if (lo == 0.0 && custom_exponent_ && q * *custom_exponent_ <= -1.0) return kInf;
            return tanh_sinh_integral([&](double u) { return std::pow(std::abs(fn_(u)), q); }, lo, hi);
        }
    }
    return 0.0;
}

double ScalarFunction::integral(double lo, double hi) const {
    if (hi <= lo || is_zero()) return 0.0;
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return c_ * (hi - lo);
        case Kind::Power: return c_ * power_moment(lo, hi, a_);
        case Kind::Exponential:
            if (a_ == 0.0) return c_ * (hi - lo);
            return c_ * (std::exp(a_ * hi) - std::exp(a_ * lo)) / a_;
        case Kind::Custom:
            if (lo == 0.0 && custom_exponent_ && *custom_exponent_ <= -1.0) return kInf;
            return tanh_sinh_integral(fn_, lo, hi);
    }
    return 0.0;
}

double ScalarFunction::first_moment(double lo, double hi) const {
    if (hi <= lo || is_zero()) return 0.0;
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::Constant: return c_ * 0.5 * (hi * hi - lo * lo);
        case Kind::Power: return c_ * power_moment(lo, hi, a_ + 1.0);
        case Kind::Exponential: {
            if (a_ == 0.0) return c_ * 0.5 * (hi * hi - lo * lo);
            auto F = [&](double u) { return (u / a_ - 1.0 / (a_ * a_)) * std::exp(a_ * u); };
            return c_ * (F(hi) - F(lo));
        }
        case Kind::Custom:
            if (lo == 0.0 && custom_exponent_ && *custom_exponent_ <= -2.0) return kInf;
            return tanh_sinh_integral([&](double u) { return u * fn_(u); }, lo, hi);
    }
    return 0.0;
}

std::string ScalarFunction::describe() const {
    switch (kind_) {
        case Kind::Zero: return "zero";
        case Kind::Constant: return "const(" + num(c_) + ")";
        case Kind::Power: return "power(" + num(c_) + ", " + num(a_) + ")";
        case Kind::Exponential: return "exp(" + num(c_) + ", " + num(a_) + ")";
        case Kind::Custom: return "custom:" + name_;
    }
    return "?";
}

// ---------------------------------------------------------------- KernelSpec

KernelSpec::KernelSpec(Family family, std::optional<double> singular_exponent)
    : family_(std::move(family)), singular_exponent_(singular_exponent) {}

KernelSpec KernelSpec::constant(double c) {
    if (c < 0.0) throw DomainError("constant kernel must be non-negative");
    return KernelSpec(ConstantKernel{c}, 0.0);
}

KernelSpec KernelSpec::convolution(ScalarFunction f) {
    auto e = f.exponent_at_zero();
    return KernelSpec(ConvolutionKernel{std::move(f)}, e);
}

KernelSpec KernelSpec::separated(ScalarFunction k0, ScalarFunction k1) {
    return KernelSpec(SeparatedKernel{std::move(k0), std::move(k1)}, 0.0);
}

KernelSpec KernelSpec::fractional(double alpha, double beta, double gamma) {
    if (!(alpha > 0.0) || beta < 0.0 || !(gamma > 0.0)) throw DomainError("fractional kernel needs alpha>0, beta>=0, gamma>0");
    return KernelSpec(FractionalKernel{alpha, beta, gamma}, alpha - 1.0);
}

KernelSpec KernelSpec::tabulated(TriangularTable table) {
    auto e = table.diagonal_exponent();
    return KernelSpec(TabulatedKernel{std::make_shared<const TriangularTable>(std::move(table))}, e);
}

std::optional<double> KernelSpec::origin_exponent() const {
    if (auto* s = std::get_if<SeparatedKernel>(&family_)) return s->k1.exponent_at_zero();
    if (auto* f = std::get_if<FractionalKernel>(&family_)) return f->gamma - 1.0 - f->beta * f->gamma;
    return std::nullopt;
}

bool KernelSpec::is_zero() const {
    if (auto* c = std::get_if<ConstantKernel>(&family_)) return c->c == 0.0;
    if (auto* c = std::get_if<ConvolutionKernel>(&family_)) return c->f.is_zero();
    if (auto* s = std::get_if<SeparatedKernel>(&family_)) return s->k0.is_zero() || s->k1.is_zero();
    if (auto* t = std::get_if<TabulatedKernel>(&family_)) {
        for (double v : t->table->raw())
            if (v != 0.0) return false;
        return true;
    }
    return false;
}

double KernelSpec::value(double t, double s) const {
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SeparatedKernel>) {
                return ext_mul(k.k0(t), k.k1(s));
            } else if constexpr (std::is_same_v<K, ConvolutionKernel>) {
                return k.f(t - s);
            } else if constexpr (std::is_same_v<K, FractionalKernel>) {
                double e0 = k.gamma - 1.0 - k.beta * k.gamma;
                double a = s == 0.0 ? (e0 < 0.0 ? kInf : (e0 == 0.0 ? 1.0 : 0.0)) : std::pow(s, e0);
                double gap = std::pow(t, k.gamma) - std::pow(s, k.gamma);
                double b = std::pow(std::max(gap, 0.0), k.alpha - 1.0);
                return k.gamma * ext_mul(a, b);
            } else if constexpr (std::is_same_v<K, ConstantKernel>) {
                return k.c;
            } else {
                const auto& g = k.table->grid();
                int i = g.index_of(t), j = g.index_of(s);
                if (i < 0 || j < 0 || j > i) throw DomainError("tabulated kernel evaluated off the grid");
                return k.table->at(i, j);
            }
        },
        family_);
}

std::string KernelSpec::describe() const {
    return std::visit(
        [&](const auto& k) -> std::string {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SeparatedKernel>)
                return "separated(" + k.k0.describe() + "; " + k.k1.describe() + ")";
            else if constexpr (std::is_same_v<K, ConvolutionKernel>)
                return "convolution(" + k.f.describe() + ")";
            else if constexpr (std::is_same_v<K, FractionalKernel>)
                return "fractional(" + num(k.alpha) + ", " + num(k.beta) + ", " + num(k.gamma) + ")";
            else if constexpr (std::is_same_v<K, ConstantKernel>)
                return "constant(" + num(k.c) + ")";
            else
                return "tabulated";
        },
        family_);
}

double eval_kernel(const KernelSpec& spec, double t, double s) {
    if (s < 0.0) throw DomainError("eval_kernel: s < 0");
    if (s >= t) throw DomainError("eval_kernel: needs s < t");
    double v = spec.value(t, s);
    if (std::isnan(v) || (!std::isfinite(v) && s > 0.0))
        throw EvaluationError("kernel value not finite at (" + num(t) + ", " + num(s) + ")");
    return v;
}

// ---------------------------------------------------------------- cell integration

namespace {

struct CellRule {
    const KernelSpec& spec;
    double q;
    std::optional<double> xd;  // q * diagonal exponent
    std::optional<double> xo;  // q * origin exponent
    bool conv;

    CellRule(const KernelSpec& s, double q_) : spec(s), q(q_), conv(s.is_convolution()) {
        if (auto e = s.singular_exponent()) xd = q * *e;
        if (auto e = s.origin_exponent()) xo = q * *e;
    }

    double kq(double t, double s) const { return powq(spec.value(t, s), q); }

    bool diag_model(bool touch) const { return xd && ((touch && *xd < 0.0) || conv); }

    // int_a^b k(t,s)^q ds
    double row(double t, double a, double b, bool touch_o, bool touch_d) const {
        bool use_d = diag_model(touch_d);
        bool use_o = touch_o && xo && *xo < 0.0;
        double mid = 0.5 * (a + b);
        double v = kq(t, mid);
        if (v == 0.0) {
            if (use_d || use_o) return 0.0;
        }
        if (touch_d && use_d && *xd <= -1.0) return kInf;
        if (use_o && *xo <= -1.0) return kInf;
        if (use_d && use_o) {
            // single cell [0, t] singular at both ends
            double C = v / (std::pow(mid, *xo) * std::pow(t - mid, *xd));
            return C * std::pow(t, *xo + *xd + 1.0) * std::beta(*xo + 1.0, *xd + 1.0);
        }
        if (use_d) {
            double C = v / std::pow(t - mid, *xd);
            return C * power_moment(t - b, t - a, *xd);
        }
        if (use_o) {
            double C = v / std::pow(mid, *xo);
            return C * power_moment(a, b, *xo);
        }
        double fa = kq(t, a), fb = kq(t, b);
        if (!std::isfinite(fa) || !std::isfinite(fb)) return (b - a) * v;
        return 0.5 * (b - a) * (fa + fb);
    }

    // int_a^b k(t,s)^q dt for fixed s, s <= a < b
    double col(double s, double a, double b) const {
        bool touch_d = a == s;
        if (s == 0.0 && xo && *xo < 0.0) return spec.is_zero() ? 0.0 : kInf;
        bool use_d = diag_model(touch_d);
        double mid = 0.5 * (a + b);
        double v = kq(mid, s);
        if (v == 0.0 && use_d) return 0.0;
        if (touch_d && use_d && *xd <= -1.0) return kInf;
        if (use_d) {
            double C = v / std::pow(mid - s, *xd);
            return C * power_moment(a - s, b - s, *xd);
        }
        double fa = kq(a, s), fb = kq(b, s);
        if (!std::isfinite(fa) || !std::isfinite(fb)) return (b - a) * v;
        return 0.5 * (b - a) * (fa + fb);
    }
};

// Tabulated kernels only know their nodes.
double table_cell(const TriangularTable& T, double q, int i0, int j0, int i1, int j1, bool singular_end_hi,
                  bool singular_end_lo) {
    double h = T.grid().h();
    std::optional<double> x;
    if (auto e = T.diagonal_exponent()) x = q * *e;
    double v0 = powq(T.at(i0, j0), q), v1 = powq(T.at(i1, j1), q);
    if (x && *x < 0.0 && (singular_end_hi || singular_end_lo)) {
        double calib = singular_end_hi ? v0 : v1;
        if (calib == 0.0) return 0.0;
        if (*x <= -1.0) return kInf;
        return calib / std::pow(h, *x) * std::pow(h, *x + 1.0) / (*x + 1.0);
    }
    return 0.5 * h * (v0 + v1);
}

}  // namespace

std::vector<double> row_cells(const KernelSpec& spec, double q, const TimeGrid& grid, int i) {
    std::vector<double> out(i, 0.0);
    if (spec.is_zero()) return out;
    if (auto* tk = std::get_if<TabulatedKernel>(&spec.family())) {
        for (int m = 0; m < i; ++m) out[m] = table_cell(*tk->table, q, i, m, i, m + 1, m == i - 1, false);
        return out;
    }
    CellRule rule(spec, q);
    double t = grid.node(i);
    for (int m = 0; m < i; ++m)
        out[m] = rule.row(t, grid.node(m), grid.node(m + 1), m == 0, m == i - 1);
    return out;
}

std::vector<double> col_cells(const KernelSpec& spec, double q, const TimeGrid& grid, int j) {
    const int n = grid.steps;
    std::vector<double> out(n - j, 0.0);
    if (spec.is_zero()) return out;
    if (auto* tk = std::get_if<TabulatedKernel>(&spec.family())) {
        for (int m = j; m < n; ++m) out[m - j] = table_cell(*tk->table, q, m, j, m + 1, j, false, m == j);
        return out;
    }
    CellRule rule(spec, q);
    double s = grid.node(j);
    for (int m = j; m < n; ++m) out[m - j] = rule.col(s, grid.node(m), grid.node(m + 1));
    return out;
}

double q_integral(const KernelSpec& spec, double q, double t, const TimeGrid& grid) {
    if (q < 1.0) throw DomainError("q_integral needs q >= 1");
    int i = grid.index_of(t);
    if (i < 0) throw DomainError("q_integral: t is not a grid node");
    double sum = 0.0;
    for (double c : row_cells(spec, q, grid, i)) sum += c;
    return sum;
}

TriangularTable tabulate(const KernelSpec& spec, const TimeGrid& grid, double q) {
    std::optional<double> e;
    if (auto s = spec.singular_exponent()) e = q * *s;
    TriangularTable T(grid, e);
    bool sing = e && *e < 0.0;
    for (int i = 0; i <= grid.steps; ++i) {
        double t = grid.node(i);
        for (int j = 0; j <= i; ++j) {
            double v;
            if (j == i)
                v = sing ? kInf : spec.value(t, t);
            else
                v = spec.value(t, grid.node(j));
            if (std::isnan(v)) throw EvaluationError("kernel value NaN while tabulating");
            if (v < 0.0) throw DomainError("kernel is negative at a grid node");
            if (std::isinf(v) && j == i && !sing) v = kInf;
            T.at(i, j) = powq(v, q);
        }
    }
    if (sing) {
        for (int i = 0; i <= grid.steps; ++i) T.at(i, i) = spec.is_zero() ? 0.0 : kInf;
    }
    return T;
}

// ---------------------------------------------------------------- membership

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Member: return "Member";
        case Verdict::NotMember: return "NotMember";
        default: return "Inconclusive";
    }
}

std::vector<double> default_delta_ladder(double T) {
    std::vector<double> out;
    for (int k = 1; k <= 8; ++k) out.push_back(T * std::pow(10.0, -k));
    return out;
}

namespace {

int last_node(const TimeGrid& grid, double T) {
    int n = static_cast<int>(std::floor(T / grid.h() + 1e-9));
    return std::clamp(n, 0, grid.steps);
}

// Window of length delta < h inside the cell next to the singular end.
double subcell_row(const KernelSpec& spec, double q, const TimeGrid& grid, int i, double delta, double full_cell) {
    double h = grid.h();
    auto e = spec.singular_exponent();
    if (e && (q * *e < 0.0 || spec.is_convolution())) {
        double x = q * *e;
        if (full_cell == 0.0) return 0.0;
        if (!std::isfinite(full_cell)) return kInf;
        // same power model as the full cell, so the window is monotone in delta
        return full_cell * std::pow(delta / h, x + 1.0);
    }
    (void)i;
    return full_cell * delta / h;
}

double window_sup(const std::vector<std::vector<double>>& cells, int first, int last, double delta, double h,
                  const std::function<double(int, double)>& subcell) {
    int L = static_cast<int>(std::floor(delta / h + 1e-9));
    double sup = 0.0;
    for (int k = first; k <= last; ++k) {
        const auto& c = cells[k];
        if (c.empty()) continue;
        double w = 0.0;
        if (L >= 1) {
            // rows accumulate from the singular end at the back, columns from the front
            int cnt = std::min<int>(L, static_cast<int>(c.size()));
            for (int m = 0; m < cnt; ++m) w += c[c.size() - 1 - m];
        } else {
            w = subcell(k, c.back());
        }
        sup = std::max(sup, w);
    }
    return sup;
}

Verdict sup_verdict(const std::vector<double>& S, int first, double h_rel) {
    double sup = 0.0;
    int arg = -1;
    for (int k = first; k < static_cast<int>(S.size()); ++k) {
        if (!std::isfinite(S[k])) return Verdict::NotMember;
        if (arg < 0 || S[k] > sup) {
            sup = S[k];
            arg = k;
        }
    }
    if (arg < 0) return Verdict::Member;
    // maximum at the first node with an O(1) jump from its neighbour: the integrals
    // blow up toward the endpoint faster than any smooth change over one cell
    if (arg == first && first + 1 < static_cast<int>(S.size()) &&
        S[first] > S[first + 1] * (1.0 + std::max(0.05, 20.0 * h_rel)))
        return Verdict::Inconclusive;
    return Verdict::Member;
}

Verdict modulus_verdict(Verdict base, const std::vector<std::pair<double, double>>& mod, double tol) {
    if (base != Verdict::Member) return base;
    if (mod.empty()) return Verdict::Inconclusive;
    double last = mod.back().second, first = mod.front().second;
    if (!std::isfinite(last)) return Verdict::NotMember;
    if (last < tol) return Verdict::Member;
    if (last >= 0.9 * first) return Verdict::NotMember;
    // a clean power-law decay along the whole ladder extrapolates to zero
    std::vector<double> slopes;
    for (std::size_t k = 1; k < mod.size(); ++k) {
        if (!(mod[k].second > 0.0)) return Verdict::Member;
        slopes.push_back(std::log(mod[k - 1].second / mod[k].second) / std::log(mod[k - 1].first / mod[k].first));
    }
    double lo = *std::min_element(slopes.begin(), slopes.end());
    if (lo > 0.0 && slopes.back() >= 0.5 * slopes.front()) return Verdict::Member;
    return Verdict::Inconclusive;
}

}  // namespace

double row_modulus(const KernelSpec& spec, double q, double T, const TimeGrid& grid, double delta) {
    int nT = last_node(grid, T);
    std::vector<std::vector<double>> rows(nT + 1);
    for (int i = 1; i <= nT; ++i) rows[i] = row_cells(spec, q, grid, i);
    // rows[i].back() is the diagonal cell
    return window_sup(rows, 1, nT, delta, grid.h(),
                      [&](int i, double cell) { return subcell_row(spec, q, grid, i, delta, cell); });
}

double col_modulus(const KernelSpec& spec, double q, double T, const TimeGrid& grid, double delta) {
    int nT = last_node(grid, T);
    bool origin_sing = spec.origin_exponent() && *spec.origin_exponent() < 0.0 && !spec.is_zero();
    std::vector<std::vector<double>> cols(nT + 1);
    for (int j = origin_sing ? 1 : 0; j < nT; ++j) {
        auto c = col_cells(spec, q, grid, j);
        c.resize(nT - j);
        std::reverse(c.begin(), c.end());  // diagonal cell last, as for rows
        cols[j] = std::move(c);
    }
    return window_sup(cols, 0, nT, delta, grid.h(),
                      [&](int j, double cell) { return subcell_row(spec, q, grid, j, delta, cell); });
}

ClassReport class_membership(const KernelSpec& spec, double q, double T, const TimeGrid& grid,
                             const std::vector<double>& ladder, const MembershipOptions& opts) {
    if (q < 1.0) throw DomainError("class_membership needs q >= 1");
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        if (ladder[k] > T + 1e-12) throw DomainError("delta ladder entries must be <= T");
        if (k > 0 && !(ladder[k] < ladder[k - 1])) throw DomainError("delta ladder must be strictly decreasing");
    }
    ClassReport rep;
    rep.q = q;
    const int nT = last_node(grid, T);
    const double h = grid.h();

    std::vector<std::vector<double>> rows(nT + 1);
    std::vector<double> S(nT + 1, 0.0);
    for (int i = 1; i <= nT; ++i) {
        rows[i] = row_cells(spec, q, grid, i);
        double s = 0.0;
        for (double c : rows[i]) s += c;
        S[i] = s;
    }
    rep.sup_q_integral = 0.0;
    for (int i = 1; i <= nT; ++i) rep.sup_q_integral = std::max(rep.sup_q_integral, S[i]);
    rep.verdict_Kinf = sup_verdict(S, 1, h / T);

    for (double d : ladder)
        rep.modulus.emplace_back(
            d, window_sup(rows, 1, nT, d, h, [&](int i, double c) { return subcell_row(spec, q, grid, i, d, c); }));
    rep.verdict_K = modulus_verdict(rep.verdict_Kinf, rep.modulus, opts.modulus_tol);

    bool origin_sing = spec.origin_exponent() && *spec.origin_exponent() < 0.0 && !spec.is_zero();
    int first = origin_sing ? 1 : 0;  // the column at a singular origin is a null set
    std::vector<std::vector<double>> cols(nT + 1);
    std::vector<double> C(nT + 1, 0.0);
    for (int j = first; j < nT; ++j) {
        auto c = col_cells(spec, q, grid, j);
        c.resize(nT - j);
        double s = 0.0;
        for (double v : c) s += v;
        C[j] = s;
        std::reverse(c.begin(), c.end());
        cols[j] = std::move(c);
    }
    C.resize(nT);
    rep.sup_col_integral = 0.0;
    for (int j = first; j < nT; ++j) rep.sup_col_integral = std::max(rep.sup_col_integral, C[j]);
    Verdict col_sup = sup_verdict(C, first, h / T);
    for (double d : ladder)
        rep.col_modulus.emplace_back(
            d, window_sup(cols, 0, nT, d, h, [&](int j, double c) { return subcell_row(spec, q, grid, j, d, c); }));
    rep.verdict_Khat = modulus_verdict(col_sup, rep.col_modulus, opts.modulus_tol);
    return rep;
}

// ---------------------------------------------------------------- increment condition

namespace {

double cell_quad(const std::function<double(double)>& f, double lo, double hi, bool singular_lo) {
    if (singular_lo) return tanh_sinh_integral(f, lo, hi);
    return boost::math::quadrature::gauss<double, 10>::integrate(f, lo, hi);
}

}  // namespace

double holder_condition_constant(const ScalarFunction& f, const ScalarFunction& g, double beta_hat, double T,
                                 const TimeGrid& grid) {
    if (!(beta_hat > 0.0 && beta_hat <= 0.5)) throw DomainError("beta_hat must lie in (0, 1/2]");
    if (f.integral_abs_pow(0.0, T, 1.0) == kInf) throw DomainError("f is not integrable near 0");
    if (g.integral_abs_pow(0.0, T, 2.0) == kInf) throw DomainError("g^2 is not integrable near 0");
    const int nT = last_node(grid, T);
    const double h = grid.h();
    std::vector<double> r(nT + 1, 0.0);

    for (int L = 1; L <= nT; ++L) {
        double d = L * h;
        double base = f.integral_abs_pow(0.0, d, 1.0) + std::sqrt(g.integral_abs_pow(0.0, d, 2.0));
        double scale = std::pow(d, beta_hat);
        double fdiff = 0.0, gdiff = 0.0;
        double best = base / scale;
        for (int j = 1; j + L <= nT; ++j) {
            double lo = (j - 1) * h, hi = j * h;
            if (!f.is_zero() && !(f.kind() == ScalarFunction::Kind::Constant)) {
                if (f.is_power_law()) {
                    // monotone, so |int (f(d+u) - f(u))| is the difference of antiderivatives
                    fdiff = std::abs(f.integral(d, d + hi) - f.integral(0.0, hi));
                } else {
                    fdiff += cell_quad([&](double u) { return std::abs(f(d + u) - f(u)); }, lo, hi, j == 1);
                }
            }
            if (!g.is_zero() && !(g.kind() == ScalarFunction::Kind::Constant)) {
                gdiff += cell_quad(
                    [&](double u) {
                        double x = g(d + u) - g(u);
                        return x * x;
                    },
                    lo, hi, j == 1);
            }
            best = std::max(best, (base + fdiff + std::sqrt(gdiff)) / scale);
        }
        r[L] = best;
    }
    double c = 0.0;
    int arg = 1;
    for (int L = 1; L <= nT; ++L)
        if (r[L] > c) {
            c = r[L];
            arg = L;
        }
    // unbounded: maximal at the smallest lag with a clear power-law growth toward it
    if (arg == 1 && nT >= 4) {
        double s1 = std::log(r[1] / r[2]) / std::log(2.0);
        double s2 = std::log(r[2] / r[4]) / std::log(2.0);
        if (s1 > 1e-2 && s2 > 1e-2) return kInf;
    }
    return c;
}

}  // namespace svlab
