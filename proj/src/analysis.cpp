#include "svlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "svlab/resolvent.hpp"

namespace svlab {

void write_meta(std::ostream& os, const ReportMeta& meta) {
    os << "# config_hash=" << meta.config_hash << '\n';
    os << "# seed=" << meta.seed << '\n';
    os << "# version=" << kVersion << '\n';
    if (meta.w_p > 0.0) os << "# w_p=" << std::setprecision(17) << meta.w_p << '\n';
}

void MomentCurve::write_csv(std::ostream& os, const ReportMeta& meta) const {
    write_meta(os, meta);
    os << "# p=" << p << "\n# N=" << N << '\n';
    os << "t,value,se\n" << std::setprecision(17);
    for (std::size_t i = 0; i < t.size(); ++i) os << t[i] << ',' << values[i] << ',' << se[i] << '\n';
}

bool BoundReport::all_pass() const {
    return std::all_of(pass.begin(), pass.end(), [](char c) { return c != 0; });
}

void BoundReport::write_csv(std::ostream& os, const ReportMeta& meta) const {
    write_meta(os, meta);
    if (!name.empty()) os << "# report=" << name << '\n';
    os << "# slack=" << std::setprecision(17) << slack << '\n';
    os << "t,lhs,se,rhs,pass\n";
    for (std::size_t i = 0; i < t.size(); ++i)
        os << t[i] << ',' << lhs[i] << ',' << (se.empty() ? 0.0 : se[i]) << ',' << rhs[i] << ',' << (pass[i] ? 1 : 0)
           << '\n';
}

MomentCurve moment_function(const PathEnsemble& X, double p, int threads, const PathEnsemble* minus) {
    if (!(p >= 1.0)) throw DomainError("moment order must be >= 1");
    const int N = X.particles(), m = X.dim();
    if (N == 0) throw DomainError("empty ensemble");
    if (minus && (minus->particles() != N || minus->nodes() != X.nodes() || minus->dim() != m))
        throw DomainError("ensembles have different shapes");
    MomentCurve c;
    c.p = p;
    c.N = N;
    std::vector<double> a(N), b(N);
    for (int j = 0; j < X.nodes(); ++j) {
        parallel_for(N, threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t q = lo; q < hi; ++q) {
                const int pi = static_cast<int>(q);
                double s = 0.0;
                for (int k = 0; k < m; ++k) {
                    double d = X.x(pi, j, k) - (minus ? minus->x(pi, j, k) : 0.0);
                    s += d * d;
                }
                double v = std::pow(std::sqrt(s), p);
                a[q] = v;
                b[q] = v * v;
            }
        });
        double mu = pairwise_sum(a) / N;
        double var = N > 1 ? std::max(0.0, (pairwise_sum(b) / N - mu * mu) * N / (N - 1.0)) : 0.0;
        double value = std::pow(mu, 1.0 / p);
        double se = mu > 0.0 ? std::pow(mu, 1.0 / p - 1.0) / p * std::sqrt(var / N) : 0.0;
        c.t.push_back(X.grid().node(j));
        c.values.push_back(value);
        c.se.push_back(se);
    }
    return c;
}

std::vector<double> apply_kernel_operator(const TriangularTable& K, const std::vector<double>& phi) {
    const int n = K.steps();
    if (static_cast<int>(phi.size()) != n + 1) throw DomainError("function must be given on every node");
    std::vector<double> out(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) out[i] = K.row_integral(i, 0, phi.data());
    return out;
}

std::vector<double> k0_function(const KernelSpec& k1, const KernelSpec& k2, double w_p, const TimeGrid& grid) {
    std::vector<double> out(grid.steps + 1, 0.0);
    for (int i = 1; i <= grid.steps; ++i) {
        double t = grid.node(i);
        double a = k1.is_zero() ? 0.0 : q_integral(k1, 1.0, t, grid);
        double b = k2.is_zero() ? 0.0 : q_integral(k2, 2.0, t, grid);
        out[i] = a + w_p * std::sqrt(b);
    }
    return out;
}

namespace {

std::vector<double> squared(const std::vector<double>& v, double q) {
    std::vector<double> o(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0 || std::isnan(v[i])) throw DomainError("moment functions must be non-negative");
        o[i] = std::pow(v[i], q);
    }
    return o;
}

// Terms (L^n phi)^{1/beta} for n = 1.. until the sup of a term is below tol and decaying.
// L has kernel l^beta. Terms are accumulated from index n_from on.
struct PowerSeries {
    std::vector<double> sum;
    std::vector<double> sups;
    int terms = 0;
};

PowerSeries power_series(const TriangularTable& Lb, std::vector<double> phi, double beta, int n_from, double tol,
                         int n_max, const char* what) {
    PowerSeries r;
    r.sum.assign(phi.size(), 0.0);
    double prev = kInf;
    for (int n = 1; n <= n_max; ++n) {
        phi = apply_kernel_operator(Lb, phi);
        double s = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            double term = std::pow(std::max(phi[i], 0.0), 1.0 / beta);
            if (n >= n_from) r.sum[i] += term;
            s = std::max(s, term);
        }
        r.sups.push_back(s);
        bool decaying = n == 1 ? s == 0.0 : (s < prev || (s == 0.0 && prev == 0.0));
        if (s < tol && decaying && n >= n_from) {
            r.terms = n;
            return r;
        }
        prev = s;
    }
    throw TruncationError(std::string(what) + " series did not decay within n_max terms", r.sum);
}

}  // namespace

SeriesBound growth_bound_1(const std::vector<double>& k0, const TriangularTable& l, const std::vector<double>& xi_moments,
                           double tol, int n_max) {
    if (k0.size() != xi_moments.size() || static_cast<int>(k0.size()) != l.steps() + 1)
        throw DomainError("growth_bound_1 needs node vectors matching the table");
    TriangularTable l2 = l.pow(2.0);
    auto a = power_series(l2, squared(k0, 2.0), 2.0, 1, tol, n_max, "growth (k0)");
    auto b = power_series(l2, squared(xi_moments, 2.0), 2.0, 1, tol, n_max, "growth (xi)");
    SeriesBound out;
    out.values.resize(k0.size());
    for (std::size_t i = 0; i < k0.size(); ++i) out.values[i] = k0[i] + a.sum[i] + b.sum[i];
    out.terms = std::max(a.terms, b.terms);
    return out;
}

SeriesBound comparison_bound_1(const TriangularTable& lambda, const std::vector<double>& diff_moments, double tol,
                               int n_max) {
    if (static_cast<int>(diff_moments.size()) != lambda.steps() + 1)
        throw DomainError("comparison_bound_1 needs a node vector matching the table");
    auto a = power_series(lambda.pow(2.0), squared(diff_moments, 2.0), 2.0, 1, tol, n_max, "comparison");
    SeriesBound out;
    out.values.resize(diff_moments.size());
    for (std::size_t i = 0; i < diff_moments.size(); ++i) out.values[i] = diff_moments[i] + a.sum[i];
    out.terms = a.terms;
    return out;
}

SeriesBound picard_error_bound_1(const TriangularTable& lambda, const std::vector<double>& Delta, int n, double tol,
                                 int n_max) {
    if (n < 1) throw DomainError("iterate index must be >= 1");
    if (static_cast<int>(Delta.size()) != lambda.steps() + 1)
        throw DomainError("picard_error_bound_1 needs a node vector matching the table");
    TriangularTable L2 = lambda.pow(2.0);
    auto a = power_series(L2, squared(Delta, 2.0), 2.0, n, tol, n_max, "Picard error");
    auto c = power_series(L2, std::vector<double>(Delta.size(), 1.0), 2.0, 1, tol, n_max, "error coefficient");
    SeriesBound out;
    out.values = a.sum;
    out.terms = a.terms;
    out.tail.assign(c.sups.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = c.sups.size(); i-- > 0;) {
        acc += c.sups[i];
        out.tail[i] = acc;
    }
    return out;
}

namespace {

std::vector<double> lnp_series(const LnpResult& L, const std::vector<double>& phi_p, double p, int n_from) {
    std::vector<double> s(phi_p.size(), 0.0);
    for (std::size_t k = static_cast<std::size_t>(n_from - 1); k < L.l_np.size(); ++k)
        for (std::size_t i = 1; i < phi_p.size(); ++i)
            s[i] += std::pow(std::max(0.0, L.l_np[k].row_integral(static_cast<int>(i), 0, phi_p.data())), 1.0 / p);
    return s;
}

}  // namespace

SeriesBound growth_bound_2(const std::vector<double>& k0, const TriangularTable& l, const std::vector<double>& xi_moments,
                           double p, double tol, int n_max) {
    if (k0.size() != xi_moments.size() || static_cast<int>(k0.size()) != l.steps() + 1)
        throw DomainError("growth_bound_2 needs node vectors matching the table");
    auto L = l_np_and_c(l, p, n_max, tol);
    auto k0p = squared(k0, p), xip = squared(xi_moments, p);
    auto a = lnp_series(L, k0p, p, 1), b = lnp_series(L, xip, p, 1);
    const double h = l.grid().h();
    SeriesBound out;
    out.values.assign(k0.size(), 0.0);
    double cum = 0.0;
    for (std::size_t i = 0; i < k0.size(); ++i) {
        if (i > 0) cum += 0.5 * h * (k0p[i - 1] + k0p[i]);
        out.values[i] = std::pow(cum, 1.0 / p) + a[i] + b[i];
    }
    out.terms = static_cast<int>(L.l_np.size());
    return out;
}

SeriesBound picard_error_bound_2(const TriangularTable& lambda, const std::vector<double>& Delta, int n, double p,
                                 double tol, int n_max) {
    if (n < 1) throw DomainError("iterate index must be >= 1");
    if (static_cast<int>(Delta.size()) != lambda.steps() + 1)
        throw DomainError("picard_error_bound_2 needs a node vector matching the table");
    auto L = l_np_and_c(lambda, p, n_max, tol);
    SeriesBound out;
    out.values = lnp_series(L, squared(Delta, p), p, n);
    out.terms = static_cast<int>(L.l_np.size());
    const auto& sups = L.c.term_sups;
    out.tail.assign(sups.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = sups.size(); i-- > 0;) {
        acc += sups[i];
        out.tail[i] = acc;
    }
    return out;
}

// ---------------------------------------------------------------- increments

namespace {

double quad(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    boost::math::quadrature::tanh_sinh<double> ts;
    double v = ts.integrate(
        [&](double x) {
            double y = f(x);
            return std::isfinite(y) ? y : 0.0;
        },
        a, b);
    return v;
}

}  // namespace

double increment_bound(const IncrementData& D, double xi_increment, double s, double t) {
    if (!(s <= t) || s < 0.0) throw DomainError("increment_bound needs 0 <= s <= t");
    if (xi_increment < 0.0) throw DomainError("xi increment moment must be >= 0");
    if (s == t) return xi_increment;
    const double w = D.w_p;
    auto M = [&](double r) { return D.moments ? D.moments(r) : 0.0; };
    double out = xi_increment;
    if (!D.k1.is_zero()) out += quad([&](double u) { return eval_kernel(D.k1, t, u); }, s, t);
    if (!D.k2.is_zero()) out += w * std::sqrt(quad([&](double u) { double k = eval_kernel(D.k2, t, u); return k * k; }, s, t));
    if (D.f1) out += quad([&](double r) { return D.f1(t, s, r); }, 0.0, s);
    if (D.f2) out += w * std::sqrt(quad([&](double r) { double v = D.f2(t, s, r); return v * v; }, 0.0, s));
    if (D.moments && (!D.l1.is_zero() || !D.l2.is_zero())) {
        double A1 = 0.0, A2 = 0.0;
        if (!D.l1.is_zero()) {
            A1 = quad([&](double u) { return eval_kernel(D.l1, t, u); }, 0.0, t);
            A2 = quad([&](double u) { double k = eval_kernel(D.l1, t, u); return k * k; }, 0.0, t);
        }
        auto l = [&](double u) {
            double a = D.l1.is_zero() ? 0.0 : std::sqrt(std::min(eval_kernel(D.l1, t, u) * A1, A2));
            double b = D.l2.is_zero() ? 0.0 : w * eval_kernel(D.l2, t, u);
            return 2.0 * std::max(a, b);
        };
        out += std::sqrt(quad([&](double u) { double v = l(u) * M(u); return v * v; }, s, t));
    }
    if (D.moments && (D.g1 || D.g2)) {
        double G1 = 0.0, G2 = 0.0;
        if (D.g1) {
            G1 = quad([&](double r) { return D.g1(t, s, r); }, 0.0, s);
            G2 = quad([&](double r) { double v = D.g1(t, s, r); return v * v; }, 0.0, s);
        }
        auto g = [&](double r) {
            double a = D.g1 ? std::sqrt(std::min(D.g1(t, s, r) * G1, G2)) : 0.0;
            double b = D.g2 ? w * D.g2(t, s, r) : 0.0;
            return 2.0 * std::max(a, b);
        };
        out += std::sqrt(quad([&](double r) { double v = g(r) * M(r); return v * v; }, 0.0, s));
    }
    return out;
}

BoundReport check_growth_vs_mc(const PathEnsemble& X, const PathEnsemble& xi, const std::vector<double>& bound,
                               double slack, double p, int threads) {
    if (static_cast<int>(bound.size()) != X.nodes()) throw DomainError("bound must be given on every node");
    auto mc = moment_function(X, p, threads, &xi);
    BoundReport r;
    r.name = "growth";
    r.slack = slack;
    r.t = mc.t;
    r.lhs = mc.values;
    r.se = mc.se;
    r.rhs = bound;
    for (std::size_t i = 0; i < bound.size(); ++i) r.pass.push_back(mc.values[i] <= bound[i] * slack + 3.0 * mc.se[i]);
    return r;
}

InequalityReport resolvent_inequality_check(const std::vector<double>& v, const TriangularTable& l, double beta,
                                            double p, const std::vector<std::vector<double>>& M, double hyp_tol) {
    if (!(beta >= 1.0) || !(p >= beta)) throw DomainError("need 1 <= beta <= p");
    if (M.size() < 2) throw DomainError("need M_0 and at least one M_n");
    const std::size_t nodes = static_cast<std::size_t>(l.steps()) + 1;
    if (v.size() != nodes) throw DomainError("v must be given on every node");
    for (const auto& m : M)
        if (m.size() != nodes) throw DomainError("moment curves must be given on every node");
    const TriangularTable Lb = l.pow(beta);
    const int K = static_cast<int>(M.size()) - 1;
    InequalityReport rep;

    for (int n = 1; n <= K; ++n) {
        auto Lm = apply_kernel_operator(Lb, squared(M[n - 1], beta));
        for (std::size_t i = 0; i < nodes; ++i) {
            double H = v[i] + std::pow(std::max(Lm[i], 0.0), 1.0 / beta);
            double excess = M[n][i] - H;
            rep.max_hypothesis_excess = std::max(rep.max_hypothesis_excess, excess);
            if (excess > hyp_tol * std::max(1.0, H))
                throw DomainError("hypothesis fails for n = " + std::to_string(n) + " at node " + std::to_string(i));
        }
    }

    // L^i v^beta for i = 1..K-1, and L^n M_0^beta for n = 1..K
    std::vector<std::vector<double>> Lv(K), LM(K + 1);
    Lv[0] = squared(v, beta);
    for (int i = 1; i < K; ++i) Lv[i] = apply_kernel_operator(Lb, Lv[i - 1]);
    LM[0] = squared(M[0], beta);
    for (int n = 1; n <= K; ++n) LM[n] = apply_kernel_operator(Lb, LM[n - 1]);

    std::vector<double> partial(v);
    for (int n = 1; n <= K; ++n) {
        if (n >= 2)
            for (std::size_t i = 0; i < nodes; ++i) partial[i] += std::pow(std::max(Lv[n - 1][i], 0.0), 1.0 / beta);
        BoundReport r;
        r.name = "resolvent inequality n=" + std::to_string(n);
        for (std::size_t i = 0; i < nodes; ++i) {
            double rhs = partial[i] + std::pow(std::max(LM[n][i], 0.0), 1.0 / beta);
            r.t.push_back(l.grid().node(static_cast<int>(i)));
            r.lhs.push_back(M[n][i]);
            r.rhs.push_back(rhs);
            bool ok = M[n][i] <= rhs + 1e-12 * std::max(1.0, rhs);
            r.pass.push_back(ok);
            rep.all_pass = rep.all_pass && ok;
            rep.max_gap = std::max(rep.max_gap, std::abs(M[n][i] - rhs));
        }
        rep.per_n.push_back(std::move(r));
    }
    return rep;
}

double holder_exponent(const PathEnsemble& X, double p, int lag_min, int lag_max) {
    if (!(p >= 1.0)) throw DomainError("moment order must be >= 1");
    const int n = X.grid().steps, N = X.particles(), m = X.dim();
    if (lag_min < 1 || lag_max < lag_min || lag_max > n) throw DomainError("bad lag range");
    std::vector<double> lx, ly, buf;
    for (int L = lag_min; L <= lag_max; L *= 2) {
        buf.clear();
        for (int q = 0; q < N; ++q)
            for (int j = 0; j + L <= n; ++j) {
                double s = 0.0;
                for (int c = 0; c < m; ++c) {
                    double d = X.x(q, j + L, c) - X.x(q, j, c);
                    s += d * d;
                }
                buf.push_back(std::pow(std::sqrt(s), p));
            }
        double mom = pairwise_sum(buf) / static_cast<double>(buf.size());
        if (!(mom > 0.0)) throw DomainError("ensemble has no increments at lag " + std::to_string(L));
        lx.push_back(std::log(L * X.grid().h()));
        ly.push_back(std::log(mom));
    }
    if (lx.size() < 2) throw DomainError("need at least two lags");
    const double k = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / k;
        my += ly[i] / k;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx / p;
}

}  // namespace svlab
