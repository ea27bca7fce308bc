#include "svlab/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace svlab {

namespace {

std::optional<double> composed_exponent(const TriangularTable& k, const TriangularTable& g) {
    auto ek = k.diagonal_exponent(), eg = g.diagonal_exponent();
    if (!ek && !eg) return std::nullopt;
    if (!k.singular() && !g.singular() && (!ek || !eg)) return std::nullopt;
    return ek.value_or(0.0) + eg.value_or(0.0) + 1.0;
}

double sup_term(const TriangularTable& T) {
    double m = T.max_offdiag();
    if (!T.singular())
        for (int i = 0; i <= T.steps(); ++i) m = std::max(m, T.at(i, i));
    return m;
}

}  // namespace

TriangularTable compose(const TriangularTable& k, const TriangularTable& g) {
    const TimeGrid& grid = k.grid();
    const int n = grid.steps;
    const double h = grid.h();
    TriangularTable out(grid, composed_exponent(k, g));
    std::optional<double> a = k.singular() ? k.diagonal_exponent() : std::nullopt;
    std::optional<double> b = g.singular() ? g.diagonal_exponent() : std::nullopt;
    const bool fast = k.all_finite_offdiag() && g.all_finite_offdiag();

    // columns of g stored contiguously: gc[r][m - r] = g(m, r)
    std::vector<std::vector<double>> gc(n + 1);
    for (int r = 0; r <= n; ++r) {
        gc[r].resize(n - r + 1);
        for (int m = r; m <= n; ++m) gc[r][m - r] = g.at(m, r);
    }

    for (int i = 1; i <= n; ++i) {
        const double* krow = k.row(i);
        for (int r = 0; r < i; ++r) {
            const double* gcol = gc[r].data() - r;  // gcol[m] = g(m, r)
            double v;
            if (i == r + 1) {
                v = product_cell(krow[r], krow[i], gcol[r], gcol[i], h, a, b);
            } else {
                double first = product_cell(krow[r], krow[r + 1], gcol[r], gcol[r + 1], h, std::nullopt, b);
                double last = product_cell(krow[i - 1], krow[i], gcol[i - 1], gcol[i], h, a, std::nullopt);
                double mid = 0.0;
                if (i >= r + 3) {
                    if (fast) {
                        double d = dot(krow + r + 1, gcol + r + 1, static_cast<std::size_t>(i - 1 - r));
                        mid = h * (d - 0.5 * (krow[r + 1] * gcol[r + 1] + krow[i - 1] * gcol[i - 1]));
                    } else {
                        for (int m = r + 1; m < i - 1; ++m)
                            mid += 0.5 * h * (ext_mul(krow[m], gcol[m]) + ext_mul(krow[m + 1], gcol[m + 1]));
                    }
                }
                v = first + mid + last;
            }
            out.at(i, r) = v;
        }
    }
    bool sing = out.singular();
    for (int i = 0; i <= n; ++i) out.at(i, i) = sing ? kInf : 0.0;
    return out;
}

IteratedKernelStack::IteratedKernelStack(TriangularTable base, int n_max, double power)
    : cache_(std::make_shared<Cache>()), n_max_(n_max), power_(power) {
    if (n_max < 1) throw DomainError("n_max must be >= 1");
    for (double v : base.raw())
        if (v < 0.0 || std::isnan(v)) throw DomainError("iterated_kernels: base table has a negative entry");
    // references handed out by operator[] must survive later growth
    cache_->tables.reserve(n_max);
    cache_->tables.push_back(std::move(base));
}

const TriangularTable& IteratedKernelStack::operator[](int n) const {
    if (n < 1 || n > n_max_) throw DomainError("iterated kernel index out of range");
    auto& t = cache_->tables;
    while (static_cast<int>(t.size()) < n) t.push_back(compose(t.front(), t.back()));
    return t[n - 1];
}

IteratedKernelStack iterated_kernels(const TriangularTable& base, int n_max, double power) {
    IteratedKernelStack s(base, n_max, power);
    s[n_max];
    return s;
}

ResolventResult resolvent_sum(const IteratedKernelStack& stack, double tol) {
    const TriangularTable& k = stack.base();
    ResolventResult res{TriangularTable(k.grid(), k.diagonal_exponent()), 0, 0.0};
    auto& R = res.R;
    std::vector<double> sum(k.raw().size(), 0.0);
    double prev = kInf;
    for (int n = 1; n <= stack.n_max(); ++n) {
        const TriangularTable& Rn = stack[n];
        const auto& raw = Rn.raw();
        for (std::size_t q = 0; q < raw.size(); ++q) sum[q] += raw[q];
        double s = sup_term(Rn);
        bool decaying = n == 1 ? s == 0.0 : (s < prev || (s == 0.0 && prev == 0.0));
        prev = s;
        if (s < tol && decaying) {
            res.terms = n;
            res.last_sup = s;
            for (int i = 0; i <= k.steps(); ++i)
                for (int j = 0; j <= i; ++j) R.at(i, j) = sum[static_cast<std::size_t>(i) * (i + 1) / 2 + j];
            return res;
        }
    }
    throw TruncationError("resolvent series did not decay below tol within n_max terms", sum);
}

TriangularTable resolvent_residual(const TriangularTable& k, const TriangularTable& R) {
    TriangularTable kR = compose(k, R);
    TriangularTable out(k.grid());
    for (int i = 1; i <= k.steps(); ++i)
        for (int j = 0; j < i; ++j) out.at(i, j) = R.at(i, j) - k.at(i, j) - kR.at(i, j);
    return out;
}

double max_abs(const TriangularTable& T, bool include_diagonal) {
    double m = 0.0;
    for (int i = 0; i <= T.steps(); ++i)
        for (int j = 0; j <= i; ++j) {
            if (j == i && !include_diagonal) continue;
            m = std::max(m, std::abs(T.at(i, j)));
        }
    return m;
}

// ---------------------------------------------------------------- l and its series

namespace {

TriangularTable assemble_l(const TriangularTable& l1, const TriangularTable& l2, double w_p,
                           const std::vector<double>& I1, const std::vector<double>& I2) {
    if (!(w_p > 0.0)) throw DomainError("w_p must be positive");
    const TimeGrid& grid = l1.grid();
    std::optional<double> e;
    if (l2.singular()) e = l2.diagonal_exponent();
    TriangularTable l(grid, e);
    for (int i = 0; i <= grid.steps; ++i)
        for (int j = 0; j <= i; ++j) {
            double a = std::min(ext_mul(l1.at(i, j), I1[i]), I2[i]);
            double v = 2.0 * std::max(std::sqrt(a), w_p * l2.at(i, j));
            l.at(i, j) = v;
        }
    return l;
}

bool stop_now(int n, double s, double prev) {
    bool decaying = n == 1 ? s == 0.0 : (s < prev || (s == 0.0 && prev == 0.0));
    return decaying;
}

}  // namespace

TriangularTable transformed_kernel_l(const TriangularTable& l1, const TriangularTable& l2, double w_p) {
    const int n = l1.steps();
    TriangularTable sq = l1.pow(2.0);
    std::vector<double> I1(n + 1), I2(n + 1);
    for (int i = 0; i <= n; ++i) {
        I1[i] = l1.row_integral(i, 0);
        I2[i] = sq.row_integral(i, 0);
    }
    return assemble_l(l1, l2, w_p, I1, I2);
}

TriangularTable transformed_kernel_l(const KernelSpec& l1, const KernelSpec& l2, double w_p, const TimeGrid& grid) {
    const int n = grid.steps;
    std::vector<double> I1(n + 1), I2(n + 1);
    for (int i = 0; i <= n; ++i) {
        I1[i] = q_integral(l1, 1.0, grid.node(i), grid);
        I2[i] = q_integral(l1, 2.0, grid.node(i), grid);
    }
    return assemble_l(tabulate(l1, grid), tabulate(l2, grid), w_p, I1, I2);
}

SeriesResult function_series_I_l(const TriangularTable& l, double tol, int n_max) {
    const int N = l.steps();
    IteratedKernelStack stack(l.pow(2.0), n_max, 2.0);
    SeriesResult out;
    out.values.assign(N + 1, 0.0);
    double prev = kInf;
    for (int n = 1; n <= n_max; ++n) {
        const auto& R = stack[n];
        double s = 0.0;
        for (int i = 0; i <= N; ++i) {
            double term = std::sqrt(R.row_integral(i, 0));
            out.values[i] += term;
            s = std::max(s, term);
        }
        out.term_sups.push_back(s);
        if (s < tol && stop_now(n, s, prev)) {
            out.terms = n;
            double rho = n > 1 && prev > 0.0 ? s / prev : 0.0;
            out.tail_bound = rho < 1.0 ? s * rho / (1.0 - rho) : kInf;
            return out;
        }
        prev = s;
    }
    throw TruncationError("I_l series did not decay within n_max terms", out.values);
}

LnpResult l_np_and_c(const TriangularTable& l, double p, int n_max, double tol) {
    if (p < 2.0) throw DomainError("l_np_and_c needs p >= 2");
    const TimeGrid& grid = l.grid();
    const int N = grid.steps;
    const double h = grid.h();
    IteratedKernelStack stack(l.pow(2.0), n_max, 2.0);
    LnpResult out;
    out.c.values.assign(N + 1, 0.0);
    double prev = kInf;
    for (int n = 1; n <= n_max; ++n) {
        const auto& R = stack[n];
        std::optional<double> b = R.singular() ? R.diagonal_exponent() : std::nullopt;
        std::vector<double> w(N + 1, 1.0);
        if (p > 2.0)
            for (int m = 0; m <= N; ++m) {
                double inner = R.row_integral(m, 0);
                w[m] = inner == 0.0 ? 0.0 : std::pow(inner, p / 2.0 - 1.0);
            }
        TriangularTable lnp(grid);
        for (int j = 0; j < N; ++j) {
            double acc = 0.0;
            for (int m = j; m < N; ++m) {
                if (m == j)
                    acc += product_cell(w[m], w[m + 1], R.at(m, j), R.at(m + 1, j), h, std::nullopt, b);
                else
                    acc += 0.5 * h * (ext_mul(w[m], R.at(m, j)) + ext_mul(w[m + 1], R.at(m + 1, j)));
                lnp.at(m + 1, j) = acc;
            }
        }
        double s = 0.0;
        for (int i = 0; i <= N; ++i) {
            double best = 0.0;
            for (int j = 0; j <= i; ++j) best = std::max(best, lnp.at(i, j));
            double term = std::pow(best, 1.0 / p);
            out.c.values[i] += term;
            s = std::max(s, term);
        }
        out.l_np.push_back(std::move(lnp));
        out.c.term_sups.push_back(s);
        if (s < tol && stop_now(n, s, prev)) {
            out.c.terms = n;
            double rho = n > 1 && prev > 0.0 ? s / prev : 0.0;
            out.c.tail_bound = rho < 1.0 ? s * rho / (1.0 - rho) : kInf;
            return out;
        }
        prev = s;
    }
    throw TruncationError("c_{l,p} series did not decay within n_max terms", out.c.values);
}

// ---------------------------------------------------------------- window bounds

bool BoundLedger::all_satisfied() const {
    return std::all_of(entries.begin(), entries.end(), [](const LedgerEntry& e) { return e.satisfied; });
}

void BoundLedger::write_csv(std::ostream& os) const {
    os << std::setprecision(17);
    os << "m,n,lhs,rhs,satisfied\n";
    for (const auto& e : entries)
        os << e.m << ',' << e.n << ',' << e.lhs << ',' << e.rhs << ',' << (e.satisfied ? 1 : 0) << '\n';
}

namespace {


BoundLedger run_ledger(const KernelSpec& spec, double p, double eps, const TimeGrid& grid, int m_max, int n_max,
                       bool first_kind) {
    if (p < 1.0) throw DomainError("p must be >= 1");
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    const int N = grid.steps;
    const double T = grid.horizon;
    BoundLedger led;
    led.eps = eps;

    double eps0 = first_kind ? row_modulus(spec, p, T, grid, default_delta_ladder(T).back())
                             : col_modulus(spec, p, T, grid, default_delta_ladder(T).back());
    led.eps0 = eps0;
    if (!(eps > eps0))
        throw InfeasibilityError("eps = " + std::to_string(eps) + " does not exceed the estimated eps0 = " +
                                 std::to_string(eps0));

    TriangularTable kp = tabulate(spec, grid, p);
    if (!kp.all_finite_offdiag()) throw InfeasibilityError("k^p is infinite off the diagonal");

    // cumulative window integrals of a table
    auto windows = [&](const TriangularTable& R) {
        std::vector<std::vector<double>> w(N + 1);
        for (int i = 0; i <= N; ++i) w[i] = first_kind ? R.row_tail(i) : R.col_head(i);
        return w;
    };
    auto sup_window = [&](const std::vector<std::vector<double>>& w, long L) {
        double sup = 0.0;
        for (int i = 0; i <= N; ++i) {
            double v;
            if (first_kind)
                v = w[i][std::max<long>(0, i - L)];
            else
                v = w[i][std::min<long>(L, N - i)];
            sup = std::max(sup, v);
        }
        return sup;
    };

    auto w1 = windows(kp);
    int L = 0;
    for (int cand = 1; cand <= N; ++cand) {
        if (sup_window(w1, cand) <= eps)
            L = cand;
        else
            break;
    }
    if (L == 0) throw InfeasibilityError("no delta on the grid keeps the window integral below eps");
    led.delta = L * grid.h();
    led.c0 = sup_window(w1, N);
    led.c_eps = std::max(1.0, led.c0 / eps);

    IteratedKernelStack stack(kp, n_max, p);
    for (int n = 1; n <= n_max; ++n) {
        auto w = n == 1 ? w1 : windows(stack[n]);
        for (int m = 1; m <= m_max; ++m) {
            LedgerEntry e;
            e.m = m;
            e.n = n;
            e.lhs = sup_window(w, static_cast<long>(m) * L);
            e.rhs = std::pow(n * led.c_eps, m - 1) * std::pow(eps, n);
            e.satisfied = std::isfinite(e.lhs) && e.lhs <= e.rhs * (1.0 + 1e-12);
            led.entries.push_back(e);
        }
    }
    return led;
}

}  // namespace

BoundLedger verify_bound_first_kind(const KernelSpec& spec, double p, double eps, const TimeGrid& grid, int m_max,
                                    int n_max) {
    return run_ledger(spec, p, eps, grid, m_max, n_max, true);
}

BoundLedger verify_bound_second_kind(const KernelSpec& spec, double p, double eps, const TimeGrid& grid, int m_max,
                                     int n_max) {
    return run_ledger(spec, p, eps, grid, m_max, n_max, false);
}

}  // namespace svlab
