#include "svlab/table.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace svlab {

TriangularTable::TriangularTable(const TimeGrid& grid, std::optional<double> diagonal_exponent)
    : grid_(grid), exponent_(diagonal_exponent), values_(offset(grid.steps + 1), 0.0) {}

double product_cell(double k_lo, double k_hi, double g_lo, double g_hi, double h,
                    std::optional<double> a_hi, std::optional<double> b_lo) {
    if (a_hi && b_lo) {
        double a = *a_hi, b = *b_lo;
        if (a <= -1.0 || b <= -1.0) return (k_lo == 0.0 || g_hi == 0.0) ? 0.0 : kInf;
        double C = k_lo / std::pow(h, a), D = g_hi / std::pow(h, b);
        return ext_mul(ext_mul(C, D), std::pow(h, a + b + 1.0) * std::beta(a + 1.0, b + 1.0));
    }
    if (a_hi) {
        double a = *a_hi;
        if (a <= -1.0) return (k_lo == 0.0 || (g_lo == 0.0 && g_hi == 0.0)) ? 0.0 : kInf;
        double C = k_lo / std::pow(h, a);
        double w = std::pow(h, a + 1.0);
        // u = hi - s; g(u) = g_hi + (g_lo - g_hi) u / h
        return ext_mul(C, w * (g_hi / (a + 1.0) + (g_lo - g_hi) / (a + 2.0)));
    }
    if (b_lo) {
        double b = *b_lo;
        if (b <= -1.0) return (g_hi == 0.0 || (k_lo == 0.0 && k_hi == 0.0)) ? 0.0 : kInf;
        double D = g_hi / std::pow(h, b);
        double w = std::pow(h, b + 1.0);
        return ext_mul(D, w * (k_lo / (b + 1.0) + (k_hi - k_lo) / (b + 2.0)));
    }
    return 0.5 * h * (ext_mul(k_lo, g_lo) + ext_mul(k_hi, g_hi));
}

double TriangularTable::row_integral(int i, int r, const double* phi) const {
    const double h = grid_.h();
    std::optional<double> a = singular() ? exponent_ : std::nullopt;
    double sum = 0.0;
    for (int m = r; m < i; ++m) {
        double p0 = phi ? phi[m] : 1.0, p1 = phi ? phi[m + 1] : 1.0;
        if (m == i - 1)
            sum += product_cell(at(i, m), at(i, m + 1), p0, p1, h, a, std::nullopt);
        else
            sum += 0.5 * h * (ext_mul(at(i, m), p0) + ext_mul(at(i, m + 1), p1));
    }
    return sum;
}

double TriangularTable::col_integral(int j, int i, const double* phi) const {
    const double h = grid_.h();
    std::optional<double> b = singular() ? exponent_ : std::nullopt;
    double sum = 0.0;
    for (int m = j; m < i; ++m) {
        double p0 = phi ? phi[m] : 1.0, p1 = phi ? phi[m + 1] : 1.0;
        if (m == j)
            sum += product_cell(p0, p1, at(m, j), at(m + 1, j), h, std::nullopt, b);
        else
            sum += 0.5 * h * (ext_mul(at(m, j), p0) + ext_mul(at(m + 1, j), p1));
    }
    return sum;
}

std::vector<double> TriangularTable::row_tail(int i) const {
    const double h = grid_.h();
    std::optional<double> a = singular() ? exponent_ : std::nullopt;
    std::vector<double> out(i + 1, 0.0);
    double acc = 0.0;
    for (int m = i - 1; m >= 0; --m) {
        if (m == i - 1)
            acc += product_cell(at(i, m), at(i, m + 1), 1.0, 1.0, h, a, std::nullopt);
        else
            acc += 0.5 * h * (at(i, m) + at(i, m + 1));
        out[m] = acc;
    }
    return out;
}

std::vector<double> TriangularTable::col_head(int j) const {
    const double h = grid_.h();
    std::optional<double> b = singular() ? exponent_ : std::nullopt;
    const int n = grid_.steps;
    std::vector<double> out(n - j + 1, 0.0);
    double acc = 0.0;
    for (int m = j; m < n; ++m) {
        if (m == j)
            acc += product_cell(1.0, 1.0, at(m, j), at(m + 1, j), h, std::nullopt, b);
        else
            acc += 0.5 * h * (at(m, j) + at(m + 1, j));
        out[m + 1 - j] = acc;
    }
    return out;
}

TriangularTable TriangularTable::pow(double q) const {
    std::optional<double> e;
    if (exponent_) e = q * *exponent_;
    TriangularTable out(grid_, e);
    for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = values_[k] == 0.0 ? 0.0 : std::pow(values_[k], q);
    return out;
}

double TriangularTable::max_offdiag() const {
    double m = 0.0;
    for (int i = 1; i <= grid_.steps; ++i)
        for (int j = 0; j < i; ++j) m = std::max(m, at(i, j));
    return m;
}

bool TriangularTable::all_finite_offdiag() const {
    for (int i = 1; i <= grid_.steps; ++i)
        for (int j = 0; j < i; ++j)
            if (!std::isfinite(at(i, j))) return false;
    return true;
}

void TriangularTable::write_csv(std::ostream& os) const {
    os << "t,s,value\n";
    os << std::setprecision(17);
    for (int i = 0; i <= grid_.steps; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = at(i, j);
            os << grid_.node(i) << ',' << grid_.node(j) << ',';
            if (std::isinf(v))
                os << "inf";
            else
                os << v;
            os << '\n';
        }
}

}  // namespace svlab
