#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "svlab/common.hpp"

namespace svlab {

// Kernel values on the nodes {(t_i, t_j) : j <= i}. When the local exponent at the
// diagonal is negative the diagonal entries hold +inf and the cell next to the
// diagonal is integrated with the model C (t - s)^a calibrated on the nearest node.
class TriangularTable {
public:
    TriangularTable() = default;
    explicit TriangularTable(const TimeGrid& grid, std::optional<double> diagonal_exponent = {});

    double at(int i, int j) const { return values_[offset(i) + j]; }
    double& at(int i, int j) { return values_[offset(i) + j]; }
    const double* row(int i) const { return values_.data() + offset(i); }
    const TimeGrid& grid() const { return grid_; }
    int steps() const { return grid_.steps; }

    std::optional<double> diagonal_exponent() const { return exponent_; }
    void set_diagonal_exponent(std::optional<double> a) { exponent_ = a; }
    bool singular() const { return exponent_ && *exponent_ < 0.0; }

    // int_{t_r}^{t_i} T(t_i, s) phi(s) ds; phi given on all nodes or null for phi = 1.
    double row_integral(int i, int r, const double* phi = nullptr) const;
    // int_{t_j}^{t_i} T(s, t_j) phi(s) ds over the first variable.
    double col_integral(int j, int i, const double* phi = nullptr) const;
    // Cumulative row integrals: out[r] = int_{t_r}^{t_i} T(t_i, s) ds for r = 0..i.
    std::vector<double> row_tail(int i) const;
    // Cumulative column integrals: out[i - j] = int_{t_j}^{t_i} T(s, t_j) ds for i = j..n.
    std::vector<double> col_head(int j) const;

    // Entrywise power. The exponent scales with q.
    TriangularTable pow(double q) const;
    // Largest finite entry off the diagonal (inf if any off-diagonal entry is inf).
    double max_offdiag() const;
    bool all_finite_offdiag() const;

    void write_csv(std::ostream& os) const;

    const std::vector<double>& raw() const { return values_; }

private:
    static std::size_t offset(int i) { return static_cast<std::size_t>(i) * (i + 1) / 2; }

    TimeGrid grid_;
    std::optional<double> exponent_;
    std::vector<double> values_;
};

// Integral over one cell [lo, lo + h] of k(s) g(s), where k may blow up at the upper
// end like (hi - s)^a and g at the lower end like (s - lo)^b. Values at the singular
// ends are ignored; the model is calibrated on the opposite node.
double product_cell(double k_lo, double k_hi, double g_lo, double g_hi, double h,
                    std::optional<double> a_hi, std::optional<double> b_lo);

}  // namespace svlab
