#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "svlab/kernel.hpp"
#include "svlab/table.hpp"

namespace svlab {

// R_1 = base, R_{n+1}(t,s) = int_s^t base(t,u) R_n(u,s) du. Tables are built on demand
// up to n_max and cached; copies share the cache.
class IteratedKernelStack {
public:
    IteratedKernelStack() = default;
    IteratedKernelStack(TriangularTable base, int n_max, double power = 1.0);

    const TriangularTable& base() const { return cache_->tables.front(); }
    const TimeGrid& grid() const { return base().grid(); }
    int n_max() const { return n_max_; }
    // Which power of the underlying kernel drives the recursion (1 for k, 2 for l^2).
    double power() const { return power_; }
    int computed() const { return static_cast<int>(cache_->tables.size()); }
    // 1-based
    const TriangularTable& operator[](int n) const;

private:
    struct Cache {
        std::vector<TriangularTable> tables;
    };
    std::shared_ptr<Cache> cache_;
    int n_max_ = 0;
    double power_ = 1.0;
};

// One step of the recursion: int_s^t k(t,u) g(u,s) du on every grid pair.
TriangularTable compose(const TriangularTable& k, const TriangularTable& g);

IteratedKernelStack iterated_kernels(const TriangularTable& base, int n_max, double power = 1.0);

struct ResolventResult {
    TriangularTable R;
    int terms = 0;
    double last_sup = 0.0;
};

// Sum of R_n, stopped at the first n with sup R_n < tol and sup R_n < sup R_{n-1}.
ResolventResult resolvent_sum(const IteratedKernelStack& stack, double tol = 1e-10);

// R - k - int k R on every grid pair (diagonal excluded).
TriangularTable resolvent_residual(const TriangularTable& k, const TriangularTable& R);
double max_abs(const TriangularTable& T, bool include_diagonal = false);

TriangularTable transformed_kernel_l(const TriangularTable& l1, const TriangularTable& l2, double w_p);
TriangularTable transformed_kernel_l(const KernelSpec& l1, const KernelSpec& l2, double w_p, const TimeGrid& grid);

struct SeriesResult {
    std::vector<double> values;  // per node
    std::vector<double> term_sups;
    int terms = 0;
    double tail_bound = 0.0;  // geometric bound on what was dropped
};

// I_l(t) = sum_n (int_0^t R_{l^2,n}(t,s) ds)^{1/2}
SeriesResult function_series_I_l(const TriangularTable& l, double tol = 1e-10, int n_max = 40);

struct LnpResult {
    std::vector<TriangularTable> l_np;  // n = 1..terms
    SeriesResult c;                     // c_{l,p} per node
};

LnpResult l_np_and_c(const TriangularTable& l, double p, int n_max = 40, double tol = 1e-10);

struct LedgerEntry {
    int m = 0, n = 0;
    double lhs = 0.0, rhs = 0.0;
    bool satisfied = false;
};

struct BoundLedger {
    double eps = 0.0, delta = 0.0, c0 = 0.0, c_eps = 1.0, eps0 = 0.0;
    std::vector<LedgerEntry> entries;
    bool all_satisfied() const;
    void write_csv(std::ostream& os) const;
};

BoundLedger verify_bound_first_kind(const KernelSpec& spec, double p, double eps, const TimeGrid& grid, int m_max,
                                    int n_max);
BoundLedger verify_bound_second_kind(const KernelSpec& spec, double p, double eps, const TimeGrid& grid, int m_max,
                                     int n_max);

}  // namespace svlab
