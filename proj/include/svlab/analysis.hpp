#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "svlab/kernel.hpp"
#include "svlab/paths.hpp"
#include "svlab/table.hpp"

namespace svlab {

// Header lines written before every CSV body.
struct ReportMeta {
    std::string config_hash = "none";
    std::uint64_t seed = 0;
    double w_p = 0.0;  // 0 when the report does not use one
};
void write_meta(std::ostream& os, const ReportMeta& meta);

struct MomentCurve {
    std::vector<double> t, values, se;
    double p = 2.0;
    int N = 0;
    void write_csv(std::ostream& os, const ReportMeta& meta = {}) const;
};

// ((1/N) sum |X_t|^p)^{1/p} per node with a delta-method standard error.
// With `minus`, the moments of X - minus are taken instead.
MomentCurve moment_function(const PathEnsemble& X, double p, int threads = 1, const PathEnsemble* minus = nullptr);

struct BoundReport {
    std::vector<double> t, lhs, se, rhs;
    std::vector<char> pass;
    double slack = 1.0;
    std::string name;
    bool all_pass() const;
    void write_csv(std::ostream& os, const ReportMeta& meta = {}) const;
};

// (K phi)(t_i) = int_0^{t_i} K(t_i, s) phi(s) ds with the table's cell rules.
std::vector<double> apply_kernel_operator(const TriangularTable& K, const std::vector<double>& phi);

// k0(t) = int_0^t k1(t,s) ds + w_p (int_0^t k2(t,s)^2 ds)^{1/2} on the nodes.
std::vector<double> k0_function(const KernelSpec& k1, const KernelSpec& k2, double w_p, const TimeGrid& grid);

struct SeriesBound {
    std::vector<double> values;  // per node
    int terms = 0;
    // tail[n - 1] = sum_{i >= n} sup_t (int_0^t R_{lambda^2,i}(t,s) ds)^{1/2}, picard_error_bound_1 only
    std::vector<double> tail;
};

// k0 + sum_n (int R_{l^2,n} k0^2)^{1/2} + sum_n (int R_{l^2,n} xi^2)^{1/2}
SeriesBound growth_bound_1(const std::vector<double>& k0, const TriangularTable& l, const std::vector<double>& xi_moments,
                           double tol = 1e-10, int n_max = 200);
// diff + sum_n (int R_{lambda^2,n} diff^2)^{1/2}
SeriesBound comparison_bound_1(const TriangularTable& lambda, const std::vector<double>& diff_moments, double tol = 1e-10,
                               int n_max = 200);
// sum_{i >= n} (int R_{lambda^2,i} Delta^2)^{1/2}
SeriesBound picard_error_bound_1(const TriangularTable& lambda, const std::vector<double>& Delta, int n,
                                 double tol = 1e-10, int n_max = 200);

// Integrated versions built from l_{n,p}: bounds on (int_0^t E|.|^p ds)^{1/p}.
SeriesBound growth_bound_2(const std::vector<double>& k0, const TriangularTable& l, const std::vector<double>& xi_moments,
                           double p, double tol = 1e-10, int n_max = 40);
SeriesBound picard_error_bound_2(const TriangularTable& lambda, const std::vector<double>& Delta, int n, double p,
                                 double tol = 1e-10, int n_max = 40);

using TripleFn = std::function<double(double t, double s, double r)>;

struct IncrementData {
    KernelSpec k1, k2, l1, l2;
    TripleFn f1, f2, g1, g2;                   // empty means zero
    std::function<double(double)> moments;  // E[|X_r|^p]^{1/p}; empty means zero
    double w_p = 2.0;
};

// Right side of the increment estimate for E[|X_t - X_s|^p]^{1/p}, s <= t.
double increment_bound(const IncrementData& data, double xi_increment, double s, double t);

// Pass at node t iff moment(X_t - xi_t) <= bound(t) * slack + 3 SE.
BoundReport check_growth_vs_mc(const PathEnsemble& X, const PathEnsemble& xi, const std::vector<double>& bound,
                               double slack, double p = 2.0, int threads = 1);

struct InequalityReport {
    std::vector<BoundReport> per_n;  // n = 1..K
    double max_hypothesis_excess = 0.0;
    double max_gap = 0.0;  // max |lhs - rhs| over all n and nodes
    bool all_pass = true;
};

// M[n] are the moment curves M_n, n = 0..K. Checks the hypothesis
//   M_n <= v + (int l^beta M_{n-1}^beta)^{1/beta}
// and then the conclusion
//   M_n <= v + sum_{i<n} (int R_{l^beta,i} v^beta)^{1/beta} + (int R_{l^beta,n} M_0^beta)^{1/beta}.
// Throws DomainError if the hypothesis fails by more than hyp_tol.
InequalityReport resolvent_inequality_check(const std::vector<double>& v, const TriangularTable& l, double beta,
                                            double p, const std::vector<std::vector<double>>& M,
                                            double hyp_tol = 1e-12);

// Least-squares slope of log E|X_{t+d} - X_t|^p against log d, divided by p. Lags (in steps)
// double from lag_min up to lag_max; moments are averaged over all start nodes.
double holder_exponent(const PathEnsemble& X, double p, int lag_min, int lag_max);

}  // namespace svlab
