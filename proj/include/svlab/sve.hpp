#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "svlab/kernel.hpp"
#include "svlab/paths.hpp"

namespace svlab {

// Linear map R^d -> R^m, row-major m x d.
struct RadonifyingMap {
    int m = 1, d = 1;
    std::vector<double> A;

    RadonifyingMap() : A(1, 0.0) {}
    RadonifyingMap(int m_, int d_, std::vector<double> a);
    // Hilbert-Schmidt norm (tr A^T A)^{1/2}
    double hs_norm() const;
    void apply(const double* w, double* out) const;
};

// Deterministic function of time with values in R^k (vectors or row-major matrices).
using TimeFn = std::function<void(double s, double* out)>;
// Control process; may depend on the particle.
using ControlFn = std::function<void(int particle, double s, double* out)>;
// Initial value process xi_t.
using XiFn = std::function<void(int particle, double t, double* out)>;
// Map R^m x R^a -> R^k.
using StateMap = std::function<void(const double* x, const double* a, double* out)>;

XiFn constant_xi(std::vector<double> x0);

struct MapSpec {
    StateMap fn;              // empty means the zero map
    double lipschitz = -1.0;  // declared constant; negative means undeclared (not checked)
    explicit operator bool() const { return static_cast<bool>(fn); }
};

// Empirical law of (X_s, alpha_s) over the ensemble at one node.
struct Law {
    const PathEnsemble* ens = nullptr;
    int node = 0;
    std::vector<double> mean_x, mean_a;

    int particles() const { return ens->particles(); }
    const double* x(int p) const { return ens->path(p) + static_cast<std::size_t>(node) * ens->dim(); }
    const double* ctrl(int p) const {
        return ens->control_dim() ? ens->control(p) + static_cast<std::size_t>(node) * ens->control_dim() : nullptr;
    }
};

// B = f(t-s) (kappa_s + f1(X_s, alpha_s) + E f2(X_s, alpha_s)),
// Sigma = g(t-s) (eta_s + g1(X_s, alpha_s) + E g2(X_s, alpha_s)).
struct ExemplaryCoefficients {
    ScalarFunction f, g;
    TimeFn kappa;  // R^m
    TimeFn eta;    // R^{m x d}
    MapSpec f1, f2;  // into R^m
    MapSpec g1, g2;  // into R^{m x d}
};

using LawMap = std::function<void(double s, const double* x, const double* a, const Law& law, double* out)>;

// B = drift_kernel(t-s) b(s, X_s, alpha_s, law), Sigma = diffusion_kernel(t-s) sigma(s, X_s, alpha_s, law).
struct ControlledMVCoefficients {
    ScalarFunction drift_kernel = ScalarFunction::constant(1.0);
    ScalarFunction diffusion_kernel = ScalarFunction::constant(1.0);
    LawMap b;      // into R^m
    LawMap sigma;  // into R^{m x d}
    double lipschitz_b = -1.0, lipschitz_sigma = -1.0;  // in x, for a fixed law; negative = undeclared
};

// Coefficients on (t, s, particle); the particle index stands in for omega.
using RandomField = std::function<void(double t, double s, int particle, double* out)>;

// B = kappa + beta1 f1(X_s) + beta2 f2(E X_s), Sigma = eta + sigma1(g1(X_s)) + sigma2(g2(E X_s)).
// beta_i are m x m, sigma_i map R^m into (m x d) matrices and are stored as (m*d) x m.
// f_i, g_i: R^m -> R^m, Lipschitz one and zero at the origin.
struct AffineRandomCoefficients {
    RandomField kappa, eta, beta1, beta2, sigma1, sigma2;
    MapSpec f1, f2, g1, g2;
};

enum class DriftRule { KernelTrapezoid, LeftPoint };
enum class DiffusionRule { Point, CellAveraged };

struct CoefficientSpec {
    int m = 1, d = 1, a = 0;
    std::variant<ExemplaryCoefficients, ControlledMVCoefficients, AffineRandomCoefficients> family;
    ControlFn alpha;  // required when a > 0

    static CoefficientSpec zero(int m = 1, int d = 1);
    // B = 0, Sigma = A
    static CoefficientSpec constant_diffusion(const RadonifyingMap& A);
    bool is_exemplary() const { return std::holds_alternative<ExemplaryCoefficients>(family); }
    bool is_controlled() const { return std::holds_alternative<ControlledMVCoefficients>(family); }
    bool is_affine() const { return std::holds_alternative<AffineRandomCoefficients>(family); }
};

struct SolverOptions {
    int threads = 1;
    DriftRule drift_rule = DriftRule::KernelTrapezoid;
    DiffusionRule diffusion_rule = DiffusionRule::Point;
    double p = 2.0;                  // moment order of the stopping seminorm
    bool integrated_seminorm = false;  // seminorm_int_p instead of seminorm_infty_p
};

// xi on every node, with the controls filled in when the spec has any.
PathEnsemble make_xi_ensemble(const XiFn& xi, const CoefficientSpec& coef, const TimeGrid& grid, int N);

// N x m values of int_0^t B_{t,s}(X_s) ds at t = t_index.
std::vector<double> drift_integral(const CoefficientSpec& coef, const PathEnsemble& X, int t_index,
                                   const SolverOptions& opts = {});
// N x m values of int_0^t Sigma_{t,s}(X_s) dW_s at t = t_index, driver taken from X.
std::vector<double> stochastic_integral(const CoefficientSpec& coef, const PathEnsemble& X, int t_index,
                                        const SolverOptions& opts = {});

// xi + drift + stochastic integral of X on every node.
PathEnsemble picard_map(const PathEnsemble& xi, const CoefficientSpec& coef, const PathEnsemble& X,
                        const std::shared_ptr<const BrownianDriver>& driver, const SolverOptions& opts = {});

// X0, X1, ..., X_{n_iters}; X0 defaults to xi.
std::vector<PathEnsemble> picard_iterate(const XiFn& xi, const CoefficientSpec& coef,
                                         const std::shared_ptr<const BrownianDriver>& driver, int n_iters,
                                         const SolverOptions& opts = {}, const PathEnsemble* X0 = nullptr);

struct SolveResult {
    PathEnsemble X;
    PathEnsemble xi;
    int iterations = 0;
    std::vector<double> increments;  // seminorm of X^{(n)} - X^{(n-1)}
    std::vector<double> residual;    // (E|Phi(X)_t - X_t|^p)^{1/p} per node
};

SolveResult solve(const XiFn& xi, const CoefficientSpec& coef, const std::shared_ptr<const BrownianDriver>& driver,
                  double tol, int max_iters, const SolverOptions& opts = {}, const PathEnsemble* X0 = nullptr);

struct LipschitzReport {
    std::string name;
    double declared = 0.0, observed = 0.0;
    bool ok = true;
};

// Two-point ratios on random samples; ok iff observed <= declared + 1e-6 (and, for the
// affine family, the map vanishes at the origin).
std::vector<LipschitzReport> check_lipschitz(const CoefficientSpec& coef, std::uint64_t seed, int samples = 1000);

}  // namespace svlab
