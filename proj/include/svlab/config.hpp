#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "svlab/kernel.hpp"
#include "svlab/sve.hpp"

namespace svlab {

// zero | const(c) | power(c, a) | exp(c, lambda) | a bare number (constant)
struct FunctionSpec {
    enum class Kind { Zero, Constant, Power, Exponential };
    Kind kind = Kind::Zero;
    double c = 0.0, a = 0.0;

    static FunctionSpec parse(const std::string& text);
    // scale * f
    ScalarFunction make(double scale = 1.0) const;
    // |scale * f|
    ScalarFunction make_abs(double scale = 1.0) const;
    std::string str() const;
};

struct KernelConfig {
    bool present = false;
    std::string family = "constant";  // zero | constant | convolution | separated | fractional
    double c = 1.0;
    FunctionSpec f, k0, k1;
    double alpha = 1.0, beta = 0.0, gamma = 1.0;
    int iterates = 3;  // iterated-kernel tables written by the resolvent command
    int n_max = 40;
    double tol = 1e-10;
    KernelSpec spec() const;
};

// Exemplary coefficients with linear state maps:
// B = f(t-s) (kappa + f1 X_s + f2 E X_s), Sigma = g(t-s) (eta + g1 diag(X_s) + g2 diag(E X_s)).
struct CoefficientConfig {
    bool present = false;
    int m = 1;
    std::vector<double> xi{0.0};
    FunctionSpec f, g;
    std::vector<double> kappa{0.0}, eta{0.0};
    double f1 = 0.0, f2 = 0.0, g1 = 0.0, g2 = 0.0;
    DriftRule drift_rule = DriftRule::KernelTrapezoid;
    DiffusionRule diffusion_rule = DiffusionRule::Point;

    CoefficientSpec spec(int d) const;
    std::vector<double> xi_vector() const;
    std::vector<double> kappa_vector() const;
    std::vector<double> eta_matrix(int d) const;
};

struct GridConfig {
    double T = 1.0;
    int steps = 64;
};

struct McConfig {
    int N = 1000;
    std::uint64_t seed = 1;
    int d = 1;
};

struct AnalysisConfig {
    double p = 2.0;
    double w_p = 0.0;  // 0 selects default_wp(p)
    double tol = 1e-8;
    double slack = 1.05;
    int max_iters = 100;
    bool integrated_seminorm = false;
    int iterates = 6;  // Picard iterates compared against the error bound
    // iterated-kernel ledgers
    double ledger_p = 2.0, eps = 0.5;
    int m_max = 4, n_max = 10;
    // sequence inequality
    double beta = 1.0, v = 1.0, m0 = 1.0;
    int sequence_length = 5;
    // moment-increment regression
    bool holder = false;
    int lag_min = 1, lag_max = 16;

    double wp() const;
};

struct OutputConfig {
    std::string dir = "out";
    bool paths = false;  // write every path of the solution
};

struct ExperimentConfig {
    KernelConfig kernel;
    CoefficientConfig coefficients;
    GridConfig grid;
    McConfig mc;
    AnalysisConfig analysis;
    OutputConfig output;
    // FNV-1a of the sorted entries, without mc.seed and the output section.
    std::string hash;

    TimeGrid time_grid() const { return TimeGrid(grid.T, grid.steps); }
};

// Sections [kernel], [coefficients], [grid], [mc], [analysis], [output] with key = value lines.
// '#' and ';' start comments. Unknown sections or keys, duplicates and bad values throw ConfigError
// with the line number.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace svlab
