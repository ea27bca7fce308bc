#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "svlab/common.hpp"
#include "svlab/table.hpp"

namespace svlab {

// Real function of one variable u >= 0, with an optional power-law exponent at u = 0
// (f(u) ~ C u^a) used for exact cell integration.
class ScalarFunction {
public:
    enum class Kind { Zero, Constant, Power, Exponential, Custom };

    ScalarFunction() : kind_(Kind::Zero) {}

    static ScalarFunction zero() { return {}; }
    static ScalarFunction constant(double c);
    // c * u^a
    static ScalarFunction power(double c, double a);
    // c * exp(lambda * u)
    static ScalarFunction exponential(double c, double lambda);
    static ScalarFunction custom(std::function<double(double)> f, std::optional<double> exponent_at_zero = {},
                                 std::string name = "custom");

    double operator()(double u) const;
    Kind kind() const { return kind_; }
    bool is_zero() const { return kind_ == Kind::Zero || (kind_ != Kind::Custom && c_ == 0.0); }
    // Pure power law c u^a (constants count with a = 0).
    bool is_power_law() const { return kind_ == Kind::Constant || kind_ == Kind::Power || kind_ == Kind::Zero; }
    double coefficient() const { return c_; }
    double exponent() const { return a_; }
    std::optional<double> exponent_at_zero() const;

    // int_lo^hi |f(u)|^q du for 0 <= lo < hi; +inf if it diverges at 0.
    double integral_abs_pow(double lo, double hi, double q) const;
    double integral(double lo, double hi) const;  // signed
    double first_moment(double lo, double hi) const;  // int_lo^hi u f(u) du
    std::string describe() const;

private:
    Kind kind_;
    double c_ = 0.0;
    double a_ = 0.0;
    std::function<double(double)> fn_;
    std::optional<double> custom_exponent_;
    std::string name_;
};

struct SeparatedKernel {
    ScalarFunction k0;  // of t
    ScalarFunction k1;  // of s
};
struct ConvolutionKernel {
    ScalarFunction f;
};
// gamma s^{gamma-1} (t^gamma - s^gamma)^{alpha-1} s^{-beta gamma}
struct FractionalKernel {
    double alpha = 1.0, beta = 0.0, gamma = 1.0;
};
struct ConstantKernel {
    double c = 0.0;
};
struct TabulatedKernel {
    std::shared_ptr<const TriangularTable> table;
};

class KernelSpec {
public:
    using Family = std::variant<SeparatedKernel, ConvolutionKernel, FractionalKernel, ConstantKernel, TabulatedKernel>;

    KernelSpec() : family_(ConstantKernel{0.0}), singular_exponent_(0.0) {}
    KernelSpec(Family family, std::optional<double> singular_exponent);

    static KernelSpec constant(double c);
    static KernelSpec convolution(ScalarFunction f);
    static KernelSpec separated(ScalarFunction k0, ScalarFunction k1);
    static KernelSpec fractional(double alpha, double beta, double gamma);
    static KernelSpec tabulated(TriangularTable table);

    const Family& family() const { return family_; }
    std::optional<double> singular_exponent() const { return singular_exponent_; }
    // Power-law exponent in s at s = 0, where the family has one.
    std::optional<double> origin_exponent() const;
    bool is_convolution() const { return std::holds_alternative<ConvolutionKernel>(family_); }
    bool is_tabulated() const { return std::holds_alternative<TabulatedKernel>(family_); }
    bool is_zero() const;

    // Value with limits allowed (s = t, s = 0); may be +inf. Tabulated kernels need nodes.
    double value(double t, double s) const;
    std::string describe() const;

private:
    Family family_;
    std::optional<double> singular_exponent_;
};

double eval_kernel(const KernelSpec& spec, double t, double s);

// int_0^t k(t,s)^q ds on the grid; +inf when a singular cell diverges.
double q_integral(const KernelSpec& spec, double q, double t, const TimeGrid& grid);

// Cell integrals of k(t_i, .)^q over [t_m, t_{m+1}], m = 0..i-1.
std::vector<double> row_cells(const KernelSpec& spec, double q, const TimeGrid& grid, int i);
// Cell integrals of k(., t_j)^q over [t_m, t_{m+1}], m = j..n-1 (index m - j).
std::vector<double> col_cells(const KernelSpec& spec, double q, const TimeGrid& grid, int j);

// k^q on all nodes; diagonal +inf when q * singular_exponent < 0.
TriangularTable tabulate(const KernelSpec& spec, const TimeGrid& grid, double q = 1.0);

enum class Verdict { Member, NotMember, Inconclusive };
const char* to_string(Verdict v);

struct ClassReport {
    double q = 1.0;
    double sup_q_integral = 0.0;
    std::vector<std::pair<double, double>> modulus;  // (delta, sup window integral)
    double sup_col_integral = 0.0;
    std::vector<std::pair<double, double>> col_modulus;
    Verdict verdict_Kinf = Verdict::Inconclusive;
    Verdict verdict_K = Verdict::Inconclusive;
    Verdict verdict_Khat = Verdict::Inconclusive;
};

struct MembershipOptions {
    double modulus_tol = 1e-3;
};

// T * 10^-k for k = 1..8.
std::vector<double> default_delta_ladder(double T);

ClassReport class_membership(const KernelSpec& spec, double q, double T, const TimeGrid& grid,
                             const std::vector<double>& delta_ladder, const MembershipOptions& opts = {});

// Sup over windows [r, t], t a node <= T, t - r <= delta, of int_r^t k(t,s)^q ds.
double row_modulus(const KernelSpec& spec, double q, double T, const TimeGrid& grid, double delta);
// Same with the variables exchanged: int_r^t k(s,r)^q ds.
double col_modulus(const KernelSpec& spec, double q, double T, const TimeGrid& grid, double delta);

// Smallest c with the four-term increment condition <= c (t-s)^beta_hat on grid pairs;
// +inf when the ratio grows without bound as t - s shrinks.
double holder_condition_constant(const ScalarFunction& f, const ScalarFunction& g, double beta_hat, double T,
                                 const TimeGrid& grid);

}  // namespace svlab
