#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace svlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr const char* kVersion = "0.3.1";

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

class IntegrabilityError : public Error {
public:
    using Error::Error;
};

class InfeasibilityError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& msg, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Series that did not decay. Carries whatever was summed so far.
class TruncationError : public Error {
public:
    TruncationError(const std::string& msg, std::vector<double> partial)
        : Error(msg), partial_(std::move(partial)) {}
    const std::vector<double>& partial() const { return partial_; }

private:
    std::vector<double> partial_;
};

struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double T, int n) : horizon(T), steps(n) {
        if (!(T > 0.0) || n < 1) throw DomainError("TimeGrid needs T > 0 and steps >= 1");
    }
    double h() const { return horizon / steps; }
    double node(int j) const { return j == steps ? horizon : j * horizon / steps; }
    int size() const { return steps + 1; }
    // Index of t if t is a node (relative tolerance 1e-9), otherwise -1.
    int index_of(double t) const;
};

// Multiplication on [0, inf] with 0 * inf = 0.
inline double ext_mul(double a, double b) {
    if (a == 0.0 || b == 0.0) return 0.0;
    return a * b;
}

// Fixed-tree pairwise summation; the result does not depend on threading.
double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

// sum a[k] b[k] with four interleaved partial sums in a fixed order.
double dot(const double* a, const double* b, std::size_t n);

// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are independent.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body);

// Default BDG constant: 2 for p = 2, (p/(p-1)) * sqrt(p(p-1)/2) otherwise.
double default_wp(double p);

}  // namespace svlab
