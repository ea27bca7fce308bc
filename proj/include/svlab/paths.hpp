#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "svlab/common.hpp"

namespace svlab {

// Philox4x32-10 block: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Brownian increments N(0, h), one value per (particle, step, component). Nothing is
// stored: every value is a pure function of (seed, particle, step, component).
class BrownianDriver {
public:
    BrownianDriver() = default;
    BrownianDriver(std::uint64_t seed, int particles, TimeGrid grid, int d);

    std::uint64_t seed() const { return seed_; }
    int particles() const { return particles_; }
    int dim() const { return d_; }
    const TimeGrid& grid() const { return grid_; }

    double increment(int particle, int step, int comp) const;
    // out[j * d + c] for j < steps
    void particle_increments(int particle, double* out) const;
    // N x steps x d, particle-major
    std::vector<double> materialize() const;

private:
    std::uint64_t seed_ = 0;
    int particles_ = 0;
    TimeGrid grid_;
    int d_ = 1;
};

// States N x (steps + 1) x m, particle-major, with an optional control block of width a.
class PathEnsemble {
public:
    PathEnsemble() = default;
    PathEnsemble(TimeGrid grid, int particles, int m, int a = 0);

    const TimeGrid& grid() const { return grid_; }
    int particles() const { return N_; }
    int dim() const { return m_; }
    int control_dim() const { return a_; }
    int nodes() const { return grid_.steps + 1; }

    double& x(int p, int j, int c) { return states_[index(p, j) + c]; }
    double x(int p, int j, int c) const { return states_[index(p, j) + c]; }
    double* path(int p) { return states_.data() + index(p, 0); }
    const double* path(int p) const { return states_.data() + index(p, 0); }
    double* control(int p) { return a_ ? control_.data() + static_cast<std::size_t>(p) * nodes() * a_ : nullptr; }
    const double* control(int p) const {
        return a_ ? control_.data() + static_cast<std::size_t>(p) * nodes() * a_ : nullptr;
    }
    std::vector<double>& states() { return states_; }
    const std::vector<double>& states() const { return states_; }
    const std::vector<double>& controls() const { return control_; }

    std::shared_ptr<const BrownianDriver> driver;

    // (particle, t, x_1..x_m[, a_1..a_a])
    void write_csv(std::ostream& os) const;
    // 16-byte header: "SVEE", u16 version, u32 N, u32 steps, u16 m; then T, a, states, controls.
    void write_binary(std::ostream& os) const;
    static PathEnsemble read_binary(std::istream& is);

    bool all_finite() const;

private:
    std::size_t index(int p, int j) const {
        return (static_cast<std::size_t>(p) * nodes() + j) * m_;
    }

    TimeGrid grid_;
    int N_ = 0, m_ = 1, a_ = 0;
    std::vector<double> states_, control_;
};

// (E|X_t - Y_t|^p)^{1/p} on every node, particles paired by index.
std::vector<double> difference_moments(const PathEnsemble& A, const PathEnsemble& B, double p, int threads = 1);
// max over nodes t <= T of the difference moment curve
double seminorm_infty_p(const PathEnsemble& A, const PathEnsemble& B, double p, double T, int threads = 1);
// (int_0^T D(t)^p dt)^{1/p}, trapezoid weights on the nodes
double seminorm_int_p(const PathEnsemble& A, const PathEnsemble& B, double p, double T, int threads = 1);

}  // namespace svlab
