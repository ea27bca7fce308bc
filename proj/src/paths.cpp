#include "svlab/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>

namespace svlab {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    constexpr std::uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        std::uint64_t p0 = M0 * c[0], p1 = M1 * c[2];
        auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += W0;
        k[1] += W1;
    }
    return c;
}

namespace {

double unit_open(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t b = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return (static_cast<double>(b) + 0.5) * 0x1p-53;
}

// Two standard normals from one Philox block (Box-Muller).
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint32_t particle, std::uint32_t step, std::uint32_t pair) {
    auto w = philox4x32({particle, step, pair, 0u},
                        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    double u1 = unit_open(w[0], w[1]), u2 = unit_open(w[2], w[3]);
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

BrownianDriver::BrownianDriver(std::uint64_t seed, int particles, TimeGrid grid, int d)
    : seed_(seed), particles_(particles), grid_(grid), d_(d) {
    if (particles < 1 || d < 1) throw DomainError("BrownianDriver needs N >= 1 and d >= 1");
}

double BrownianDriver::increment(int particle, int step, int comp) const {
    auto z = normal_pair(seed_, static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(step),
                         static_cast<std::uint32_t>(comp / 2));
    return std::sqrt(grid_.h()) * z[comp % 2];
}

void BrownianDriver::particle_increments(int particle, double* out) const {
    const double sh = std::sqrt(grid_.h());
    for (int j = 0; j < grid_.steps; ++j)
        for (int c = 0; c < d_; c += 2) {
            auto z = normal_pair(seed_, static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(j),
                                 static_cast<std::uint32_t>(c / 2));
            out[j * d_ + c] = sh * z[0];
            if (c + 1 < d_) out[j * d_ + c + 1] = sh * z[1];
        }
}

std::vector<double> BrownianDriver::materialize() const {
    const std::size_t per = static_cast<std::size_t>(grid_.steps) * d_;
    std::vector<double> out(per * particles_);
    for (int p = 0; p < particles_; ++p) particle_increments(p, out.data() + per * p);
    return out;
}

PathEnsemble::PathEnsemble(TimeGrid grid, int particles, int m, int a)
    : grid_(grid), N_(particles), m_(m), a_(a) {
    if (particles < 1) throw DomainError("ensemble needs at least one particle");
    if (m < 1 || a < 0) throw DomainError("bad ensemble dimensions");
    states_.assign(static_cast<std::size_t>(N_) * nodes() * m_, 0.0);
    if (a_) control_.assign(static_cast<std::size_t>(N_) * nodes() * a_, 0.0);
}

bool PathEnsemble::all_finite() const {
    return std::all_of(states_.begin(), states_.end(), [](double v) { return std::isfinite(v); });
}

void PathEnsemble::write_csv(std::ostream& os) const {
    os << "particle,t";
    for (int c = 0; c < m_; ++c) os << ",x" << c + 1;
    for (int c = 0; c < a_; ++c) os << ",a" << c + 1;
    os << '\n' << std::setprecision(17);
    for (int p = 0; p < N_; ++p)
        for (int j = 0; j < nodes(); ++j) {
            os << p << ',' << grid_.node(j);
            for (int c = 0; c < m_; ++c) os << ',' << x(p, j, c);
            for (int c = 0; c < a_; ++c) os << ',' << control(p)[j * a_ + c];
            os << '\n';
        }
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    os.write(b, sizeof(T));
}

template <class T>
T get(std::istream& is) {
    char b[sizeof(T)];
    if (!is.read(b, sizeof(T))) throw DomainError("truncated ensemble file");
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

constexpr std::uint16_t kBinaryVersion = 1;

}  // namespace

void PathEnsemble::write_binary(std::ostream& os) const {
    os.write("SVEE", 4);
    put<std::uint16_t>(os, kBinaryVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(N_));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(grid_.steps));
    put<std::uint16_t>(os, static_cast<std::uint16_t>(m_));
    put<double>(os, grid_.horizon);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(a_));
    os.write(reinterpret_cast<const char*>(states_.data()), static_cast<std::streamsize>(states_.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(control_.data()), static_cast<std::streamsize>(control_.size() * sizeof(double)));
}

PathEnsemble PathEnsemble::read_binary(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SVEE", 4) != 0) throw DomainError("not an SVEE ensemble file");
    auto version = get<std::uint16_t>(is);
    if (version != kBinaryVersion) throw DomainError("unsupported SVEE version " + std::to_string(version));
    auto N = get<std::uint32_t>(is);
    auto steps = get<std::uint32_t>(is);
    auto m = get<std::uint16_t>(is);
    auto T = get<double>(is);
    auto a = get<std::uint32_t>(is);
    PathEnsemble e(TimeGrid(T, static_cast<int>(steps)), static_cast<int>(N), m, static_cast<int>(a));
    auto rd = [&](std::vector<double>& v) {
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
            throw DomainError("truncated ensemble file");
    };
    rd(e.states_);
    rd(e.control_);
    return e;
}

std::vector<double> difference_moments(const PathEnsemble& A, const PathEnsemble& B, double p, int threads) {
    if (A.particles() != B.particles() || A.dim() != B.dim() || A.nodes() != B.nodes())
        throw DomainError("ensembles differ in shape");
    if (p < 1.0) throw DomainError("p must be >= 1");
    const int N = A.particles(), n = A.nodes(), m = A.dim();
    // per-node sums are reduced in a fixed tree over particles
    std::vector<double> pw(static_cast<std::size_t>(n) * N);
    parallel_for(N, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            const double* x = A.path(static_cast<int>(q));
            const double* y = B.path(static_cast<int>(q));
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int c = 0; c < m; ++c) {
                    double d = x[j * m + c] - y[j * m + c];
                    s += d * d;
                }
                pw[static_cast<std::size_t>(j) * N + q] = std::pow(s, p / 2.0);
            }
        }
    });
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j)
        out[j] = std::pow(pairwise_sum(pw.data() + static_cast<std::size_t>(j) * N, N) / N, 1.0 / p);
    return out;
}

namespace {

int last_node(const TimeGrid& g, double T) {
    if (!(T > 0.0) || T > g.horizon * (1.0 + 1e-12)) throw DomainError("T outside the grid");
    int i = g.index_of(T);
    if (i < 0) throw DomainError("T must be a grid node");
    return i;
}

}  // namespace

double seminorm_infty_p(const PathEnsemble& A, const PathEnsemble& B, double p, double T, int threads) {
    int last = last_node(A.grid(), T);
    auto D = difference_moments(A, B, p, threads);
    return *std::max_element(D.begin(), D.begin() + last + 1);
}

double seminorm_int_p(const PathEnsemble& A, const PathEnsemble& B, double p, double T, int threads) {
    int last = last_node(A.grid(), T);
    auto D = difference_moments(A, B, p, threads);
    const double h = A.grid().h();
    double s = 0.0;
    for (int j = 0; j <= last; ++j) {
        double w = (j == 0 || j == last) ? 0.5 * h : h;
        s += w * std::pow(D[j], p);
    }
    return std::pow(s, 1.0 / p);
}

}  // namespace svlab
