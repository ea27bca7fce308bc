#include "svlab/sve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace svlab {

RadonifyingMap::RadonifyingMap(int m_, int d_, std::vector<double> a) : m(m_), d(d_), A(std::move(a)) {
    if (m < 1 || d < 1 || A.size() != static_cast<std::size_t>(m) * d) throw DomainError("matrix must be m x d");
}

double RadonifyingMap::hs_norm() const {
    double s = 0.0;
    for (double v : A) s += v * v;
    return std::sqrt(s);
}

void RadonifyingMap::apply(const double* w, double* out) const {
    for (int r = 0; r < m; ++r) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += A[static_cast<std::size_t>(r) * d + c] * w[c];
        out[r] = s;
    }
}

XiFn constant_xi(std::vector<double> x0) {
    return [x0 = std::move(x0)](int, double, double* out) { std::copy(x0.begin(), x0.end(), out); };
}

CoefficientSpec CoefficientSpec::zero(int m, int d) {
    CoefficientSpec c;
    c.m = m;
    c.d = d;
    c.family = ExemplaryCoefficients{};
    return c;
}

CoefficientSpec CoefficientSpec::constant_diffusion(const RadonifyingMap& A) {
    CoefficientSpec c = zero(A.m, A.d);
    auto& e = std::get<ExemplaryCoefficients>(c.family);
    e.g = ScalarFunction::constant(1.0);
    e.eta = [A = A.A](double, double* out) { std::copy(A.begin(), A.end(), out); };
    return c;
}

namespace {

std::string cell_name(double lo, double hi) {
    std::ostringstream os;
    os << '[' << lo << ", " << hi << ']';
    return os.str();
}

// Weights on Y_{i-k} (lag k = 0..n) for the drift sum at node i, for a convolution factor f.
// Trapezoid: Y linear on each cell, f integrated exactly. Left point: Y_j on the whole cell.
struct DriftWeights {
    std::vector<double> interior;  // k = 1..i-1 (trapezoid) or 1..i (left point)
    std::vector<double> right;     // trapezoid only: weight on Y_i is right[1]
    std::vector<double> left;      // trapezoid only: weight on Y_0 at node i is left[i]
    bool trapezoid = true;
    bool zero = true;
};

DriftWeights drift_weights(const ScalarFunction& f, const TimeGrid& grid, DriftRule rule) {
    const int n = grid.steps;
    const double h = grid.h();
    DriftWeights w;
    w.trapezoid = rule == DriftRule::KernelTrapezoid;
    w.zero = f.is_zero();
    if (w.zero) return w;
    std::vector<double> M0(n + 1, 0.0), M1(n + 1, 0.0);
    for (int k = 1; k <= n; ++k) {
        double lo = (k - 1) * h, hi = k * h;
        M0[k] = f.integral(lo, hi);
        if (!std::isfinite(M0[k]))
            throw IntegrabilityError("drift kernel is not integrable on the lag cell " + cell_name(lo, hi));
        if (w.trapezoid) {
            M1[k] = f.first_moment(lo, hi);
            if (!std::isfinite(M1[k]))
                throw IntegrabilityError("drift kernel first moment diverges on the lag cell " + cell_name(lo, hi));
        }
    }
    if (!w.trapezoid) {
        w.interior = M0;
        return w;
    }
    std::vector<double> wl(n + 2, 0.0), wr(n + 2, 0.0);
    for (int k = 1; k <= n; ++k) {
        wl[k] = (M1[k] - (k - 1) * h * M0[k]) / h;
        wr[k] = (k * h * M0[k] - M1[k]) / h;
    }
    w.interior.assign(n + 1, 0.0);
    for (int k = 1; k < n; ++k) w.interior[k] = wl[k] + wr[k + 1];
    w.left = wl;
    w.right = wr;
    return w;
}

std::vector<double> diffusion_weights(const ScalarFunction& g, const TimeGrid& grid, DiffusionRule rule) {
    const int n = grid.steps;
    const double h = grid.h();
    std::vector<double> w(n + 1, 0.0);
    if (g.is_zero()) return w;
    for (int k = 1; k <= n; ++k) {
        double lo = (k - 1) * h, hi = k * h;
        double sq = g.integral_abs_pow(lo, hi, 2.0);
        if (!std::isfinite(sq))
            throw IntegrabilityError("diffusion kernel is not square integrable on the lag cell " + cell_name(lo, hi));
        if (rule == DiffusionRule::Point) {
            w[k] = g(k * h);
        } else {
            double mid = g(0.5 * (lo + hi));
            w[k] = std::copysign(std::sqrt(sq / h), mid);
        }
        if (!std::isfinite(w[k])) throw IntegrabilityError("diffusion kernel is not finite at lag " + std::to_string(k * h));
    }
    return w;
}

// Per-node ensemble means of a map over particles, component-wise pairwise sums.
// out[j * k + c]
using PerParticle = std::function<void(int p, int node, double* out)>;

std::vector<double> node_means(const PathEnsemble& X, int k, const PerParticle& fn, int threads, int last_node) {
    const int N = X.particles();
    std::vector<double> means(static_cast<std::size_t>(last_node + 1) * k, 0.0);
    std::vector<double> buf(static_cast<std::size_t>(N) * k);
    for (int j = 0; j <= last_node; ++j) {
        parallel_for(N, threads, [&](std::size_t b, std::size_t e) {
            std::vector<double> tmp(k);
            for (std::size_t p = b; p < e; ++p) {
                fn(static_cast<int>(p), j, tmp.data());
                for (int c = 0; c < k; ++c) buf[static_cast<std::size_t>(c) * N + p] = tmp[c];
            }
        });
        for (int c = 0; c < k; ++c)
            means[static_cast<std::size_t>(j) * k + c] = pairwise_sum(buf.data() + static_cast<std::size_t>(c) * N, N) / N;
    }
    return means;
}

void check_shapes(const CoefficientSpec& coef, const PathEnsemble& X, const BrownianDriver* W) {
    if (coef.m != X.dim()) throw DomainError("ensemble dimension does not match the coefficients");
    if (coef.a != X.control_dim()) throw DomainError("ensemble control width does not match the coefficients");
    if (W) {
        if (W->dim() != coef.d) throw DomainError("driver dimension does not match the coefficients");
        if (W->particles() < X.particles()) throw DomainError("driver has fewer particles than the ensemble");
        if (W->grid().steps != X.grid().steps || W->grid().horizon != X.grid().horizon)
            throw DomainError("driver and ensemble grids differ");
    }
}

// Drift and stochastic Volterra sums of X on nodes [i_lo, i_hi], written as out[(i - i_lo) * m + c].
class VolterraOperator {
public:
    VolterraOperator(const CoefficientSpec& coef, const PathEnsemble& X, const BrownianDriver* W,
                     const SolverOptions& opts, int i_hi)
        : coef_(coef), X_(X), W_(W), opts_(opts), n_(X.grid().steps), i_hi_(i_hi) {
        check_shapes(coef, X, W);
        const auto& grid = X.grid();
        const int m = coef.m, d = coef.d, a = coef.a;
        const int T = opts.threads;
        if (auto* e = std::get_if<ExemplaryCoefficients>(&coef.family)) {
            dw_ = drift_weights(e->f, grid, opts.drift_rule);
            gw_ = diffusion_weights(e->g, grid, opts.diffusion_rule);
            has_drift_ = !dw_.zero && (e->kappa || e->f1 || e->f2);
            has_diff_ = !e->g.is_zero() && (e->eta || e->g1 || e->g2);
            if (has_drift_ && e->f2)
                Ef2_ = node_means(X, m, [&](int p, int j, double* out) { e->f2.fn(x(p, j), ctrl(p, j), out); }, T, i_hi);
            if (has_diff_ && e->g2)
                Eg2_ = node_means(X, m * d, [&](int p, int j, double* out) { e->g2.fn(x(p, j), ctrl(p, j), out); }, T,
                                  i_hi);
        } else if (auto* c = std::get_if<ControlledMVCoefficients>(&coef.family)) {
            dw_ = drift_weights(c->drift_kernel, grid, opts.drift_rule);
            gw_ = diffusion_weights(c->diffusion_kernel, grid, opts.diffusion_rule);
            has_drift_ = !dw_.zero && static_cast<bool>(c->b);
            has_diff_ = !c->diffusion_kernel.is_zero() && static_cast<bool>(c->sigma);
            if (has_drift_ || has_diff_) make_laws(T);
        } else {
            auto& r = std::get<AffineRandomCoefficients>(coef.family);
            has_drift_ = r.kappa || (r.beta1 && r.f1) || (r.beta2 && r.f2);
            has_diff_ = r.eta || (r.sigma1 && r.g1) || (r.sigma2 && r.g2);
            if ((r.beta2 && r.f2) || (r.sigma2 && r.g2)) {
                auto mean = node_means(X, m, [&](int p, int j, double* out) { std::copy(x(p, j), x(p, j) + m, out); },
                                       T, i_hi);
                Ff2_.assign(mean.size(), 0.0);
                Gg2_.assign(mean.size(), 0.0);
                for (int j = 0; j <= i_hi; ++j) {
                    const double* mu = mean.data() + static_cast<std::size_t>(j) * m;
                    if (r.f2) r.f2.fn(mu, nullptr, Ff2_.data() + static_cast<std::size_t>(j) * m);
                    if (r.g2) r.g2.fn(mu, nullptr, Gg2_.data() + static_cast<std::size_t>(j) * m);
                }
            }
        }
        (void)a;
        if (!coef.is_affine()) {
            drev_.assign(n_ + 1, 0.0);
            grev_.assign(n_ + 1, 0.0);
            for (int k = 1; k <= n_; ++k) {
                if (!dw_.zero) drev_[n_ - k] = dw_.interior[k];
                grev_[n_ - k] = gw_[k];
            }
        }
    }

    bool active() const { return has_drift_ || has_diff_; }
    bool has_drift() const { return has_drift_; }
    bool has_diffusion() const { return has_diff_; }

    // drift and stoch: (i_hi - i_lo + 1) x m, either may be null
    void particle(int p, int i_lo, double* drift, double* stoch) const {
        if (coef_.is_affine())
            affine_particle(p, i_lo, drift, stoch);
        else
            separated_particle(p, i_lo, drift, stoch);
    }

private:
    const double* x(int p, int j) const { return X_.path(p) + static_cast<std::size_t>(j) * X_.dim(); }
    const double* ctrl(int p, int j) const {
        return X_.control_dim() ? X_.control(p) + static_cast<std::size_t>(j) * X_.control_dim() : nullptr;
    }

    void make_laws(int threads) {
        const int m = coef_.m, a = coef_.a;
        auto mx = node_means(X_, m, [&](int p, int j, double* out) { std::copy(x(p, j), x(p, j) + m, out); }, threads,
                             i_hi_);
        std::vector<double> ma;
        if (a)
            ma = node_means(X_, a, [&](int p, int j, double* out) { std::copy(ctrl(p, j), ctrl(p, j) + a, out); },
                            threads, i_hi_);
        laws_.resize(i_hi_ + 1);
        for (int j = 0; j <= i_hi_; ++j) {
            laws_[j].ens = &X_;
            laws_[j].node = j;
            laws_[j].mean_x.assign(mx.begin() + static_cast<std::ptrdiff_t>(j) * m, mx.begin() + static_cast<std::ptrdiff_t>(j + 1) * m);
            if (a)
                laws_[j].mean_a.assign(ma.begin() + static_cast<std::ptrdiff_t>(j) * a,
                                       ma.begin() + static_cast<std::ptrdiff_t>(j + 1) * a);
        }
    }

    // Y_j (drift integrand without the kernel) and Z_j = G_j dW_j for j <= i_hi.
    void integrands(int p, std::vector<double>& Y, std::vector<double>& Z, bool want_z) const {
        const int m = coef_.m, d = coef_.d;
        const auto& grid = X_.grid();
        std::vector<double> G(static_cast<std::size_t>(m) * d), tmp(static_cast<std::size_t>(m) * d), dW;
        const bool diff = has_diff_ && want_z;
        if (diff) {
            dW.resize(static_cast<std::size_t>(n_) * d);
            W_->particle_increments(p, dW.data());
        }
        Y.assign(static_cast<std::size_t>(i_hi_ + 1) * m, 0.0);
        Z.assign(static_cast<std::size_t>(i_hi_ + 1) * m, 0.0);
        for (int j = 0; j <= i_hi_; ++j) {
            const double s = grid.node(j);
            double* y = Y.data() + static_cast<std::size_t>(j) * m;
            std::fill(G.begin(), G.end(), 0.0);
            if (auto* e = std::get_if<ExemplaryCoefficients>(&coef_.family)) {
                if (has_drift_) {
                    if (e->kappa) {
                        e->kappa(s, tmp.data());
                        for (int c = 0; c < m; ++c) y[c] += tmp[c];
                    }
                    if (e->f1) {
                        e->f1.fn(x(p, j), ctrl(p, j), tmp.data());
                        for (int c = 0; c < m; ++c) y[c] += tmp[c];
                    }
                    if (e->f2)
                        for (int c = 0; c < m; ++c) y[c] += Ef2_[static_cast<std::size_t>(j) * m + c];
                }
                if (diff && j < n_) {
                    if (e->eta) {
                        e->eta(s, tmp.data());
                        for (std::size_t q = 0; q < G.size(); ++q) G[q] += tmp[q];
                    }
                    if (e->g1) {
                        e->g1.fn(x(p, j), ctrl(p, j), tmp.data());
                        for (std::size_t q = 0; q < G.size(); ++q) G[q] += tmp[q];
                    }
                    if (e->g2)
                        for (std::size_t q = 0; q < G.size(); ++q) G[q] += Eg2_[static_cast<std::size_t>(j) * m * d + q];
                }
            } else {
                auto& c = std::get<ControlledMVCoefficients>(coef_.family);
                if (has_drift_) c.b(s, x(p, j), ctrl(p, j), laws_[j], y);
                if (diff && j < n_) c.sigma(s, x(p, j), ctrl(p, j), laws_[j], G.data());
            }
            if (diff && j < n_) {
                double* z = Z.data() + static_cast<std::size_t>(j) * m;
                const double* w = dW.data() + static_cast<std::size_t>(j) * d;
                for (int r = 0; r < m; ++r) {
                    double acc = 0.0;
                    for (int c = 0; c < d; ++c) acc += G[static_cast<std::size_t>(r) * d + c] * w[c];
                    z[r] = acc;
                }
            }
        }
    }

    void separated_particle(int p, int i_lo, double* drift, double* stoch) const {
        const int m = coef_.m, len = i_hi_ + 1;
        std::vector<double> Y, Z;
        integrands(p, Y, Z, stoch != nullptr);
        // component-major copies so that every sum is a contiguous dot product
        std::vector<double> Yc(static_cast<std::size_t>(m) * len), Zc(Yc.size());
        for (int j = 0; j < len; ++j)
            for (int c = 0; c < m; ++c) {
                Yc[static_cast<std::size_t>(c) * len + j] = Y[static_cast<std::size_t>(j) * m + c];
                Zc[static_cast<std::size_t>(c) * len + j] = Z[static_cast<std::size_t>(j) * m + c];
            }
        for (int i = i_lo; i <= i_hi_; ++i) {
            const std::size_t o = static_cast<std::size_t>(i - i_lo) * m;
            for (int c = 0; c < m; ++c) {
                const double* y = Yc.data() + static_cast<std::size_t>(c) * len;
                const double* z = Zc.data() + static_cast<std::size_t>(c) * len;
                if (drift) {
                    double acc = 0.0;
                    if (has_drift_ && i > 0) {
                        if (dw_.trapezoid)
                            acc = dw_.right[1] * y[i] + dw_.left[i] * y[0] + dot(drev_.data() + n_ - i + 1, y + 1, i - 1);
                        else
                            acc = dot(drev_.data() + n_ - i, y, i);
                    }
                    drift[o + c] = acc;
                }
                if (stoch) stoch[o + c] = has_diff_ && i > 0 ? dot(grev_.data() + n_ - i, z, i) : 0.0;
            }
        }
    }

    // Left-point sums with (t, s)-dependent random coefficients.
    void affine_particle(int p, int i_lo, double* drift, double* stoch) const {
        const auto& r = std::get<AffineRandomCoefficients>(coef_.family);
        const int m = coef_.m, d = coef_.d;
        const auto& grid = X_.grid();
        const double h = grid.h();
        const std::size_t md = static_cast<std::size_t>(m) * d;
        std::vector<double> F1(static_cast<std::size_t>(i_hi_ + 1) * m, 0.0), G1(F1.size(), 0.0), dW;
        for (int j = 0; j <= i_hi_; ++j) {
            if (r.f1) r.f1.fn(x(p, j), nullptr, F1.data() + static_cast<std::size_t>(j) * m);
            if (r.g1) r.g1.fn(x(p, j), nullptr, G1.data() + static_cast<std::size_t>(j) * m);
        }
        if (has_diff_) {
            dW.resize(static_cast<std::size_t>(n_) * d);
            W_->particle_increments(p, dW.data());
        }
        std::vector<double> vec(m), mat(std::max(md * m, static_cast<std::size_t>(m) * m)), G(md), acc(m);
        auto matvec = [&](const double* A, int rows, int cols, const double* v, double* out) {
            for (int q = 0; q < rows; ++q) {
                double s = 0.0;
                for (int c = 0; c < cols; ++c) s += A[static_cast<std::size_t>(q) * cols + c] * v[c];
                out[q] += s;
            }
        };
        for (int i = i_lo; i <= i_hi_; ++i) {
            const double t = grid.node(i);
            const std::size_t o = static_cast<std::size_t>(i - i_lo) * m;
            if (drift) {
                std::fill(acc.begin(), acc.end(), 0.0);
                if (has_drift_)
                    for (int j = 0; j < i; ++j) {
                        const double s = grid.node(j);
                        std::fill(vec.begin(), vec.end(), 0.0);
                        if (r.kappa) r.kappa(t, s, p, vec.data());
                        if (r.beta1 && r.f1) {
                            r.beta1(t, s, p, mat.data());
                            matvec(mat.data(), m, m, F1.data() + static_cast<std::size_t>(j) * m, vec.data());
                        }
                        if (r.beta2 && r.f2) {
                            r.beta2(t, s, p, mat.data());
                            matvec(mat.data(), m, m, Ff2_.data() + static_cast<std::size_t>(j) * m, vec.data());
                        }
                        for (int c = 0; c < m; ++c) acc[c] += h * vec[c];
                    }
                std::copy(acc.begin(), acc.end(), drift + o);
            }
            if (stoch) {
                std::fill(acc.begin(), acc.end(), 0.0);
                if (has_diff_)
                    for (int j = 0; j < i; ++j) {
                        const double s = grid.node(j);
                        std::fill(G.begin(), G.end(), 0.0);
                        if (r.eta) r.eta(t, s, p, G.data());
                        if (r.sigma1 && r.g1) {
                            r.sigma1(t, s, p, mat.data());
                            matvec(mat.data(), static_cast<int>(md), m, G1.data() + static_cast<std::size_t>(j) * m, G.data());
                        }
                        if (r.sigma2 && r.g2) {
                            r.sigma2(t, s, p, mat.data());
                            matvec(mat.data(), static_cast<int>(md), m, Gg2_.data() + static_cast<std::size_t>(j) * m, G.data());
                        }
                        matvec(G.data(), m, d, dW.data() + static_cast<std::size_t>(j) * d, acc.data());
                    }
                std::copy(acc.begin(), acc.end(), stoch + o);
            }
        }
    }

    const CoefficientSpec& coef_;
    const PathEnsemble& X_;
    const BrownianDriver* W_;
    SolverOptions opts_;
    int n_, i_hi_;
    DriftWeights dw_;
    std::vector<double> gw_;
    std::vector<double> drev_, grev_;  // weights by lag, reversed: drev_[n - k]
    bool has_drift_ = false, has_diff_ = false;
    std::vector<double> Ef2_, Eg2_;  // exemplary mean terms per node
    std::vector<double> Ff2_, Gg2_;  // affine f2(E X), g2(E X) per node
    std::vector<Law> laws_;
};

std::vector<double> single_node(const CoefficientSpec& coef, const PathEnsemble& X, int t_index,
                                const SolverOptions& opts, bool want_drift) {
    if (t_index < 0 || t_index >= X.nodes()) throw DomainError("t_index out of range");
    const int N = X.particles(), m = coef.m;
    std::vector<double> out(static_cast<std::size_t>(N) * m, 0.0);
    VolterraOperator op(coef, X, want_drift ? nullptr : X.driver.get(), opts, t_index);
    if (want_drift ? !op.has_drift() : !op.has_diffusion()) return out;
    if (!want_drift && !X.driver) throw DomainError("stochastic integral needs the ensemble's Brownian driver");
    parallel_for(N, opts.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
            double* o = out.data() + p * m;
            op.particle(static_cast<int>(p), t_index, want_drift ? o : nullptr, want_drift ? nullptr : o);
        }
    });
    return out;
}

void check_finite(const PathEnsemble& X, int iterate) {
    if (X.all_finite()) return;
    const int m = X.dim();
    for (int j = 0; j < X.nodes(); ++j)
        for (int p = 0; p < X.particles(); ++p)
            for (int c = 0; c < m; ++c)
                if (!std::isfinite(X.x(p, j, c))) {
                    std::ostringstream os;
                    os << "iterate " << iterate << " is not finite at node " << j << " (t = " << X.grid().node(j)
                       << ", particle " << p << ")";
                    throw DivergenceError(os.str());
                }
}

}  // namespace

PathEnsemble make_xi_ensemble(const XiFn& xi, const CoefficientSpec& coef, const TimeGrid& grid, int N) {
    if (N < 1) throw DomainError("need at least one particle");
    if (coef.a > 0 && !coef.alpha) throw DomainError("coefficients declare controls but no control process");
    PathEnsemble E(grid, N, coef.m, coef.a);
    for (int p = 0; p < N; ++p) {
        double* x = E.path(p);
        double* u = E.control(p);
        for (int j = 0; j < E.nodes(); ++j) {
            const double t = grid.node(j);
            if (xi) xi(p, t, x + static_cast<std::size_t>(j) * coef.m);
            if (u) coef.alpha(p, t, u + static_cast<std::size_t>(j) * coef.a);
        }
    }
    return E;
}

std::vector<double> drift_integral(const CoefficientSpec& coef, const PathEnsemble& X, int t_index,
                                   const SolverOptions& opts) {
    return single_node(coef, X, t_index, opts, true);
}

std::vector<double> stochastic_integral(const CoefficientSpec& coef, const PathEnsemble& X, int t_index,
                                        const SolverOptions& opts) {
    return single_node(coef, X, t_index, opts, false);
}

PathEnsemble picard_map(const PathEnsemble& xi, const CoefficientSpec& coef, const PathEnsemble& X,
                        const std::shared_ptr<const BrownianDriver>& driver, const SolverOptions& opts) {
    if (xi.particles() != X.particles() || xi.nodes() != X.nodes() || xi.dim() != X.dim())
        throw DomainError("xi and the iterate have different shapes");
    PathEnsemble out = xi;
    out.driver = driver;
    const int n = X.grid().steps, m = coef.m;
    VolterraOperator op(coef, X, driver.get(), opts, n);
    if (!op.active()) return out;
    if (op.has_diffusion() && !driver) throw DomainError("stochastic integral needs a Brownian driver");
    parallel_for(X.particles(), opts.threads, [&](std::size_t b, std::size_t e) {
        std::vector<double> dr(static_cast<std::size_t>(n + 1) * m), st(dr.size());
        for (std::size_t p = b; p < e; ++p) {
            op.particle(static_cast<int>(p), 0, dr.data(), st.data());
            double* x = out.path(static_cast<int>(p));
            for (std::size_t q = 0; q < dr.size(); ++q) x[q] += dr[q] + st[q];
        }
    });
    return out;
}

namespace {

// Terms of the exemplary family that do not depend on the state are the same in every
// iterate; they are added to xi once and dropped from the coefficients that are iterated.
struct SplitProblem {
    PathEnsemble base;
    CoefficientSpec live;
};

SplitProblem split_state_free(const PathEnsemble& xi, const CoefficientSpec& coef,
                              const std::shared_ptr<const BrownianDriver>& driver, const SolverOptions& opts) {
    const auto* e = std::get_if<ExemplaryCoefficients>(&coef.family);
    const bool drift_free = e && !e->f1 && !e->f2 && e->kappa;
    const bool diff_free = e && !e->g1 && !e->g2 && e->eta;
    if (!drift_free && !diff_free) return {xi, coef};
    CoefficientSpec frozen = coef, live = coef;
    auto& fe = std::get<ExemplaryCoefficients>(frozen.family);
    auto& le = std::get<ExemplaryCoefficients>(live.family);
    fe.f1 = fe.f2 = fe.g1 = fe.g2 = MapSpec{};
    if (!drift_free) fe.kappa = nullptr;
    if (!diff_free) fe.eta = nullptr;
    if (drift_free) le.kappa = nullptr;
    if (diff_free) le.eta = nullptr;
    return {picard_map(xi, frozen, xi, driver, opts), std::move(live)};
}

}  // namespace

std::vector<PathEnsemble> picard_iterate(const XiFn& xi, const CoefficientSpec& coef,
                                         const std::shared_ptr<const BrownianDriver>& driver, int n_iters,
                                         const SolverOptions& opts, const PathEnsemble* X0) {
    if (!driver) throw DomainError("picard_iterate needs a driver");
    if (n_iters < 0) throw DomainError("n_iters must be >= 0");
    PathEnsemble base = make_xi_ensemble(xi, coef, driver->grid(), driver->particles());
    base.driver = driver;
    std::vector<PathEnsemble> out;
    out.reserve(n_iters + 1);
    out.push_back(X0 ? *X0 : base);
    out.back().driver = driver;
    auto split = split_state_free(base, coef, driver, opts);
    for (int k = 1; k <= n_iters; ++k) {
        out.push_back(picard_map(split.base, split.live, out.back(), driver, opts));
        check_finite(out.back(), k);
    }
    return out;
}

SolveResult solve(const XiFn& xi, const CoefficientSpec& coef, const std::shared_ptr<const BrownianDriver>& driver,
                  double tol, int max_iters, const SolverOptions& opts, const PathEnsemble* X0) {
    if (!driver) throw DomainError("solve needs a driver");
    if (!(tol > 0.0) || max_iters < 1) throw DomainError("solve needs tol > 0 and max_iters >= 1");
    for (const auto& r : check_lipschitz(coef, driver->seed()))
        if (!r.ok) {
            std::ostringstream os;
            os << "declared Lipschitz constant of " << r.name << " is " << r.declared << " but sampling found "
               << r.observed;
            throw DomainError(os.str());
        }
    SolveResult res;
    res.xi = make_xi_ensemble(xi, coef, driver->grid(), driver->particles());
    res.xi.driver = driver;
    PathEnsemble cur = X0 ? *X0 : res.xi;
    cur.driver = driver;
    const double T = driver->grid().horizon;
    auto seminorm = [&](const PathEnsemble& a, const PathEnsemble& b) {
        return opts.integrated_seminorm ? seminorm_int_p(a, b, opts.p, T, opts.threads)
                                        : seminorm_infty_p(a, b, opts.p, T, opts.threads);
    };
    auto split = split_state_free(res.xi, coef, driver, opts);
    for (int k = 1; k <= max_iters; ++k) {
        PathEnsemble next = picard_map(split.base, split.live, cur, driver, opts);
        check_finite(next, k);
        double inc = seminorm(next, cur);
        res.increments.push_back(inc);
        cur = std::move(next);
        if (inc <= tol) {
            res.iterations = k;
            PathEnsemble again = picard_map(split.base, split.live, cur, driver, opts);
            res.residual = difference_moments(again, cur, opts.p, opts.threads);
            res.X = std::move(cur);
            return res;
        }
    }
    std::ostringstream os;
    os << "Picard iteration did not reach tol " << tol << " in " << max_iters << " iterations; increments:";
    const std::size_t from = res.increments.size() > 8 ? res.increments.size() - 8 : 0;
    if (from) os << " ...";
    for (std::size_t q = from; q < res.increments.size(); ++q) os << ' ' << res.increments[q];
    throw NonConvergenceError(os.str());
}

// ---------------------------------------------------------------- Lipschitz sampling

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct Sampler {
    std::mt19937_64 rng;
    std::normal_distribution<double> n01{0.0, 1.0};
    std::vector<double> vec(int k, double scale) {
        std::vector<double> v(k);
        for (auto& x : v) x = scale * n01(rng);
        return v;
    }
};

LipschitzReport sample_map(const std::string& name, const StateMap& f, double declared, int m, int a, int out_dim,
                           Sampler& S, int samples, bool must_vanish) {
    LipschitzReport r{name, declared, 0.0, true};
    std::vector<double> fx(out_dim), fy(out_dim), diff(out_dim);
    const double scales[] = {1e-3, 1.0, 10.0};
    for (int q = 0; q < samples; ++q) {
        double sc = scales[q % 3];
        auto x = S.vec(m, sc), y = S.vec(m, sc), u = S.vec(a, sc), v = S.vec(a, sc);
        f(x.data(), a ? u.data() : nullptr, fx.data());
        f(y.data(), a ? v.data() : nullptr, fy.data());
        for (int c = 0; c < out_dim; ++c) diff[c] = fx[c] - fy[c];
        double dx = 0.0;
        for (int c = 0; c < m; ++c) dx += (x[c] - y[c]) * (x[c] - y[c]);
        for (int c = 0; c < a; ++c) dx += (u[c] - v[c]) * (u[c] - v[c]);
        dx = std::sqrt(dx);
        if (dx > 0.0) r.observed = std::max(r.observed, norm2(diff) / dx);
    }
    r.ok = r.observed <= declared + 1e-6;
    if (must_vanish) {
        std::vector<double> z(m, 0.0), u(a, 0.0);
        f(z.data(), a ? u.data() : nullptr, fx.data());
        if (norm2(fx) > 1e-12) r.ok = false;
    }
    return r;
}

}  // namespace

std::vector<LipschitzReport> check_lipschitz(const CoefficientSpec& coef, std::uint64_t seed, int samples) {
    Sampler S{std::mt19937_64(seed ^ 0x9e3779b97f4a7c15ULL)};
    std::vector<LipschitzReport> out;
    const int m = coef.m, d = coef.d, a = coef.a;
    if (auto* e = std::get_if<ExemplaryCoefficients>(&coef.family)) {
        auto add = [&](const char* name, const MapSpec& f, int k) {
            if (f && f.lipschitz >= 0.0) out.push_back(sample_map(name, f.fn, f.lipschitz, m, a, k, S, samples, false));
        };
        add("f1", e->f1, m);
        add("f2", e->f2, m);
        add("g1", e->g1, m * d);
        add("g2", e->g2, m * d);
    } else if (auto* c = std::get_if<ControlledMVCoefficients>(&coef.family)) {
        // fixed reference law built from a few sample points
        TimeGrid g(1.0, 1);
        PathEnsemble ref(g, 8, m, a);
        for (auto& v : ref.states()) v = S.n01(S.rng);
        for (int p = 0; p < 8; ++p)
            for (int q = 0; q < 2 * a; ++q) ref.control(p)[q] = S.n01(S.rng);
        Law law;
        law.ens = &ref;
        law.node = 0;
        law.mean_x.assign(m, 0.0);
        law.mean_a.assign(a, 0.0);
        for (int p = 0; p < 8; ++p) {
            for (int q = 0; q < m; ++q) law.mean_x[q] += ref.x(p, 0, q) / 8.0;
            for (int q = 0; q < a; ++q) law.mean_a[q] += ref.control(p)[q] / 8.0;
        }
        auto add = [&](const char* name, const LawMap& f, double L, int k) {
            if (!f || L < 0.0) return;
            for (int q = 0; q < 4; ++q) {
                double s = 0.25 * q;
                StateMap g2 = [&, s](const double* x, const double* u, double* o) { f(s, x, u, law, o); };
                auto r = sample_map(name, g2, L, m, a, k, S, samples / 4 + 1, false);
                if (out.empty() || out.back().name != name)
                    out.push_back(r);
                else {
                    out.back().observed = std::max(out.back().observed, r.observed);
                    out.back().ok = out.back().ok && r.ok;
                }
            }
        };
        add("b", c->b, c->lipschitz_b, m);
        add("sigma", c->sigma, c->lipschitz_sigma, m * d);
    } else {
        auto& r = std::get<AffineRandomCoefficients>(coef.family);
        auto add = [&](const char* name, const MapSpec& f) {
            if (f) out.push_back(sample_map(name, f.fn, 1.0, m, 0, m, S, samples, true));
        };
        add("f1", r.f1);
        add("f2", r.f2);
        add("g1", r.g1);
        add("g2", r.g2);
    }
    return out;
}

}  // namespace svlab
