#include <cmath>
#include <sstream>

#include <boost/math/special_functions/factorials.hpp>

#include "doctest.h"
#include "svlab/analysis.hpp"
#include "svlab/resolvent.hpp"
#include "svlab/sve.hpp"

using namespace svlab;

namespace {

// sum_{n >= from} (t^n / n!)^{1/2}
double root_series(double t, int from = 1, int shift = 0) {
    double s = 0.0;
    for (int n = from; n < 150; ++n) s += std::sqrt(std::pow(t, n + shift) / boost::math::factorial<double>(n + shift));
    return s;
}

TriangularTable constant_table(const TimeGrid& g, double c) { return tabulate(KernelSpec::constant(c), g); }

PathEnsemble gaussian_ensemble(int N, std::uint64_t seed) {
    TimeGrid g(1.0, 1);
    BrownianDriver w(seed, N, g, 1);
    PathEnsemble X(g, N, 1);
    for (int p = 0; p < N; ++p) X.x(p, 1, 0) = w.increment(p, 0, 0);
    return X;
}

}  // namespace

TEST_CASE("moment function") {
    PathEnsemble c(TimeGrid(1.0, 4), 10, 1);
    for (auto& v : c.states()) v = -1.25;
    auto mc = moment_function(c, 3.0);
    for (std::size_t i = 0; i < mc.values.size(); ++i) {
        CHECK(mc.values[i] == doctest::Approx(1.25).epsilon(1e-14));
        CHECK(mc.se[i] == 0.0);
    }
    auto X = gaussian_ensemble(100000, 5);
    auto m2 = moment_function(X, 2.0);
    CHECK(std::abs(m2.values[1] - 1.0) <= 3.0 * m2.se[1]);
    CHECK(m2.values[0] == 0.0);
    auto m4 = moment_function(X, 4.0, 3);
    CHECK(std::abs(m4.values[1] - std::pow(3.0, 0.25)) <= 3.0 * m4.se[1]);
    CHECK(m4.values == moment_function(X, 4.0, 1).values);
    CHECK_THROWS_AS(moment_function(PathEnsemble(TimeGrid(1.0, 2), 0, 1), 2.0), DomainError);
    std::ostringstream os;
    m2.write_csv(os, {"abc", 5, 0.0});
    CHECK(os.str().find("# config_hash=abc\n# seed=5\n") == 0);
    CHECK(os.str().find("t,value,se\n") != std::string::npos);
}

TEST_CASE("first growth, comparison and error bounds") {
    TimeGrid g(1.0, 512);
    const std::size_t n = 513;
    std::vector<double> one(n, 1.0), zero(n, 0.0), k0(n);
    for (std::size_t i = 0; i < n; ++i) k0[i] = std::sqrt(g.node(static_cast<int>(i)));

    auto b = growth_bound_1(k0, constant_table(g, 0.0), one);
    CHECK(b.values == k0);
    CHECK(growth_bound_1(zero, constant_table(g, 1.0), zero).values == zero);
    auto c1 = growth_bound_1(one, constant_table(g, 1.0), zero);
    CHECK(c1.values[512] == doctest::Approx(1.0 + root_series(1.0)).epsilon(1e-3));
    CHECK(std::abs(c1.values[512] - 3.4695) < 1e-3);
    CHECK(c1.values[256] == doctest::Approx(1.0 + root_series(0.5)).epsilon(1e-3));

    CHECK(comparison_bound_1(constant_table(g, 1.0), zero).values == zero);
    CHECK(comparison_bound_1(constant_table(g, 0.0), k0).values == k0);
    CHECK(std::abs(comparison_bound_1(constant_table(g, 1.0), one).values[512] - 3.4695) < 1e-3);

    for (double v : picard_error_bound_1(constant_table(g, 1.0), zero, 1).values) CHECK(v == 0.0);
    auto e1 = picard_error_bound_1(constant_table(g, 1.0), one, 1, 1e-10);
    CHECK(std::abs(e1.values[512] - 2.4695) < 1e-3);
    auto e3 = picard_error_bound_1(constant_table(g, 1.0), one, 3, 1e-10);
    CHECK(e3.values[512] == doctest::Approx(root_series(1.0, 3)).epsilon(1e-3));
    // tail coefficients decrease and end below tol
    for (std::size_t i = 1; i < e1.tail.size(); ++i) CHECK(e1.tail[i] < e1.tail[i - 1]);
    CHECK(e1.tail.back() < 1e-10);
    auto far = picard_error_bound_1(constant_table(g, 1.0), one, 40, 1e-10);
    CHECK(far.values[512] < 1e-10);
}

TEST_CASE("bounds are monotone in kernel and data") {
    TimeGrid g(1.0, 64);
    std::vector<double> k0(65), k0b(65), xi(65, 0.5), xib(65, 0.7);
    for (int i = 0; i <= 64; ++i) {
        k0[i] = 0.3 * g.node(i);
        k0b[i] = k0[i] + 0.1;
    }
    auto small = transformed_kernel_l(KernelSpec::constant(0.5), KernelSpec::convolution(ScalarFunction::power(0.1, -0.25)), 2.0, g);
    auto big = transformed_kernel_l(KernelSpec::constant(0.7), KernelSpec::convolution(ScalarFunction::power(0.15, -0.25)), 2.0, g);
    auto a = growth_bound_1(k0, small, xi).values;
    auto b = growth_bound_1(k0, big, xi).values;
    auto c = growth_bound_1(k0b, small, xib).values;
    for (int i = 0; i <= 64; ++i) {
        CHECK(b[i] >= a[i]);
        CHECK(c[i] >= a[i]);
    }
    auto d = picard_error_bound_1(small, xi, 2).values, e = picard_error_bound_1(big, xib, 2).values;
    for (int i = 0; i <= 64; ++i) CHECK(e[i] >= d[i]);
    auto f = growth_bound_2(k0, small, xi, 3.0).values, h = growth_bound_2(k0b, big, xib, 3.0).values;
    for (int i = 0; i <= 64; ++i) CHECK(h[i] >= f[i]);
}

TEST_CASE("integrated growth and error bounds") {
    TimeGrid g(1.0, 256);
    std::vector<double> one(257, 1.0), zero(257, 0.0), lin(257);
    for (int i = 0; i <= 256; ++i) lin[i] = g.node(i);
    for (double v : growth_bound_2(zero, constant_table(g, 1.0), zero, 2.0).values) CHECK(v == 0.0);
    // l = 0: (int_0^t k0^p)^{1/p}, here k0(t) = t, p = 3
    auto z = growth_bound_2(lin, constant_table(g, 0.0), one, 3.0);
    CHECK(z.values[256] == doctest::Approx(std::cbrt(0.25)).epsilon(1e-4));
    // p = 2, constant data: l_{n,2}(t,s) = (t-s)^n / n!, so the series is sum_n (t^{n+1}/(n+1)!)^{1/2}
    auto c = growth_bound_2(one, constant_table(g, 1.0), zero, 2.0);
    CHECK(c.values[256] == doctest::Approx(1.0 + root_series(1.0, 1, 1)).epsilon(1e-3));
    CHECK(c.values[128] == doctest::Approx(std::sqrt(0.5) + root_series(0.5, 1, 1)).epsilon(1e-3));
    auto e = picard_error_bound_2(constant_table(g, 1.0), one, 1, 2.0);
    CHECK(e.values[256] == doctest::Approx(root_series(1.0, 1, 1)).epsilon(1e-3));
    for (double v : picard_error_bound_2(constant_table(g, 1.0), zero, 1, 2.0).values) CHECK(v == 0.0);
    for (std::size_t i = 1; i < e.tail.size(); ++i) CHECK(e.tail[i] <= e.tail[i - 1]);
}

TEST_CASE("increment bound") {
    IncrementData D;
    CHECK(increment_bound(D, 0.0, 0.4, 0.4) == 0.0);
    CHECK(increment_bound(D, 0.3, 0.2, 0.9) == 0.3);
    D.k1 = KernelSpec::constant(1.0);
    CHECK(increment_bound(D, 0.0, 0.25, 0.75) == doctest::Approx(0.5).epsilon(1e-12));
    D.k2 = KernelSpec::constant(1.0);
    D.w_p = 2.0;
    CHECK(increment_bound(D, 0.0, 0.25, 0.75) == doctest::Approx(0.5 + 2.0 * std::sqrt(0.5)).epsilon(1e-12));
    // l1 = a, M = m: l = 2 a sqrt(t), term = 2 a sqrt(t) m sqrt(t - s)
    IncrementData L;
    L.l1 = KernelSpec::constant(0.5);
    L.moments = [](double) { return 3.0; };
    CHECK(increment_bound(L, 0.0, 0.2, 0.8) == doctest::Approx(2 * 0.5 * std::sqrt(0.8) * 3.0 * std::sqrt(0.6)).epsilon(1e-10));
    // f1 = 1 on [0,s]: adds s
    L.f1 = [](double, double, double) { return 1.0; };
    CHECK(increment_bound(L, 0.0, 0.2, 0.8) ==
          doctest::Approx(0.2 + 2 * 0.5 * std::sqrt(0.8) * 3.0 * std::sqrt(0.6)).epsilon(1e-10));
    // singular diffusion kernel (t-u)^{-1/4}: w_p (int_s^t (t-u)^{-1/2})^{1/2} = w_p (2 sqrt(t-s))^{1/2}
    IncrementData S;
    S.k2 = KernelSpec::convolution(ScalarFunction::power(1.0, -0.25));
    CHECK(increment_bound(S, 0.0, 0.5, 1.0) == doctest::Approx(2.0 * std::sqrt(2.0 * std::sqrt(0.5))).epsilon(1e-6));
}

TEST_CASE("growth check against Monte Carlo") {
    TimeGrid g(1.0, 8);
    PathEnsemble zero(g, 50, 1);
    auto r = check_growth_vs_mc(zero, zero, std::vector<double>(9, 0.0), 1.05);
    CHECK(r.all_pass());
    auto W = std::make_shared<BrownianDriver>(3, 500, g, 1);
    auto noisy = picard_iterate(constant_xi({0.0}), CoefficientSpec::constant_diffusion(RadonifyingMap(1, 1, {1.0})), W, 1);
    auto f = check_growth_vs_mc(noisy[1], noisy[0], std::vector<double>(9, 0.0), 1.05);
    CHECK_FALSE(f.all_pass());
    CHECK(f.pass[0]);  // X_0 = xi_0
    std::ostringstream os;
    f.write_csv(os, {"h", 3, 2.0});
    CHECK(os.str().find("# w_p=2\n") != std::string::npos);
}

TEST_CASE("linear drift with noise stays below the first growth bound") {
    // X = 1 + int X ds + W: k1 = 0, l1 = 1, k2 = 1, l2 = 0
    const int N = 10000, n = 256;
    TimeGrid g(1.0, n);
    auto W = std::make_shared<BrownianDriver>(21, N, g, 1);
    auto coef = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(coef.family);
    e.f = ScalarFunction::constant(1.0);
    e.f1 = {[](const double* x, const double*, double* o) { o[0] = x[0]; }, 1.0};
    e.g = ScalarFunction::constant(1.0);
    e.eta = [](double, double* o) { o[0] = 1.0; };
    auto sol = solve(constant_xi({1.0}), coef, W, 1e-4, 40);
    const double wp = 2.0;
    auto k0 = k0_function(KernelSpec::constant(0.0), KernelSpec::constant(1.0), wp, g);
    auto l = transformed_kernel_l(KernelSpec::constant(1.0), KernelSpec::constant(0.0), wp, g);
    auto bound = growth_bound_1(k0, l, std::vector<double>(n + 1, 1.0));
    auto rep = check_growth_vs_mc(sol.X, sol.xi, bound.values, 1.05);
    CHECK(rep.all_pass());
}

TEST_CASE("Picard error is dominated by the first error bound") {
    const int n = 256;
    TimeGrid g(1.0, n);
    auto W = std::make_shared<BrownianDriver>(1, 1, g, 1);
    auto coef = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(coef.family);
    e.f = ScalarFunction::constant(1.0);
    e.f1 = {[](const double* x, const double*, double* o) { o[0] = x[0]; }, 1.0};
    auto it = picard_iterate(constant_xi({1.0}), coef, W, 6);
    // reference is the fixed point of the discrete map, so grid error does not enter
    auto fixed = solve(constant_xi({1.0}), coef, W, 1e-15, 60).X;
    auto lambda = transformed_kernel_l(KernelSpec::constant(1.0), KernelSpec::constant(0.0), default_wp(2.0), g);
    std::vector<double> Delta(n + 1);
    for (int j = 0; j <= n; ++j) Delta[j] = std::abs(it[1].x(0, j, 0) - it[0].x(0, j, 0));
    for (int k = 1; k <= 6; ++k) {
        auto b = picard_error_bound_1(lambda, Delta, k);
        for (int j = 0; j <= n; ++j) CHECK(std::abs(it[k].x(0, j, 0) - fixed.x(0, j, 0)) <= b.values[j] * 1.01 + 1e-12);
    }
}

TEST_CASE("resolvent inequality check") {
    const int n = 512;
    TimeGrid g(1.0, n);
    std::vector<double> zero(n + 1, 0.0);
    auto z = resolvent_inequality_check(zero, constant_table(g, 1.0), 1.0, 1.0, {zero, zero, zero});
    CHECK(z.all_pass);
    CHECK(z.max_gap == 0.0);

    // beta = p = 1: run the hypothesis as an equality
    auto l = constant_table(g, 0.8);
    std::vector<double> v(n + 1, 0.6);
    std::vector<std::vector<double>> M{std::vector<double>(n + 1, 0.2)};
    for (int k = 1; k <= 8; ++k) {
        auto Lm = apply_kernel_operator(l, M.back());
        for (int i = 0; i <= n; ++i) Lm[i] += v[i];
        M.push_back(Lm);
    }
    auto eq = resolvent_inequality_check(v, l, 1.0, 1.0, M);
    CHECK(eq.all_pass);
    CHECK(eq.max_gap <= 1e-8);

    // beta = p = 2, v = l = 1: strict inequality
    auto l1 = constant_table(g, 1.0);
    std::vector<double> v1(n + 1, 1.0);
    std::vector<std::vector<double>> M2{std::vector<double>(n + 1, 1.0)};
    for (int k = 1; k <= 6; ++k) {
        std::vector<double> sq(n + 1);
        for (int i = 0; i <= n; ++i) sq[i] = M2.back()[i] * M2.back()[i];
        auto Lm = apply_kernel_operator(l1, sq);
        for (int i = 0; i <= n; ++i) Lm[i] = v1[i] + std::sqrt(Lm[i]);
        M2.push_back(Lm);
    }
    auto st = resolvent_inequality_check(v1, l1, 2.0, 2.0, M2);
    CHECK(st.all_pass);
    for (int k = 2; k <= 6; ++k) CHECK(st.per_n[k - 1].lhs[n] < st.per_n[k - 1].rhs[n] - 1e-3);

    auto bad = M2;
    bad[3][100] += 1.0;
    CHECK_THROWS_AS(resolvent_inequality_check(v1, l1, 2.0, 2.0, bad), DomainError);
    CHECK_THROWS_AS(resolvent_inequality_check(v1, l1, 3.0, 2.0, M2), DomainError);
}

TEST_CASE("Hoelder exponent of the moment increments") {
    TimeGrid g(1.0, 128);
    PathEnsemble lin(g, 3, 1);
    for (int p = 0; p < 3; ++p)
        for (int j = 0; j <= 128; ++j) lin.x(p, j, 0) = g.node(j);
    CHECK(holder_exponent(lin, 2.0, 1, 64) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(holder_exponent(lin, 3.0, 2, 32) == doctest::Approx(1.0).epsilon(1e-12));

    auto W = std::make_shared<BrownianDriver>(8, 2000, g, 1);
    auto bm = picard_iterate(constant_xi({0.0}), CoefficientSpec::constant_diffusion(RadonifyingMap(1, 1, {1.0})), W, 1);
    CHECK(std::abs(holder_exponent(bm[1], 2.0, 1, 32) - 0.5) <= 0.05);

    // f(u) = u^{-0.2}, g(u) = u^{-0.2}: exponent beta ^ gamma = 0.3
    auto coef = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(coef.family);
    e.f = ScalarFunction::power(1.0, -0.2);
    e.f1 = {[](const double* x, const double*, double* o) { o[0] = 0.5 * x[0]; }, 0.5};
    e.g = ScalarFunction::power(1.0, -0.2);
    e.eta = [](double, double* o) { o[0] = 1.0; };
    SolverOptions o;
    o.diffusion_rule = DiffusionRule::CellAveraged;
    auto sol = solve(constant_xi({1.0}), coef, W, 1e-6, 60, o);
    CHECK(std::abs(holder_exponent(sol.X, 2.0, 1, 32) - 0.3) <= 0.1);
    CHECK_THROWS_AS(holder_exponent(lin, 2.0, 0, 4), DomainError);
}
