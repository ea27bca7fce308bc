#include <cmath>
#include <numeric>

#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "svlab/sve.hpp"

using namespace svlab;

namespace {

std::shared_ptr<const BrownianDriver> driver(int N, double T, int steps, int d = 1, std::uint64_t seed = 7) {
    return std::make_shared<BrownianDriver>(seed, N, TimeGrid(T, steps), d);
}

// X_t = xi + a int_0^t f(t-s) X_s ds (+ optional additive noise)
CoefficientSpec linear_drift(double a, ScalarFunction f = ScalarFunction::constant(1.0)) {
    auto c = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(c.family);
    e.f = std::move(f);
    e.f1 = {[a](const double* x, const double*, double* o) { o[0] = a * x[0]; }, std::abs(a)};
    return c;
}

struct Stats {
    double mean, var, skew, se_var, se_skew;
};

Stats stats(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : v) {
        double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    return {m, m2 * n / (n - 1), m3 / std::pow(m2, 1.5), std::sqrt((m4 - m2 * m2) / n), std::sqrt(6.0 / n)};
}

std::vector<double> column(const PathEnsemble& X, int node) {
    std::vector<double> v(X.particles());
    for (int p = 0; p < X.particles(); ++p) v[p] = X.x(p, node, 0);
    return v;
}

double mittag_leffler(double alpha, double z) {
    double s = 0.0;
    for (int k = 0; k < 200; ++k) s += std::pow(z, k) / std::tgamma(alpha * k + 1.0);
    return s;
}

}  // namespace

TEST_CASE("radonifying map norm is Frobenius") {
    RadonifyingMap A(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(A.hs_norm() == doctest::Approx(std::sqrt(91.0)));
    double w[3] = {1, 0, -1}, out[2];
    A.apply(w, out);
    CHECK(out[0] == -2.0);
    CHECK(out[1] == -2.0);
    CHECK_THROWS_AS(RadonifyingMap(2, 2, {1, 2, 3}), DomainError);
}

TEST_CASE("zero coefficients give zero integrals") {
    auto W = driver(10, 1.0, 8);
    auto coef = CoefficientSpec::zero();
    auto X = make_xi_ensemble(constant_xi({1.5}), coef, W->grid(), 10);
    X.driver = W;
    for (int i : {0, 3, 8}) {
        for (double v : drift_integral(coef, X, i)) CHECK(v == 0.0);
        for (double v : stochastic_integral(coef, X, i)) CHECK(v == 0.0);
    }
    auto it = picard_iterate(constant_xi({1.5}), coef, W, 4);
    REQUIRE(it.size() == 5);
    for (const auto& e : it) CHECK(e.states() == X.states());
    auto r = solve(constant_xi({1.5}), coef, W, 1e-12, 10);
    CHECK(r.iterations == 1);
    CHECK(r.X.states() == X.states());
    for (double v : r.residual) CHECK(v == 0.0);
}

TEST_CASE("drift of a constant path telescopes") {
    TimeGrid g(2.0, 16);
    auto coef = linear_drift(1.0);
    PathEnsemble X(g, 3, 1);
    for (auto& v : X.states()) v = 0.75;
    for (auto rule : {DriftRule::KernelTrapezoid, DriftRule::LeftPoint}) {
        SolverOptions o;
        o.drift_rule = rule;
        for (int i = 0; i <= 16; ++i)
            for (double v : drift_integral(coef, X, i, o)) CHECK(v == doctest::Approx(0.75 * g.node(i)).epsilon(1e-13));
    }
}

TEST_CASE("mean-field drift integrates the ensemble mean path") {
    TimeGrid g(1.0, 10);
    const double a = 1.7;
    CoefficientSpec coef;
    ControlledMVCoefficients c;
    c.b = [a](double, const double*, const double*, const Law& law, double* o) { o[0] = a * law.mean_x[0]; };
    coef.family = c;
    PathEnsemble X(g, 4, 1);
    for (int p = 0; p < 4; ++p)
        for (int j = 0; j <= 10; ++j) X.x(p, j, 0) = std::sin(p + 0.3 * j) + p;
    std::vector<double> mean(11);
    for (int j = 0; j <= 10; ++j) {
        for (int p = 0; p < 4; ++p) mean[j] += X.x(p, j, 0) / 4.0;
    }
    const double h = g.h();
    for (int i = 0; i <= 10; ++i) {
        double left = 0.0, trap = 0.0;
        for (int j = 0; j < i; ++j) {
            left += h * mean[j];
            trap += 0.5 * h * (mean[j] + mean[j + 1]);
        }
        SolverOptions o;
        for (double v : drift_integral(coef, X, i, o)) CHECK(v == doctest::Approx(a * trap).epsilon(1e-12));
        o.drift_rule = DriftRule::LeftPoint;
        for (double v : drift_integral(coef, X, i, o)) CHECK(v == doctest::Approx(a * left).epsilon(1e-12));
    }
}

TEST_CASE("controls enter the controlled family") {
    auto W = driver(5, 1.0, 8);
    CoefficientSpec coef;
    coef.a = 1;
    coef.alpha = [](int p, double, double* o) { o[0] = p; };
    ControlledMVCoefficients c;
    c.b = [](double, const double*, const double* u, const Law&, double* o) { o[0] = u[0]; };
    coef.family = c;
    auto it = picard_iterate(constant_xi({0.0}), coef, W, 1);
    for (int p = 0; p < 5; ++p) {
        CHECK(it[1].x(p, 8, 0) == doctest::Approx(p * 1.0));
        CHECK(it[1].control(p)[3] == p);
    }
    coef.alpha = nullptr;
    CHECK_THROWS_AS(picard_iterate(constant_xi({0.0}), coef, W, 1), DomainError);
}

TEST_CASE("constant diffusion reproduces the Brownian path") {
    const int N = 100000, n = 32;
    auto W = driver(N, 1.0, n);
    auto coef = CoefficientSpec::constant_diffusion(RadonifyingMap(1, 1, {1.0}));
    auto X = make_xi_ensemble(constant_xi({0.0}), coef, W->grid(), N);
    X.driver = W;
    auto Wt = stochastic_integral(coef, X, n, {1});
    for (int p = 0; p < 50; ++p) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += W->increment(p, j, 0);
        CHECK(Wt[p] == doctest::Approx(s).epsilon(1e-12));
    }
    auto st = stats(Wt);
    CHECK(std::abs(st.var - 1.0) <= 3.0 * st.se_var);
    auto half = stats(stochastic_integral(coef, X, n / 2));
    CHECK(std::abs(half.var - 0.5) <= 3.0 * half.se_var);
}

TEST_CASE("g(u) = u^0 behaves like Brownian motion") {
    const int N = 20000, n = 16;
    auto W = driver(N, 1.0, n);
    auto coef = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(coef.family);
    e.g = ScalarFunction::power(1.0, 0.0);
    e.eta = [](double, double* o) { o[0] = 1.0; };
    auto X = make_xi_ensemble(constant_xi({0.0}), coef, W->grid(), N);
    X.driver = W;
    auto st = stats(stochastic_integral(coef, X, n));
    CHECK(std::abs(st.var - 1.0) <= 3.0 * st.se_var);
}

TEST_CASE("Picard iterates are Taylor partial sums") {
    auto W = driver(1, 1.0, 256);
    auto it = picard_iterate(constant_xi({1.0}), linear_drift(1.0), W, 6);
    CHECK(it[3].x(0, 256, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-3));
    for (int n = 0; n <= 6; ++n)
        for (int j = 0; j <= 256; j += 32) {
            double t = j / 256.0, want = 0.0;
            for (int k = 0; k <= n; ++k) want += std::pow(t, k) / boost::math::factorial<double>(k);
            CHECK(std::abs(it[n].x(0, j, 0) - want) < 1e-3);
        }
}

TEST_CASE("solve converges to the exponential") {
    auto W = driver(1, 1.0, 256);
    auto r = solve(constant_xi({1.0}), linear_drift(1.0), W, 1e-6, 50);
    CHECK(r.iterations > 5);
    CHECK(r.increments.back() <= 1e-6);
    for (int j = 0; j <= 256; ++j) CHECK(std::abs(r.X.x(0, j, 0) - std::exp(j / 256.0)) < 2e-3);
    for (double v : r.residual) CHECK(v < 1e-5);
    CHECK_THROWS_AS(solve(constant_xi({1.0}), linear_drift(1.0), W, 1e-12, 3), NonConvergenceError);
}

TEST_CASE("mean-field linear drift follows the ODE for the mean") {
    const int N = 2000;
    auto W = driver(N, 1.0, 64);
    CoefficientSpec coef;
    ControlledMVCoefficients c;
    c.b = [](double, const double*, const double*, const Law& law, double* o) { o[0] = law.mean_x[0]; };
    c.sigma = [](double, const double*, const double*, const Law&, double* o) { o[0] = 1.0; };
    coef.family = c;
    auto r = solve(constant_xi({1.0}), coef, W, 1e-8, 60);
    for (int j = 0; j <= 64; j += 8) {
        double t = j / 64.0;
        double m = stats(column(r.X, j)).mean;
        // spread of the empirical mean of the coupled linear system
        double se = std::sqrt((std::exp(2.0 * t) - 1.0) / (2.0 * N));
        CHECK(std::abs(m - std::exp(t)) <= 3.0 * se + 1e-3);
    }
}

TEST_CASE("state-independent rough diffusion is Gaussian with variance t^{2 gamma}/(2 gamma)") {
    const int N = 20000, n = 64;
    const double gamma = 0.3;
    auto W = driver(N, 1.0, n);
    auto coef = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(coef.family);
    e.g = ScalarFunction::power(1.0, gamma - 0.5);
    e.eta = [](double, double* o) { o[0] = 1.0; };
    SolverOptions o;
    o.diffusion_rule = DiffusionRule::CellAveraged;
    auto r = solve(constant_xi({0.0}), coef, W, 1e-10, 5, o);
    CHECK(r.iterations == 2);
    auto st = stats(column(r.X, n));
    CHECK(std::abs(st.var - 1.0 / (2.0 * gamma)) <= 3.0 * st.se_var);
    CHECK(std::abs(st.skew) <= 3.0 * st.se_skew);
    auto mid = stats(column(r.X, n / 2));
    CHECK(std::abs(mid.var - std::pow(0.5, 2 * gamma) / (2 * gamma)) <= 3.0 * mid.se_var);
}

TEST_CASE("ensembles are identical across thread counts") {
    const int N = 301;
    auto W = driver(N, 1.0, 40, 2, 99);
    CoefficientSpec coef;
    coef.m = 2;
    coef.d = 2;
    ExemplaryCoefficients e;
    e.f = ScalarFunction::power(1.0, -0.2);
    e.g = ScalarFunction::power(1.0, -0.2);
    e.kappa = [](double s, double* o) { o[0] = s; o[1] = -1.0; };
    e.f1 = {[](const double* x, const double*, double* o) { o[0] = std::sin(x[1]); o[1] = 0.5 * x[0]; }, 1.0};
    e.f2 = {[](const double* x, const double*, double* o) { o[0] = x[0]; o[1] = x[1]; }, 1.0};
    e.g1 = {[](const double* x, const double*, double* o) { o[0] = 0.3 * std::cos(x[0]); o[1] = 0; o[2] = 0; o[3] = 0.2 * x[1]; }, 0.3};
    e.g2 = {[](const double* x, const double*, double* o) { o[0] = 0; o[1] = 0.1 * x[0]; o[2] = 0.1 * x[1]; o[3] = 0; }, 0.1};
    coef.family = e;
    SolverOptions o1, o4;
    o4.threads = 4;
    auto a = picard_iterate(constant_xi({1.0, -1.0}), coef, W, 4, o1);
    auto b = picard_iterate(constant_xi({1.0, -1.0}), coef, W, 4, o4);
    for (int k = 0; k <= 4; ++k) CHECK(a[k].states() == b[k].states());
    auto ra = solve(constant_xi({1.0, -1.0}), coef, W, 1e-9, 60, o1);
    auto rb = solve(constant_xi({1.0, -1.0}), coef, W, 1e-9, 60, o4);
    CHECK(ra.X.states() == rb.X.states());
    CHECK(ra.iterations == rb.iterations);
    // common random numbers: increments eventually decrease
    const auto& inc = ra.increments;
    REQUIRE(inc.size() > 4);
    for (std::size_t k = 3; k < inc.size(); ++k) CHECK(inc[k] < inc[k - 1]);
}

TEST_CASE("zero-noise scheme converges at the kernel rate") {
    // X_t = 1 + int_0^t (t-s)^{-0.3} X_s ds  =>  X_t = E_{0.7}(Gamma(0.7) t^{0.7})
    const double alpha = 0.7;
    const double exact = mittag_leffler(alpha, std::tgamma(alpha));
    std::vector<double> err;
    for (int n : {32, 64, 128, 256}) {
        auto W = driver(1, 1.0, n);
        auto r = solve(constant_xi({1.0}), linear_drift(1.0, ScalarFunction::power(1.0, alpha - 1.0)), W, 1e-12, 200);
        err.push_back(std::abs(r.X.x(0, n, 0) - exact));
    }
    CHECK(err.back() < 1e-2);
    for (std::size_t k = 1; k < err.size(); ++k) CHECK(std::log2(err[k - 1] / err[k]) >= 0.6);
}

TEST_CASE("integrability errors name the cell") {
    auto W = driver(2, 1.0, 8);
    auto bad_f = linear_drift(1.0, ScalarFunction::power(1.0, -1.2));
    try {
        picard_iterate(constant_xi({1.0}), bad_f, W, 1);
        FAIL("expected an integrability error");
    } catch (const IntegrabilityError& e) {
        CHECK(std::string(e.what()).find("[0, 0.125]") != std::string::npos);
    }
    auto bad_g = CoefficientSpec::zero();
    auto& e = std::get<ExemplaryCoefficients>(bad_g.family);
    e.g = ScalarFunction::power(1.0, -0.6);
    e.eta = [](double, double* o) { o[0] = 1.0; };
    CHECK_THROWS_AS(picard_iterate(constant_xi({0.0}), bad_g, W, 1), IntegrabilityError);
}

TEST_CASE("non-finite states raise a divergence error") {
    auto W = driver(2, 1.0, 4);
    auto coef = CoefficientSpec::zero();
    std::get<ExemplaryCoefficients>(coef.family).f = ScalarFunction::constant(1.0);
    std::get<ExemplaryCoefficients>(coef.family).f1 = {[](const double* x, const double*, double* o) { o[0] = 1e300 * x[0]; }, -1.0};
    try {
        picard_iterate(constant_xi({1e300}), coef, W, 3);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        std::string s = e.what();
        CHECK(s.find("iterate 1") != std::string::npos);
        CHECK(s.find("node 1") != std::string::npos);
    }
}

TEST_CASE("declared Lipschitz constants are sampled") {
    auto ok = linear_drift(2.0);
    auto rep = check_lipschitz(ok, 1);
    REQUIRE(rep.size() == 1);
    CHECK(rep[0].ok);
    CHECK(rep[0].observed == doctest::Approx(2.0));
    auto lie = linear_drift(2.0);
    std::get<ExemplaryCoefficients>(lie.family).f1.lipschitz = 1.5;
    CHECK_FALSE(check_lipschitz(lie, 1)[0].ok);
    CHECK_THROWS_AS(solve(constant_xi({1.0}), lie, driver(1, 1.0, 4), 1e-6, 10), DomainError);

    CoefficientSpec aff;
    AffineRandomCoefficients r;
    r.f1 = {[](const double* x, const double*, double* o) { o[0] = std::tanh(x[0]); }, 1.0};
    r.g1 = {[](const double* x, const double*, double* o) { o[0] = x[0] + 1.0; }, 1.0};
    aff.family = r;
    auto ar = check_lipschitz(aff, 3);
    REQUIRE(ar.size() == 2);
    CHECK(ar[0].ok);
    CHECK_FALSE(ar[1].ok);  // does not vanish at 0
}

TEST_CASE("affine random coefficients") {
    const int N = 4000, n = 32;
    auto W = driver(N, 1.0, n);
    CoefficientSpec coef;
    AffineRandomCoefficients r;
    auto id = [](const double* x, const double*, double* o) { o[0] = x[0]; };
    r.beta1 = [](double, double, int, double* o) { o[0] = 1.0; };
    r.f1 = {id, 1.0};
    r.eta = [](double, double, int p, double* o) { o[0] = p % 2 ? 1.0 : 2.0; };
    coef.family = r;
    // drift part is the left-point linear ODE; compare with the exemplary family
    SolverOptions left;
    left.drift_rule = DriftRule::LeftPoint;
    auto ref = linear_drift(1.0);
    auto& e = std::get<ExemplaryCoefficients>(ref.family);
    e.g = ScalarFunction::constant(1.0);
    e.eta = nullptr;
    e.g1 = {};
    auto a = picard_iterate(constant_xi({1.0}), coef, W, 3, left);
    std::get<AffineRandomCoefficients>(coef.family).eta = nullptr;
    auto b = picard_iterate(constant_xi({1.0}), coef, W, 3, left);
    auto c = picard_iterate(constant_xi({1.0}), ref, W, 3, left);
    for (int j = 0; j <= n; ++j) CHECK(b[3].x(0, j, 0) == doctest::Approx(c[3].x(0, j, 0)).epsilon(1e-12));
    // the noise is eta_p W_t; particle-dependent amplitude
    std::vector<double> odd, even;
    for (int p = 0; p < N; ++p) (p % 2 ? odd : even).push_back(a[1].x(p, n, 0) - b[1].x(p, n, 0));
    auto so = stats(odd), se = stats(even);
    CHECK(std::abs(so.var - 1.0) <= 3.0 * so.se_var);
    CHECK(std::abs(se.var - 4.0) <= 3.0 * se.se_var);
    // mean-field term beta2 f2(E X)
    AffineRandomCoefficients mf;
    mf.beta2 = [](double, double, int, double* o) { o[0] = 1.0; };
    mf.f2 = {id, 1.0};
    coef.family = mf;
    auto m = picard_iterate(constant_xi({1.0}), coef, W, 3, left);
    CHECK(m[3].x(5, n, 0) == doctest::Approx(c[3].x(0, n, 0)).epsilon(1e-12));
}

TEST_CASE("state-free terms computed once agree with the plain Picard map") {
    auto W = driver(40, 1.0, 32);
    for (int variant = 0; variant < 3; ++variant) {
        auto coef = CoefficientSpec::zero();
        auto& e = std::get<ExemplaryCoefficients>(coef.family);
        e.f = ScalarFunction::power(1.0, -0.2);
        e.g = ScalarFunction::power(1.0, -0.2);
        e.kappa = [](double s, double* o) { o[0] = 1.0 + s; };
        e.eta = [](double, double* o) { o[0] = 0.7; };
        if (variant != 1) e.f1 = {[](const double* x, const double*, double* o) { o[0] = 0.5 * x[0]; }, 0.5};
        if (variant != 0) e.g1 = {[](const double* x, const double*, double* o) { o[0] = 0.3 * x[0]; }, 0.3};
        auto it = picard_iterate(constant_xi({0.2}), coef, W, 4);
        PathEnsemble xi = make_xi_ensemble(constant_xi({0.2}), coef, W->grid(), 40);
        PathEnsemble X = xi;
        for (int k = 1; k <= 4; ++k) {
            X = picard_map(xi, coef, X, W);
            for (std::size_t q = 0; q < X.states().size(); ++q)
                CHECK(std::abs(X.states()[q] - it[k].states()[q]) <= 1e-12 * (1.0 + std::abs(X.states()[q])));
        }
    }
}
