#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include "doctest.h"
#include "svlab/resolvent.hpp"

using namespace svlab;

namespace {

double series_oracle(double c, double t) {
    // sum_n c^n (t^n / n!)^{1/2}
    double s = 0.0;
    for (int n = 1; n < 120; ++n) s += std::pow(c, n) * std::sqrt(std::pow(t, n) / boost::math::factorial<double>(n));
    return s;
}

}  // namespace

TEST_CASE("iterated kernels of the constant kernel") {
    TimeGrid grid(1.0, 128);
    auto st = iterated_kernels(tabulate(KernelSpec::constant(1.0), grid), 6);
    CHECK(st[3].at(128, 0) == doctest::Approx(0.5).epsilon(1e-12));
    for (int n = 1; n <= 6; ++n)
        for (int i = 0; i <= 128; i += 16)
            for (int j = 0; j < i; j += 8) {
                double d = grid.node(i) - grid.node(j);
                double want = std::pow(d, n - 1) / boost::math::factorial<double>(n - 1);
                CHECK(st[n].at(i, j) == doctest::Approx(want).epsilon(1e-4));
            }
    auto base = tabulate(KernelSpec::constant(2.5), grid);
    auto one = iterated_kernels(base, 1);
    CHECK(one[1].raw() == base.raw());
    auto z = iterated_kernels(tabulate(KernelSpec::constant(0.0), grid), 5);
    for (int n = 1; n <= 5; ++n) CHECK(max_abs(z[n], true) == 0.0);
}

TEST_CASE("iterated kernels reject negative entries") {
    TimeGrid grid(1.0, 4);
    TriangularTable t(grid);
    t.at(2, 1) = -1.0;
    CHECK_THROWS_AS(iterated_kernels(t, 3), DomainError);
    CHECK_THROWS_AS(IteratedKernelStack(tabulate(KernelSpec::constant(1.0), grid), 0), DomainError);
}

TEST_CASE("second iterate of u^{-1/2} is the Beta constant") {
    // int_s^t (t-u)^{-1/2} (u-s)^{-1/2} du = pi
    TimeGrid grid(1.0, 256);
    auto st = iterated_kernels(tabulate(KernelSpec::convolution(ScalarFunction::power(1.0, -0.5)), grid), 2);
    // interior cells use the trapezoid rule, so the error is O(h^{1/2})
    CHECK(st[2].at(256, 0) == doctest::Approx(M_PI).epsilon(3e-3));
    CHECK(st[2].at(100, 37) == doctest::Approx(M_PI).epsilon(5e-3));
    auto fine = iterated_kernels(tabulate(KernelSpec::convolution(ScalarFunction::power(1.0, -0.5)), TimeGrid(1.0, 1024)), 2);
    CHECK(std::abs(fine[2].at(1024, 0) - M_PI) < std::abs(st[2].at(256, 0) - M_PI));
    CHECK(std::isinf(st[1].at(5, 5)));
    CHECK(st[2].at(5, 5) == 0.0);
}

TEST_CASE("semigroup identity") {
    TimeGrid grid(1.0, 128);
    for (auto spec : {KernelSpec::constant(1.0), KernelSpec::convolution(ScalarFunction::power(1.0, -0.25)),
                      KernelSpec::convolution(ScalarFunction::exponential(1.0, -1.0))}) {
        auto st = iterated_kernels(tabulate(spec, grid), 6);
        for (int m = 1; m <= 3; ++m)
            for (int n = 1; m + n <= 6; ++n) {
                auto c = compose(st[m], st[n]);
                double scale = std::max(1.0, max_abs(st[m + n]));
                for (int i = 1; i <= 128; ++i)
                    for (int j = 0; j < i; ++j) CHECK(std::abs(c.at(i, j) - st[m + n].at(i, j)) <= 2e-3 * scale);
            }
    }
}

TEST_CASE("iterated kernels are monotone in the base kernel") {
    TimeGrid grid(1.0, 64);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    TriangularTable a(grid), b(grid);
    for (int i = 0; i <= 64; ++i)
        for (int j = 0; j <= i; ++j) {
            a.at(i, j) = u(rng);
            b.at(i, j) = a.at(i, j) + u(rng);
        }
    auto sa = iterated_kernels(a, 6), sb = iterated_kernels(b, 6);
    for (int n = 1; n <= 6; ++n)
        for (std::size_t q = 0; q < sa[n].raw().size(); ++q) CHECK(sa[n].raw()[q] <= sb[n].raw()[q]);
}

TEST_CASE("resolvent of constant kernels") {
    TimeGrid grid(1.0, 512);
    for (double c : {1.0, 2.0}) {
        auto k = tabulate(KernelSpec::constant(c), grid);
        auto res = resolvent_sum(IteratedKernelStack(k, 40), 1e-10);
        CHECK(res.R.at(512, 0) == doctest::Approx(c * std::exp(c)).epsilon(5e-3));
        CHECK(res.last_sup < 1e-10);
        CHECK(max_abs(resolvent_residual(k, res.R)) <= 1e-6);
    }
    auto z = tabulate(KernelSpec::constant(0.0), grid);
    auto rz = resolvent_sum(IteratedKernelStack(z, 40));
    CHECK(rz.terms == 1);
    CHECK(max_abs(rz.R, true) == 0.0);
}

TEST_CASE("resolvent truncation error carries the partial sum") {
    TimeGrid grid(1.0, 32);
    auto k = tabulate(KernelSpec::constant(5.0), grid);
    try {
        resolvent_sum(IteratedKernelStack(k, 5), 1e-10);
        FAIL("expected truncation");
    } catch (const TruncationError& e) {
        CHECK(e.partial().size() == k.raw().size());
        CHECK(e.partial()[32 * 33 / 2] > 5.0);
    }
}

TEST_CASE("transformed kernel l") {
    TimeGrid grid(1.0, 64);
    auto one = KernelSpec::constant(1.0), zero = KernelSpec::constant(0.0);
    auto l = transformed_kernel_l(one, zero, 2.0, grid);
    for (int i = 0; i <= 64; ++i)
        for (int j = 0; j < i; ++j) CHECK(l.at(i, j) == doctest::Approx(2.0 * std::sqrt(grid.node(i))).epsilon(1e-13));
    auto l2 = KernelSpec::convolution(ScalarFunction::power(1.5, 0.3));
    auto d = transformed_kernel_l(zero, l2, 3.0, grid);
    for (int i = 1; i <= 64; ++i)
        for (int j = 0; j < i; ++j)
            CHECK(d.at(i, j) == doctest::Approx(6.0 * eval_kernel(l2, grid.node(i), grid.node(j))).epsilon(1e-14));
    CHECK(max_abs(transformed_kernel_l(zero, zero, 2.0, grid), true) == 0.0);
    CHECK_THROWS_AS(transformed_kernel_l(one, zero, 0.0, grid), DomainError);
    // table route agrees with the spec route on smooth kernels
    auto lt = transformed_kernel_l(tabulate(one, grid), tabulate(l2, grid), 2.0);
    auto ls = transformed_kernel_l(one, l2, 2.0, grid);
    for (std::size_t q = 0; q < lt.raw().size(); ++q) CHECK(lt.raw()[q] == doctest::Approx(ls.raw()[q]).epsilon(1e-12));
}

TEST_CASE("function series I_l") {
    TimeGrid grid(1.0, 256);
    auto I = function_series_I_l(tabulate(KernelSpec::constant(1.0), grid));
    CHECK(std::abs(I.values.back() - 2.4695) <= 1e-3);
    CHECK(std::abs(I.values.back() - series_oracle(1.0, 1.0)) <= 1e-3);
    CHECK(std::abs(I.values[128] - series_oracle(1.0, 0.5)) <= 1e-3);
    auto I2 = function_series_I_l(tabulate(KernelSpec::constant(1.5), grid));
    CHECK(std::abs(I2.values.back() - series_oracle(1.5, 1.0)) <= 2e-3);
    auto z = function_series_I_l(tabulate(KernelSpec::constant(0.0), grid));
    for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("I_l tail bound covers the dropped terms") {
    TimeGrid grid(1.0, 128);
    for (double c : {0.5, 1.0, 2.0}) {
        auto k = tabulate(KernelSpec::constant(c), grid);
        for (double tol : {1e-3, 1e-5}) {
            auto I = function_series_I_l(k, tol);
            double dropped = series_oracle(c, 1.0) - I.values.back();
            CHECK(dropped <= I.tail_bound + 1e-4);
        }
        // ratio of consecutive sup terms is below one at the stop
        auto I = function_series_I_l(k, 1e-8);
        auto& ts = I.term_sups;
        CHECK(ts.back() < ts[ts.size() - 2]);
    }
}

TEST_CASE("l_np and c_lp") {
    TimeGrid grid(1.0, 256);
    auto one = tabulate(KernelSpec::constant(1.0), grid);
    auto r = l_np_and_c(one, 2.0);
    for (int n = 1; n <= 4; ++n)
        for (int i = 0; i <= 256; i += 32)
            for (int j = 0; j <= i; j += 16) {
                double d = grid.node(i) - grid.node(j);
                CHECK(r.l_np[n - 1].at(i, j) ==
                      doctest::Approx(std::pow(d, n) / boost::math::factorial<double>(n)).epsilon(1e-4));
            }
    CHECK(std::abs(r.c.values.back() - 2.4695) <= 1e-3);

    // p = 3: int_s^t (x-s)^{n-1}/(n-1)! (x^n/n!)^{1/2} dx
    auto r3 = l_np_and_c(one, 3.0);
    using boost::math::quadrature::gauss_kronrod;
    for (int n = 1; n <= 3; ++n) {
        double fn1 = boost::math::factorial<double>(n - 1), fn = boost::math::factorial<double>(n);
        for (int j : {0, 64, 128}) {
            double s = grid.node(j);
            auto f = [&](double x) { return std::pow(x - s, n - 1) / fn1 * std::sqrt(std::pow(x, n) / fn); };
            double want = gauss_kronrod<double, 31>::integrate(f, s, 1.0, 10, 1e-13);
            CHECK(r3.l_np[n - 1].at(256, j) == doctest::Approx(want).epsilon(1e-3));
        }
    }
    auto z = l_np_and_c(tabulate(KernelSpec::constant(0.0), grid), 2.0);
    for (double v : z.c.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(l_np_and_c(one, 1.5), DomainError);
}

TEST_CASE("first kind ledger for the constant kernel") {
    TimeGrid grid(1.0, 64);
    auto led = verify_bound_first_kind(KernelSpec::constant(1.0), 1.0, 0.5, grid, 4, 10);
    CHECK(led.delta == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(led.c0 == doctest::Approx(1.0));
    CHECK(led.c_eps == doctest::Approx(2.0));
    CHECK(led.entries.size() == 40);
    CHECK(led.all_satisfied());
    for (const auto& e : led.entries) {
        CHECK(std::isfinite(e.lhs));
        CHECK(e.rhs == doctest::Approx(std::pow(e.n * 2.0, e.m - 1) * std::pow(0.5, e.n)).epsilon(1e-15));
        if (e.m == 1 && e.n == 2) CHECK(e.lhs == doctest::Approx(0.125).epsilon(1e-12));
    }
    std::ostringstream os;
    led.write_csv(os);
    CHECK(os.str().rfind("m,n,lhs,rhs,satisfied\n", 0) == 0);
}

TEST_CASE("second kind ledger mirrors the first kind") {
    TimeGrid grid(1.0, 64);
    auto a = verify_bound_first_kind(KernelSpec::constant(1.0), 1.0, 0.5, grid, 4, 10);
    auto b = verify_bound_second_kind(KernelSpec::constant(1.0), 1.0, 0.5, grid, 4, 10);
    CHECK(b.delta == a.delta);
    CHECK(b.all_satisfied());
    for (std::size_t q = 0; q < a.entries.size(); ++q)
        CHECK(b.entries[q].lhs == doctest::Approx(a.entries[q].lhs).epsilon(1e-10));

    auto spec = KernelSpec::convolution(ScalarFunction::power(1.0, -0.25));
    TimeGrid g2(1.0, 256);
    auto f1 = verify_bound_first_kind(spec, 2.0, 0.5, g2, 4, 10);
    auto f2 = verify_bound_second_kind(spec, 2.0, 0.5, g2, 4, 10);
    CHECK(f1.all_satisfied());
    CHECK(f2.all_satisfied());
    CHECK(f2.delta == f1.delta);
    for (std::size_t q = 0; q < f1.entries.size(); ++q)
        CHECK(f2.entries[q].lhs == doctest::Approx(f1.entries[q].lhs).epsilon(1e-9));
}

TEST_CASE("ledger for u^{-1/4} with p = 2") {
    TimeGrid grid(1.0, 256);
    auto led = verify_bound_first_kind(KernelSpec::convolution(ScalarFunction::power(1.0, -0.25)), 2.0, 0.5, grid, 4, 10);
    CHECK(led.all_satisfied());
    // window integral 2 sqrt(delta) <= eps
    CHECK(2.0 * std::sqrt(led.delta) <= 0.5 + 1e-12);
    // largest grid window with 2 sqrt(delta) <= eps, up to roundoff at the boundary
    CHECK(led.delta >= 0.0625 - grid.h() - 1e-12);
}

TEST_CASE("ledger edge cases") {
    TimeGrid grid(1.0, 64);
    auto z = verify_bound_first_kind(KernelSpec::constant(0.0), 2.0, 0.1, grid, 4, 10);
    CHECK(z.all_satisfied());
    for (const auto& e : z.entries) CHECK(e.lhs == 0.0);
    auto z2 = verify_bound_second_kind(KernelSpec::constant(0.0), 2.0, 0.1, grid, 4, 10);
    CHECK(z2.all_satisfied());
    auto spec = KernelSpec::convolution(ScalarFunction::power(1.0, -0.25));
    CHECK_THROWS_AS(verify_bound_first_kind(spec, 2.0, 1e-6, grid, 2, 2), InfeasibilityError);
    // window of one cell already exceeds eps
    CHECK_THROWS_AS(verify_bound_first_kind(KernelSpec::constant(1.0), 1.0, 0.01, grid, 2, 2), InfeasibilityError);
}
