#include "svlab/common.hpp"

#include <algorithm>
#include <exception>
#include <thread>

namespace svlab {

int TimeGrid::index_of(double t) const {
    double x = t / h();
    double r = std::round(x);
    if (r < 0 || r > steps) return -1;
    if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x))) return -1;
    return static_cast<int>(r);
}

double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    std::size_t t = static_cast<std::size_t>(std::max(1, threads));
    t = std::min(t, n);
    if (t == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    std::size_t chunk = (n + t - 1) / t;
    for (std::size_t k = 0; k < t; ++k) {
        std::size_t b = k * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, k, b, e] {
            try {
                body(b, e);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    // lowest failing chunk wins
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

double default_wp(double p) {
    if (p < 2.0) throw DomainError("w_p is defined for p >= 2");
    if (p == 2.0) return 2.0;
    return p / (p - 1.0) * std::sqrt(p * (p - 1.0) / 2.0);
}

}  // namespace svlab
