#include <algorithm>
#include <cmath>

#include "svlab/measures.hpp"

namespace svlab {

namespace {

struct Cell {
    int i, j;
    double flow;
};

}  // namespace

// Transportation simplex on the bipartite graph rows -> columns. The basis is a spanning
// tree with n + m - 1 cells (degenerate cells carry zero flow). Entering cell: first cell in
// row-major order with negative reduced cost. Leaving cell: smallest flow on the minus side
// of the cycle, lowest row-major index on ties.
std::vector<double> solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                                    const std::vector<double>& cost) {
    const int n = static_cast<int>(supply.size()), m = static_cast<int>(demand.size());
    if (n == 0 || m == 0) throw DomainError("empty transport problem");
    if (cost.size() != static_cast<std::size_t>(n) * m) throw DomainError("cost matrix has the wrong size");
    auto C = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * m + j]; };

    // north-west corner start
    std::vector<Cell> basis;
    {
        std::vector<double> s = supply, d = demand;
        int i = 0, j = 0;
        while (i < n && j < m) {
            double x = std::min(s[i], d[j]);
            basis.push_back({i, j, std::max(x, 0.0)});
            s[i] -= x;
            d[j] -= x;
            if (j == m - 1 || (i < n - 1 && s[i] <= d[j]))
                ++i;
            else
                ++j;
        }
    }

    double cmax = 0.0;
    for (double c : cost) cmax = std::max(cmax, std::abs(c));
    const double rc_tol = 1e-13 * std::max(1.0, cmax);
    const int nodes = n + m;
    std::vector<double> pot(nodes);
    std::vector<std::vector<int>> adj(nodes);
    std::vector<int> parent_edge(nodes), order;
    std::vector<char> seen(nodes);
    const long max_iter = 100L * (n + m) * (n + m) + 1000;

    for (long iter = 0; iter < max_iter; ++iter) {
        for (auto& a : adj) a.clear();
        for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
            adj[basis[e].i].push_back(e);
            adj[n + basis[e].j].push_back(e);
        }
        // potentials: u_i + v_j = c_ij on the tree, u_0 = 0
        std::fill(seen.begin(), seen.end(), 0);
        order.assign(1, 0);
        seen[0] = 1;
        pot[0] = 0.0;
        for (std::size_t q = 0; q < order.size(); ++q) {
            int a = order[q];
            for (int e : adj[a]) {
                int b = a < n ? n + basis[e].j : basis[e].i;
                if (seen[b]) continue;
                seen[b] = 1;
                pot[b] = C(basis[e].i, basis[e].j) - pot[a];
                order.push_back(b);
            }
        }
        if (static_cast<int>(order.size()) != nodes) throw EvaluationError("transport basis is not a spanning tree");

        int ei = -1, ej = -1;
        for (int i = 0; i < n && ei < 0; ++i)
            for (int j = 0; j < m; ++j)
                if (C(i, j) - pot[i] - pot[n + j] < -rc_tol) {
                    ei = i;
                    ej = j;
                    break;
                }
        if (ei < 0) {
            std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
            for (const auto& c : basis) flow[static_cast<std::size_t>(c.i) * m + c.j] += c.flow;
            return flow;
        }

        // tree path from column ej to row ei
        std::fill(seen.begin(), seen.end(), 0);
        std::fill(parent_edge.begin(), parent_edge.end(), -1);
        order.assign(1, n + ej);
        seen[n + ej] = 1;
        for (std::size_t q = 0; q < order.size() && !seen[ei]; ++q) {
            int a = order[q];
            for (int e : adj[a]) {
                int b = a < n ? n + basis[e].j : basis[e].i;
                if (seen[b]) continue;
                seen[b] = 1;
                parent_edge[b] = e;
                order.push_back(b);
            }
        }
        // walk back from ei; edges alternate -, +, -, ... starting next to the entering cell
        std::vector<int> minus, plus;
        int at = ei;
        bool neg = true;
        while (at != n + ej) {
            int e = parent_edge[at];
            (neg ? minus : plus).push_back(e);
            neg = !neg;
            at = at < n ? n + basis[e].j : basis[e].i;
        }
        int leave = -1;
        for (int e : minus) {
            if (leave < 0 || basis[e].flow < basis[leave].flow) {
                leave = e;
            } else if (basis[e].flow == basis[leave].flow) {
                long ke = static_cast<long>(basis[e].i) * m + basis[e].j;
                long kl = static_cast<long>(basis[leave].i) * m + basis[leave].j;
                if (ke < kl) leave = e;
            }
        }
        double theta = basis[leave].flow;
        for (int e : minus) basis[e].flow = std::max(0.0, basis[e].flow - theta);
        for (int e : plus) basis[e].flow += theta;
        basis[leave] = {ei, ej, theta};
    }
    throw NonConvergenceError("transport simplex exceeded its pivot limit");
}

WassersteinResult wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    if (p < 1.0) throw DomainError("Wasserstein order must be >= 1");
    if (mu.dim() != nu.dim()) throw DomainError("measures live in different dimensions");
    if (mu.size() == 0 || nu.size() == 0) throw DomainError("empty measure");
    auto check = [](const DiscreteMeasure& x) {
        double s = 0.0;
        for (double w : x.weights()) {
            if (!(w > 0.0)) throw DomainError("non-positive weight");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-12) throw DomainError("weights do not sum to one");
    };
    check(mu);
    check(nu);
    const int n = mu.size(), m = nu.size(), dim = mu.dim();
    std::vector<double> cost(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) cost[static_cast<std::size_t>(i) * m + j] = std::pow(euclidean(mu.atom(i), nu.atom(j), dim), p);
    auto flow = solve_transport(mu.weights(), nu.weights(), cost);

    WassersteinResult r;
    auto& P = r.plan;
    P.n = n;
    P.m = m;
    P.alpha = mu.weights();
    P.beta = nu.weights();
    P.A.resize(flow.size());
    double c = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            std::size_t q = static_cast<std::size_t>(i) * m + j;
            P.A[q] = flow[q] / (P.alpha[i] * P.beta[j]);
            c += flow[q] * cost[q];
        }
    P.cost = c;
    r.distance = std::pow(std::max(c, 0.0), 1.0 / p);
    return r;
}

}  // namespace svlab
