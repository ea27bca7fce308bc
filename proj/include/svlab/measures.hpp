#pragma once

#include <iosfwd>
#include <vector>

#include "svlab/paths.hpp"

namespace svlab {

// Finitely many distinct atoms in R^dim with positive weights summing to one.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    // Validates the weights and merges atoms closer than 1e-12 in the max norm.
    DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights);
    static DiscreteMeasure dirac(std::vector<double> x);
    // Uniform weights 1/n on the given points (duplicates merge).
    static DiscreteMeasure uniform(int dim, std::vector<double> coords);

    int dim() const { return dim_; }
    int size() const { return static_cast<int>(weights_.size()); }
    const double* atom(int i) const { return coords_.data() + static_cast<std::size_t>(i) * dim_; }
    double weight(int i) const { return weights_[i]; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& coords() const { return coords_; }

    // weight,coord_1..coord_m
    void write_csv(std::ostream& os) const;
    // Skips '#' lines and the header; throws ConfigError with the line number on bad rows.
    static DiscreteMeasure read_csv(std::istream& is);

private:
    int dim_ = 0;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

double euclidean(const double* x, const double* y, int dim);

// A_{ij} = pi_{ij} / (alpha_i beta_j) for the optimal coupling pi.
struct TransportPlan {
    int n = 0, m = 0;
    std::vector<double> A;  // row-major n x m
    std::vector<double> alpha, beta;
    double cost = 0.0;  // sum alpha_i A_ij beta_j d^p

    double coupling(int i, int j) const { return alpha[i] * A[static_cast<std::size_t>(i) * m + j] * beta[j]; }
    // max of |A^T alpha - 1| and |A beta - 1|
    double marginal_error() const;
    // i,j,mass
    void write_csv(std::ostream& os) const;
};

struct WassersteinResult {
    double distance = 0.0;
    TransportPlan plan;
};

WassersteinResult wasserstein_p(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// Balanced transportation problem solved by the network simplex method (Bland's rule).
// supply and demand must carry the same total. Returns the n x m flow matrix.
std::vector<double> solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                                    const std::vector<double>& cost);

// Nested point sets D_1 subset D_2 subset ... with the center in D_1. Each level lists
// the previous level first, so indices are stable across levels.
class Codebook {
public:
    Codebook(std::vector<double> center, std::vector<std::vector<double>> levels);
    // Level k is the lattice x0 + R 2^{1-k} Z^dim inside the box |y - x0|_inf <= R.
    static Codebook dyadic(std::vector<double> center, double R, int levels);

    int dim() const { return static_cast<int>(center_.size()); }
    int levels() const { return static_cast<int>(sizes_.size()); }
    int level_size(int k) const { return sizes_.at(k - 1); }
    const double* point(int i) const { return points_.data() + static_cast<std::size_t>(i) * dim(); }
    const std::vector<double>& center() const { return center_; }
    // Covering bound for points in the box at level k (dyadic books only, else +inf).
    double mesh(int k) const;

private:
    std::vector<double> center_;
    std::vector<double> points_;
    std::vector<int> sizes_;
    double R_ = 0.0;
};

// Nearest element of D_level among those no farther from the center than x;
// ties go to the smallest index.
std::vector<double> quantize(const double* x, int level, const Codebook& book);
inline std::vector<double> quantize(const std::vector<double>& x, int level, const Codebook& book) {
    return quantize(x.data(), level, book);
}

// Uniform law of the N particle states at node t_index, optionally joined with the controls.
DiscreteMeasure empirical_law(const PathEnsemble& ens, int t_index, bool include_control = false);

// sum_n q^{n-1} min{1, a_n}
double functional_metric(const std::vector<double>& seminorms, double q);

}  // namespace svlab
