#include "svlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace svlab {

double euclidean(const double* x, const double* y, int dim) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
        double d = x[c] - y[c];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

constexpr double kMergeTol = 1e-12;

}  // namespace

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights) : dim_(dim) {
    if (dim < 1) throw DomainError("measure dimension must be >= 1");
    const std::size_t n = weights.size();
    if (n == 0 || coords.size() != n * dim) throw DomainError("atoms and weights do not match");
    double s = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("weights must be positive");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw DomainError("weights sum to " + std::to_string(s) + ", not 1");
    for (double c : coords)
        if (!std::isfinite(c)) throw DomainError("atom coordinates must be finite");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto at = [&](std::size_t i) { return coords.data() + i * dim; };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(at(a), at(a) + dim, at(b), at(b) + dim);
    });
    for (std::size_t q = 0; q < n; ++q) {
        const double* x = at(idx[q]);
        if (!weights_.empty()) {
            const double* last = coords_.data() + coords_.size() - dim;
            double dmax = 0.0;
            for (int c = 0; c < dim; ++c) dmax = std::max(dmax, std::abs(x[c] - last[c]));
            if (dmax <= kMergeTol) {
                weights_.back() += weights[idx[q]];
                continue;
            }
        }
        coords_.insert(coords_.end(), x, x + dim);
        weights_.push_back(weights[idx[q]]);
    }
}

DiscreteMeasure DiscreteMeasure::dirac(std::vector<double> x) {
    int d = static_cast<int>(x.size());
    return DiscreteMeasure(d, std::move(x), {1.0});
}

DiscreteMeasure DiscreteMeasure::uniform(int dim, std::vector<double> coords) {
    if (dim < 1 || coords.empty() || coords.size() % dim) throw DomainError("bad point set");
    std::size_t n = coords.size() / dim;
    return DiscreteMeasure(dim, std::move(coords), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

void DiscreteMeasure::write_csv(std::ostream& os) const {
    os << "weight";
    for (int c = 0; c < dim_; ++c) os << ",coord_" << c + 1;
    os << '\n' << std::setprecision(17);
    for (int i = 0; i < size(); ++i) {
        os << weights_[i];
        for (int c = 0; c < dim_; ++c) os << ',' << atom(i)[c];
        os << '\n';
    }
}

DiscreteMeasure DiscreteMeasure::read_csv(std::istream& is) {
    std::string line;
    int lineno = 0, dim = -1;
    std::vector<double> coords, weights;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("weight", 0) == 0) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("not a number: '" + cell + "'", lineno);
            }
        }
        if (row.size() < 2) throw ConfigError("need a weight and at least one coordinate", lineno);
        int d = static_cast<int>(row.size()) - 1;
        if (dim >= 0 && d != dim) throw ConfigError("inconsistent number of coordinates", lineno);
        dim = d;
        if (!(row[0] > 0.0)) throw ConfigError("weight must be positive", lineno);
        weights.push_back(row[0]);
        coords.insert(coords.end(), row.begin() + 1, row.end());
    }
    if (weights.empty()) throw ConfigError("measure file has no atoms");
    try {
        return DiscreteMeasure(dim, std::move(coords), std::move(weights));
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

double TransportPlan::marginal_error() const {
    double err = 0.0;
    for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += A[static_cast<std::size_t>(i) * m + j] * alpha[i];
        err = std::max(err, std::abs(s - 1.0));
    }
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += A[static_cast<std::size_t>(i) * m + j] * beta[j];
        err = std::max(err, std::abs(s - 1.0));
    }
    return err;
}

void TransportPlan::write_csv(std::ostream& os) const {
    os << "i,j,mass\n" << std::setprecision(17);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double c = coupling(i, j);
            if (c > 0.0) os << i << ',' << j << ',' << c << '\n';
        }
}

// ---------------------------------------------------------------- codebooks

Codebook::Codebook(std::vector<double> center, std::vector<std::vector<double>> levels) : center_(std::move(center)) {
    const int d = dim();
    if (d < 1 || levels.empty()) throw DomainError("codebook needs a center and at least one level");
    auto same = [&](const double* a, const double* b) { return std::equal(a, a + d, b); };
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto& L = levels[k];
        if (L.empty() || L.size() % d) throw DomainError("codebook level has a bad size");
        std::size_t prev = points_.size() / d;
        std::vector<char> used(L.size() / d, 0);
        // previous points must all reappear
        for (std::size_t q = 0; q < prev; ++q) {
            bool found = false;
            for (std::size_t r = 0; r < used.size() && !found; ++r)
                if (!used[r] && same(&points_[q * d], &L[r * d])) {
                    used[r] = 1;
                    found = true;
                }
            if (!found) throw DomainError("codebook levels are not nested");
        }
        for (std::size_t r = 0; r < used.size(); ++r)
            if (!used[r]) points_.insert(points_.end(), L.begin() + r * d, L.begin() + (r + 1) * d);
        sizes_.push_back(static_cast<int>(points_.size() / d));
        if (k == 0) {
            bool has = false;
            for (int q = 0; q < sizes_[0] && !has; ++q) has = same(point(q), center_.data());
            if (!has) throw DomainError("the center must belong to the first level");
        }
    }
}

Codebook Codebook::dyadic(std::vector<double> center, double R, int levels) {
    const int d = static_cast<int>(center.size());
    if (d < 1 || !(R > 0.0) || levels < 1) throw DomainError("bad dyadic codebook parameters");
    std::vector<std::vector<double>> L;
    std::vector<double> all = center;  // center first
    for (int k = 1; k <= levels; ++k) {
        const long K = 1L << (k - 1);
        const double s = R / static_cast<double>(K);
        std::vector<long> z(d, -K);
        while (true) {
            bool old = true, origin = true;
            for (int c = 0; c < d; ++c) {
                if (k > 1 && (z[c] % 2) != 0) old = false;
                if (z[c] != 0) origin = false;
            }
            if (!origin && (k == 1 || !old))
                for (int c = 0; c < d; ++c) all.push_back(center[c] + s * static_cast<double>(z[c]));
            int c = d - 1;
            while (c >= 0 && z[c] == K) z[c--] = -K;
            if (c < 0) break;
            ++z[c];
        }
        L.push_back(all);
    }
    Codebook b(std::move(center), std::move(L));
    b.R_ = R;
    return b;
}

double Codebook::mesh(int k) const {
    if (R_ == 0.0) return kInf;
    return R_ * std::ldexp(1.0, 1 - k) * std::sqrt(static_cast<double>(dim()));
}

std::vector<double> quantize(const double* x, int level, const Codebook& book) {
    if (level < 1 || level > book.levels()) throw DomainError("codebook level out of range");
    const int d = book.dim();
    auto sq = [d](const double* a, const double* b) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
        return s;
    };
    const double* x0 = book.center().data();
    const double rx = sq(x, x0);
    int best = -1;
    double bd = kInf;
    for (int i = 0; i < book.level_size(level); ++i) {
        const double* y = book.point(i);
        if (sq(y, x0) > rx) continue;
        double dy = sq(y, x);
        if (dy < bd) {
            bd = dy;
            best = i;
        }
    }
    return std::vector<double>(book.point(best), book.point(best) + d);
}

DiscreteMeasure empirical_law(const PathEnsemble& ens, int t_index, bool include_control) {
    if (ens.particles() == 0) throw DomainError("empty ensemble");
    if (t_index < 0 || t_index >= ens.nodes()) throw DomainError("t_index out of range");
    const int m = ens.dim();
    const int a = include_control ? ens.control_dim() : 0;
    if (include_control && a == 0) throw DomainError("ensemble carries no controls");
    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(ens.particles()) * (m + a));
    for (int p = 0; p < ens.particles(); ++p) {
        const double* x = ens.path(p) + static_cast<std::size_t>(t_index) * m;
        coords.insert(coords.end(), x, x + m);
        if (a) {
            const double* u = ens.control(p) + static_cast<std::size_t>(t_index) * a;
            coords.insert(coords.end(), u, u + a);
        }
    }
    return DiscreteMeasure::uniform(m + a, std::move(coords));
}

double functional_metric(const std::vector<double>& seminorms, double q) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0,1)");
    double s = 0.0, w = 1.0;
    for (double a : seminorms) {
        if (a < 0.0 || std::isnan(a)) throw DomainError("seminorm values must be >= 0");
        s += w * std::min(1.0, a);
        w *= q;
    }
    return s;
}

}  // namespace svlab
