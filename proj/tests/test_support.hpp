#ifndef MLM_TESTS_SUPPORT_HPP
#define MLM_TESTS_SUPPORT_HPP

#include "mlm/core.hpp"
#include "mlm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mlm::testing {

inline Matrix uniform_matrix(Rng& rng, Index rows, Index cols, double lo = 0.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
    return m;
}

inline Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double sigma = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = sigma * rng.normal();
    return m;
}

/// Determinant by cofactor expansion along the first row. Exponential cost;
/// used only as an oracle for small matrices.
inline double laplace_det(const std::vector<std::vector<double>>& a) {
    const std::size_t n = a.size();
    if (n == 1) return a[0][0];
    if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
    double det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        if (a[0][c] == 0.0) continue;
        std::vector<std::vector<double>> minor;
        minor.reserve(n - 1);
        for (std::size_t r = 1; r < n; ++r) {
            std::vector<double> row;
            row.reserve(n - 1);
            for (std::size_t k = 0; k < n; ++k)
                if (k != c) row.push_back(a[r][k]);
            minor.push_back(std::move(row));
        }
        det += (c % 2 == 0 ? 1.0 : -1.0) * a[0][c] * laplace_det(minor);
    }
    return det;
}

/// Self-distance matrix computed independently of the library.
inline std::vector<std::vector<double>> naive_distance_matrix(const Matrix& pts) {
    const auto n = static_cast<std::size_t>(pts.rows());
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (Index c = 0; c < pts.cols(); ++c) {
                const double diff = pts(static_cast<Index>(i), c) - pts(static_cast<Index>(j), c);
                s += diff * diff;
            }
            d[i][j] = std::sqrt(s);
        }
    return d;
}

/// Average linkage by definition: mean of all member-pair distances,
/// recomputed from scratch at every step. Returns merges as (min member of
/// left, min member of right, distance).
struct BruteMerge {
    Index left, right;
    double distance;
};

inline std::vector<BruteMerge> brute_force_upgma(const Matrix& pts) {
    const auto d = naive_distance_matrix(pts);
    std::vector<std::vector<Index>> clusters;
    for (Index i = 0; i < pts.rows(); ++i) clusters.push_back({i});
    std::vector<BruteMerge> out;
    while (clusters.size() > 1) {
        std::size_t ba = 0, bb = 1;
        double best = std::numeric_limits<double>::infinity();
        std::pair<Index, Index> best_key{0, 0};
        for (std::size_t a = 0; a < clusters.size(); ++a)
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                double s = 0.0;
                for (Index x : clusters[a])
                    for (Index y : clusters[b]) s += d[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
                s /= static_cast<double>(clusters[a].size() * clusters[b].size());
                Index ka = clusters[a].front(), kb = clusters[b].front();
                if (ka > kb) std::swap(ka, kb);
                if (s < best - 1e-12 || (std::abs(s - best) <= 1e-12 && std::make_pair(ka, kb) < best_key)) {
                    best = s;
                    ba = a;
                    bb = b;
                    best_key = {ka, kb};
                }
            }
        out.push_back({best_key.first, best_key.second, best});
        clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
        std::sort(clusters[ba].begin(), clusters[ba].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
        std::sort(clusters.begin(), clusters.end());
    }
    return out;
}


/// Index of the first pick in `idx` that is not a farthest-point choice
/// given the picks before it, or idx.size() if every pick is greedy.
inline Index first_non_greedy_step(const Matrix& pts, const std::vector<Index>& idx) {
    const auto d = naive_distance_matrix(pts);
    const auto k = idx.size();
    for (std::size_t t = 1; t < k; ++t) {
        double best = -1.0;
        for (std::size_t c = 0; c < d.size(); ++c) {
            if (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(t), static_cast<Index>(c)) !=
                idx.begin() + static_cast<std::ptrdiff_t>(t))
                continue;
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < t; ++s) m = std::min(m, d[c][static_cast<std::size_t>(idx[s])]);
            best = std::max(best, m);
        }
        double chosen = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < t; ++s)
            chosen = std::min(chosen, d[static_cast<std::size_t>(idx[t])][static_cast<std::size_t>(idx[s])]);
        if (chosen != best) return static_cast<Index>(t);
    }
    return static_cast<Index>(k);
}

inline Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
    const auto r = static_cast<Index>(rows.size());
    const auto c = static_cast<Index>(rows.begin()->size());
    Matrix m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
        Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace mlm::testing

#endif
