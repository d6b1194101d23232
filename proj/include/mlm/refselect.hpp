#ifndef MLM_REFSELECT_HPP
#define MLM_REFSELECT_HPP

#include "mlm/core.hpp"
#include "mlm/rng.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Reference point selection. Every selector works in the input space only
// and returns K distinct row indices; the caller takes the outputs at the
// same rows. Ties are broken towards the lowest index throughout.
//
// The clustering-based selectors pick data points near well-spread
// prototypes, which also makes them prone to picking anomalies as
// references. No outlier filtering is done here.

namespace mlm {

enum class Method { random, rs_kmeanspp, rs_kmedoidspp, rs_upgma, rs_maximin };

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::random, Method::rs_kmeanspp, Method::rs_kmedoidspp, Method::rs_upgma,
    Method::rs_maximin};

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::random: return "random";
        case Method::rs_kmeanspp: return "rs_kmeanspp";
        case Method::rs_kmedoidspp: return "rs_kmedoidspp";
        case Method::rs_upgma: return "rs_upgma";
        case Method::rs_maximin: return "rs_maximin";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name) {
    for (Method m : kAllMethods)
        if (to_string(m) == name) return m;
    throw std::invalid_argument("unknown selection method '" + std::string(name) + "'");
}

/// Methods whose output does not depend on the seed.
inline bool is_deterministic(Method m) {
    return m == Method::rs_upgma || m == Method::rs_maximin;
}

struct SelectionConfig {
    Method method = Method::random;
    Index k = 1;
    std::uint64_t seed = 0;
};

namespace detail {

inline void require_k(Index k, Index n) {
    if (k < 1 || k > n) throw std::invalid_argument("K must be in [1, N]");
}

inline double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

/// Index of the row of `points` nearest to `target`, skipping rows with
/// `excluded[i]` set. Lowest index on ties.
inline Index nearest_row(const Matrix& points, const Eigen::RowVectorXd& target,
                         const std::vector<char>* excluded = nullptr) {
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < points.rows(); ++i) {
        if (excluded && (*excluded)[static_cast<std::size_t>(i)]) continue;
        const double d = (points.row(i) - target).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace detail

/// k distinct indices drawn uniformly without replacement.
inline std::vector<Index> select_random(Index n, Index k, std::uint64_t seed) {
    detail::require_k(k, n);
    Rng rng(seed);
    std::vector<Index> pool = iota_indices(n);
    for (Index i = 0; i < k; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

/// K-means++ seeding. The first index is uniform; each further index is drawn
/// with probability proportional to the squared distance to the nearest
/// chosen point. If only exact duplicates of chosen points remain (all
/// weights zero) the draw falls back to uniform over unchosen rows.
inline std::vector<Index> kmeanspp_init(const Matrix& points, Index k, std::uint64_t seed) {
    const Index n = points.rows();
    detail::require_k(k, n);
    Rng rng(seed);
    std::vector<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

    auto take = [&](Index idx) {
        chosen.push_back(idx);
        taken[static_cast<std::size_t>(idx)] = 1;
        for (Index i = 0; i < n; ++i) {
            const double d = detail::squared_distance(points, i, points, idx);
            auto& cur = d2[static_cast<std::size_t>(i)];
            if (d < cur) cur = d;
        }
    };

    take(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
    while (static_cast<Index>(chosen.size()) < k) {
        double total = 0.0;
        for (Index i = 0; i < n; ++i)
            if (!taken[static_cast<std::size_t>(i)]) total += d2[static_cast<std::size_t>(i)];

        Index pick = -1;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            Index last_positive = -1;
            for (Index i = 0; i < n; ++i) {
                const double w = taken[static_cast<std::size_t>(i)] ? 0.0 : d2[static_cast<std::size_t>(i)];
                if (w <= 0.0) continue;
                last_positive = i;
                acc += w;
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = last_positive;  // r landed on the rounding edge
        } else {
            const auto remaining = static_cast<std::uint64_t>(n) - chosen.size();
            auto target = rng.below(remaining);
            for (Index i = 0; i < n; ++i) {
                if (taken[static_cast<std::size_t>(i)]) continue;
                if (target-- == 0) {
                    pick = i;
                    break;
                }
            }
        }
        take(pick);
    }
    return chosen;
}

struct LloydResult {
    Matrix centroids;
    std::vector<Index> assignment;
    /// sse_history[0] is the SSE of the first assignment against the initial
    /// centroids; each later entry is the SSE after a mean update.
    std::vector<double> sse_history;
    int iterations = 0;
    bool converged = false;
};

struct LloydOptions {
    int max_iter = 300;
    double tol = 1e-10;
};

/// Lloyd's algorithm from the given centroids. Stops when the assignment no
/// longer changes, when an update improves SSE by less than `tol`, or after
/// `max_iter` updates. An empty cluster is re-seeded at the point farthest
/// from its currently assigned centroid.
inline LloydResult lloyd(const Matrix& points, const Matrix& initial_centroids,
                         const LloydOptions& opts = {}) {
    const Index n = points.rows();
    const Index k = initial_centroids.rows();
    detail::require(k >= 1, "lloyd: at least one centroid is required");
    detail::require(k <= n, "lloyd: more centroids than points");
    detail::require(initial_centroids.cols() == points.cols(), "lloyd: dimension mismatch");

    LloydResult res;
    res.centroids = initial_centroids;
    std::vector<Index> assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);

    auto sse_of = [&](const Matrix& c, const std::vector<Index>& a) {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) s += detail::squared_distance(points, i, c, a[static_cast<std::size_t>(i)]);
        return s;
    };

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        std::vector<Index> next(static_cast<std::size_t>(n));
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Index c = 0; c < k; ++c) {
                const double d = detail::squared_distance(points, i, res.centroids, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            next[static_cast<std::size_t>(i)] = best;
            dist[static_cast<std::size_t>(i)] = best_d;
            ++counts[static_cast<std::size_t>(best)];
        }
        for (Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Index far = -1;
            double far_d = -1.0;
            for (Index i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])] <= 1) continue;
                if (dist[static_cast<std::size_t>(i)] > far_d) {
                    far_d = dist[static_cast<std::size_t>(i)];
                    far = i;
                }
            }
            if (far < 0) break;  // cannot happen while k <= n
            --counts[static_cast<std::size_t>(next[static_cast<std::size_t>(far)])];
            next[static_cast<std::size_t>(far)] = c;
            counts[static_cast<std::size_t>(c)] = 1;
            dist[static_cast<std::size_t>(far)] = 0.0;
            res.centroids.row(c) = points.row(far);
        }
        if (iter == 1) res.sse_history.push_back(sse_of(res.centroids, next));

        const bool stable = next == assign;
        assign = std::move(next);

        Matrix updated = Matrix::Zero(k, points.cols());
        for (Index i = 0; i < n; ++i) updated.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        for (Index c = 0; c < k; ++c) updated.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        res.centroids = std::move(updated);
        res.sse_history.push_back(sse_of(res.centroids, assign));
        res.iterations = iter;

        const auto h = res.sse_history.size();
        if (stable || res.sse_history[h - 2] - res.sse_history[h - 1] < opts.tol) {
            res.converged = true;
            break;
        }
    }
    res.assignment = std::move(assign);
    return res;
}

/// Distinct data points nearest to each centroid, processed in centroid
/// order. A point already claimed by an earlier centroid is skipped in
/// favour of the next-nearest unclaimed point.
inline std::vector<Index> nearest_distinct_points(const Matrix& points, const Matrix& centroids) {
    std::vector<char> claimed(static_cast<std::size_t>(points.rows()), 0);
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(centroids.rows()));
    for (Index c = 0; c < centroids.rows(); ++c) {
        const Index idx = detail::nearest_row(points, centroids.row(c), &claimed);
        claimed[static_cast<std::size_t>(idx)] = 1;
        out.push_back(idx);
    }
    return out;
}

inline std::vector<Index> select_rs_kmeanspp(const Matrix& points, Index k, std::uint64_t seed) {
    return kmeanspp_init(points, k, seed);
}

inline std::vector<Index> select_rs_kmedoidspp(const Matrix& points, Index k, std::uint64_t seed,
                                               const LloydOptions& opts = {}) {
    const std::vector<Index> init = kmeanspp_init(points, k, seed);
    const LloydResult lr = lloyd(points, take_rows(points, init), opts);
    return nearest_distinct_points(points, lr.centroids);
}

/// One agglomeration step. Clusters are identified by their smallest member
/// index; `left < right`.
struct Merge {
    Index left = 0;
    Index right = 0;
    double distance = 0.0;
    Index size = 0;  // members after the merge
};

/// Full average-linkage (UPGMA) merge sequence over a dense condensed
/// dissimilarity store. Each step joins the pair of clusters with the
/// smallest mean inter-member distance, lexicographically lowest pair on
/// ties. Distances to the merged cluster follow the size-weighted
/// Lance-Williams update.
class UpgmaTree {
public:
    static constexpr Index kDefaultMaxPoints = 12000;

    explicit UpgmaTree(const Matrix& points, Index max_points = kDefaultMaxPoints)
        : n_(points.rows()) {
        if (n_ < 1) throw std::invalid_argument("upgma: no points");
        if (n_ > max_points)
            throw std::invalid_argument("upgma: N = " + std::to_string(n_) + " exceeds the cap of " +
                                        std::to_string(max_points) + " points");
        build(points);
    }

    Index size() const { return n_; }
    const std::vector<Merge>& merges() const { return merges_; }

    /// Cluster labels with exactly k clusters, numbered 0..k-1 in order of
    /// each cluster's smallest member.
    std::vector<Index> cut(Index k) const {
        detail::require_k(k, n_);
        std::vector<Index> parent = iota_indices(n_);
        auto find = [&](Index x) {
            while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
            return x;
        };
        for (Index s = 0; s < n_ - k; ++s) {
            const Merge& m = merges_[static_cast<std::size_t>(s)];
            parent[static_cast<std::size_t>(find(m.right))] = find(m.left);
        }
        std::vector<Index> label(static_cast<std::size_t>(n_), -1);
        std::vector<Index> root_label(static_cast<std::size_t>(n_), -1);
        Index next = 0;
        for (Index i = 0; i < n_; ++i) {
            const Index r = find(i);
            auto& rl = root_label[static_cast<std::size_t>(r)];
            if (rl < 0) rl = next++;
            label[static_cast<std::size_t>(i)] = rl;
        }
        return label;
    }

private:
    std::size_t cidx(Index i, Index j) const {  // i < j
        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j),
                   un = static_cast<std::size_t>(n_);
        return ui * (2 * un - ui - 1) / 2 + (uj - ui - 1);
    }
    double& d(Index i, Index j) { return i < j ? dist_[cidx(i, j)] : dist_[cidx(j, i)]; }

    void build(const Matrix& points) {
        const double inf = std::numeric_limits<double>::infinity();
        if (n_ > 1) dist_.resize(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_ - 1) / 2);
        for (Index i = 0; i < n_; ++i)
            for (Index j = i + 1; j < n_; ++j) dist_[cidx(i, j)] = (points.row(i) - points.row(j)).norm();

        std::vector<char> active(static_cast<std::size_t>(n_), 1);
        std::vector<Index> members(static_cast<std::size_t>(n_), 1);
        std::vector<Index> nn(static_cast<std::size_t>(n_), -1);
        std::vector<double> nnd(static_cast<std::size_t>(n_), inf);

        auto refresh = [&](Index r) {
            Index best = -1;
            double best_d = inf;
            for (Index c = r + 1; c < n_; ++c) {
                if (!active[static_cast<std::size_t>(c)]) continue;
                const double v = dist_[cidx(r, c)];
                if (v < best_d) {
                    best_d = v;
                    best = c;
                }
            }
            nn[static_cast<std::size_t>(r)] = best;
            nnd[static_cast<std::size_t>(r)] = best_d;
        };
        for (Index r = 0; r < n_; ++r) refresh(r);

        merges_.reserve(static_cast<std::size_t>(n_ > 0 ? n_ - 1 : 0));
        for (Index step = 0; step + 1 < n_; ++step) {
            Index i = -1;
            double best = inf;
            for (Index r = 0; r < n_; ++r) {
                if (active[static_cast<std::size_t>(r)] && nnd[static_cast<std::size_t>(r)] < best) {
                    best = nnd[static_cast<std::size_t>(r)];
                    i = r;
                }
            }
            const Index j = nn[static_cast<std::size_t>(i)];
            const double ni = static_cast<double>(members[static_cast<std::size_t>(i)]);
            const double nj = static_cast<double>(members[static_cast<std::size_t>(j)]);

            for (Index r = 0; r < n_; ++r) {
                if (!active[static_cast<std::size_t>(r)] || r == i || r == j) continue;
                double& dri = d(r, i);
                dri = (ni * dri + nj * d(r, j)) / (ni + nj);
            }
            members[static_cast<std::size_t>(i)] += members[static_cast<std::size_t>(j)];
            active[static_cast<std::size_t>(j)] = 0;
            merges_.push_back({i, j, best, members[static_cast<std::size_t>(i)]});

            for (Index r = 0; r < j; ++r) {
                if (!active[static_cast<std::size_t>(r)]) continue;
                const Index cur = nn[static_cast<std::size_t>(r)];
                if (r == i || cur == i || cur == j) {
                    refresh(r);
                } else if (r < i) {
                    const double v = dist_[cidx(r, i)];
                    if (v < nnd[static_cast<std::size_t>(r)] ||
                        (v == nnd[static_cast<std::size_t>(r)] && i < cur)) {
                        nn[static_cast<std::size_t>(r)] = i;
                        nnd[static_cast<std::size_t>(r)] = v;
                    }
                }
            }
        }
        dist_.clear();
        dist_.shrink_to_fit();
    }

    Index n_;
    std::vector<double> dist_;
    std::vector<Merge> merges_;
};

/// Average-linkage clustering into exactly k clusters.
inline std::vector<Index> upgma(const Matrix& points, Index k,
                                Index max_points = UpgmaTree::kDefaultMaxPoints) {
    detail::require_k(k, points.rows());
    return UpgmaTree(points, max_points).cut(k);
}

/// For each cluster label 0..k-1, the member nearest the cluster mean.
inline std::vector<Index> cluster_representatives(const Matrix& points, const std::vector<Index>& labels,
                                                  Index k) {
    Matrix means = Matrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < points.rows(); ++i) {
        means.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    std::vector<Index> out(static_cast<std::size_t>(k), -1);
    std::vector<double> best(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    for (Index c = 0; c < k; ++c) means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    for (Index i = 0; i < points.rows(); ++i) {
        const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        const double dd = (points.row(i) - means.row(static_cast<Index>(c))).squaredNorm();
        if (dd < best[c]) {
            best[c] = dd;
            out[c] = i;
        }
    }
    return out;
}

inline std::vector<Index> select_rs_upgma(const Matrix& points, Index k,
                                          Index max_points = UpgmaTree::kDefaultMaxPoints) {
    detail::require_k(k, points.rows());
    return cluster_representatives(points, upgma(points, k, max_points), k);
}

/// Greedy farthest-point order of all rows, started at the row nearest the
/// data mean. The first k entries are the maximin selection of size k.
inline std::vector<Index> maximin_order(const Matrix& points, Index k) {
    const Index n = points.rows();
    detail::require_k(k, n);
    const Eigen::RowVectorXd mean = points.colwise().mean();
    std::vector<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    std::vector<double> mind(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());

    Index pick = detail::nearest_row(points, mean);
    while (true) {
        chosen.push_back(pick);
        taken[static_cast<std::size_t>(pick)] = 1;
        if (static_cast<Index>(chosen.size()) == k) break;
        Index next = -1;
        double next_d = -1.0;
        for (Index i = 0; i < n; ++i) {
            auto& m = mind[static_cast<std::size_t>(i)];
            m = std::min(m, (points.row(i) - points.row(pick)).norm());
            if (!taken[static_cast<std::size_t>(i)] && m > next_d) {
                next_d = m;
                next = i;
            }
        }
        pick = next;
    }
    return chosen;
}

inline std::vector<Index> select_rs_maximin(const Matrix& points, Index k) {
    return maximin_order(points, k);
}

inline std::vector<Index> select(const Matrix& points, const SelectionConfig& cfg) {
    detail::require_k(cfg.k, points.rows());
    switch (cfg.method) {
        case Method::random: return select_random(points.rows(), cfg.k, cfg.seed);
        case Method::rs_kmeanspp: return select_rs_kmeanspp(points, cfg.k, cfg.seed);
        case Method::rs_kmedoidspp: return select_rs_kmedoidspp(points, cfg.k, cfg.seed);
        case Method::rs_upgma: return select_rs_upgma(points, cfg.k);
        case Method::rs_maximin: return select_rs_maximin(points, cfg.k);
    }
    throw std::invalid_argument("unknown selection method");
}

/// The m smallest pairwise distances among the selected rows, ascending.
inline std::vector<double> pairwise_separation_profile(const Matrix& points,
                                                       const std::vector<Index>& indices, std::size_t m) {
    const std::size_t k = indices.size();
    const std::size_t pairs = k < 2 ? 0 : k * (k - 1) / 2;
    detail::require(m <= pairs, "separation profile length exceeds K(K-1)/2");
    std::vector<double> d;
    d.reserve(pairs);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) d.push_back((points.row(indices[a]) - points.row(indices[b])).norm());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
    d.resize(m);
    return d;
}

}  // namespace mlm

#endif
