#ifndef MLM_EVALUATION_HPP
#define MLM_EVALUATION_HPP

#include "mlm/core.hpp"
#include "mlm/prediction.hpp"
#include "mlm/refselect.hpp"
#include "mlm/rng.hpp"
#include "mlm/scaling.hpp"
#include "mlm/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mlm {

// ---------------------------------------------------------------------------
// Partitioning

struct FoldAssignment {
    std::vector<Index> folds;
    Index k_folds = 1;

    std::vector<Index> members(Index fold) const {
        std::vector<Index> out;
        for (std::size_t i = 0; i < folds.size(); ++i)
            if (folds[i] == fold) out.push_back(static_cast<Index>(i));
        return out;
    }
    std::vector<Index> complement(Index fold) const {
        std::vector<Index> out;
        for (std::size_t i = 0; i < folds.size(); ++i)
            if (folds[i] != fold) out.push_back(static_cast<Index>(i));
        return out;
    }
    std::vector<Index> sizes() const {
        std::vector<Index> s(static_cast<std::size_t>(k_folds), 0);
        for (Index f : folds) ++s[static_cast<std::size_t>(f)];
        return s;
    }
};

/// Distribution-balanced cross-validation folds without class labels.
///
/// Repeatedly picks a random unassigned row, gathers its k_folds - 1 nearest
/// unassigned neighbours, and deals the group out one per fold: the picked
/// row to fold 0 and its j-th nearest neighbour to fold j. The last, short
/// group fills folds 0, 1, ... in order, which keeps fold sizes within one.
inline FoldAssignment dobscv_partition(const Matrix& inputs, Index k_folds, std::uint64_t seed) {
    const Index n = inputs.rows();
    if (k_folds < 1 || k_folds > n) throw std::invalid_argument("k_folds must be in [1, N]");
    FoldAssignment fa;
    fa.k_folds = k_folds;
    fa.folds.assign(static_cast<std::size_t>(n), -1);

    Rng rng(seed);
    std::vector<Index> remaining = iota_indices(n);
    std::vector<std::pair<double, Index>> cand;
    while (!remaining.empty()) {
        const auto pos = rng.below(remaining.size());
        const Index pick = remaining[pos];
        remaining[pos] = remaining.back();
        remaining.pop_back();

        cand.clear();
        for (Index r : remaining) cand.emplace_back((inputs.row(r) - inputs.row(pick)).squaredNorm(), r);
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(k_folds - 1), cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());

        fa.folds[static_cast<std::size_t>(pick)] = 0;
        for (std::size_t j = 0; j < take; ++j)
            fa.folds[static_cast<std::size_t>(cand[j].second)] = static_cast<Index>(j + 1);
        if (take > 0) {
            std::vector<char> drop(static_cast<std::size_t>(n), 0);
            for (std::size_t j = 0; j < take; ++j) drop[static_cast<std::size_t>(cand[j].second)] = 1;
            std::erase_if(remaining, [&](Index r) { return drop[static_cast<std::size_t>(r)] != 0; });
        }
    }
    return fa;
}

// ---------------------------------------------------------------------------
// Metrics and grid

inline double rmse(const Matrix& pred, const Matrix& actual) {
    detail::require(pred.rows() == actual.rows() && pred.cols() == actual.cols(),
                    "rmse: shape mismatch");
    detail::require(pred.size() > 0, "rmse: empty input");
    return std::sqrt((pred - actual).squaredNorm() / static_cast<double>(pred.size()));
}

/// K = round(K_rel * N / 100), clamped to [1, N].
inline Index krel_to_k(double krel, Index n) {
    detail::require(n >= 1, "krel_to_k: N must be positive");
    detail::require(std::isfinite(krel) && krel > 0.0 && krel <= 100.0, "K_rel must be in (0, 100]");
    const auto k = static_cast<Index>(std::llround(krel * static_cast<double>(n) / 100.0));
    return std::clamp<Index>(k, 1, n);
}

/// The standard grid 5, 10, ..., 100.
inline std::vector<double> default_krel_grid() {
    std::vector<double> g;
    for (int v = 5; v <= 100; v += 5) g.push_back(v);
    return g;
}

// ---------------------------------------------------------------------------
// Synthetic data

inline double s1_function(double x1, double x2) {
    constexpr double two_pi = 6.283185307179586;
    return std::sin(two_pi * x1) + std::sin(two_pi * x2);
}

inline Dataset s1_from_points(const Matrix& points2d) {
    detail::require(points2d.cols() == 2, "S1 points must have two columns");
    Matrix y(points2d.rows(), 1);
    for (Index i = 0; i < points2d.rows(); ++i) y(i, 0) = s1_function(points2d(i, 0), points2d(i, 1));
    return Dataset(points2d, std::move(y));
}

/// n points uniform on [0, 1]^2 with the noiseless sine-sum target.
inline Dataset gen_s1_synthetic(Index n, std::uint64_t seed) {
    detail::require(n >= 1, "n must be positive");
    Rng rng(seed);
    Matrix x(n, 2);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform();
        x(i, 1) = rng.uniform();
    }
    return s1_from_points(x);
}

/// Same target on a supplied 2-D point cloud: n rows drawn without
/// replacement (all rows when n >= rows), then min-max scaled to [0, 1].
inline Dataset gen_s1_synthetic(Index n, std::uint64_t seed, const Matrix& source_points) {
    detail::require(n >= 1, "n must be positive");
    detail::require(source_points.cols() == 2, "S1 point file must have two columns");
    detail::require(source_points.rows() >= 1, "S1 point file is empty");
    Matrix picked = source_points;
    if (n < source_points.rows()) picked = take_rows(source_points, select_random(source_points.rows(), n, seed));
    return s1_from_points(MinMaxScaler::fit(picked).apply(picked));
}

// ---------------------------------------------------------------------------
// Nested cross-validation protocol

struct ProtocolConfig {
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    std::vector<double> krel_grid = default_krel_grid();
    std::uint64_t root_seed = 0;
    Index outer_folds = 3;
    Index inner_folds = 10;
    BanPolicy ban = ban::Fixed{0};
    /// 0 = hardware concurrency. MLM_THREADS caps it either way.
    unsigned threads = 0;
    bool record_train_rmse = true;
    /// Relative tolerance for picking the smallest K_rel whose mean
    /// validation RMSE is within (1 + tol) of the best. 0 disables it.
    double parsimony_tol = 0.0;
};

struct CellResult {
    Method method = Method::random;
    Index outer = 0;
    Index inner = 0;
    double krel = 0.0;
    Index k = 0;
    Index n_train = 0;
    Index n_validation = 0;
    Index n_test = 0;
    std::uint64_t selection_seed = 0;
    std::optional<double> validation_rmse;
    std::optional<double> test_rmse;
    std::optional<double> train_rmse;
    bool rank_deficient = false;
    bool chosen = false;
    std::string status = "ok";
    double wall_seconds = 0.0;
};

struct KrelSummary {
    double krel = 0.0;
    std::vector<double> validation_rmse_mean;  // one per outer split
    std::vector<double> test_rmse;             // outer x inner, row-major
    double test_rmse_mean = 0.0;
    double test_rmse_median = 0.0;
};

struct MethodSummary {
    Method method = Method::random;
    std::vector<KrelSummary> per_krel;
    std::vector<double> chosen_krel;       // one per outer split
    std::vector<double> chosen_test_rmse;  // outer x inner
    double chosen_test_rmse_median = 0.0;
};

struct BenchmarkReport {
    std::string dataset_id;
    Index n = 0, p = 0, l = 0;
    ProtocolConfig config;
    std::uint64_t outer_partition_seed = 0;
    std::vector<std::uint64_t> inner_partition_seeds;
    std::vector<CellResult> cells;
    std::vector<MethodSummary> methods;
    std::size_t hygiene_assertions = 0;
    std::size_t hygiene_violations = 0;
    double wall_seconds = 0.0;

    const MethodSummary& summary(Method m) const {
        for (const auto& s : methods)
            if (s.method == m) return s;
        throw std::out_of_range("method not in report");
    }
    const KrelSummary& summary(Method m, double krel) const {
        for (const auto& k : summary(m).per_krel)
            if (k.krel == krel) return k;
        throw std::out_of_range("K_rel not in report");
    }
};

/// Seed derivation tags. Every random decision in the protocol draws from
/// derive_seed(root, {tag, coordinates...}).
namespace seed_tag {
inline constexpr std::uint64_t outer_partition = 1;
inline constexpr std::uint64_t inner_partition = 2;
inline constexpr std::uint64_t selection = 3;
}  // namespace seed_tag

inline std::string seed_derivation_doc() {
    return "splitmix64 chain: s = sm(root); for c in coords: s = sm(s ^ sm(c)). "
           "outer partition coords = [1]; inner partition coords = [2, outer]; "
           "selection coords = [3, outer, inner, method_index, round(krel * 1000)]";
}

inline unsigned resolve_threads(unsigned requested) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MLM_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, n);
}

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline std::size_t method_index(Method m) {
    for (std::size_t i = 0; i < kAllMethods.size(); ++i)
        if (kAllMethods[i] == m) return i;
    return 0;
}

/// Runs `task(i)` for i in [0, count) on up to `threads` workers.
template <typename Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

struct OuterSplit {
    std::vector<Index> train;  // original row ids
    std::vector<Index> test;
    Matrix x_train, y_train, x_test, y_test;  // scaled with training statistics
    FoldAssignment inner;
};

}  // namespace detail

/// Nested cross-validation of reference selection methods over a K_rel grid.
///
/// The outer level splits the data into `outer_folds` DOB-SCV folds, each
/// serving once as the test set. Inputs and outputs are min-max scaled with
/// the outer-training statistics. The outer-training rows are split again
/// into `inner_folds` DOB-SCV folds; every inner fold serves once as the
/// validation set while the rest trains a model for each (method, K_rel).
/// Each trained model is scored on its validation fold and on the outer test
/// set. Per outer split and method, the K_rel with the smallest mean
/// validation RMSE is chosen.
inline BenchmarkReport run_protocol(const Dataset& data, const ProtocolConfig& cfg,
                                    const std::string& dataset_id = "dataset") {
    data.validate();
    detail::require(!cfg.methods.empty(), "at least one method is required");
    detail::require(!cfg.krel_grid.empty(), "K_rel grid must not be empty");
    for (double kr : cfg.krel_grid) detail::require(kr > 0.0 && kr <= 100.0, "K_rel must be in (0, 100]");
    detail::require(cfg.outer_folds >= 2 && cfg.outer_folds <= data.size(), "outer_folds must be in [2, N]");
    detail::require(cfg.inner_folds >= 2, "inner_folds must be >= 2");

    const auto t_start = std::chrono::steady_clock::now();
    BenchmarkReport rep;
    rep.dataset_id = dataset_id;
    rep.n = data.size();
    rep.p = data.input_dim();
    rep.l = data.output_dim();
    rep.config = cfg;

    // The outer partition only needs a neighbourhood structure; inputs are
    // put on a common [0, 1] range so no raw feature scale dominates it.
    rep.outer_partition_seed = derive_seed(cfg.root_seed, {seed_tag::outer_partition});
    const FoldAssignment outer =
        dobscv_partition(MinMaxScaler::fit(data.inputs).apply(data.inputs), cfg.outer_folds, rep.outer_partition_seed);

    std::vector<detail::OuterSplit> splits(static_cast<std::size_t>(cfg.outer_folds));
    for (Index f = 0; f < cfg.outer_folds; ++f) {
        auto& s = splits[static_cast<std::size_t>(f)];
        s.train = outer.complement(f);
        s.test = outer.members(f);
        detail::require(static_cast<Index>(s.train.size()) >= cfg.inner_folds,
                        "outer training split is smaller than inner_folds");
        const Matrix xtr = take_rows(data.inputs, s.train), ytr = take_rows(data.outputs, s.train);
        const MinMaxScaler sx = MinMaxScaler::fit(xtr), sy = MinMaxScaler::fit(ytr);
        s.x_train = sx.apply(xtr);
        s.y_train = sy.apply(ytr);
        s.x_test = sx.apply(take_rows(data.inputs, s.test));
        s.y_test = sy.apply(take_rows(data.outputs, s.test));
        const auto seed = derive_seed(cfg.root_seed, {seed_tag::inner_partition, static_cast<std::uint64_t>(f)});
        rep.inner_partition_seeds.push_back(seed);
        s.inner = dobscv_partition(s.x_train, cfg.inner_folds, seed);
    }

    struct Unit {
        Index outer, inner;
        Method method;
    };
    std::vector<Unit> units;
    for (Index f = 0; f < cfg.outer_folds; ++f)
        for (Index v = 0; v < cfg.inner_folds; ++v)
            for (Method m : cfg.methods) units.push_back({f, v, m});

    const std::size_t grid = cfg.krel_grid.size();
    std::vector<CellResult> cells(units.size() * grid);
    std::vector<std::size_t> violations(units.size(), 0);

    detail::parallel_for(units.size(), resolve_threads(cfg.threads), [&](std::size_t u) {
        const Unit& unit = units[u];
        const auto& split = splits[static_cast<std::size_t>(unit.outer)];
        const std::vector<Index> tr_pos = split.inner.complement(unit.inner);
        const std::vector<Index> va_pos = split.inner.members(unit.inner);
        const Dataset train{take_rows(split.x_train, tr_pos), take_rows(split.y_train, tr_pos)};
        const Matrix x_val = take_rows(split.x_train, va_pos), y_val = take_rows(split.y_train, va_pos);

        // Partition hygiene in original row ids: test, training and
        // validation rows of this split must be pairwise disjoint.
        std::vector<char> role(static_cast<std::size_t>(data.size()), 0);
        bool leak = false;
        auto mark = [&](Index row, char r) {
            auto& slot = role[static_cast<std::size_t>(row)];
            if (slot != 0) leak = true;
            slot = r;
        };
        for (Index row : split.test) mark(row, 1);
        for (Index pos : tr_pos) mark(split.train[static_cast<std::size_t>(pos)], 2);
        for (Index pos : va_pos) mark(split.train[static_cast<std::size_t>(pos)], 3);

        // The deterministic selectors are computed once per training set.
        std::optional<std::vector<Index>> maximin;
        std::optional<UpgmaTree> tree;

        for (std::size_t g = 0; g < grid; ++g) {
            const auto t0 = std::chrono::steady_clock::now();
            CellResult& c = cells[u * grid + g];
            c.method = unit.method;
            c.outer = unit.outer;
            c.inner = unit.inner;
            c.krel = cfg.krel_grid[g];
            c.n_train = train.size();
            c.n_validation = x_val.rows();
            c.n_test = split.x_test.rows();
            c.k = krel_to_k(c.krel, train.size());
            c.selection_seed = derive_seed(
                cfg.root_seed, {seed_tag::selection, static_cast<std::uint64_t>(unit.outer),
                                static_cast<std::uint64_t>(unit.inner), detail::method_index(unit.method),
                                static_cast<std::uint64_t>(std::llround(c.krel * 1000.0))});
            if (leak) {
                ++violations[u];
                c.status = "partition leak";
                continue;
            }
            try {
                std::vector<Index> idx;
                if (unit.method == Method::rs_maximin) {
                    if (!maximin) {
                        Index kmax = 0;
                        for (double kr : cfg.krel_grid) kmax = std::max(kmax, krel_to_k(kr, train.size()));
                        maximin = maximin_order(train.inputs, kmax);
                    }
                    idx.assign(maximin->begin(), maximin->begin() + c.k);
                } else if (unit.method == Method::rs_upgma) {
                    if (!tree) tree.emplace(train.inputs);
                    idx = cluster_representatives(train.inputs, tree->cut(c.k), c.k);
                } else {
                    idx = select(train.inputs, {unit.method, c.k, c.selection_seed});
                }
                const MlmModel model = fit(train, ReferenceSet::from_indices(train, std::move(idx)));
                c.rank_deficient = model.rank_deficient;
                c.validation_rmse = rmse(predict_batch(model, x_val, cfg.ban), y_val);
                c.test_rmse = rmse(predict_batch(model, split.x_test, cfg.ban), split.y_test);
                if (cfg.record_train_rmse) c.train_rmse = rmse(predict_batch(model, train.inputs, cfg.ban), train.outputs);
                if (!std::isfinite(*c.validation_rmse) || !std::isfinite(*c.test_rmse)) {
                    c.status = "non-finite RMSE";
                    c.validation_rmse.reset();
                    c.test_rmse.reset();
                    c.train_rmse.reset();
                }
            } catch (const std::exception& e) {
                c.status = std::string("error: ") + e.what();
            }
            c.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    });

    rep.hygiene_assertions = cells.size();
    for (auto v : violations) rep.hygiene_violations += v;

    // Summaries and model selection.
    for (Method m : cfg.methods) {
        MethodSummary ms;
        ms.method = m;
        std::vector<std::vector<double>> val_mean(grid);
        for (std::size_t g = 0; g < grid; ++g) {
            KrelSummary ks;
            ks.krel = cfg.krel_grid[g];
            for (Index f = 0; f < cfg.outer_folds; ++f) {
                std::vector<double> vals;
                for (const auto& c : cells) {
                    if (c.method != m || c.outer != f || c.krel != ks.krel) continue;
                    if (c.validation_rmse) vals.push_back(*c.validation_rmse);
                    if (c.test_rmse) ks.test_rmse.push_back(*c.test_rmse);
                }
                ks.validation_rmse_mean.push_back(detail::mean(vals));
            }
            ks.test_rmse_mean = detail::mean(ks.test_rmse);
            ks.test_rmse_median = detail::median(ks.test_rmse);
            ms.per_krel.push_back(std::move(ks));
        }
        for (Index f = 0; f < cfg.outer_folds; ++f) {
            std::optional<std::size_t> best;
            for (std::size_t g = 0; g < grid; ++g) {
                const double v = ms.per_krel[g].validation_rmse_mean[static_cast<std::size_t>(f)];
                if (std::isnan(v)) continue;
                if (!best || v < ms.per_krel[*best].validation_rmse_mean[static_cast<std::size_t>(f)]) best = g;
            }
            if (best && cfg.parsimony_tol > 0.0) {
                const double limit = ms.per_krel[*best].validation_rmse_mean[static_cast<std::size_t>(f)] *
                                     (1.0 + cfg.parsimony_tol);
                for (std::size_t g = 0; g < grid; ++g) {
                    const double v = ms.per_krel[g].validation_rmse_mean[static_cast<std::size_t>(f)];
                    if (!std::isnan(v) && v <= limit && ms.per_krel[g].krel < ms.per_krel[*best].krel) best = g;
                }
            }
            if (!best) {
                ms.chosen_krel.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const double krel = ms.per_krel[*best].krel;
            ms.chosen_krel.push_back(krel);
            for (auto& c : cells) {
                if (c.method != m || c.outer != f || c.krel != krel) continue;
                c.chosen = true;
                if (c.test_rmse) ms.chosen_test_rmse.push_back(*c.test_rmse);
            }
        }
        ms.chosen_test_rmse_median = detail::median(ms.chosen_test_rmse);
        rep.methods.push_back(std::move(ms));
    }
    rep.cells = std::move(cells);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

}  // namespace mlm

#endif
