// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include "mlm/mlm.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace mlm;
using mlm::testing::uniform_matrix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

// 1. Full-K interpolation on random datasets.
Outcome interpolation() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 10 + static_cast<Index>(rng.below(91));
        const Index p = 1 + static_cast<Index>(rng.below(10));
        const Index l = 1 + static_cast<Index>(rng.below(3));
        const Matrix x = uniform_matrix(rng, n, p);
        const Matrix y = uniform_matrix(rng, n, l, -5.0, 5.0);
        const Matrix ys = MinMaxScaler::fit(y).apply(y);
        const Dataset d(x, ys);
        const MlmModel m = fit(d, ReferenceSet::from_indices(d, iota_indices(n)));
        worst = std::max(worst, (predict_batch(m, x) - ys).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 30.0, "max abs error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2. Sign of the self-distance-matrix determinant alternates with n.
Outcome determinant_sign() {
    const auto t0 = Clock::now();
    Rng rng(202);
    int wrong = 0, trials = 0;
    for (Index n = 2; n <= 8; ++n)
        for (int t = 0; t < 100; ++t) {
            const Matrix pts = uniform_matrix(rng, n, 1 + static_cast<Index>(rng.below(4)));
            const int expected = (n % 2 == 1) ? 1 : -1;
            wrong += distance_matrix_det_sign(pts) != expected;
            ++trials;
        }
    const double secs = seconds_since(t0);
    return {wrong == 0 && secs < 5.0, std::to_string(trials - wrong) + "/" + std::to_string(trials) + " signs, " + fmt(secs) + " s"};
}

struct Trial {
    Matrix anchors;
    Vector target;
    Vector delta;
};

std::vector<Trial> exact_trials() {
    Rng rng(303);
    std::vector<Trial> out;
    for (Index l = 1; l <= 3; ++l)
        for (int t = 0; t < 100; ++t) {
            Trial tr;
            const Index k = l + 1 + static_cast<Index>(rng.below(6));
            tr.anchors = uniform_matrix(rng, k, l, -1.0, 1.0);
            tr.target = uniform_matrix(rng, 1, l, -1.0, 1.0).row(0).transpose();
            tr.delta = point_distances(tr.target.transpose(), tr.anchors).transpose();
            out.push_back(std::move(tr));
        }
    return out;
}

// 3. Exact distances recover the target for every BAN choice.
Outcome exact_multilateration(const std::vector<Trial>& trials) {
    double worst = 0.0, spread = 0.0;
    for (const auto& tr : trials) {
        const Vector first = multilaterate(tr.anchors, tr.delta, ban::Fixed{0}).y;
        for (Index b = 0; b < tr.anchors.rows(); ++b) {
            const Vector y = multilaterate(tr.anchors, tr.delta, ban::Fixed{b}).y;
            worst = std::max(worst, (y - tr.target).cwiseAbs().maxCoeff());
            spread = std::max(spread, (y - first).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-8 && spread <= 1e-8,
            std::to_string(trials.size()) + " trials, max error " + fmt(worst) + ", BAN spread " + fmt(spread)};
}

// 4. The LLS answer is no worse than nearby points under the squared-distance cost.
Outcome cost_consistency(const std::vector<Trial>& trials) {
    Rng rng(404);
    int violations = 0, comparisons = 0;
    for (const auto& tr : trials) {
        const Vector y = multilaterate(tr.anchors, tr.delta, ban::Fixed{0}).y;
        const double at_solution = multilateration_cost(y, tr.anchors, tr.delta);
        for (int j = 0; j < 100; ++j) {
            Vector q = y;
            for (Index c = 0; c < q.size(); ++c) q(c) += 0.01 * rng.normal();
            violations += at_solution > multilateration_cost(q, tr.anchors, tr.delta);
            ++comparisons;
        }
    }
    return {violations == 0, std::to_string(comparisons - violations) + "/" + std::to_string(comparisons) + " comparisons"};
}

struct FullRun {
    BenchmarkReport report;
    double seconds = 0.0;
};

FullRun full_s1_run() {
    ProtocolConfig cfg;
    cfg.krel_grid = {5, 10, 20, 40, 100};
    cfg.root_seed = 2024;
    cfg.record_train_rmse = false;
    const auto t0 = Clock::now();
    FullRun r{run_protocol(gen_s1_synthetic(1000, 7), cfg, "s1"), 0.0};
    r.seconds = seconds_since(t0);
    return r;
}

// 5. Small-K ordering on the sine synthetic.
Outcome small_k_ordering(const FullRun& run) {
    const auto& r = run.report;
    auto m = [&](Method meth, double krel) { return r.summary(meth, krel).test_rmse_mean; };
    std::string detail;
    bool ok = true;
    for (double krel : {5.0, 10.0}) {
        const double mx = m(Method::rs_maximin, krel), up = m(Method::rs_upgma, krel), rd = m(Method::random, krel);
        ok = ok && mx < up && up < rd;
        detail += "K_rel " + fmt(krel) + ": maximin " + fmt(mx) + " upgma " + fmt(up) + " random " + fmt(rd) + "; ";
    }
    const double ratio = m(Method::rs_maximin, 5) / m(Method::random, 5);
    ok = ok && ratio <= 0.7 && run.seconds < 600.0;
    return {ok, detail + "ratio@5 " + fmt(ratio) + ", " + fmt(run.seconds) + " s"};
}

// 6. Methods agree at full K.
Outcome full_k_convergence(const FullRun& run) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::string detail;
    for (Method meth : kAllMethods) {
        const double v = run.report.summary(meth, 100).test_rmse_mean;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        detail += std::string(to_string(meth)) + " " + fmt(v) + "; ";
    }
    const double rel = (hi - lo) / lo;
    return {rel <= 0.10, detail + "spread " + fmt(100.0 * rel) + "%"};
}

// 7. Separation of the selected references.
Outcome separation_ordering() {
    auto median500 = [](const Matrix& pts, const std::vector<Index>& idx) {
        const auto p = pairwise_separation_profile(pts, idx, 500);
        return 0.5 * (p[249] + p[250]);
    };
    int wins = 0;
    double sum_random = 0.0, sum_kmeans = 0.0, sum_maximin = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix x = gen_s1_synthetic(1000, 500 + seed).inputs;
        const double r = median500(x, select_random(1000, 100, seed));
        const double k = median500(x, select_rs_kmeanspp(x, 100, seed));
        const double m = median500(x, select_rs_maximin(x, 100));
        wins += m > r;
        sum_random += r;
        sum_kmeans += k;
        sum_maximin += m;
    }
    const bool between = sum_random < sum_kmeans && sum_kmeans < sum_maximin;
    return {wins >= 18 && between, "maximin > random in " + std::to_string(wins) + "/20 seeds; mean medians random " +
                                       fmt(sum_random / 20) + " kmeans++ " + fmt(sum_kmeans / 20) + " maximin " +
                                       fmt(sum_maximin / 20)};
}

// 8. Clustering primitives against brute force.
Outcome clustering_oracles() {
    Rng rng(808);
    int upgma_ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 2 + static_cast<Index>(rng.below(9));
        const Matrix pts = uniform_matrix(rng, n, 1 + static_cast<Index>(rng.below(3)));
        const auto expected = mlm::testing::brute_force_upgma(pts);
        const UpgmaTree tree(pts);
        const auto& got = tree.merges();
        bool same = got.size() == expected.size();
        for (std::size_t s = 0; same && s < got.size(); ++s)
            same = got[s].left == expected[s].left && got[s].right == expected[s].right &&
                   std::abs(got[s].distance - expected[s].distance) <= 1e-12;
        upgma_ok += same;
    }
    int maximin_ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 2 + static_cast<Index>(rng.below(199));
        const Matrix pts = uniform_matrix(rng, n, 1 + static_cast<Index>(rng.below(4)));
        const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        maximin_ok += mlm::testing::first_non_greedy_step(pts, select_rs_maximin(pts, k)) == k;
    }
    int lloyd_ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 5 + static_cast<Index>(rng.below(200));
        const Matrix pts = uniform_matrix(rng, n, 1 + static_cast<Index>(rng.below(4)));
        const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(n, 20))));
        const auto init = take_rows(pts, kmeanspp_init(pts, k, static_cast<std::uint64_t>(trial)));
        const auto h = lloyd(pts, init).sse_history;
        bool mono = true;
        for (std::size_t i = 1; i < h.size(); ++i) mono = mono && h[i] <= h[i - 1];
        lloyd_ok += mono;
    }
    return {upgma_ok == 100 && maximin_ok == 100 && lloyd_ok == 100,
            "upgma " + std::to_string(upgma_ok) + "/100, maximin " + std::to_string(maximin_ok) + "/100, lloyd " +
                std::to_string(lloyd_ok) + "/100"};
}

// 9. Partition hygiene and byte-identical reruns.
Outcome hygiene(const FullRun& run) {
    const auto& r = run.report;
    const bool clean = r.hygiene_assertions == r.cells.size() && r.hygiene_violations == 0;
    const BenchmarkReport again = run_protocol(gen_s1_synthetic(1000, 7), r.config, "s1");
    const bool same_json = report_to_json(r, false).dump() == report_to_json(again, false).dump();
    const bool same_csv = report_to_csv(r) == report_to_csv(again);
    return {clean && same_json && same_csv,
            std::to_string(r.hygiene_assertions) + " assertions for " + std::to_string(r.cells.size()) + " cells, " +
                std::to_string(r.hygiene_violations) + " violations; rerun JSON " + (same_json ? "identical" : "differs") +
                ", CSV " + (same_csv ? "identical" : "differs")};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
    };

    report(1, "interpolation", interpolation);
    report(2, "determinant sign", determinant_sign);
    const auto trials = exact_trials();
    report(3, "exact multilateration", [&] { return exact_multilateration(trials); });
    report(4, "cost consistency", [&] { return cost_consistency(trials); });
    std::cout << "running nested protocol on S1 (n=1000, 5 methods, K_rel {5,10,20,40,100})..." << std::endl;
    std::optional<FullRun> run;
    std::string run_error;
    try {
        run = full_s1_run();
    } catch (const std::exception& e) {
        run_error = e.what();
    }
    auto with_run = [&](Outcome (*check)(const FullRun&)) {
        return [&, check]() -> Outcome {
            if (!run) return {false, "protocol run failed: " + run_error};
            return check(*run);
        };
    };
    report(5, "small-K ordering", with_run(small_k_ordering));
    report(6, "full-K convergence", with_run(full_k_convergence));
    report(7, "separation ordering", separation_ordering);
    report(8, "clustering oracles", clustering_oracles);
    report(9, "protocol hygiene", with_run(hygiene));

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
