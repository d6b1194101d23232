#include "mlm/training.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace mlm;
using mlm::testing::rows_of;

namespace {

MlmModel two_point_model() {
    const Dataset d(rows_of({{0}, {1}}), rows_of({{0}, {2}}));
    return fit(d, ReferenceSet::from_indices(d, {0, 1}));
}

Dataset random_distinct_dataset(Rng& rng, Index n, Index p, Index l) {
    return Dataset(mlm::testing::uniform_matrix(rng, n, p), mlm::testing::uniform_matrix(rng, n, l));
}

}  // namespace

TEST(Fit, TwoPointExample) {
    // Dx = [[0,1],[1,0]] is its own inverse and Dy = 2 Dx, so B = 2I.
    const MlmModel m = two_point_model();
    EXPECT_TRUE(m.b.isApprox(2.0 * Matrix::Identity(2, 2), 1e-14));
    EXPECT_NEAR(m.fit_residual_norm, 0.0, 1e-14);
    EXPECT_FALSE(m.rank_deficient);
}

TEST(Fit, IdentityTaskGivesIdentityB) {
    Rng rng(3);
    const Matrix x = mlm::testing::uniform_matrix(rng, 12, 3);
    const Dataset d(x, x);
    const MlmModel m = fit(d, ReferenceSet::from_indices(d, iota_indices(12)));
    EXPECT_TRUE(m.b.isApprox(Matrix::Identity(12, 12), 1e-8));
}

TEST(Fit, InterpolatesWithAllPointsAsReferences) {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 10 + static_cast<Index>(rng.below(91));
        const Index p = 1 + static_cast<Index>(rng.below(10));
        const Index l = 1 + static_cast<Index>(rng.below(3));
        const Dataset d = random_distinct_dataset(rng, n, p, l);
        const MlmModel m = fit(d, ReferenceSet::from_indices(d, iota_indices(n)));
        const Matrix dy = pairwise_distances(d.outputs, d.outputs);
        ASSERT_LE(m.fit_residual_norm, 1e-8 * dy.norm()) << "trial " << trial << " n=" << n << " p=" << p;
        ASSERT_FALSE(m.rank_deficient);
    }
}

TEST(Fit, LeastSquaresOptimalUnderPerturbation) {
    Rng rng(5);
    const Dataset d = random_distinct_dataset(rng, 40, 3, 2);
    const MlmModel m = fit(d, ReferenceSet::from_indices(d, {0, 5, 10, 15, 20, 25, 30}));
    const DistancePair dp = distance_pair(d, m.refs);
    const double base = (dp.dx * m.b - dp.dy).norm();
    EXPECT_DOUBLE_EQ(base, m.fit_residual_norm);
    for (int s = 0; s < 20; ++s) {
        const Matrix delta = mlm::testing::gaussian_matrix(rng, m.k(), m.k(), 1e-4);
        EXPECT_GE((dp.dx * (m.b + delta) - dp.dy).norm(), base - 1e-12);
    }
}

TEST(Fit, DeterministicBitwise) {
    Rng rng(8);
    const Dataset d = random_distinct_dataset(rng, 30, 2, 1);
    const ReferenceSet r = ReferenceSet::from_indices(d, {1, 4, 9, 16, 25});
    EXPECT_EQ(fit(d, r).b, fit(d, r).b);
}

TEST(Fit, DuplicateInputsAtFullKAreFlaggedNotFatal) {
    const Dataset d(rows_of({{0}, {1}, {1}, {3}}), rows_of({{0}, {1}, {1}, {5}}));
    const MlmModel m = fit(d, ReferenceSet::from_indices(d, iota_indices(4)));
    EXPECT_TRUE(m.rank_deficient);
    EXPECT_EQ(m.rank, 3);
    EXPECT_TRUE(m.b.allFinite());
    EXPECT_GE(m.warnings.size(), 2u);
}

TEST(Fit, RidgeDefaultsToZeroAndShrinksCoefficients) {
    Rng rng(12);
    const Dataset d = random_distinct_dataset(rng, 25, 2, 1);
    const ReferenceSet r = ReferenceSet::from_indices(d, iota_indices(25));
    const MlmModel ols = fit(d, r);
    const MlmModel ridge = fit(d, r, {0.5});
    EXPECT_EQ(ols.ridge, 0.0);
    EXPECT_LT(ridge.b.norm(), ols.b.norm());
    EXPECT_THROW(fit(d, r, {-1.0}), std::invalid_argument);
}

TEST(PredictOutputDistances, TwoPointExamples) {
    const MlmModel m = two_point_model();
    const Vector at0 = predict_output_distances(m, mlm::testing::vec({0}).transpose());
    const Vector at1 = predict_output_distances(m, mlm::testing::vec({1}).transpose());
    EXPECT_TRUE(at0.isApprox(mlm::testing::vec({0, 2}), 1e-14));
    EXPECT_TRUE(at1.isApprox(mlm::testing::vec({2, 0}), 1e-14));
    EXPECT_THROW(predict_output_distances(m, mlm::testing::vec({0, 1}).transpose()), std::invalid_argument);
}

TEST(PredictOutputDistances, ReproducesTrainingDistancesAtFullK) {
    Rng rng(21);
    const Dataset d = random_distinct_dataset(rng, 20, 3, 2);
    const MlmModel m = fit(d, ReferenceSet::from_indices(d, iota_indices(20)));
    const Matrix dy = pairwise_distances(d.outputs, d.outputs);
    for (Index i = 0; i < 20; ++i) {
        const Vector delta = predict_output_distances(m, d.inputs.row(i));
        EXPECT_LE((delta - dy.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-8);
    }
}
