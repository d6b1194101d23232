#ifndef MLM_TRAINING_HPP
#define MLM_TRAINING_HPP

#include "mlm/core.hpp"
#include "mlm/scaling.hpp"

#include <string>
#include <vector>

namespace mlm {

struct FitOptions {
    /// Tikhonov weight added to the distance regression. The ordinary
    /// least-squares model is ridge = 0.
    double ridge = 0.0;
};

/// Distance regression model: B maps input-space distances to the K
/// reference points onto output-space distances to the same points.
///
/// All model arithmetic happens in the scaled space. The scalers record the
/// transforms applied to raw inputs and outputs before fitting; they are
/// identity maps when the caller fit on unscaled data.
struct MlmModel {
    Matrix b;  // K x K
    ReferenceSet refs;
    MinMaxScaler input_scaler;
    MinMaxScaler output_scaler;
    double fit_residual_norm = 0.0;
    double ridge = 0.0;
    Index rank = 0;
    bool rank_deficient = false;
    std::vector<std::string> warnings;

    Index k() const { return refs.size(); }
    Index input_dim() const { return refs.inputs.cols(); }
    Index output_dim() const { return refs.outputs.cols(); }
};

namespace detail {

inline bool has_duplicate_rows(const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = i + 1; j < m.rows(); ++j)
            if ((m.row(i).array() == m.row(j).array()).all()) return true;
    return false;
}

}  // namespace detail

/// Least-squares estimate of B minimizing ||Dx B - Dy||_F.
///
/// The solve uses a complete orthogonal decomposition of Dx, which yields
/// the minimum-norm solution when Dx is rank deficient. A rank-deficient
/// system is flagged on the model rather than rejected.
inline MlmModel fit(const Dataset& data, const ReferenceSet& refs, const FitOptions& opts = {}) {
    data.validate();
    detail::require(refs.size() >= 1 && refs.size() <= data.size(), "K must be in [1, N]");
    detail::require(refs.inputs.cols() == data.input_dim() &&
                        refs.outputs.cols() == data.output_dim(),
                    "reference set dimensions do not match the dataset");
    detail::require(opts.ridge >= 0.0 && std::isfinite(opts.ridge), "ridge must be finite and >= 0");

    const DistancePair d = distance_pair(data, refs);
    const Index n = data.size();
    const Index k = refs.size();

    Eigen::MatrixXd lhs;
    Eigen::MatrixXd rhs;
    if (opts.ridge > 0.0) {
        lhs.resize(n + k, k);
        rhs.resize(n + k, k);
        lhs.topRows(n) = d.dx;
        lhs.bottomRows(k) = std::sqrt(opts.ridge) * Eigen::MatrixXd::Identity(k, k);
        rhs.topRows(n) = d.dy;
        rhs.bottomRows(k).setZero();
    } else {
        lhs = d.dx;
        rhs = d.dy;
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(lhs);
    MlmModel model;
    model.b = cod.solve(rhs);
    model.refs = refs;
    model.input_scaler = MinMaxScaler::identity(data.input_dim());
    model.output_scaler = MinMaxScaler::identity(data.output_dim());
    model.ridge = opts.ridge;
    model.rank = cod.rank();
    model.rank_deficient = model.rank < k;
    model.fit_residual_norm = (d.dx * model.b - d.dy).norm();

    if (!model.b.allFinite()) throw std::runtime_error("fit: non-finite coefficients");
    if (model.rank_deficient) {
        model.warnings.push_back("distance matrix is rank deficient (rank " +
                                 std::to_string(model.rank) + " of " + std::to_string(k) +
                                 "); minimum-norm solution used");
    }
    if (k == n && detail::has_duplicate_rows(data.inputs)) {
        model.warnings.push_back("duplicate training inputs with K = N make Dx singular");
    }
    return model;
}

/// Predicted output-space distances: the row vector of input distances to
/// the references times B. Entries can be negative.
inline Vector predict_output_distances(const MlmModel& model,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    detail::require(x.size() == model.input_dim(), "query dimension differs from the model");
    const Vector dxq = point_distances(x, model.refs.inputs);
    return (dxq.transpose() * model.b).transpose();
}

}  // namespace mlm

#endif
