#ifndef MLM_CORE_HPP
#define MLM_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlm {

/// Dense row-major storage; one observation per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace detail

/// N input rows paired with N output rows.
struct Dataset {
    Matrix inputs;
    Matrix outputs;

    Dataset() = default;
    Dataset(Matrix x, Matrix y) : inputs(std::move(x)), outputs(std::move(y)) { validate(); }

    Index size() const { return inputs.rows(); }
    Index input_dim() const { return inputs.cols(); }
    Index output_dim() const { return outputs.cols(); }

    void validate() const {
        detail::require(inputs.rows() >= 1, "dataset must contain at least one row");
        detail::require(inputs.cols() >= 1, "dataset must have at least one input feature");
        detail::require(outputs.cols() >= 1, "dataset must have at least one output");
        detail::require(inputs.rows() == outputs.rows(),
                        "input and output row counts differ");
        detail::require(detail::all_finite(inputs) && detail::all_finite(outputs),
                        "dataset contains non-finite values");
    }

    /// Rows at `rows`, in that order.
    Dataset subset(std::span<const Index> rows) const {
        Dataset out;
        out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
        out.outputs.resize(static_cast<Index>(rows.size()), outputs.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.inputs.row(static_cast<Index>(i)) = inputs.row(rows[i]);
            out.outputs.row(static_cast<Index>(i)) = outputs.row(rows[i]);
        }
        return out;
    }
};

/// The K training pairs every distance is measured against.
struct ReferenceSet {
    std::vector<Index> indices;
    Matrix inputs;   // R, K x P
    Matrix outputs;  // T, K x L

    Index size() const { return static_cast<Index>(indices.size()); }

    /// Copies the indexed rows of `data`. Indices must be distinct and in range.
    static ReferenceSet from_indices(const Dataset& data, std::vector<Index> idx) {
        const Index n = data.size();
        detail::require(!idx.empty(), "reference set must not be empty");
        detail::require(static_cast<Index>(idx.size()) <= n, "K must be in [1, N]");
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        for (Index i : idx) {
            detail::require(i >= 0 && i < n, "reference index out of range");
            detail::require(!seen[static_cast<std::size_t>(i)], "reference indices must be distinct");
            seen[static_cast<std::size_t>(i)] = 1;
        }
        ReferenceSet refs;
        refs.inputs.resize(static_cast<Index>(idx.size()), data.input_dim());
        refs.outputs.resize(static_cast<Index>(idx.size()), data.output_dim());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            refs.inputs.row(static_cast<Index>(k)) = data.inputs.row(idx[k]);
            refs.outputs.row(static_cast<Index>(k)) = data.outputs.row(idx[k]);
        }
        refs.indices = std::move(idx);
        return refs;
    }
};

/// Input- and output-space distance matrices, both N x K.
struct DistancePair {
    Matrix dx;
    Matrix dy;
};

inline double euclidean(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    return (a - b).norm();
}

/// Euclidean distance between every row of `a` and every row of `c`.
inline Matrix pairwise_distances(const Matrix& a, const Matrix& c) {
    detail::require(a.cols() == c.cols(), "pairwise_distances: column counts differ");
    detail::require(detail::all_finite(a) && detail::all_finite(c),
                    "pairwise_distances: non-finite input");
    Matrix d(a.rows(), c.rows());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < c.rows(); ++j) {
            d(i, j) = (a.row(i) - c.row(j)).norm();
        }
    }
    return d;
}

/// Distances from a single point to every row of `c`.
inline Vector point_distances(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Matrix& c) {
    detail::require(x.size() == c.cols(), "dimension mismatch between point and reference inputs");
    detail::require(x.allFinite(), "non-finite query point");
    Vector d(c.rows());
    for (Index j = 0; j < c.rows(); ++j) d(j) = (c.row(j) - x).norm();
    return d;
}

inline DistancePair distance_pair(const Dataset& data, const ReferenceSet& refs) {
    return {pairwise_distances(data.inputs, refs.inputs),
            pairwise_distances(data.outputs, refs.outputs)};
}

/// Largest point count accepted by distance_matrix_det_sign.
inline constexpr Index kMaxDetSignPoints = 12;

/// Sign of det of the n x n self-distance matrix of distinct points.
/// For distinct points this is (-1)^(n-1).
inline int distance_matrix_det_sign(const Matrix& points) {
    const Index n = points.rows();
    detail::require(n >= 2 && n <= kMaxDetSignPoints,
                    "distance_matrix_det_sign: point count must be in [2, " +
                        std::to_string(kMaxDetSignPoints) + "]");
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            detail::require((points.row(i).array() != points.row(j).array()).any(),
                            "distance_matrix_det_sign: duplicate rows");
    const Matrix d = pairwise_distances(points, points);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(d);
    const double det = lu.determinant();
    if (!(det != 0.0) || !std::isfinite(det))
        throw std::runtime_error("distance_matrix_det_sign: numerically singular matrix");
    return det > 0.0 ? 1 : -1;
}

/// Rows of `m` selected by `rows`.
inline Matrix take_rows(const Matrix& m, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

inline std::vector<Index> iota_indices(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

}  // namespace mlm

#endif
