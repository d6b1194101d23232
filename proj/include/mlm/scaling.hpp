#ifndef MLM_SCALING_HPP
#define MLM_SCALING_HPP

#include "mlm/core.hpp"

namespace mlm {

/// Per-feature affine map from the fitted [min, max] onto [0, 1].
/// Constant features map to 0.
struct MinMaxScaler {
    Vector min;
    Vector max;

    Index dim() const { return min.size(); }

    static MinMaxScaler identity(Index dim) {
        return {Vector::Zero(dim), Vector::Ones(dim)};
    }

    static MinMaxScaler fit(const Matrix& rows) {
        detail::require(rows.rows() >= 1, "minmax_fit: no rows");
        detail::require(rows.allFinite(), "minmax_fit: non-finite input");
        return {rows.colwise().minCoeff().transpose(), rows.colwise().maxCoeff().transpose()};
    }

    Matrix apply(const Matrix& rows) const {
        detail::require(rows.cols() == dim(), "minmax_apply: column count differs from scaler");
        Matrix out(rows.rows(), rows.cols());
        for (Index j = 0; j < dim(); ++j) {
            const double range = max(j) - min(j);
            if (range > 0.0) {
                out.col(j) = (rows.col(j).array() - min(j)) / range;
            } else {
                out.col(j).setZero();
            }
        }
        return out;
    }

    /// Inverse map. Constant features map back to their fitted value.
    Matrix invert(const Matrix& rows) const {
        detail::require(rows.cols() == dim(), "minmax_invert: column count differs from scaler");
        Matrix out(rows.rows(), rows.cols());
        for (Index j = 0; j < dim(); ++j) {
            const double range = max(j) - min(j);
            out.col(j) = rows.col(j).array() * range + min(j);
        }
        return out;
    }
};

inline MinMaxScaler minmax_fit(const Matrix& rows) { return MinMaxScaler::fit(rows); }
inline Matrix minmax_apply(const MinMaxScaler& s, const Matrix& rows) { return s.apply(rows); }

}  // namespace mlm

#endif
