#ifndef MLM_PREDICTION_HPP
#define MLM_PREDICTION_HPP

#include "mlm/core.hpp"
#include "mlm/rng.hpp"
#include "mlm/training.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <variant>

namespace mlm {

/// Localization linear system A theta = b. The benchmark anchor node (BAN)
/// t* is subtracted out of every other anchor; the solution is theta = y - t*.
struct LlsSystem {
    Matrix a;  // (K-1) x L, rows t_i - t*
    Vector b;  // K-1
    Index ban_index = 0;
    Vector t_star;
    double delta_star = 0.0;
};

/// Conditioning diagnostics of an LLS. psi = ||A^+|| ||A|| (spectral norms);
/// beta = 1 / | ||b|| / ||delta_b|| - 1 | when a right-hand-side error
/// estimate is available; bound_u = psi (1 + beta), or psi without one.
struct LlsDiagnostics {
    double psi = 1.0;
    std::optional<double> beta;
    double bound_u = 1.0;
};

/// Builds the LLS for anchors `anchors` (K x L) with predicted output-space
/// distances `delta`.
///
///   A(i, :) = t_i - t*
///   b(i)    = 1/2 (delta*^2 + ||t* - t_i||^2 - delta_i^2)
///
/// The third term of b is the predicted output-space distance, which is what
/// the linearization requires; the input-space distances are accepted for
/// interface symmetry and dimension checking only.
inline LlsSystem build_lls(const Matrix& anchors, const Vector& delta, const Vector& input_distances,
                           Index ban_index) {
    const Index k = anchors.rows();
    if (k < 2) throw std::invalid_argument("build_lls: at least two anchors are required");
    detail::require(delta.size() == k, "build_lls: delta length differs from anchor count");
    detail::require(input_distances.size() == 0 || input_distances.size() == k,
                    "build_lls: input distance length differs from anchor count");
    detail::require(ban_index >= 0 && ban_index < k, "build_lls: BAN index out of range");

    LlsSystem sys;
    sys.ban_index = ban_index;
    sys.t_star = anchors.row(ban_index).transpose();
    sys.delta_star = delta(ban_index);
    sys.a.resize(k - 1, anchors.cols());
    sys.b.resize(k - 1);
    const double ds2 = sys.delta_star * sys.delta_star;
    Index row = 0;
    for (Index i = 0; i < k; ++i) {
        if (i == ban_index) continue;
        const Eigen::RowVectorXd diff = anchors.row(i) - sys.t_star.transpose();
        sys.a.row(row) = diff;
        sys.b(row) = 0.5 * (ds2 + diff.squaredNorm() - delta(i) * delta(i));
        ++row;
    }
    return sys;
}

inline LlsSystem build_lls(const Matrix& anchors, const Vector& delta, Index ban_index) {
    return build_lls(anchors, delta, Vector{}, ban_index);
}

struct LlsSolution {
    Vector theta;
    Index rank = 0;
    bool degenerate = false;
};

/// Least-squares (minimum-norm when rank deficient) solution of the LLS.
inline LlsSolution solve_lls(const LlsSystem& sys) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Eigen::MatrixXd(sys.a));
    LlsSolution sol;
    sol.theta = cod.solve(sys.b);
    sol.rank = cod.rank();
    sol.degenerate = sol.rank < sys.a.cols();
    return sol;
}

/// psi, and beta when `delta_b_estimate` is given.
inline LlsDiagnostics lls_diagnostics(const LlsSystem& sys,
                                      const std::optional<Vector>& delta_b_estimate = std::nullopt) {
    detail::require(sys.a.size() > 0, "lls_diagnostics: empty system");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(sys.a));
    const auto& s = svd.singularValues();
    const double smax = s(0);
    if (!(smax > 0.0)) throw std::invalid_argument("lls_diagnostics: A is the zero matrix");
    const double tol = smax * static_cast<double>(std::max(sys.a.rows(), sys.a.cols())) *
                       std::numeric_limits<double>::epsilon();
    double smin = smax;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) smin = s(i);

    LlsDiagnostics out;
    out.psi = smax / smin;
    out.bound_u = out.psi;
    if (delta_b_estimate) {
        detail::require(delta_b_estimate->size() == sys.b.size(),
                        "lls_diagnostics: error estimate length differs from b");
        const double db = delta_b_estimate->norm();
        const double beta = db == 0.0 ? 0.0 : 1.0 / std::abs(sys.b.norm() / db - 1.0);
        out.beta = beta;
        out.bound_u = out.psi * (1.0 + beta);
    }
    return out;
}

/// Sum over anchors of (||y - t_k||^2 - max(delta_k, 0)^2)^2.
inline double multilateration_cost(const Vector& y, const Matrix& anchors, const Vector& delta) {
    detail::require(anchors.cols() == y.size(), "multilateration_cost: dimension mismatch");
    detail::require(anchors.rows() == delta.size(), "multilateration_cost: delta length mismatch");
    double cost = 0.0;
    for (Index k = 0; k < anchors.rows(); ++k) {
        const double dk = std::max(delta(k), 0.0);
        const double r = (anchors.row(k).transpose() - y).squaredNorm() - dk * dk;
        cost += r * r;
    }
    return cost;
}

/// How the benchmark anchor node is chosen.
namespace ban {
struct Fixed {
    Index index = 0;
};
struct Random {
    std::uint64_t seed = 0;
};
/// Anchor whose LLS has the smallest psi. Lowest index on ties.
struct BestConditioned {};
}  // namespace ban

using BanPolicy = std::variant<ban::Fixed, ban::Random, ban::BestConditioned>;

inline std::string to_string(const BanPolicy& p) {
    if (auto f = std::get_if<ban::Fixed>(&p)) return "fixed:" + std::to_string(f->index);
    if (auto r = std::get_if<ban::Random>(&p)) return "random:" + std::to_string(r->seed);
    return "best_conditioned";
}

inline BanPolicy parse_ban_policy(const std::string& s) {
    if (s == "best_conditioned") return ban::BestConditioned{};
    const auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : s.substr(colon + 1);
    try {
        if (head == "fixed") return ban::Fixed{tail.empty() ? 0 : static_cast<Index>(std::stoll(tail))};
        if (head == "random") return ban::Random{tail.empty() ? 0 : std::stoull(tail)};
    } catch (const std::logic_error&) {
    }
    throw std::invalid_argument("unknown BAN policy '" + s + "'");
}

struct PredictionResult {
    Vector y;
    Vector delta;
    Index ban_index = 0;
    bool degenerate = false;
};

namespace detail {

inline Index resolve_ban(const BanPolicy& policy, const Matrix& anchors, const Vector& delta) {
    const Index k = anchors.rows();
    if (auto f = std::get_if<ban::Fixed>(&policy)) {
        detail::require(f->index >= 0 && f->index < k, "BAN index out of range");
        return f->index;
    }
    if (auto r = std::get_if<ban::Random>(&policy)) {
        Rng rng(r->seed);
        return static_cast<Index>(rng.below(static_cast<std::uint64_t>(k)));
    }
    Index best = 0;
    double best_psi = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < k; ++i) {
        const LlsSystem sys = build_lls(anchors, delta, i);
        if (sys.a.isZero(0.0)) continue;
        const double psi = lls_diagnostics(sys).psi;
        if (psi < best_psi) {
            best_psi = psi;
            best = i;
        }
    }
    return best;
}

}  // namespace detail

/// Multilateration from externally supplied output distances: pick the BAN,
/// build and solve the LLS, translate back by t*.
inline PredictionResult multilaterate(const Matrix& anchors, const Vector& delta,
                                      const BanPolicy& policy = ban::Fixed{}) {
    const Index ban_index = detail::resolve_ban(policy, anchors, delta);
    const LlsSystem sys = build_lls(anchors, delta, ban_index);
    const LlsSolution sol = solve_lls(sys);
    PredictionResult out;
    out.y = sol.theta + sys.t_star;
    out.delta = delta;
    out.ban_index = ban_index;
    out.degenerate = sol.degenerate;
    return out;
}

/// Full output prediction for one scaled-space query.
inline PredictionResult predict_detailed(const MlmModel& model,
                                         const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                         const BanPolicy& policy = ban::Fixed{}) {
    if (model.k() < 2) throw std::invalid_argument("predict: K = 1 leaves no equations");
    const Vector delta = predict_output_distances(model, x);
    return multilaterate(model.refs.outputs, delta, policy);
}

inline Vector predict(const MlmModel& model, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                      const BanPolicy& policy = ban::Fixed{}) {
    return predict_detailed(model, x, policy).y;
}

/// Row-wise prediction in the scaled space. A Random policy draws a
/// different anchor per row from a seed derived from (seed, row).
inline Matrix predict_batch(const MlmModel& model, const Matrix& xs,
                            const BanPolicy& policy = ban::Fixed{}) {
    detail::require(xs.cols() == model.input_dim(), "query column count differs from the model");
    if (model.k() < 2) throw std::invalid_argument("predict: K = 1 leaves no equations");
    Matrix out(xs.rows(), model.output_dim());
    // One matrix product for all rows' output distances.
    const Matrix delta = pairwise_distances(xs, model.refs.inputs) * model.b;
    for (Index i = 0; i < xs.rows(); ++i) {
        BanPolicy row_policy = policy;
        if (auto r = std::get_if<ban::Random>(&policy))
            row_policy = ban::Random{derive_seed(r->seed, {static_cast<std::uint64_t>(i)})};
        out.row(i) = multilaterate(model.refs.outputs, delta.row(i).transpose(), row_policy)
                         .y.transpose();
    }
    return out;
}

/// Prediction in original units: scales inputs, predicts, unscales outputs.
inline Matrix predict_original_units(const MlmModel& model, const Matrix& raw_inputs,
                                     const BanPolicy& policy = ban::Fixed{}) {
    return model.output_scaler.invert(predict_batch(model, model.input_scaler.apply(raw_inputs), policy));
}

}  // namespace mlm

#endif
