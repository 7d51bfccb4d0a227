#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tensormor/affine.hpp"
#include "tensormor/order2.hpp"

namespace tensormor {

/// Candidate parameter points (one per row) with optional weights omega.
class TrainSet {
public:
    TrainSet() = default;
    /// weights default to 1; must be positive and finite.
    explicit TrainSet(Matrix points, std::optional<Vector> weights = std::nullopt);

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
    const Matrix& points() const noexcept { return points_; }
    const Vector& weights() const noexcept { return weights_; }
    Vector point(std::size_t k) const { return points_.row(static_cast<Eigen::Index>(k)).transpose(); }

private:
    Matrix points_;
    Vector weights_;
};

/// Entry-selection interpolation onto span(basis): the functionals are
/// coordinate extractions at the magic points, dualized by the m x m
/// interpolation matrix.
struct EmpiricalInterpolation {
    Matrix basis;                        ///< M x m
    std::vector<std::size_t> points;     ///< magic point per basis vector
    Matrix matrix;                       ///< P^T basis
    double condition = 1.0;              ///< 2-norm condition of `matrix`

    /// Coefficients c with (basis c) matching v at the magic points.
    Vector coefficients(const Vector& v) const;
    /// Coefficients from the entries of v at the magic points.
    Vector coefficients_from_entries(const Vector& entries) const;
    Vector interpolate(const Vector& v) const;
    /// ||(P^T basis)^{-1}||_2, the amplification of the projection error.
    double lebesgue_factor() const;
};

struct GreedyResult {
    std::vector<std::size_t> selected;
    Subspace subspace;
    /// Records m = 0..achieved: the maximum indicator over the train set with
    /// the first m selected vectors (sup norm over the set, tagged inf).
    ErrorReport report;
    bool degenerate = false;
    std::vector<std::string> warnings;
    std::optional<double> gamma;
    std::optional<EmpiricalInterpolation> interpolation;
};

/// Empirical interpolation on snapshot columns: each step picks the column
/// with the largest projection error onto the current span (lowest index on
/// ties) and appends its orthonormalized residual. Stops early with the
/// degenerate flag when the snapshots are exhausted.
GreedyResult strong_greedy(const SnapshotSet& snapshots, std::size_t m, const InnerProduct& inner = {});

/// Same selection over plain columns with per-column weights.
GreedyResult strong_greedy(const Matrix& columns, std::size_t m, const Vector& weights, const InnerProduct& inner = {});

enum class Indicator { Exact, Residual };

/// Greedy driven by an indicator. Exact uses best-approximation errors of
/// full solves; Residual uses the minimal-residual reduced model rebuilt at
/// every step. Points where the indicator fails are dropped with a warning.
GreedyResult weak_greedy(const AffineModel& model, Indicator indicator, const TrainSet& train, std::size_t m,
                         const InnerProduct& residual_weight = {});

/// (inf alpha / sup beta) * inf (alpha / beta) over the train set, times the
/// omega ratio; nullopt when the model has no bounds.
std::optional<double> weak_greedy_gamma(const AffineModel& model, const TrainSet& train);

/// Magic points of linearly independent columns. Throws DegeneracyError at
/// the step where the interpolation matrix becomes singular.
EmpiricalInterpolation geim_functionals(const Matrix& basis);

struct AffineApproximation {
    AffineOperator op;                  ///< terms with tabulated coefficients at the train nodes
    EmpiricalInterpolation interpolation;  ///< over vectorized operators
    std::vector<std::size_t> selected;  ///< train indices whose samples span the terms
    std::size_t terms = 0;              ///< achieved L (may be below the request)
    bool degenerate = false;

    /// Coefficients alpha(xi) from entries of vec(A(xi)) at the magic points.
    Vector coefficients_from_entries(const Vector& entries) const { return interpolation.coefficients_from_entries(entries); }
    /// Entry indices (column-major vectorization) required for a new parameter.
    const std::vector<std::size_t>& magic_entries() const noexcept { return interpolation.points; }
};

/// Affine approximation of sampled operators A(xi^k) (one per train point).
AffineApproximation affine_approximate(const std::vector<Matrix>& samples, const Matrix& params, std::size_t L);

/// JSON export: selected indices, per-step maxima, gamma, warnings, magic points.
std::string to_json(const GreedyResult& r);

}  // namespace tensormor
