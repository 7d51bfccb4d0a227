#pragma once

#include <cstddef>
#include <optional>

#include "tensormor/tensor.hpp"

namespace tensormor {

/// Relative threshold below which singular values count as numerically zero
/// in every rank decision.
inline constexpr double kNumericalZero = 1e-14;

struct SvdResult {
    Vector singular_values;  ///< non-increasing, non-negative
    Matrix left;             ///< orthonormal columns
    Matrix right;            ///< orthonormal columns

    std::size_t size() const noexcept { return static_cast<std::size_t>(singular_values.size()); }
    /// sum_i sigma_i left_i right_i^T restricted to the first `rank` terms.
    Matrix reconstruct(std::size_t rank) const;
    Matrix reconstruct() const { return reconstruct(size()); }
};

/// Thin SVD, min(rows, cols) triplets.
SvdResult svd(const Matrix& m);
SvdResult svd(const DenseTensor& m);

/// Symmetric eigendecomposition with eigenvalues in non-increasing order.
struct SymEigResult {
    Vector values;
    Matrix vectors;
};
SymEigResult sym_eig(const Matrix& a);

/// Cholesky solve for a symmetric positive definite matrix.
/// Throws NumericalBreakdown carrying the first non-positive pivot.
Vector solve_spd(const Matrix& a, const Vector& b);
Matrix solve_spd_multi(const Matrix& a, const Matrix& b);

/// Lower Cholesky factor L with A = L L^T; same error contract as solve_spd.
Matrix cholesky_lower(const Matrix& a);

/// Minimum-norm least-squares solution of A x = b.
Vector lstsq(const Matrix& a, const Vector& b);

/// Smallest r such that sqrt(sum_{i>=r} sigma_i^2) <= budget, never counting
/// values below kNumericalZero * sigma_1.
std::size_t truncation_rank(const Vector& sigma, double budget);

/// Number of sigma_i >= tol * sigma_1 (ties kept), floored at the numerical
/// zero threshold.
std::size_t threshold_rank(const Vector& sigma, double tol);

/// Orthogonalizes `v` against the orthonormal columns of `basis` using two
/// passes of classical Gram-Schmidt. Returns the normalized remainder, or
/// nullopt when its norm falls below `breakdown * ||v||`.
std::optional<Vector> orthonormalize_against(const Matrix& basis, const Vector& v, double breakdown = 1e-12);

/// Flips column signs so the first entry of magnitude above 1e-12 * ||col|| is positive.
void canonicalize_signs(Matrix& columns);

}  // namespace tensormor
