#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "tensormor/affine.hpp"
#include "tensormor/order2.hpp"

namespace tensormor {

/// Minimal-residual Galerkin reduced model with all full-order quantities
/// precomputed. Immutable after construction.
///
/// With X = [A_1 V, ..., A_L V, b_1, ..., b_R] and W = L_w L_w^T the offline
/// stage stores the Gram matrix X^T W X (which holds the G_ij, h_ij and
/// b_i^T W b_j blocks) together with the triangular factor of L_w^T X, used
/// for residual norms that do not suffer from cancellation.
class ReducedModel {
public:
    ReducedModel() = default;

    std::size_t dim() const noexcept { return m_; }
    std::size_t full_dim() const noexcept { return full_dim_; }
    std::size_t operator_terms() const noexcept { return op_coeffs_.size(); }
    std::size_t rhs_terms() const noexcept { return rhs_coeffs_.size(); }

    /// G_ij = (A_i V)^T W (A_j V)
    Matrix G(std::size_t i, std::size_t j) const;
    /// h_ij = (A_i V)^T W b_j
    Vector h(std::size_t i, std::size_t j) const;
    /// b_i^T W b_j
    double bb(std::size_t i, std::size_t j) const;

    const Matrix& gram() const noexcept { return gram_; }
    const Matrix& triangular_factor() const noexcept { return rx_; }
    const ParameterDomain& domain() const noexcept { return domain_; }
    const std::optional<StabilityBounds>& bounds() const noexcept { return bounds_; }

    Vector operator_coefficients(const Vector& xi) const;
    Vector rhs_coefficients(const Vector& xi) const;

    /// Full-order basis V_m; counted as a full-order touch.
    const Matrix& basis() const;

private:
    friend ReducedModel build_reduced(const AffineModel&, const Subspace&, const InnerProduct&);
    friend ReducedModel load_reduced(const std::filesystem::path&);
    friend void save_reduced(const std::filesystem::path&, const ReducedModel&);

    std::size_t m_ = 0;
    std::size_t full_dim_ = 0;
    Matrix basis_;
    Matrix gram_;
    Matrix rx_;
    std::vector<CoefficientFunction> op_coeffs_;
    std::vector<CoefficientFunction> rhs_coeffs_;
    ParameterDomain domain_;
    std::optional<StabilityBounds> bounds_;
};

/// Offline stage. `residual_weight` is the W of the residual norm (identity by default).
ReducedModel build_reduced(const AffineModel& model, const Subspace& space, const InnerProduct& residual_weight = {});

struct ReducedSolution {
    Vector coefficients;          ///< s in R^m
    double residual = 0.0;        ///< ||A(xi) V s - b(xi)||_W
    double residual_sq_raw = 0.0; ///< expanded quadratic form before clamping
};

/// Online stage: minimizes the W-residual over V_m using only reduced data.
/// Throws NumericalBreakdown when the reduced normal matrix is not positive
/// definite at xi.
ReducedSolution solve_reduced(const ReducedModel& rm, const Vector& xi);

/// V_m s.
Vector lift(const ReducedModel& rm, const Vector& s);

/// Residual norm of V s at xi from the triangular factor.
double residual_indicator(const ReducedModel& rm, const Vector& s, const Vector& xi);

/// Residual norm from the expanded quadratic form
/// s^T (sum a_i a_j G_ij) s - 2 s^T (sum a_i b_j h_ij) + sum b_i b_j (b_i^T W b_j),
/// clamped at zero. `raw` receives the unclamped square when non-null.
double residual_expanded(const ReducedModel& rm, const Vector& s, const Vector& xi, double* raw = nullptr);

/// JSON file plus `<stem>_basis.lrtf` and `<stem>_gram.lrtf` / `<stem>_rx.lrtf` next to it.
void save_reduced(const std::filesystem::path& json_path, const ReducedModel& rm);
ReducedModel load_reduced(const std::filesystem::path& json_path);

}  // namespace tensormor
