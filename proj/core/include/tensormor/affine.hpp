#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tensormor/tensor.hpp"

namespace tensormor {

// ---------------------------------------------------------------------------
// scalar coefficient functions alpha_i(xi)
// ---------------------------------------------------------------------------

/// scale * prod_nu xi_nu^e_nu
struct Monomial {
    std::vector<unsigned> exponents;
    double scale = 1.0;
};

enum class NamedForm {
    Constant,  ///< c
    Affine,    ///< xi_dim
    Exp,       ///< exp(c * xi_dim)
    Inverse,   ///< 1 / (c + xi_dim)
};

struct Named {
    NamedForm form = NamedForm::Constant;
    std::size_t dim = 0;
    double c = 1.0;
};

/// Values tabulated at parameter nodes (one node per row); defined only at the nodes.
struct Tabulated {
    Matrix nodes;
    Vector values;
};

class CoefficientFunction {
public:
    using Descriptor = std::variant<Monomial, Named, Tabulated>;

    CoefficientFunction() : desc_(Named{}) {}
    CoefficientFunction(Descriptor desc);  // NOLINT(google-explicit-constructor)
    CoefficientFunction(Monomial m) : CoefficientFunction(Descriptor(std::move(m))) {}    // NOLINT
    CoefficientFunction(Named n) : CoefficientFunction(Descriptor(n)) {}                  // NOLINT
    CoefficientFunction(Tabulated t) : CoefficientFunction(Descriptor(std::move(t))) {}   // NOLINT

    static CoefficientFunction constant(double c) { return Named{NamedForm::Constant, 0, c}; }
    static CoefficientFunction affine(std::size_t dim) { return Named{NamedForm::Affine, dim, 1.0}; }

    const Descriptor& descriptor() const noexcept { return desc_; }

    /// Throws DomainError when the value is not finite.
    double operator()(const Vector& xi) const;

    /// True when the function is a product of univariate factors.
    bool separable() const noexcept;
    /// Univariate factor for dimension `dim`; the product over dims gives the value.
    /// Throws UnsupportedCoefficient for non-separable descriptors.
    double factor(std::size_t dim, double x) const;

    std::string describe() const;

private:
    Descriptor desc_;
};

// ---------------------------------------------------------------------------
// parameter domain
// ---------------------------------------------------------------------------

enum class Measure { Uniform, GaussianTruncated, Quadrature };

/// Box of parameter values with the measure used to draw samples.
struct ParameterDomain {
    Vector lower;
    Vector upper;
    Measure measure = Measure::Uniform;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(lower.size()); }
    bool contains(const Vector& xi) const;
    /// Throws DomainError when xi lies outside the box.
    void check(const Vector& xi) const;
    /// K points drawn from the measure, one per row. The quadrature tag has no
    /// sampler and falls back to uniform.
    Matrix sample(std::size_t count, std::mt19937_64& rng) const;
};

// ---------------------------------------------------------------------------
// affine operators and vectors
// ---------------------------------------------------------------------------

struct OperatorTerm {
    Matrix matrix;
    CoefficientFunction coeff;
};

struct VectorTerm {
    Vector vector;
    CoefficientFunction coeff;
};

/// A(xi) = sum_i alpha_i(xi) A_i
class AffineOperator {
public:
    AffineOperator() = default;
    explicit AffineOperator(std::vector<OperatorTerm> terms);

    std::size_t dim() const noexcept { return terms_.empty() ? 0 : static_cast<std::size_t>(terms_.front().matrix.rows()); }
    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<OperatorTerm>& terms() const noexcept { return terms_; }
    const OperatorTerm& operator[](std::size_t i) const { return terms_.at(i); }

    Vector coefficients(const Vector& xi) const;
    Matrix assemble(const Vector& xi) const;

private:
    std::vector<OperatorTerm> terms_;
};

/// b(xi) = sum_j beta_j(xi) b_j
class AffineVector {
public:
    AffineVector() = default;
    explicit AffineVector(std::vector<VectorTerm> terms);

    std::size_t dim() const noexcept { return terms_.empty() ? 0 : static_cast<std::size_t>(terms_.front().vector.size()); }
    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<VectorTerm>& terms() const noexcept { return terms_; }
    const VectorTerm& operator[](std::size_t i) const { return terms_.at(i); }

    Vector coefficients(const Vector& xi) const;
    Vector assemble(const Vector& xi) const;

private:
    std::vector<VectorTerm> terms_;
};

/// Lower/upper bounds alpha(xi) <= ||A(xi) v|| / ||v|| <= beta(xi).
///
/// When per-term extreme eigenvalues are given and every coefficient is
/// non-negative at xi, the bounds are sum_i alpha_i(xi) lambda_min(A_i) and
/// sum_i alpha_i(xi) lambda_max(A_i) (valid for symmetric terms whose sum is
/// SPD); otherwise the constant bounds are returned.
struct StabilityBounds {
    double alpha_lb = 0.0;
    double beta_ub = 0.0;
    std::vector<double> term_min;
    std::vector<double> term_max;

    double alpha(const Vector& coefficients) const;
    double beta(const Vector& coefficients) const;
};

/// Parametric linear model A(xi) u(xi) = b(xi) on a parameter box.
struct AffineModel {
    AffineOperator op;
    AffineVector rhs;
    ParameterDomain domain;
    /// Declared symmetric positive definite for every xi in the domain.
    bool spd = false;
    std::optional<StabilityBounds> bounds;

    std::size_t dim() const noexcept { return op.dim(); }
    void validate() const;
};

/// Assembled A(xi), b(xi). Throws DomainError outside the parameter box.
std::pair<Matrix, Vector> assemble(const AffineModel& model, const Vector& xi);

/// Full-order solve; throws NumericalBreakdown with a condition estimate when
/// the assembled operator is singular or severely ill-conditioned.
Vector full_solve(const AffineModel& model, const Vector& xi);

/// JSON model description; matrices and vectors are LRTF files referenced
/// relative to the JSON file.
AffineModel load_model(const std::filesystem::path& json_path);
void save_model(const std::filesystem::path& json_path, const AffineModel& model);

namespace online_probe {
/// Count of operations that touched full-order (size M) data on this thread.
std::size_t full_order_touches();
void reset();
void note_full_order_touch();
}  // namespace online_probe

}  // namespace tensormor
