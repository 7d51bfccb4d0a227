#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tensormor/lowrank.hpp"

namespace tensormor {

/// K evaluations y^k = u(xi^k); points one per row.
class SampleSet {
public:
    SampleSet() = default;
    SampleSet(Matrix points, Vector values);

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
    const Matrix& points() const noexcept { return points_; }
    const Vector& values() const noexcept { return values_; }
    Vector point(std::size_t k) const { return points_.row(static_cast<Eigen::Index>(k)).transpose(); }

    /// Rows selected by index, in the given order.
    SampleSet subset(const std::vector<std::size_t>& rows) const;

    /// CSV with header `xi_1,...,xi_d,y`.
    void write_csv(std::ostream& out) const;
    static SampleSet read_csv(std::istream& in);

private:
    Matrix points_;
    Vector values_;
};

enum class BasisKind { Monomial, Legendre };

/// Per-dimension univariate families of size n_nu = degree + 1 on [lower, upper].
/// Legendre functions are orthonormal for the uniform probability measure.
class FeatureBasis {
public:
    FeatureBasis() = default;
    FeatureBasis(BasisKind kind, std::vector<std::size_t> sizes, Vector lower, Vector upper);
    static FeatureBasis uniform(BasisKind kind, std::size_t dim, std::size_t size, double lower, double upper);

    std::size_t dim() const noexcept { return sizes_.size(); }
    std::size_t size(std::size_t nu) const { return sizes_.at(nu); }
    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    BasisKind kind() const noexcept { return kind_; }
    const Vector& lower() const noexcept { return lower_; }
    const Vector& upper() const noexcept { return upper_; }

    /// (phi_1(x), ..., phi_n(x)) for dimension nu.
    Vector eval(std::size_t nu, double x) const;

private:
    BasisKind kind_ = BasisKind::Legendre;
    std::vector<std::size_t> sizes_;
    Vector lower_;
    Vector upper_;
};

/// n-point Gauss-Legendre rule on [-1, 1] (weights sum to 2).
std::pair<Vector, Vector> gauss_legendre(std::size_t n);

struct CpAlsOptions {
    std::size_t rank = 1;
    double ridge = 0.0;
    std::size_t sweeps = 100;
    double tol = 1e-14;          ///< relative objective change ending the sweeps
    std::uint64_t seed = 0;
};

struct FitReport {
    std::size_t rank = 0;
    double ridge = 0.0;
    std::size_t sweeps = 0;
    std::uint64_t seed = 0;
    double train_rmse = 0.0;
    std::optional<double> validation_rmse;
    double sample_ratio = 0.0;   ///< K / number of free parameters
    /// Objective (mean squared error plus ridge penalty) after every mode update.
    std::vector<double> objective;
    bool monotone = true;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

struct CpFit {
    CPTensor coefficients;       ///< over the feature coefficient space, shape = basis sizes
    FitReport report;
};

/// v(xi) = sum_ij coefficient_{j} prod_nu phi^nu_{j_nu}(xi_nu) for a CP coefficient tensor.
double predict(const CPTensor& coefficients, const FeatureBasis& basis, const Vector& xi);
double rmse(const CPTensor& coefficients, const FeatureBasis& basis, const SampleSet& samples);

/// Alternating ridge least squares over the CP factors of the coefficient
/// tensor. With ridge 0 each sub-step takes the minimum-norm solution and a
/// warning is recorded when it is rank deficient.
CpFit cp_als_fit(const SampleSet& samples, const FeatureBasis& basis, const CpAlsOptions& options,
                 const SampleSet* holdout = nullptr);

struct CvEntry {
    std::size_t rank = 0;
    double ridge = 0.0;
    double mean_rmse = 0.0;
};

struct CvReport {
    std::vector<CvEntry> entries;
    std::size_t best_rank = 0;
    double best_ridge = 0.0;
    double best_rmse = 0.0;
};

/// Seeded k-fold cross-validation over the (rank, ridge) grid. Ties go to the
/// smaller rank, then the smaller ridge.
CvReport cross_validate(const SampleSet& samples, const FeatureBasis& basis, const std::vector<std::size_t>& ranks,
                        const std::vector<double>& ridges, std::size_t folds, const CpAlsOptions& base);

enum class GridMode { Interpolation, Quadrature };

/// Tensor-product point set with optional quadrature weights per dimension.
struct TensorGrid {
    std::vector<Vector> nodes;
    std::vector<Vector> weights;  ///< empty for interpolation
};

/// Gauss-Legendre grid with `points` nodes per dimension on the basis box,
/// weights normalized to the uniform probability measure.
TensorGrid gauss_grid(const FeatureBasis& basis, std::size_t points);

/// Interpolation: U_k = f(xi^k) on the grid. Quadrature: coefficients
/// sum_k w_k f(xi^k) phi_j(xi^k) in the feature basis.
DenseTensor grid_project(const std::function<double(const Vector&)>& f, const FeatureBasis& basis, const TensorGrid& grid,
                         GridMode mode);

}  // namespace tensormor
