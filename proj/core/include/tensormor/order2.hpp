#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tensormor/tensor.hpp"

namespace tensormor {

/// Inner product (x, y)_V = x^T W y on R^M. Empty means Euclidean.
class InnerProduct {
public:
    InnerProduct() = default;
    /// W must be symmetric positive definite.
    explicit InnerProduct(Matrix weight);

    bool euclidean() const noexcept { return !weight_.has_value(); }
    const Matrix& weight() const { return *weight_; }
    /// Lower Cholesky factor L with W = L L^T.
    const Matrix& factor() const { return *factor_; }

    double dot(const Vector& x, const Vector& y) const;
    double norm(const Vector& x) const;
    /// W x (identity when Euclidean).
    Vector apply(const Vector& x) const;
    Matrix apply(const Matrix& x) const;

private:
    std::optional<Matrix> weight_;
    std::optional<Matrix> factor_;
};

/// Columns u(xi^k) with positive quadrature weights and their parameter points.
class SnapshotSet {
public:
    SnapshotSet() = default;
    /// params is K x p, one parameter point per row.
    SnapshotSet(Matrix vectors, Vector weights, Matrix params);
    /// Uniform weights 1/K (empirical correlation).
    static SnapshotSet uniform(Matrix vectors, Matrix params);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
    std::size_t count() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
    const Matrix& vectors() const noexcept { return vectors_; }
    const Vector& weights() const noexcept { return weights_; }
    const Matrix& params() const noexcept { return params_; }

    /// Snapshot matrix with column k scaled by sqrt(w_k).
    Matrix scaled() const;

private:
    Matrix vectors_;
    Vector weights_;
    Matrix params_;
};

/// Span of orthonormal columns (orthonormal in the attached inner product).
class Subspace {
public:
    Subspace() = default;
    explicit Subspace(Matrix basis, InnerProduct inner = {});

    std::size_t dim() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
    std::size_t ambient_dim() const noexcept { return static_cast<std::size_t>(basis_.rows()); }
    const Matrix& basis() const noexcept { return basis_; }
    const InnerProduct& inner() const noexcept { return inner_; }

private:
    Matrix basis_;
    InnerProduct inner_;
};

enum class NormKind { L2, LInf };

struct ErrorRecord {
    std::size_t m = 0;
    double error = 0.0;
    NormKind p = NormKind::L2;
    double seconds = 0.0;
};

/// Per-rank (or per-step) error records, ranks strictly increasing.
class ErrorReport {
public:
    void add(ErrorRecord record);
    const std::vector<ErrorRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const ErrorRecord& operator[](std::size_t i) const { return records_.at(i); }
    /// Record with rank `m`, if present.
    std::optional<ErrorRecord> at_rank(std::size_t m) const;

    /// CSV with header `m,error,p,seconds`. With `timings` false the seconds
    /// column is written as 0 so identical runs give identical bytes.
    void write_csv(std::ostream& out, bool timings = true) const;
    static ErrorReport read_csv(std::istream& in);

private:
    std::vector<ErrorRecord> records_;
};

struct PodResult {
    Subspace subspace;
    ErrorReport report;          ///< m = 1..target, error_m = sqrt(sum_{i>m} lambda_i)
    Vector singular_values;      ///< of the sqrt(w)-scaled snapshot matrix
};

/// Weighted POD: dominant m-dimensional eigenspace of the weighted
/// correlation operator, computed from the SVD of the scaled snapshots.
PodResult pod(const SnapshotSet& snapshots, std::size_t m, const InnerProduct& inner = {});

/// Orthogonal projection of x onto the subspace.
Vector project(const Subspace& space, const Vector& x);
Matrix project(const Subspace& space, const Matrix& xs);

/// error(m) = sqrt(sum_{i>m} sigma_i^2) of the weighted snapshot matrix, m = 0..m_max.
ErrorReport width_l2(const SnapshotSet& snapshots, std::size_t m_max, const InnerProduct& inner = {});

/// Snapshot files: `<stem>.lrtf` holds the M x K matrix, `<stem>.json` the
/// weights and parameter points.
void save_snapshots(const std::filesystem::path& stem, const SnapshotSet& s);
SnapshotSet load_snapshots(const std::filesystem::path& stem);

std::string to_string(NormKind p);

}  // namespace tensormor
