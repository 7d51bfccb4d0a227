#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tensormor/tensor.hpp"

namespace tensormor {

using RankTuple = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Canonical (CP) format: sum_i a_i v_i^1 (x) ... (x) v_i^d
// ---------------------------------------------------------------------------

class CPTensor {
public:
    CPTensor() = default;
    /// factors[nu] is n_nu x r; column i holds v_i^nu.
    CPTensor(Vector weights, std::vector<Matrix> factors);

    /// Rank-zero tensor of the given shape.
    static CPTensor zeros(const Shape& shape);
    /// Sum of elementary terms, each given as a weight and one vector per mode.
    static CPTensor from_terms(const Shape& shape, std::span<const double> weights,
                               std::span<const std::vector<Vector>> terms);

    std::size_t order() const noexcept { return factors_.size(); }
    std::size_t rank() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    Shape shape() const;
    const Vector& weights() const noexcept { return weights_; }
    const std::vector<Matrix>& factors() const noexcept { return factors_; }
    const Matrix& factor(std::size_t mode) const { return factors_.at(mode); }

    /// Appends one elementary term.
    void push_back(double weight, std::span<const Vector> vectors);

    /// Rescales factor columns to unit norm, folding magnitudes into the weights.
    /// Terms with a vanishing factor get weight 0 and are kept.
    CPTensor normalized() const;

private:
    Vector weights_;
    std::vector<Matrix> factors_;
};

// ---------------------------------------------------------------------------
// Tucker format: core tensor contracted with orthonormal per-mode factors
// ---------------------------------------------------------------------------

class TuckerTensor {
public:
    TuckerTensor() = default;
    TuckerTensor(DenseTensor core, std::vector<Matrix> factors);

    std::size_t order() const noexcept { return factors_.size(); }
    Shape shape() const;
    RankTuple ranks() const { return core_.shape(); }
    const DenseTensor& core() const noexcept { return core_; }
    const std::vector<Matrix>& factors() const noexcept { return factors_; }

private:
    DenseTensor core_;
    std::vector<Matrix> factors_;
};

// ---------------------------------------------------------------------------
// Tensor Train: chain of order-3 cores of shape (r_{k-1}, n_k, r_k), r_0 = r_d = 1
// ---------------------------------------------------------------------------

class TTTensor {
public:
    TTTensor() = default;
    explicit TTTensor(std::vector<DenseTensor> cores);

    /// Zero tensor with all ranks 1.
    static TTTensor zeros(const Shape& shape);
    /// Elementary tensor v^1 (x) ... (x) v^d.
    static TTTensor rank_one(std::span<const Vector> vectors);
    static TTTensor from_cp(const CPTensor& cp);

    std::size_t order() const noexcept { return cores_.size(); }
    Shape shape() const;
    /// Interior ranks (r_1, ..., r_{d-1}).
    RankTuple ranks() const;
    std::size_t rank(std::size_t k) const;  ///< r_k, k in [0, d]
    std::size_t max_rank() const;
    const std::vector<DenseTensor>& cores() const noexcept { return cores_; }
    const DenseTensor& core(std::size_t k) const { return cores_.at(k); }

private:
    std::vector<DenseTensor> cores_;
};

// ---------------------------------------------------------------------------
// evaluation, materialization, storage
// ---------------------------------------------------------------------------

double eval(const CPTensor& t, std::span<const std::size_t> idx);
double eval(const TuckerTensor& t, std::span<const std::size_t> idx);
double eval(const TTTensor& t, std::span<const std::size_t> idx);

/// Dense expansion; throws CapacityError beyond dense_cap().
DenseTensor to_dense(const CPTensor& t);
DenseTensor to_dense(const TuckerTensor& t);
DenseTensor to_dense(const TTTensor& t);

/// Exact number of stored scalars.
std::size_t storage_count(const CPTensor& t);
std::size_t storage_count(const TuckerTensor& t);
std::size_t storage_count(const TTTensor& t);

// ---------------------------------------------------------------------------
// TT algorithms
// ---------------------------------------------------------------------------

/// TT-SVD with relative accuracy `tol`: each of the d-1 sequential splits is
/// truncated with budget tol*||t||/sqrt(d-1).
TTTensor tt_svd(const DenseTensor& t, double tol, const std::optional<RankTuple>& max_ranks = std::nullopt);

/// Recompression: right-to-left QR orthogonalization followed by truncated
/// SVDs left to right, same budget split as tt_svd.
TTTensor tt_round(const TTTensor& t, double tol, const std::optional<RankTuple>& max_ranks = std::nullopt);

/// Cores 1..d-1 right-orthogonal; all of the norm ends up in core 0.
TTTensor right_orthogonalize(const TTTensor& t);
/// Cores 0..d-2 left-orthogonal; all of the norm ends up in the last core.
TTTensor left_orthogonalize(const TTTensor& t);

TTTensor tt_add(const TTTensor& a, const TTTensor& b);
TTTensor tt_scale(const TTTensor& a, double c);
/// a + c * b
TTTensor tt_axpy(const TTTensor& a, double c, const TTTensor& b);
double tt_dot(const TTTensor& a, const TTTensor& b);
double tt_norm(const TTTensor& a);

/// Contraction of `t` with one vector per mode except `free_mode`; the result
/// lives on mode `free_mode`.
Vector tt_partial_contract(const TTTensor& t, std::span<const Vector> vectors, std::size_t free_mode);

double cp_dot(const CPTensor& a, const CPTensor& b);
double cp_norm(const CPTensor& a);

// ---------------------------------------------------------------------------
// Tucker and rank diagnostics
// ---------------------------------------------------------------------------

/// Truncated higher-order SVD: factors are the dominant left singular vectors
/// of each single-mode unfolding, the core is the projection onto them.
TuckerTensor hosvd(const DenseTensor& t, const RankTuple& ranks);

/// Number of singular values of matricize(t, alpha) that are >= tol * sigma_1.
std::size_t alpha_rank(const DenseTensor& t, const ModeSet& alpha, double tol);

// ---------------------------------------------------------------------------
// serialization ("LRTT", "LRCP", "LRTK"; payloads are LRTF blocks)
// ---------------------------------------------------------------------------

void write_lrtt(std::ostream& out, const TTTensor& t);
TTTensor read_lrtt(std::istream& in);
void write_lrcp(std::ostream& out, const CPTensor& t);
CPTensor read_lrcp(std::istream& in);
void write_lrtk(std::ostream& out, const TuckerTensor& t);
TuckerTensor read_lrtk(std::istream& in);

void save(const std::filesystem::path& path, const TTTensor& t);
void save(const std::filesystem::path& path, const CPTensor& t);
void save(const std::filesystem::path& path, const TuckerTensor& t);
TTTensor load_tt(const std::filesystem::path& path);
CPTensor load_cp(const std::filesystem::path& path);
TuckerTensor load_tucker(const std::filesystem::path& path);

}  // namespace tensormor
