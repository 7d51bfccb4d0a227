#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tensormor/affine.hpp"
#include "tensormor/lowrank.hpp"

namespace tensormor {

/// sum_i A_i^1 (x) ... (x) A_i^d acting on order-d tensors.
class KroneckerOperator {
public:
    KroneckerOperator() = default;
    /// terms[i][nu] is the square matrix of term i on mode nu.
    explicit KroneckerOperator(std::vector<std::vector<Matrix>> terms);

    std::size_t order() const noexcept { return terms_.empty() ? 0 : terms_.front().size(); }
    std::size_t size() const noexcept { return terms_.size(); }
    Shape shape() const;
    const std::vector<std::vector<Matrix>>& terms() const noexcept { return terms_; }

private:
    std::vector<std::vector<Matrix>> terms_;
};

/// TT-ranks of the result are at most L times those of x (no rounding).
TTTensor op_apply(const KroneckerOperator& a, const TTTensor& x);

/// Dense matrix of the operator (first mode slowest), subject to the dense cap.
Matrix to_dense(const KroneckerOperator& a);

struct TensorSystem {
    KroneckerOperator op;
    TTTensor rhs;
};

/// Operator A_i (x) diag(alpha_i^1(grid_1)) (x) ... and right-hand side
/// sum_j b_j (x) beta_j^1(grid_1) (x) ... on the tensor grid. Throws
/// UnsupportedCoefficient naming the term when a coefficient does not factorize.
TensorSystem assemble_from_affine(const AffineModel& model, const std::vector<Vector>& grids);

struct TraceRecord {
    std::size_t k = 0;
    RankTuple ranks;
    double resid = 0.0;
    double J = 0.0;
    double seconds = 0.0;
};

class SolveTrace {
public:
    void add(TraceRecord r);
    const std::vector<TraceRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const TraceRecord& operator[](std::size_t i) const { return records_.at(i); }
    const TraceRecord& back() const { return records_.back(); }

    /// Mean residual of the last `window` records.
    double plateau(std::size_t window) const;

    /// CSV `k,ranks,resid,J,seconds`, ranks joined by 'x'. With `timings`
    /// false the seconds column is written as 0.
    void write_csv(std::ostream& out, bool timings = true) const;

private:
    std::vector<TraceRecord> records_;
};

struct RichardsonOptions {
    std::optional<double> step;   ///< nullopt selects 2 / (lambda_min + lambda_max)
    double eps = 1e-8;            ///< truncation tolerance of tt_round
    std::size_t maxit = 1000;
    double target_resid = 1e-6;   ///< relative to ||b||
    /// Called with every trace record as it is produced.
    std::function<void(const TraceRecord&)> observer;
};

struct RichardsonResult {
    TTTensor solution;
    SolveTrace trace;
    double step = 0.0;
    std::string stop_reason;      ///< "target", "maxit" or "stagnation"
};

/// u^{k+1} = round_eps(u^k + step (b - A u^k)) from u^0 = 0. Throws
/// DivergenceError when the residual grows tenfold over 10 iterations.
RichardsonResult truncated_richardson(const KroneckerOperator& a, const TTTensor& b, const RichardsonOptions& options);

/// Extreme eigenvalues of the operator (dense, symmetric part).
std::pair<double, double> extreme_eigenvalues(const KroneckerOperator& a);

struct PgdOptions {
    std::size_t max_rank = 10;
    std::size_t inner_sweeps = 50;
    double tol = 1e-12;
    std::uint64_t seed = 0;
};

struct PgdResult {
    CPTensor solution;
    SolveTrace trace;             ///< k = number of corrections, J = ||A u - b||^2
    bool breakdown = false;
    std::string message;
    /// Largest relative residual of the per-mode normal-equation solves.
    double max_mode_residual = 0.0;
};

/// Successive rank-one corrections, each minimizing J(u + w) over elementary
/// w by alternating exact minimization over the per-mode factors.
PgdResult greedy_rank_one(const KroneckerOperator& a, const TTTensor& b, const PgdOptions& options);

}  // namespace tensormor
