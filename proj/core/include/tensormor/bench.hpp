#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tensormor/affine.hpp"
#include "tensormor/error.hpp"

namespace tensormor::bench {

/// Bad command line, unknown generator/method, or an invalid configuration.
class UsageError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Process exit codes of the batch runner.
enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kBreakdown = 3, kRegression = 4 };

/// A(xi) = A_0 + sum_nu xi_nu A_nu on xi in [0.1, 1]^d with A_0 = tridiag(-1, 2, -1)
/// of size M and A_nu the same stencil restricted to the nu-th of d contiguous
/// blocks; b = ones. Bounds: alpha_LB = lambda_min(A_0),
/// beta_UB = lambda_max(A_0) + sum_nu lambda_max(A_nu).
AffineModel diffusion_affine(std::size_t M, std::size_t d);

/// Deterministic test functions on R^d: "additive-fn", "rank-one-fn",
/// "multiquadric-fn" (c is the multiquadric shift).
std::function<double(const Vector&)> make_function(const std::string& name, std::size_t d, double c = 1.0);

const std::vector<std::string>& methods();
const std::vector<std::string>& generators();

struct RunOptions {
    std::string method;
    std::filesystem::path config;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

/// Runs one experiment and writes its artifacts atomically. Returns an ExitCode;
/// diagnostics go to `err`, progress (when verbose) to `log`.
int run(const RunOptions& options, std::ostream& log, std::ostream& err);

/// Per-rank (or per-iteration) ratios b/a of two reports with the same schema,
/// written as CSV to `out`. Returns kRegression when a ratio exceeds `factor`.
int compare(const std::filesystem::path& a, const std::filesystem::path& b, double factor, std::ostream& out,
            std::ostream& err);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace tensormor::bench
