#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace tensormor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<std::size_t>;
using MultiIndex = std::vector<std::size_t>;

/// Ordered subset of 0-based mode indices.
using ModeSet = std::vector<std::size_t>;

/// Maximum number of entries any dense materialization may allocate.
/// Defaults to 10^7; the TENSORMOR_DENSE_CAP environment variable overrides it.
std::size_t dense_cap();
void set_dense_cap(std::size_t cap);
/// Throws CapacityError when `entries` exceeds dense_cap().
void check_dense_cap(std::size_t entries, const char* what);

std::size_t shape_numel(std::span<const std::size_t> shape);

/// Order-d array of finite doubles, lexicographic layout with the last mode
/// varying fastest.
class DenseTensor {
public:
    DenseTensor() = default;
    /// Zero-filled tensor.
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, std::vector<double> data);

    static DenseTensor from_matrix(const Matrix& m);
    static DenseTensor from_vector(const Vector& v);

    std::size_t order() const noexcept { return shape_.size(); }
    const Shape& shape() const noexcept { return shape_; }
    std::size_t size(std::size_t mode) const { return shape_.at(mode); }
    std::size_t numel() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double operator()(std::span<const std::size_t> idx) const { return data_[linear_index(idx)]; }
    double& operator()(std::span<const std::size_t> idx) { return data_[linear_index(idx)]; }
    double at(std::span<const std::size_t> idx) const;

    std::size_t linear_index(std::span<const std::size_t> idx) const;
    MultiIndex multi_index(std::size_t linear) const;

    /// Order-2 view as an Eigen matrix (copy).
    Matrix to_matrix() const;
    /// Flattened data as an Eigen vector (copy).
    Vector to_vector() const;

    double norm() const;
    double dot(const DenseTensor& other) const;

    DenseTensor& operator+=(const DenseTensor& other);
    DenseTensor& operator-=(const DenseTensor& other);
    DenseTensor& operator*=(double c);

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);
DenseTensor operator*(double c, DenseTensor a);

/// Complementary mode set of `alpha` within {0,...,order-1}, in increasing order.
ModeSet complement(const ModeSet& alpha, std::size_t order);

struct Matricization {
    ModeSet row_modes;
    ModeSet col_modes;
    Shape source_shape;
    Matrix matrix;
};

/// Order-two unfolding grouping `row_modes` against the remaining modes.
/// Row and column indices are lexicographic within each group in the order
/// the modes are listed.
Matricization matricize(const DenseTensor& t, const ModeSet& row_modes);
/// Inverse of matricize.
DenseTensor dematricize(const Matricization& m);

/// Mode-`mode` product: result(..., i, ...) = sum_j op(i, j) t(..., j, ...).
DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Matrix& op);

/// Binary "LRTF" tensor file format.
void write_lrtf(std::ostream& out, const DenseTensor& t);
DenseTensor read_lrtf(std::istream& in);
void save_lrtf(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor load_lrtf(const std::filesystem::path& path);

namespace detail {
// little-endian primitive IO shared by the low-rank format serializers
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
void write_magic(std::ostream& out, const char (&magic)[5]);
void expect_magic(std::istream& in, const char (&magic)[5]);
void check_finite(std::span<const double> data, const char* what);
}  // namespace detail

}  // namespace tensormor
