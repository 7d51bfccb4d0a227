#include "tensormor/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "tensormor/error.hpp"

namespace tensormor {

namespace {

constexpr std::size_t kDefaultDenseCap = 10'000'000;

std::size_t initial_dense_cap() {
    if (const char* env = std::getenv("TENSORMOR_DENSE_CAP")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return kDefaultDenseCap;
}

std::atomic<std::size_t>& cap_storage() {
    static std::atomic<std::size_t> cap{initial_dense_cap()};
    return cap;
}

void validate_mode_set(const ModeSet& alpha, std::size_t order) {
    if (alpha.empty() || alpha.size() >= order) {
        throw InvalidArgument("mode subset must be a nonempty proper subset of the tensor modes");
    }
    std::vector<bool> seen(order, false);
    for (std::size_t m : alpha) {
        if (m >= order) throw InvalidArgument("mode index out of range in mode subset");
        if (seen[m]) throw InvalidArgument("duplicate mode in mode subset");
        seen[m] = true;
    }
}

// strides of a lexicographic (last fastest) layout
std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * shape[k];
    return s;
}

}  // namespace

std::size_t dense_cap() { return cap_storage().load(std::memory_order_relaxed); }

void set_dense_cap(std::size_t cap) { cap_storage().store(cap, std::memory_order_relaxed); }

void check_dense_cap(std::size_t entries, const char* what) {
    const std::size_t cap = dense_cap();
    if (entries > cap) {
        throw CapacityError(std::string(what) + ": dense materialization of " + std::to_string(entries) +
                                " entries exceeds cap " + std::to_string(cap),
                            entries, cap);
    }
}

std::size_t shape_numel(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) {
        if (s != 0 && n > std::numeric_limits<std::size_t>::max() / s) {
            return std::numeric_limits<std::size_t>::max();
        }
        n *= s;
    }
    return n;
}

namespace detail {

void check_finite(std::span<const double> data, const char* what) {
    for (double v : data) {
        if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite entry");
    }
}

}  // namespace detail

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
    if (shape_.empty()) throw InvalidArgument("tensor order must be at least 1");
    for (std::size_t s : shape_) {
        if (s == 0) throw InvalidArgument("mode sizes must be positive");
    }
    const std::size_t n = shape_numel(shape_);
    check_dense_cap(n, "DenseTensor");
    data_.assign(n, 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw InvalidArgument("tensor order must be at least 1");
    for (std::size_t s : shape_) {
        if (s == 0) throw InvalidArgument("mode sizes must be positive");
    }
    if (shape_numel(shape_) != data_.size()) throw InvalidArgument("data length does not match shape");
    detail::check_finite(data_, "DenseTensor");
}

DenseTensor DenseTensor::from_matrix(const Matrix& m) {
    RowMatrix rm = m;
    return DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                       std::vector<double>(rm.data(), rm.data() + rm.size()));
}

DenseTensor DenseTensor::from_vector(const Vector& v) {
    return DenseTensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

double DenseTensor::at(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw InvalidArgument("index order does not match tensor order");
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= shape_[k]) throw InvalidArgument("index out of range");
    }
    return data_[linear_index(idx)];
}

std::size_t DenseTensor::linear_index(std::span<const std::size_t> idx) const {
    std::size_t lin = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) lin = lin * shape_[k] + idx[k];
    return lin;
}

MultiIndex DenseTensor::multi_index(std::size_t linear) const {
    MultiIndex idx(shape_.size());
    for (std::size_t k = shape_.size(); k-- > 0;) {
        idx[k] = linear % shape_[k];
        linear /= shape_[k];
    }
    return idx;
}

Matrix DenseTensor::to_matrix() const {
    if (order() != 2) throw InvalidArgument("to_matrix requires an order-2 tensor");
    return Eigen::Map<const RowMatrix>(data_.data(), static_cast<Eigen::Index>(shape_[0]),
                                       static_cast<Eigen::Index>(shape_[1]));
}

Vector DenseTensor::to_vector() const {
    return Eigen::Map<const Vector>(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

double DenseTensor::norm() const { return to_vector().norm(); }

double DenseTensor::dot(const DenseTensor& other) const {
    if (shape_ != other.shape_) throw InvalidArgument("dot: shape mismatch");
    return std::inner_product(data_.begin(), data_.end(), other.data_.begin(), 0.0);
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
    if (shape_ != other.shape_) throw InvalidArgument("add: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
    if (shape_ != other.shape_) throw InvalidArgument("subtract: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

DenseTensor& DenseTensor::operator*=(double c) {
    for (double& v : data_) v *= c;
    return *this;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
DenseTensor operator*(double c, DenseTensor a) { return a *= c; }

ModeSet complement(const ModeSet& alpha, std::size_t order) {
    std::vector<bool> in(order, false);
    for (std::size_t m : alpha) {
        if (m < order) in[m] = true;
    }
    ModeSet rest;
    for (std::size_t m = 0; m < order; ++m) {
        if (!in[m]) rest.push_back(m);
    }
    return rest;
}

namespace {

// For each linear source index, the (row, col) it maps to.
struct UnfoldingMap {
    std::vector<std::size_t> row_stride;  // per source mode, contribution to row index
    std::vector<std::size_t> col_stride;
    std::size_t rows = 1;
    std::size_t cols = 1;
};

UnfoldingMap unfolding_map(const Shape& shape, const ModeSet& rows, const ModeSet& cols) {
    UnfoldingMap map;
    map.row_stride.assign(shape.size(), 0);
    map.col_stride.assign(shape.size(), 0);
    for (std::size_t k = rows.size(); k-- > 0;) {
        map.row_stride[rows[k]] = map.rows;
        map.rows *= shape[rows[k]];
    }
    for (std::size_t k = cols.size(); k-- > 0;) {
        map.col_stride[cols[k]] = map.cols;
        map.cols *= shape[cols[k]];
    }
    return map;
}

template <typename Fn>
void for_each_index(const Shape& shape, Fn&& fn) {
    const std::size_t d = shape.size();
    MultiIndex idx(d, 0);
    const std::size_t n = shape_numel(shape);
    for (std::size_t lin = 0; lin < n; ++lin) {
        fn(lin, idx);
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < shape[k]) break;
            idx[k] = 0;
        }
    }
}

}  // namespace

Matricization matricize(const DenseTensor& t, const ModeSet& row_modes) {
    validate_mode_set(row_modes, t.order());
    Matricization out;
    out.row_modes = row_modes;
    out.col_modes = complement(row_modes, t.order());
    out.source_shape = t.shape();
    const UnfoldingMap map = unfolding_map(t.shape(), out.row_modes, out.col_modes);
    out.matrix.resize(static_cast<Eigen::Index>(map.rows), static_cast<Eigen::Index>(map.cols));
    const auto data = t.data();
    for_each_index(t.shape(), [&](std::size_t lin, const MultiIndex& idx) {
        std::size_t r = 0;
        std::size_t c = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            r += idx[k] * map.row_stride[k];
            c += idx[k] * map.col_stride[k];
        }
        out.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[lin];
    });
    return out;
}

DenseTensor dematricize(const Matricization& m) {
    DenseTensor t(m.source_shape);
    const UnfoldingMap map = unfolding_map(m.source_shape, m.row_modes, m.col_modes);
    if (static_cast<std::size_t>(m.matrix.rows()) != map.rows || static_cast<std::size_t>(m.matrix.cols()) != map.cols) {
        throw InvalidArgument("dematricize: matrix shape inconsistent with source shape");
    }
    auto data = t.data();
    for_each_index(m.source_shape, [&](std::size_t lin, const MultiIndex& idx) {
        std::size_t r = 0;
        std::size_t c = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            r += idx[k] * map.row_stride[k];
            c += idx[k] * map.col_stride[k];
        }
        data[lin] = m.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    });
    detail::check_finite(data, "dematricize");
    return t;
}

DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Matrix& op) {
    if (mode >= t.order()) throw InvalidArgument("mode_product: mode out of range");
    if (static_cast<std::size_t>(op.cols()) != t.size(mode)) {
        throw InvalidArgument("mode_product: operator columns do not match mode size");
    }
    Shape out_shape = t.shape();
    out_shape[mode] = static_cast<std::size_t>(op.rows());
    const std::vector<std::size_t> st = strides_of(t.shape());
    const std::size_t inner = st[mode];
    const std::size_t outer = t.numel() / (inner * t.size(mode));
    const std::size_t n_in = t.size(mode);
    const std::size_t n_out = out_shape[mode];
    check_dense_cap(outer * n_out * inner, "mode_product");
    std::vector<double> out(outer * n_out * inner, 0.0);
    const auto src = t.data();
    // view each outer slab as an (n_in x inner) row-major matrix
    for (std::size_t o = 0; o < outer; ++o) {
        Eigen::Map<const RowMatrix> in_slab(src.data() + o * n_in * inner, static_cast<Eigen::Index>(n_in),
                                            static_cast<Eigen::Index>(inner));
        Eigen::Map<RowMatrix> out_slab(out.data() + o * n_out * inner, static_cast<Eigen::Index>(n_out),
                                       static_cast<Eigen::Index>(inner));
        out_slab.noalias() = op * in_slab;
    }
    return DenseTensor(std::move(out_shape), std::move(out));
}

namespace detail {

namespace {
template <typename T>
void write_le(std::ostream& out, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts not supported");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw InvalidArgument("truncated binary tensor stream");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}
}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, v); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return read_le<double>(in); }

void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4];
    if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
        throw InvalidArgument(std::string("bad magic, expected ") + magic);
    }
}

}  // namespace detail

namespace {
constexpr std::uint32_t kLrtfVersion = 1;
}

void write_lrtf(std::ostream& out, const DenseTensor& t) {
    detail::write_magic(out, "LRTF");
    detail::write_u32(out, kLrtfVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(t.order()));
    for (std::size_t s : t.shape()) detail::write_u64(out, s);
    for (double v : t.data()) detail::write_f64(out, v);
    if (!out) throw Error("failed writing LRTF stream");
}

DenseTensor read_lrtf(std::istream& in) {
    detail::expect_magic(in, "LRTF");
    const std::uint32_t version = detail::read_u32(in);
    if (version != kLrtfVersion) throw InvalidArgument("unsupported LRTF version " + std::to_string(version));
    const std::uint32_t d = detail::read_u32(in);
    if (d == 0) throw InvalidArgument("LRTF order must be at least 1");
    Shape shape(d);
    for (auto& s : shape) s = static_cast<std::size_t>(detail::read_u64(in));
    const std::size_t n = shape_numel(shape);
    check_dense_cap(n, "read_lrtf");
    std::vector<double> data(n);
    for (auto& v : data) v = detail::read_f64(in);
    return DenseTensor(std::move(shape), std::move(data));
}

void save_lrtf(const std::filesystem::path& path, const DenseTensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_lrtf(out, t);
}

DenseTensor load_lrtf(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    return read_lrtf(in);
}

}  // namespace tensormor
