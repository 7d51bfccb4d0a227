#include "tensormor/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <Eigen/QR>

#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"

namespace tensormor {

namespace {

using ConstRowMap = Eigen::Map<const RowMatrix>;
using SliceMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

struct CoreDims {
    std::size_t left;
    std::size_t n;
    std::size_t right;
};

CoreDims dims(const DenseTensor& core) { return {core.size(0), core.size(1), core.size(2)}; }

// (r0 * n) x r1 view; the same memory read as r0 x (n * r1) is the right unfolding
ConstRowMap left_unfold(const DenseTensor& core) {
    const auto d = dims(core);
    return ConstRowMap(core.data().data(), ix(d.left * d.n), ix(d.right));
}

ConstRowMap right_unfold(const DenseTensor& core) {
    const auto d = dims(core);
    return ConstRowMap(core.data().data(), ix(d.left), ix(d.n * d.right));
}

// r0 x r1 slice at mode index i
SliceMap slice(const DenseTensor& core, std::size_t i) {
    const auto d = dims(core);
    return SliceMap(core.data().data() + i * d.right, ix(d.left), ix(d.right), Eigen::OuterStride<>(ix(d.n * d.right)));
}

DenseTensor make_core(std::size_t r0, std::size_t n, std::size_t r1, const RowMatrix& m) {
    return DenseTensor({r0, n, r1}, std::vector<double>(m.data(), m.data() + m.size()));
}

void check_index(const Shape& shape, std::span<const std::size_t> idx) {
    if (idx.size() != shape.size()) throw InvalidArgument("index order does not match tensor order");
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= shape[k]) throw InvalidArgument("index out of range");
    }
}

std::size_t rank_cap(const std::optional<RankTuple>& max_ranks, std::size_t k) {
    if (!max_ranks || k >= max_ranks->size()) return static_cast<std::size_t>(-1);
    return std::max<std::size_t>(1, (*max_ranks)[k]);
}

struct ThinQr {
    Matrix q;
    Matrix r;
};

ThinQr thin_qr(const Matrix& a) {
    const Eigen::Index k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Matrix> qr(a);
    ThinQr out;
    out.q = qr.householderQ() * Matrix::Identity(a.rows(), k);
    out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CPTensor
// ---------------------------------------------------------------------------

CPTensor::CPTensor(Vector weights, std::vector<Matrix> factors) : weights_(std::move(weights)), factors_(std::move(factors)) {
    if (factors_.empty()) throw InvalidArgument("CP tensor must have at least one mode");
    for (const auto& f : factors_) {
        if (f.cols() != weights_.size()) throw InvalidArgument("CP factor column count must equal the rank");
        if (f.rows() == 0) throw InvalidArgument("CP mode sizes must be positive");
        if (!f.allFinite()) throw InvalidArgument("CP factor has non-finite entries");
    }
    if (!weights_.allFinite()) throw InvalidArgument("CP weights must be finite");
}

CPTensor CPTensor::zeros(const Shape& shape) {
    std::vector<Matrix> f;
    for (std::size_t n : shape) f.emplace_back(ix(n), 0);
    return CPTensor(Vector(0), std::move(f));
}

CPTensor CPTensor::from_terms(const Shape& shape, std::span<const double> weights, std::span<const std::vector<Vector>> terms) {
    if (weights.size() != terms.size()) throw InvalidArgument("CP from_terms: weight count != term count");
    CPTensor out = zeros(shape);
    for (std::size_t i = 0; i < terms.size(); ++i) out.push_back(weights[i], terms[i]);
    return out;
}

Shape CPTensor::shape() const {
    Shape s;
    for (const auto& f : factors_) s.push_back(static_cast<std::size_t>(f.rows()));
    return s;
}

void CPTensor::push_back(double weight, std::span<const Vector> vectors) {
    if (vectors.size() != factors_.size()) throw InvalidArgument("CP term must supply one vector per mode");
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        if (vectors[k].size() != factors_[k].rows()) throw InvalidArgument("CP term vector length mismatch");
    }
    const Eigen::Index r = weights_.size();
    weights_.conservativeResize(r + 1);
    weights_(r) = weight;
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        factors_[k].conservativeResize(Eigen::NoChange, r + 1);
        factors_[k].col(r) = vectors[k];
    }
}

CPTensor CPTensor::normalized() const {
    Vector w = weights_;
    std::vector<Matrix> f = factors_;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        for (auto& m : f) {
            const double nrm = m.col(i).norm();
            if (nrm > 0.0) {
                m.col(i) /= nrm;
                w(i) *= nrm;
            } else {
                w(i) = 0.0;
            }
        }
    }
    return CPTensor(std::move(w), std::move(f));
}

double eval(const CPTensor& t, std::span<const std::size_t> idx) {
    check_index(t.shape(), idx);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < t.weights().size(); ++i) {
        double p = t.weights()(i);
        for (std::size_t k = 0; k < t.order(); ++k) p *= t.factor(k)(ix(idx[k]), i);
        sum += p;
    }
    return sum;
}

DenseTensor to_dense(const CPTensor& t) {
    const Shape shape = t.shape();
    const std::size_t n = shape_numel(shape);
    check_dense_cap(n, "to_dense(CP)");
    Vector acc = Vector::Zero(ix(n));
    for (Eigen::Index i = 0; i < t.weights().size(); ++i) {
        Vector v = t.factor(0).col(i);
        for (std::size_t k = 1; k < t.order(); ++k) {
            const Vector& f = t.factor(k).col(i);
            Vector next(v.size() * f.size());
            for (Eigen::Index a = 0; a < v.size(); ++a) next.segment(a * f.size(), f.size()) = v(a) * f;
            v = std::move(next);
        }
        acc += t.weights()(i) * v;
    }
    return DenseTensor(shape, std::vector<double>(acc.data(), acc.data() + acc.size()));
}

std::size_t storage_count(const CPTensor& t) {
    std::size_t s = t.rank();
    for (std::size_t n : t.shape()) s += n * t.rank();
    return s;
}

double cp_dot(const CPTensor& a, const CPTensor& b) {
    if (a.shape() != b.shape()) throw InvalidArgument("cp_dot: shape mismatch");
    Matrix h = a.weights() * b.weights().transpose();
    for (std::size_t k = 0; k < a.order(); ++k) h = h.cwiseProduct(a.factor(k).transpose() * b.factor(k));
    return h.sum();
}

double cp_norm(const CPTensor& a) { return std::sqrt(std::max(0.0, cp_dot(a, a))); }

// ---------------------------------------------------------------------------
// TuckerTensor
// ---------------------------------------------------------------------------

TuckerTensor::TuckerTensor(DenseTensor core, std::vector<Matrix> factors) : core_(std::move(core)), factors_(std::move(factors)) {
    if (core_.order() != factors_.size()) throw InvalidArgument("Tucker core order must equal factor count");
    for (std::size_t k = 0; k < factors_.size(); ++k) {
        const Matrix& f = factors_[k];
        if (static_cast<std::size_t>(f.cols()) != core_.size(k)) {
            throw InvalidArgument("Tucker factor columns must match core mode size");
        }
        if (f.rows() < f.cols()) throw InvalidArgument("Tucker rank exceeds mode size");
        const Matrix gram = f.transpose() * f;
        if ((gram - Matrix::Identity(f.cols(), f.cols())).cwiseAbs().maxCoeff() > 1e-10) {
            throw InvalidArgument("Tucker factors must have orthonormal columns");
        }
    }
}

Shape TuckerTensor::shape() const {
    Shape s;
    for (const auto& f : factors_) s.push_back(static_cast<std::size_t>(f.rows()));
    return s;
}

double eval(const TuckerTensor& t, std::span<const std::size_t> idx) {
    check_index(t.shape(), idx);
    // contract the core with one factor row per mode, last mode first
    std::vector<double> cur(t.core().data().begin(), t.core().data().end());
    Shape cs = t.core().shape();
    for (std::size_t k = t.order(); k-- > 0;) {
        const std::size_t rk = cs[k];
        const std::size_t outer = cur.size() / rk;
        std::vector<double> next(outer, 0.0);
        for (std::size_t o = 0; o < outer; ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < rk; ++j) s += cur[o * rk + j] * t.factors()[k](ix(idx[k]), ix(j));
            next[o] = s;
        }
        cur = std::move(next);
    }
    return cur[0];
}

DenseTensor to_dense(const TuckerTensor& t) {
    check_dense_cap(shape_numel(t.shape()), "to_dense(Tucker)");
    DenseTensor out = t.core();
    for (std::size_t k = 0; k < t.order(); ++k) out = mode_product(out, k, t.factors()[k]);
    return out;
}

std::size_t storage_count(const TuckerTensor& t) {
    std::size_t s = t.core().numel();
    for (const auto& f : t.factors()) s += static_cast<std::size_t>(f.size());
    return s;
}

TuckerTensor hosvd(const DenseTensor& t, const RankTuple& ranks) {
    if (ranks.size() != t.order()) throw InvalidArgument("hosvd: rank tuple length must equal tensor order");
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < t.order(); ++k) {
        if (ranks[k] == 0 || ranks[k] > t.size(k)) throw InvalidArgument("hosvd: rank exceeds mode size");
        Matrix unfolding;
        if (t.order() == 1) {
            unfolding = t.to_vector();
        } else {
            unfolding = matricize(t, {k}).matrix;
        }
        SvdResult s = svd(unfolding);
        Matrix u(ix(t.size(k)), ix(ranks[k]));
        const auto have = std::min<Eigen::Index>(s.left.cols(), ix(ranks[k]));
        u.leftCols(have) = s.left.leftCols(have);
        // complete the basis when the unfolding has fewer columns than the rank
        for (Eigen::Index c = have; c < ix(ranks[k]); ++c) {
            for (Eigen::Index e = 0;; ++e) {
                Vector cand = Vector::Unit(u.rows(), e);
                if (auto q = orthonormalize_against(u.leftCols(c), cand)) {
                    u.col(c) = *q;
                    break;
                }
            }
        }
        canonicalize_signs(u);
        factors.push_back(std::move(u));
    }
    DenseTensor core = t;
    for (std::size_t k = 0; k < t.order(); ++k) core = mode_product(core, k, factors[k].transpose());
    return TuckerTensor(std::move(core), std::move(factors));
}

std::size_t alpha_rank(const DenseTensor& t, const ModeSet& alpha, double tol) {
    if (tol < 0) throw InvalidArgument("alpha_rank: tolerance must be non-negative");
    const Matricization m = matricize(t, alpha);
    return threshold_rank(svd(m.matrix).singular_values, tol);
}

// ---------------------------------------------------------------------------
// TTTensor
// ---------------------------------------------------------------------------

TTTensor::TTTensor(std::vector<DenseTensor> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw InvalidArgument("TT tensor needs at least one core");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        if (cores_[k].order() != 3) throw InvalidArgument("TT cores must be order-3 tensors");
        if (k > 0 && cores_[k].size(0) != cores_[k - 1].size(2)) {
            throw InvalidArgument("TT core ranks do not chain at core " + std::to_string(k));
        }
    }
    if (cores_.front().size(0) != 1 || cores_.back().size(2) != 1) {
        throw InvalidArgument("TT boundary ranks must be 1");
    }
}

TTTensor TTTensor::zeros(const Shape& shape) {
    if (shape.empty()) throw InvalidArgument("TT tensor needs at least one mode");
    std::vector<DenseTensor> cores;
    for (std::size_t n : shape) cores.emplace_back(Shape{1, n, 1});
    return TTTensor(std::move(cores));
}

TTTensor TTTensor::rank_one(std::span<const Vector> vectors) {
    std::vector<DenseTensor> cores;
    for (const auto& v : vectors) {
        cores.emplace_back(Shape{1, static_cast<std::size_t>(v.size()), 1},
                           std::vector<double>(v.data(), v.data() + v.size()));
    }
    return TTTensor(std::move(cores));
}

TTTensor TTTensor::from_cp(const CPTensor& cp) {
    const std::size_t d = cp.order();
    const std::size_t r = cp.rank();
    if (r == 0) return zeros(cp.shape());
    if (d == 1) {
        Vector v = cp.factor(0) * cp.weights();
        return rank_one(std::span<const Vector>(&v, 1));
    }
    std::vector<DenseTensor> cores;
    for (std::size_t k = 0; k < d; ++k) {
        const Matrix& f = cp.factor(k);
        const std::size_t n = static_cast<std::size_t>(f.rows());
        const std::size_t r0 = k == 0 ? 1 : r;
        const std::size_t r1 = k + 1 == d ? 1 : r;
        DenseTensor core({r0, n, r1});
        auto data = core.data();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < r; ++t) {
                const std::size_t a = k == 0 ? 0 : t;
                const std::size_t b = k + 1 == d ? 0 : t;
                double v = f(ix(i), ix(t));
                if (k == 0) v *= cp.weights()(ix(t));
                data[(a * n + i) * r1 + b] = v;
            }
        }
        cores.push_back(std::move(core));
    }
    return TTTensor(std::move(cores));
}

Shape TTTensor::shape() const {
    Shape s;
    for (const auto& c : cores_) s.push_back(c.size(1));
    return s;
}

RankTuple TTTensor::ranks() const {
    RankTuple r;
    for (std::size_t k = 0; k + 1 < cores_.size(); ++k) r.push_back(cores_[k].size(2));
    return r;
}

std::size_t TTTensor::rank(std::size_t k) const {
    if (k == 0) return 1;
    if (k > cores_.size()) throw InvalidArgument("TT rank index out of range");
    return cores_[k - 1].size(2);
}

std::size_t TTTensor::max_rank() const {
    std::size_t m = 1;
    for (std::size_t r : ranks()) m = std::max(m, r);
    return m;
}

double eval(const TTTensor& t, std::span<const std::size_t> idx) {
    check_index(t.shape(), idx);
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < t.order(); ++k) v = v * slice(t.core(k), idx[k]);
    return v(0);
}

DenseTensor to_dense(const TTTensor& t) {
    const Shape shape = t.shape();
    check_dense_cap(shape_numel(shape), "to_dense(TT)");
    RowMatrix acc = RowMatrix::Ones(1, 1);
    for (std::size_t k = 0; k < t.order(); ++k) {
        const auto d = dims(t.core(k));
        RowMatrix next = acc * right_unfold(t.core(k));
        acc = Eigen::Map<RowMatrix>(next.data(), next.rows() * ix(d.n), ix(d.right));
    }
    return DenseTensor(shape, std::vector<double>(acc.data(), acc.data() + acc.size()));
}

std::size_t storage_count(const TTTensor& t) {
    std::size_t s = 0;
    for (const auto& c : t.cores()) s += c.numel();
    return s;
}

TTTensor tt_svd(const DenseTensor& t, double tol, const std::optional<RankTuple>& max_ranks) {
    if (!(tol >= 0.0)) throw InvalidArgument("tt_svd: tolerance must be non-negative");
    const std::size_t d = t.order();
    const Shape& shape = t.shape();
    if (d == 1) {
        return TTTensor({DenseTensor({1, shape[0], 1}, std::vector<double>(t.data().begin(), t.data().end()))});
    }
    const double budget = tol * t.norm() / std::sqrt(static_cast<double>(d - 1));
    std::vector<DenseTensor> cores;
    std::size_t rest = t.numel() / shape[0];
    std::size_t r_prev = 1;
    RowMatrix c = ConstRowMap(t.data().data(), ix(shape[0]), ix(rest));
    for (std::size_t k = 0; k + 1 < d; ++k) {
        // c is (r_prev * n_k) x rest_k
        SvdResult s = svd(Matrix(c));
        std::size_t r = truncation_rank(s.singular_values, budget);
        r = std::min({std::max<std::size_t>(r, 1), rank_cap(max_ranks, k), s.size()});
        RowMatrix u = s.left.leftCols(ix(r));
        cores.push_back(make_core(r_prev, shape[k], r, u));
        RowMatrix remainder = s.singular_values.head(ix(r)).asDiagonal() * s.right.leftCols(ix(r)).transpose();
        rest /= shape[k + 1];
        r_prev = r;
        c = Eigen::Map<RowMatrix>(remainder.data(), ix(r * shape[k + 1]), ix(rest));
    }
    cores.push_back(make_core(r_prev, shape[d - 1], 1, c));
    return TTTensor(std::move(cores));
}

TTTensor right_orthogonalize(const TTTensor& t) {
    std::vector<DenseTensor> cores = t.cores();
    for (std::size_t k = cores.size(); k-- > 1;) {
        const auto d = dims(cores[k]);
        // X = R^T Q^T with X^T = Q R
        ThinQr qr = thin_qr(Matrix(right_unfold(cores[k]).transpose()));
        const std::size_t r_new = static_cast<std::size_t>(qr.q.cols());
        RowMatrix qt = qr.q.transpose();
        cores[k] = make_core(r_new, d.n, d.right, qt);
        const auto dp = dims(cores[k - 1]);
        RowMatrix prev = left_unfold(cores[k - 1]) * qr.r.transpose();
        cores[k - 1] = make_core(dp.left, dp.n, r_new, prev);
    }
    return TTTensor(std::move(cores));
}

TTTensor left_orthogonalize(const TTTensor& t) {
    std::vector<DenseTensor> cores = t.cores();
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) {
        const auto d = dims(cores[k]);
        ThinQr qr = thin_qr(Matrix(left_unfold(cores[k])));
        const std::size_t r_new = static_cast<std::size_t>(qr.q.cols());
        cores[k] = make_core(d.left, d.n, r_new, RowMatrix(qr.q));
        const auto dn = dims(cores[k + 1]);
        RowMatrix next = qr.r * right_unfold(cores[k + 1]);
        cores[k + 1] = make_core(r_new, dn.n, dn.right, next);
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_round(const TTTensor& t, double tol, const std::optional<RankTuple>& max_ranks) {
    if (!(tol >= 0.0)) throw InvalidArgument("tt_round: tolerance must be non-negative");
    const std::size_t d = t.order();
    if (d == 1) return t;
    TTTensor ortho = right_orthogonalize(t);
    std::vector<DenseTensor> cores = ortho.cores();
    const double nrm = cores[0].norm();
    const double budget = tol * nrm / std::sqrt(static_cast<double>(d - 1));
    for (std::size_t k = 0; k + 1 < d; ++k) {
        const auto dk = dims(cores[k]);
        SvdResult s = svd(Matrix(left_unfold(cores[k])));
        std::size_t r = truncation_rank(s.singular_values, budget);
        r = std::min({std::max<std::size_t>(r, 1), rank_cap(max_ranks, k), s.size()});
        cores[k] = make_core(dk.left, dk.n, r, RowMatrix(s.left.leftCols(ix(r))));
        const auto dn = dims(cores[k + 1]);
        RowMatrix carry = s.singular_values.head(ix(r)).asDiagonal() * s.right.leftCols(ix(r)).transpose();
        RowMatrix next = carry * right_unfold(cores[k + 1]);
        cores[k + 1] = make_core(r, dn.n, dn.right, next);
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_add(const TTTensor& a, const TTTensor& b) {
    if (a.shape() != b.shape()) throw InvalidArgument("tt_add: shape mismatch");
    const std::size_t d = a.order();
    if (d == 1) {
        return TTTensor({a.core(0) + b.core(0)});
    }
    std::vector<DenseTensor> cores;
    for (std::size_t k = 0; k < d; ++k) {
        const auto da = dims(a.core(k));
        const auto db = dims(b.core(k));
        const std::size_t r0 = k == 0 ? 1 : da.left + db.left;
        const std::size_t r1 = k + 1 == d ? 1 : da.right + db.right;
        const std::size_t a_off0 = 0;
        const std::size_t b_off0 = k == 0 ? 0 : da.left;
        const std::size_t a_off1 = 0;
        const std::size_t b_off1 = k + 1 == d ? 0 : da.right;
        DenseTensor core({r0, da.n, r1});
        auto out = core.data();
        const auto pa = a.core(k).data();
        const auto pb = b.core(k).data();
        for (std::size_t x = 0; x < da.left; ++x)
            for (std::size_t i = 0; i < da.n; ++i)
                for (std::size_t y = 0; y < da.right; ++y)
                    out[((x + a_off0) * da.n + i) * r1 + y + a_off1] += pa[(x * da.n + i) * da.right + y];
        for (std::size_t x = 0; x < db.left; ++x)
            for (std::size_t i = 0; i < db.n; ++i)
                for (std::size_t y = 0; y < db.right; ++y)
                    out[((x + b_off0) * db.n + i) * r1 + y + b_off1] += pb[(x * db.n + i) * db.right + y];
        cores.push_back(std::move(core));
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_scale(const TTTensor& a, double c) {
    std::vector<DenseTensor> cores = a.cores();
    cores[0] *= c;
    return TTTensor(std::move(cores));
}

TTTensor tt_axpy(const TTTensor& a, double c, const TTTensor& b) { return tt_add(a, tt_scale(b, c)); }

double tt_dot(const TTTensor& a, const TTTensor& b) {
    if (a.shape() != b.shape()) throw InvalidArgument("tt_dot: shape mismatch");
    Matrix w = Matrix::Ones(1, 1);
    for (std::size_t k = 0; k < a.order(); ++k) {
        const auto da = dims(a.core(k));
        const auto db = dims(b.core(k));
        Matrix next = Matrix::Zero(ix(da.right), ix(db.right));
        for (std::size_t i = 0; i < da.n; ++i) next.noalias() += slice(a.core(k), i).transpose() * w * slice(b.core(k), i);
        w = std::move(next);
    }
    return w(0, 0);
}

double tt_norm(const TTTensor& a) { return right_orthogonalize(a).core(0).norm(); }

Vector tt_partial_contract(const TTTensor& t, std::span<const Vector> vectors, std::size_t free_mode) {
    const std::size_t d = t.order();
    if (vectors.size() != d || free_mode >= d) throw InvalidArgument("tt_partial_contract: need one vector per mode");
    Eigen::RowVectorXd left = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < free_mode; ++k) {
        const auto dk = dims(t.core(k));
        if (static_cast<std::size_t>(vectors[k].size()) != dk.n) throw InvalidArgument("tt_partial_contract: length mismatch");
        Matrix m = Matrix::Zero(ix(dk.left), ix(dk.right));
        for (std::size_t i = 0; i < dk.n; ++i) m += vectors[k](ix(i)) * slice(t.core(k), i);
        left = left * m;
    }
    Vector right = Vector::Ones(1);
    for (std::size_t k = d; k-- > free_mode + 1;) {
        const auto dk = dims(t.core(k));
        if (static_cast<std::size_t>(vectors[k].size()) != dk.n) throw InvalidArgument("tt_partial_contract: length mismatch");
        Matrix m = Matrix::Zero(ix(dk.left), ix(dk.right));
        for (std::size_t i = 0; i < dk.n; ++i) m += vectors[k](ix(i)) * slice(t.core(k), i);
        right = m * right;
    }
    const auto df = dims(t.core(free_mode));
    Vector out(ix(df.n));
    for (std::size_t i = 0; i < df.n; ++i) out(ix(i)) = (left * slice(t.core(free_mode), i) * right)(0);
    return out;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {
constexpr std::uint32_t kFormatVersion = 1;

void write_header(std::ostream& out, const char (&magic)[5], const Shape& shape) {
    detail::write_magic(out, magic);
    detail::write_u32(out, kFormatVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t n : shape) detail::write_u64(out, n);
}

Shape read_header(std::istream& in, const char (&magic)[5]) {
    detail::expect_magic(in, magic);
    const std::uint32_t version = detail::read_u32(in);
    if (version != kFormatVersion) throw InvalidArgument(std::string(magic) + ": unsupported version");
    const std::uint32_t d = detail::read_u32(in);
    if (d == 0) throw InvalidArgument(std::string(magic) + ": order must be at least 1");
    Shape shape(d);
    for (auto& n : shape) n = static_cast<std::size_t>(detail::read_u64(in));
    return shape;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    fn(out);
}

template <typename Fn>
auto read_file(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    return fn(in);
}
}  // namespace

void write_lrtt(std::ostream& out, const TTTensor& t) {
    write_header(out, "LRTT", t.shape());
    for (std::size_t r : t.ranks()) detail::write_u64(out, r);
    for (const auto& c : t.cores()) write_lrtf(out, c);
}

TTTensor read_lrtt(std::istream& in) {
    const Shape shape = read_header(in, "LRTT");
    RankTuple ranks(shape.size() - 1);
    for (auto& r : ranks) r = static_cast<std::size_t>(detail::read_u64(in));
    std::vector<DenseTensor> cores;
    for (std::size_t k = 0; k < shape.size(); ++k) cores.push_back(read_lrtf(in));
    TTTensor t(std::move(cores));
    if (t.shape() != shape || t.ranks() != ranks) throw InvalidArgument("LRTT: header does not match cores");
    return t;
}

void write_lrcp(std::ostream& out, const CPTensor& t) {
    write_header(out, "LRCP", t.shape());
    detail::write_u64(out, t.rank());
    if (t.rank() == 0) return;
    write_lrtf(out, DenseTensor::from_vector(t.weights()));
    for (const auto& f : t.factors()) write_lrtf(out, DenseTensor::from_matrix(f));
}

CPTensor read_lrcp(std::istream& in) {
    const Shape shape = read_header(in, "LRCP");
    const auto r = static_cast<std::size_t>(detail::read_u64(in));
    if (r == 0) return CPTensor::zeros(shape);
    Vector w = read_lrtf(in).to_vector();
    std::vector<Matrix> f;
    for (std::size_t k = 0; k < shape.size(); ++k) f.push_back(read_lrtf(in).to_matrix());
    CPTensor t(std::move(w), std::move(f));
    if (t.shape() != shape || t.rank() != r) throw InvalidArgument("LRCP: header does not match payload");
    return t;
}

void write_lrtk(std::ostream& out, const TuckerTensor& t) {
    write_header(out, "LRTK", t.shape());
    for (std::size_t r : t.ranks()) detail::write_u64(out, r);
    write_lrtf(out, t.core());
    for (const auto& f : t.factors()) write_lrtf(out, DenseTensor::from_matrix(f));
}

TuckerTensor read_lrtk(std::istream& in) {
    const Shape shape = read_header(in, "LRTK");
    RankTuple ranks(shape.size());
    for (auto& r : ranks) r = static_cast<std::size_t>(detail::read_u64(in));
    DenseTensor core = read_lrtf(in);
    std::vector<Matrix> f;
    for (std::size_t k = 0; k < shape.size(); ++k) f.push_back(read_lrtf(in).to_matrix());
    TuckerTensor t(std::move(core), std::move(f));
    if (t.shape() != shape || t.ranks() != ranks) throw InvalidArgument("LRTK: header does not match payload");
    return t;
}

void save(const std::filesystem::path& path, const TTTensor& t) {
    write_file(path, [&](std::ostream& o) { write_lrtt(o, t); });
}
void save(const std::filesystem::path& path, const CPTensor& t) {
    write_file(path, [&](std::ostream& o) { write_lrcp(o, t); });
}
void save(const std::filesystem::path& path, const TuckerTensor& t) {
    write_file(path, [&](std::ostream& o) { write_lrtk(o, t); });
}
TTTensor load_tt(const std::filesystem::path& path) {
    return read_file(path, [](std::istream& i) { return read_lrtt(i); });
}
CPTensor load_cp(const std::filesystem::path& path) {
    return read_file(path, [](std::istream& i) { return read_lrcp(i); });
}
TuckerTensor load_tucker(const std::filesystem::path& path) {
    return read_file(path, [](std::istream& i) { return read_lrtk(i); });
}

}  // namespace tensormor
