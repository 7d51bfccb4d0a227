#include "tensormor/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "json_io.hpp"
#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"

namespace tensormor {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

// z = [a_1 s; ...; a_L s; -b_1; ...; -b_R]
Vector stacked(const Vector& s, const Vector& a, const Vector& b) {
    const Eigen::Index m = s.size();
    Vector z(a.size() * m + b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) z.segment(i * m, m) = a(i) * s;
    z.tail(b.size()) = -b;
    return z;
}

}  // namespace

Matrix ReducedModel::G(std::size_t i, std::size_t j) const {
    if (i >= operator_terms() || j >= operator_terms()) throw InvalidArgument("G: term index out of range");
    const Eigen::Index m = idx(m_);
    return gram_.block(idx(i) * m, idx(j) * m, m, m);
}

Vector ReducedModel::h(std::size_t i, std::size_t j) const {
    if (i >= operator_terms() || j >= rhs_terms()) throw InvalidArgument("h: term index out of range");
    const Eigen::Index m = idx(m_);
    return gram_.block(idx(i) * m, idx(operator_terms()) * m + idx(j), m, 1);
}

double ReducedModel::bb(std::size_t i, std::size_t j) const {
    if (i >= rhs_terms() || j >= rhs_terms()) throw InvalidArgument("bb: term index out of range");
    const Eigen::Index off = idx(operator_terms() * m_);
    return gram_(off + idx(i), off + idx(j));
}

Vector ReducedModel::operator_coefficients(const Vector& xi) const {
    Vector a(idx(op_coeffs_.size()));
    for (std::size_t i = 0; i < op_coeffs_.size(); ++i) a(idx(i)) = op_coeffs_[i](xi);
    return a;
}

Vector ReducedModel::rhs_coefficients(const Vector& xi) const {
    Vector b(idx(rhs_coeffs_.size()));
    for (std::size_t i = 0; i < rhs_coeffs_.size(); ++i) b(idx(i)) = rhs_coeffs_[i](xi);
    return b;
}

const Matrix& ReducedModel::basis() const {
    online_probe::note_full_order_touch();
    return basis_;
}

ReducedModel build_reduced(const AffineModel& model, const Subspace& space, const InnerProduct& residual_weight) {
    model.validate();
    const std::size_t M = model.dim();
    if (space.ambient_dim() != M) throw InvalidArgument("build_reduced: subspace dimension does not match the model");
    if (space.dim() < 1) throw InvalidArgument("build_reduced: subspace must be non-trivial");
    if (!residual_weight.euclidean() && static_cast<std::size_t>(residual_weight.weight().rows()) != M) {
        throw InvalidArgument("build_reduced: residual weight dimension does not match the model");
    }
    const Matrix& v = space.basis();
    const Eigen::Index m = v.cols();
    const Eigen::Index L = idx(model.op.size());
    const Eigen::Index R = idx(model.rhs.size());

    Matrix x(idx(M), L * m + R);
    for (Eigen::Index i = 0; i < L; ++i) x.middleCols(i * m, m).noalias() = model.op[static_cast<std::size_t>(i)].matrix * v;
    for (Eigen::Index j = 0; j < R; ++j) x.col(L * m + j) = model.rhs[static_cast<std::size_t>(j)].vector;
    if (!residual_weight.euclidean()) x = residual_weight.factor().transpose() * x;

    ReducedModel rm;
    rm.m_ = static_cast<std::size_t>(m);
    rm.full_dim_ = M;
    rm.basis_ = v;
    rm.gram_ = x.transpose() * x;
    rm.gram_ = 0.5 * (rm.gram_ + rm.gram_.transpose()).eval();
    Eigen::HouseholderQR<Matrix> qr(x);
    const Eigen::Index rows = std::min(x.rows(), x.cols());
    rm.rx_ = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
    for (const auto& t : model.op.terms()) rm.op_coeffs_.push_back(t.coeff);
    for (const auto& t : model.rhs.terms()) rm.rhs_coeffs_.push_back(t.coeff);
    rm.domain_ = model.domain;
    rm.bounds_ = model.bounds;
    return rm;
}

ReducedSolution solve_reduced(const ReducedModel& rm, const Vector& xi) {
    rm.domain().check(xi);
    const Vector a = rm.operator_coefficients(xi);
    const Vector b = rm.rhs_coefficients(xi);
    const Eigen::Index m = idx(rm.dim());
    const Matrix& rx = rm.triangular_factor();
    const Eigen::Index L = a.size();

    // residual = rx * z = B s - c
    Matrix B = Matrix::Zero(rx.rows(), m);
    for (Eigen::Index i = 0; i < L; ++i) B += a(i) * rx.middleCols(i * m, m);
    const Vector c = rx.rightCols(b.size()) * b;

    Eigen::ColPivHouseholderQR<Matrix> qr(B);
    const auto& r = qr.matrixR();
    const double r0 = m > 0 ? std::abs(r(0, 0)) : 0.0;
    if (!(r0 > 0.0)) throw NumericalBreakdown("solve_reduced: reduced operator vanishes at this parameter", 0);
    for (Eigen::Index k = 0; k < m; ++k) {
        if (!(std::abs(r(k, k)) > 1e-13 * r0)) {
            throw NumericalBreakdown("solve_reduced: reduced normal matrix is not positive definite", k,
                                     (r0 * r0) / (r(k, k) * r(k, k)));
        }
    }
    ReducedSolution out;
    out.coefficients = qr.solve(c);
    out.residual = (B * out.coefficients - c).norm();
    residual_expanded(rm, out.coefficients, xi, &out.residual_sq_raw);
    return out;
}

Vector lift(const ReducedModel& rm, const Vector& s) {
    if (static_cast<std::size_t>(s.size()) != rm.dim()) throw InvalidArgument("lift: coefficient length mismatch");
    return rm.basis() * s;
}

double residual_indicator(const ReducedModel& rm, const Vector& s, const Vector& xi) {
    if (static_cast<std::size_t>(s.size()) != rm.dim()) throw InvalidArgument("residual_indicator: coefficient length mismatch");
    return (rm.triangular_factor() * stacked(s, rm.operator_coefficients(xi), rm.rhs_coefficients(xi))).norm();
}

double residual_expanded(const ReducedModel& rm, const Vector& s, const Vector& xi, double* raw) {
    if (static_cast<std::size_t>(s.size()) != rm.dim()) throw InvalidArgument("residual_expanded: coefficient length mismatch");
    const Vector z = stacked(s, rm.operator_coefficients(xi), rm.rhs_coefficients(xi));
    const double sq = z.dot(rm.gram() * z);
    if (raw) *raw = sq;
    return std::sqrt(std::max(sq, 0.0));
}

// ---------------------------------------------------------------------------
// files
// ---------------------------------------------------------------------------

void save_reduced(const std::filesystem::path& json_path, const ReducedModel& rm) {
    const auto base = json_path.parent_path();
    const auto stem = json_path.stem().string();
    save_lrtf(base / (stem + "_basis.lrtf"), DenseTensor::from_matrix(rm.basis_));
    save_lrtf(base / (stem + "_gram.lrtf"), DenseTensor::from_matrix(rm.gram_));
    save_lrtf(base / (stem + "_rx.lrtf"), DenseTensor::from_matrix(rm.rx_));
    nlohmann::json j;
    j["m"] = rm.m_;
    j["full_dim"] = rm.full_dim_;
    j["basis"] = stem + "_basis.lrtf";
    j["gram"] = stem + "_gram.lrtf";
    j["rx"] = stem + "_rx.lrtf";
    j["operator_coefficients"] = nlohmann::json::array();
    for (const auto& c : rm.op_coeffs_) j["operator_coefficients"].push_back(detail::coefficient_to_json(c));
    j["rhs_coefficients"] = nlohmann::json::array();
    for (const auto& c : rm.rhs_coeffs_) j["rhs_coefficients"].push_back(detail::coefficient_to_json(c));
    j["domain"] = detail::domain_to_json(rm.domain_);
    if (rm.bounds_) j["bounds"] = detail::bounds_to_json(*rm.bounds_);
    std::ofstream out(json_path);
    if (!out) throw Error("cannot open " + json_path.string() + " for writing");
    out << j.dump(2) << '\n';
}

ReducedModel load_reduced(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw InvalidArgument("cannot open reduced model file " + json_path.string());
    const auto base = json_path.parent_path();
    ReducedModel rm;
    try {
        nlohmann::json j;
        in >> j;
        rm.m_ = j.at("m").get<std::size_t>();
        rm.full_dim_ = j.at("full_dim").get<std::size_t>();
        rm.basis_ = load_lrtf(base / j.at("basis").get<std::string>()).to_matrix();
        rm.gram_ = load_lrtf(base / j.at("gram").get<std::string>()).to_matrix();
        rm.rx_ = load_lrtf(base / j.at("rx").get<std::string>()).to_matrix();
        for (const auto& c : j.at("operator_coefficients")) rm.op_coeffs_.push_back(detail::coefficient_from_json(c));
        for (const auto& c : j.at("rhs_coefficients")) rm.rhs_coeffs_.push_back(detail::coefficient_from_json(c));
        rm.domain_ = detail::domain_from_json(j.at("domain"));
        if (j.contains("bounds")) rm.bounds_ = detail::bounds_from_json(j.at("bounds"));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed reduced model file: ") + e.what());
    }
    const auto n = static_cast<Eigen::Index>(rm.op_coeffs_.size() * rm.m_ + rm.rhs_coeffs_.size());
    if (rm.gram_.rows() != n || rm.gram_.cols() != n || rm.rx_.cols() != n ||
        static_cast<std::size_t>(rm.basis_.cols()) != rm.m_ || static_cast<std::size_t>(rm.basis_.rows()) != rm.full_dim_) {
        throw InvalidArgument("reduced model file has inconsistent dimensions");
    }
    return rm;
}

}  // namespace tensormor
