#include "tensormor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "tensormor/error.hpp"

namespace tensormor {

Matrix SvdResult::reconstruct(std::size_t rank) const {
    const auto r = static_cast<Eigen::Index>(std::min(rank, size()));
    return left.leftCols(r) * singular_values.head(r).asDiagonal() * right.leftCols(r).transpose();
}

SvdResult svd(const Matrix& m) {
    if (!m.allFinite()) throw InvalidArgument("svd: non-finite input");
    SvdResult out;
    if (m.size() == 0) {
        out.singular_values.resize(0);
        out.left.resize(m.rows(), 0);
        out.right.resize(m.cols(), 0);
        return out;
    }
    Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.singular_values = solver.singularValues();
    out.left = solver.matrixU();
    out.right = solver.matrixV();
    return out;
}

SvdResult svd(const DenseTensor& m) {
    if (m.order() != 2) throw InvalidArgument("svd requires an order-2 tensor");
    return svd(m.to_matrix());
}

SymEigResult sym_eig(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidArgument("sym_eig: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) throw NumericalBreakdown("sym_eig: eigensolver failed");
    SymEigResult out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

namespace {

void check_symmetric(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) throw InvalidArgument(std::string(what) + ": matrix must be square");
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw NumericalBreakdown(std::string(what) + ": matrix is not symmetric", -1);
    }
}

}  // namespace

Matrix cholesky_lower(const Matrix& a) {
    check_symmetric(a, "cholesky");
    const Eigen::Index n = a.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
            throw NumericalBreakdown("matrix is not positive definite: non-positive pivot at index " + std::to_string(j),
                                     static_cast<long>(j));
        }
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
        }
    }
    return l;
}

Matrix solve_spd_multi(const Matrix& a, const Matrix& b) {
    if (b.rows() != a.rows()) throw InvalidArgument("solve_spd: right-hand side size mismatch");
    const Matrix l = cholesky_lower(a);
    const auto tri = l.triangularView<Eigen::Lower>();
    Matrix y = tri.solve(b);
    return tri.transpose().solve(y);
}

Vector solve_spd(const Matrix& a, const Vector& b) {
    Matrix x = solve_spd_multi(a, Matrix(b));
    return x.col(0);
}

Vector lstsq(const Matrix& a, const Vector& b) {
    if (b.size() != a.rows()) throw InvalidArgument("lstsq: right-hand side size mismatch");
    if (a.cols() == 0) return Vector(0);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    return cod.solve(b);
}

std::size_t truncation_rank(const Vector& sigma, double budget) {
    const auto n = static_cast<std::size_t>(sigma.size());
    if (n == 0 || sigma(0) <= 0.0) return 0;
    const double floor = kNumericalZero * sigma(0);
    std::size_t r = n;
    while (r > 0 && sigma(static_cast<Eigen::Index>(r - 1)) <= floor) --r;
    double tail2 = 0.0;
    for (std::size_t i = r; i < n; ++i) tail2 += sigma(static_cast<Eigen::Index>(i)) * sigma(static_cast<Eigen::Index>(i));
    const double budget2 = budget * budget;
    while (r > 1) {
        const double s = sigma(static_cast<Eigen::Index>(r - 1));
        if (tail2 + s * s > budget2) break;
        tail2 += s * s;
        --r;
    }
    return r;
}

std::size_t threshold_rank(const Vector& sigma, double tol) {
    const auto n = static_cast<std::size_t>(sigma.size());
    if (n == 0 || sigma(0) <= 0.0) return 0;
    const double thr = std::max(tol, kNumericalZero) * sigma(0);
    const bool keep_ties = tol >= kNumericalZero;
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = sigma(static_cast<Eigen::Index>(i));
        if (s > thr || (keep_ties && s == thr)) ++r;
    }
    return r;
}

std::optional<Vector> orthonormalize_against(const Matrix& basis, const Vector& v, double breakdown) {
    const double vnorm = v.norm();
    if (vnorm == 0.0) return std::nullopt;
    Vector w = v;
    if (basis.cols() > 0) {
        for (int pass = 0; pass < 2; ++pass) w -= basis * (basis.transpose() * w);
    }
    const double wnorm = w.norm();
    if (wnorm <= breakdown * vnorm) return std::nullopt;
    return Vector(w / wnorm);
}

void canonicalize_signs(Matrix& columns) {
    for (Eigen::Index j = 0; j < columns.cols(); ++j) {
        const double cn = columns.col(j).norm();
        for (Eigen::Index i = 0; i < columns.rows(); ++i) {
            if (std::abs(columns(i, j)) > 1e-12 * cn) {
                if (columns(i, j) < 0) columns.col(j) *= -1.0;
                break;
            }
        }
    }
}

}  // namespace tensormor
