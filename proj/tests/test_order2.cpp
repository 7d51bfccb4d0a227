#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tensormor/error.hpp"
#include "tensormor/order2.hpp"

using namespace tensormor;

namespace {

SnapshotSet random_snapshots(Eigen::Index m, Eigen::Index k, std::mt19937_64& rng, bool uniform = false) {
    Matrix u = oracle::random_matrix(m, k, rng);
    Matrix params = oracle::random_matrix(k, 2, rng);
    if (uniform) return SnapshotSet::uniform(std::move(u), std::move(params));
    std::uniform_real_distribution<double> w(0.1, 2.0);
    Vector weights(k);
    for (Eigen::Index i = 0; i < k; ++i) weights(i) = w(rng);
    return SnapshotSet(std::move(u), std::move(weights), std::move(params));
}

// Largest principal-angle sine between two orthonormal bases.
double subspace_distance(const Matrix& a, const Matrix& b) {
    return (a - b * (b.transpose() * a)).norm();
}

}  // namespace

TEST(SnapshotSet, ValidatesInvariants) {
    EXPECT_THROW(SnapshotSet(Matrix::Ones(3, 2), Vector::Ones(3), Matrix::Zero(2, 1)), InvalidArgument);
    EXPECT_THROW(SnapshotSet(Matrix::Ones(3, 2), Vector::Ones(2), Matrix::Zero(3, 1)), InvalidArgument);
    Vector w(2);
    w << 1.0, 0.0;
    EXPECT_THROW(SnapshotSet(Matrix::Ones(3, 2), w, Matrix::Zero(2, 1)), InvalidArgument);
    EXPECT_THROW(SnapshotSet::uniform(Matrix(3, 0), Matrix(0, 1)), InvalidArgument);
}

TEST(Pod, IdenticalColumnsAreExactAtRankOne) {
    Vector v(4);
    v << 1, -2, 0.5, 3;
    Matrix u = v.replicate(1, 6);
    const PodResult r = pod(SnapshotSet::uniform(u, Matrix::Zero(6, 1)), 1);
    EXPECT_NEAR(r.report[0].error, 0.0, 1e-12 * v.norm());
    EXPECT_LE(subspace_distance(r.subspace.basis(), v.normalized()), 1e-12);
}

TEST(Pod, DiagonalSpectrum) {
    Matrix u = Vector((Vector(3) << 3, 2, 1).finished()).asDiagonal();
    const PodResult r = pod(SnapshotSet::uniform(u, Matrix::Zero(3, 1)), 2);
    Matrix e12 = Matrix::Identity(3, 2);
    EXPECT_LE(subspace_distance(r.subspace.basis(), e12), 1e-12);
    EXPECT_NEAR(r.report[1].error * r.report[1].error, 1.0 / 3.0, 1e-14);
    // sign convention: first nonzero component positive
    EXPECT_GT(r.subspace.basis()(0, 0), 0.0);
    EXPECT_GT(r.subspace.basis()(1, 1), 0.0);
}

TEST(Pod, EqualsTruncatedSvdOfScaledSnapshots) {
    std::mt19937_64 rng(1);
    const SnapshotSet s = random_snapshots(15, 25, rng);
    const PodResult r = pod(s, 4);
    // oracle: eigenvectors of the weighted correlation via Jacobi eigenvalues
    const Matrix corr = s.vectors() * s.weights().asDiagonal() * s.vectors().transpose();
    const Vector lambda = oracle::jacobi_eigenvalues(corr);
    for (std::size_t m = 1; m <= 4; ++m) {
        double tail = 0.0;
        for (Eigen::Index i = static_cast<Eigen::Index>(m); i < lambda.size(); ++i) tail += lambda(i);
        EXPECT_NEAR(r.report[m - 1].error, std::sqrt(tail), 1e-10 * std::sqrt(lambda.sum()));
    }
    // the basis spans an invariant subspace carrying the top-4 eigenvalues
    const Matrix& v = r.subspace.basis();
    EXPECT_NEAR((v.transpose() * corr * v).trace(), lambda.head(4).sum(), 1e-10 * lambda.sum());
    EXPECT_LE((corr * v - v * (v.transpose() * corr * v)).norm(), 1e-10 * lambda(0));
}

TEST(Pod, ErrorsNonIncreasingAndRangeChecked) {
    std::mt19937_64 rng(2);
    const SnapshotSet s = random_snapshots(10, 6, rng);
    const PodResult r = pod(s, 6);
    for (std::size_t i = 1; i < r.report.size(); ++i) EXPECT_LE(r.report[i].error, r.report[i - 1].error);
    EXPECT_NEAR(r.report[5].error, 0.0, 1e-12);
    EXPECT_THROW(pod(s, 7), InvalidArgument);
    EXPECT_THROW(pod(s, 0), InvalidArgument);
}

TEST(Pod, OptimalAgainstRandomBases) {
    std::mt19937_64 rng(3);
    const SnapshotSet s = random_snapshots(12, 30, rng);
    for (std::size_t m = 1; m <= 5; ++m) {
        const PodResult r = pod(s, m);
        const double best = r.report[m - 1].error;
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix q = oracle::mgs(oracle::random_matrix(12, static_cast<Eigen::Index>(m), rng));
            const Matrix resid = s.scaled() - q * (q.transpose() * s.scaled());
            EXPECT_LE(best, resid.norm() * (1 + 1e-12));
        }
    }
}

TEST(Pod, WeightedInnerProductGivesWOrthonormalBasis) {
    std::mt19937_64 rng(4);
    const SnapshotSet s = random_snapshots(8, 12, rng);
    const Matrix g = oracle::random_matrix(8, 8, rng);
    const InnerProduct w(g * g.transpose() + 8.0 * Matrix::Identity(8, 8));
    const PodResult r = pod(s, 3, w);
    const Matrix& v = r.subspace.basis();
    EXPECT_LE((v.transpose() * w.weight() * v - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    // weighted projection error of the snapshots equals the reported tail
    double err2 = 0.0;
    for (Eigen::Index k = 0; k < 12; ++k) {
        const Vector x = s.vectors().col(k);
        const Vector e = x - project(r.subspace, x);
        err2 += s.weights()(k) * w.dot(e, e);
    }
    EXPECT_NEAR(std::sqrt(err2), r.report[2].error, 1e-10 * s.scaled().norm());
}

TEST(Project, SpanOrthogonalAndPythagoras) {
    std::mt19937_64 rng(5);
    const Matrix q = oracle::mgs(oracle::random_matrix(10, 3, rng));
    const Subspace v(q);
    const Vector in = q * oracle::random_vector(3, rng);
    EXPECT_LE((project(v, in) - in).norm(), 1e-12 * in.norm());
    Vector perp = oracle::random_vector(10, rng);
    perp -= q * (q.transpose() * perp);
    EXPECT_LE(project(v, perp).norm(), 1e-12 * perp.norm());
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = oracle::random_vector(10, rng);
        const Vector px = project(v, x);
        EXPECT_LE((q.transpose() * (x - px)).norm(), 1e-12 * x.norm());
        EXPECT_NEAR(x.squaredNorm(), px.squaredNorm() + (x - px).squaredNorm(), 1e-12 * x.squaredNorm());
    }
    EXPECT_THROW(project(v, Vector(Vector::Ones(9))), InvalidArgument);
}

TEST(Subspace, RejectsNonOrthonormal) { EXPECT_THROW(Subspace(Matrix::Ones(3, 2)), InvalidArgument); }

TEST(WidthL2, LowRankReachesZero) {
    std::mt19937_64 rng(6);
    const Matrix u = oracle::random_matrix(10, 3, rng) * oracle::random_matrix(3, 8, rng);
    const ErrorReport w = width_l2(SnapshotSet::uniform(u, Matrix::Zero(8, 1)), 6);
    ASSERT_EQ(w.size(), 7u);
    for (std::size_t m = 3; m <= 6; ++m) EXPECT_LE(w[m].error, 1e-12 * u.norm());
    for (std::size_t m = 1; m <= 6; ++m) EXPECT_LE(w[m].error, w[m - 1].error);
}

TEST(WidthL2, DiagonalSpectrumValue) {
    Matrix u = Vector((Vector(3) << 3, 2, 1).finished()).asDiagonal();
    const ErrorReport w = width_l2(SnapshotSet::uniform(u, Matrix::Zero(3, 1)), 2);
    EXPECT_NEAR(w[1].error, std::sqrt(5.0 / 3.0), 1e-14);
    EXPECT_NEAR(w[0].error, std::sqrt(14.0 / 3.0), 1e-14);
}

TEST(WidthL2, MatchesCorrelationEigenOracle) {
    std::mt19937_64 rng(7);
    const SnapshotSet s = random_snapshots(9, 14, rng, true);
    const ErrorReport w = width_l2(s, 9);
    const Vector lambda = oracle::jacobi_eigenvalues(s.vectors() * s.weights().asDiagonal() * s.vectors().transpose());
    for (std::size_t m = 0; m <= 9; ++m) {
        double tail = 0.0;
        for (Eigen::Index i = static_cast<Eigen::Index>(m); i < lambda.size(); ++i) tail += std::max(0.0, lambda(i));
        EXPECT_NEAR(w[m].error, std::sqrt(tail), 1e-7 * std::sqrt(lambda.sum()));
    }
}

TEST(ErrorReport, CsvRoundTripAndValidation) {
    ErrorReport r;
    r.add({1, 0.5, NormKind::L2, 0.25});
    r.add({3, 0.125, NormKind::LInf, 1.5});
    EXPECT_THROW(r.add({3, 0.1, NormKind::L2, 0.0}), InvalidArgument);
    EXPECT_THROW(r.add({4, -1.0, NormKind::L2, 0.0}), InvalidArgument);
    std::stringstream ss;
    r.write_csv(ss);
    EXPECT_EQ(ss.str(), "m,error,p,seconds\n1,0.5,2,0.25\n3,0.125,inf,1.5\n");
    const ErrorReport back = ErrorReport::read_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].p, NormKind::LInf);
    std::stringstream no_time;
    r.write_csv(no_time, false);
    EXPECT_EQ(no_time.str(), "m,error,p,seconds\n1,0.5,2,0\n3,0.125,inf,0\n");
    std::stringstream bad("k,resid\n");
    EXPECT_THROW(ErrorReport::read_csv(bad), InvalidArgument);
}

TEST(SnapshotFiles, RoundTrip) {
    std::mt19937_64 rng(8);
    const SnapshotSet s = random_snapshots(5, 4, rng);
    const auto stem = std::filesystem::temp_directory_path() / "tensormor_snapshots_test";
    save_snapshots(stem, s);
    const SnapshotSet back = load_snapshots(stem);
    EXPECT_EQ(back.vectors(), s.vectors());
    EXPECT_EQ(back.weights(), s.weights());
    EXPECT_EQ(back.params(), s.params());
}
