#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"
#include "tensormor/tensor_solver.hpp"

using namespace tensormor;

namespace {

TTTensor random_tt(const Shape& shape, std::size_t rank, std::mt19937_64& rng) {
    std::vector<DenseTensor> cores;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        const std::size_t l = k == 0 ? 1 : rank;
        const std::size_t r = k + 1 == shape.size() ? 1 : rank;
        const Vector v = oracle::random_vector(static_cast<Eigen::Index>(l * shape[k] * r), rng);
        cores.emplace_back(Shape{l, shape[k], r}, std::vector<double>(v.data(), v.data() + v.size()));
    }
    return TTTensor(std::move(cores));
}

KroneckerOperator laplacian_2d(Eigen::Index n) {
    const Matrix t = oracle::laplacian_1d(n);
    const Matrix i = Matrix::Identity(n, n);
    return KroneckerOperator({{i, t}, {t, i}});
}

}  // namespace

TEST(OpApply, IdentityLeavesTensorUnchanged) {
    std::mt19937_64 rng(31);
    const TTTensor x = random_tt({3, 4, 5}, 2, rng);
    const KroneckerOperator id({{Matrix::Identity(3, 3), Matrix::Identity(4, 4), Matrix::Identity(5, 5)}});
    EXPECT_LE((to_dense(op_apply(id, x)).to_vector() - to_dense(x).to_vector()).norm(), 1e-14);
}

TEST(OpApply, MatchesDenseKroneckerAndRankBound) {
    std::mt19937_64 rng(32);
    std::vector<std::vector<Matrix>> terms;
    for (int i = 0; i < 3; ++i) {
        terms.push_back({oracle::random_matrix(4, 4, rng), oracle::random_matrix(4, 4, rng), oracle::random_matrix(4, 4, rng)});
    }
    const KroneckerOperator a(terms);
    const TTTensor x = random_tt({4, 4, 4}, 2, rng);
    Matrix dense = Matrix::Zero(64, 64);
    for (const auto& t : terms) dense += oracle::kron(oracle::kron(t[0], t[1]), t[2]);
    EXPECT_LE((to_dense(a) - dense).norm(), 1e-12 * dense.norm());
    const TTTensor y = op_apply(a, x);
    const Vector ref = dense * to_dense(x).to_vector();
    EXPECT_LE((to_dense(y).to_vector() - ref).norm(), 1e-10 * ref.norm());
    for (std::size_t r : y.ranks()) EXPECT_LE(r, 6u);
    const Vector v1 = oracle::random_vector(4, rng);
    const Vector v2 = oracle::random_vector(4, rng);
    const Vector v3 = oracle::random_vector(4, rng);
    const std::vector<Vector> vs{v1, v2, v3};
    for (std::size_t r : op_apply(a, TTTensor::rank_one(vs)).ranks()) EXPECT_LE(r, 3u);
    // linearity
    const TTTensor z = random_tt({4, 4, 4}, 3, rng);
    const Vector lhs = to_dense(op_apply(a, tt_add(x, z))).to_vector();
    const Vector rhs = to_dense(tt_add(op_apply(a, x), op_apply(a, z))).to_vector();
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
    EXPECT_THROW(op_apply(a, random_tt({4, 4, 5}, 1, rng)), InvalidArgument);
}

TEST(AssembleFromAffine, GridContractionsMatchPointwiseAssembly) {
    std::mt19937_64 rng(33);
    AffineModel model;
    model.op = AffineOperator({{oracle::random_matrix(5, 5, rng), CoefficientFunction::constant(2.0)},
                               {oracle::random_matrix(5, 5, rng), CoefficientFunction::affine(0)},
                               {oracle::random_matrix(5, 5, rng), Monomial{{1, 2}, 0.5}}});
    model.rhs = AffineVector({{oracle::random_vector(5, rng), Named{NamedForm::Exp, 1, -1.0}},
                              {oracle::random_vector(5, rng), Named{NamedForm::Inverse, 0, 1.0}}});
    model.domain.lower = Vector::Zero(2);
    model.domain.upper = Vector::Ones(2);
    Vector g0(3);
    g0 << 0.0, 0.5, 1.0;
    Vector g1(4);
    g1 << 0.1, 0.2, 0.7, 0.9;
    const TensorSystem sys = assemble_from_affine(model, {g0, g1});
    EXPECT_EQ(sys.op.shape(), (Shape{5, 3, 4}));
    // affine(0) on (0, 0.5, 1) gives diag(0, 0.5, 1) in mode 1 and identity in mode 2
    EXPECT_EQ(Vector(sys.op.terms()[1][1].diagonal()), g0);
    EXPECT_EQ(sys.op.terms()[1][2], Matrix::Identity(4, 4));
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t i = rng() % 3;
        const std::size_t j = rng() % 4;
        Vector xi(2);
        xi << g0(static_cast<Eigen::Index>(i)), g1(static_cast<Eigen::Index>(j));
        Matrix a = Matrix::Zero(5, 5);
        for (const auto& t : sys.op.terms()) a += t[1](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * t[2](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) * t[0];
        const auto [a_ref, b_ref] = assemble(model, xi);
        EXPECT_LE((a - a_ref).norm(), 1e-13 * a_ref.norm());
        Vector b(5);
        for (Eigen::Index m = 0; m < 5; ++m) {
            const std::size_t idx[3] = {static_cast<std::size_t>(m), i, j};
            b(m) = eval(sys.rhs, idx);
        }
        EXPECT_LE((b - b_ref).norm(), 1e-13 * b_ref.norm());
    }
    AffineModel bad = model;
    bad.op = AffineOperator({{Matrix::Identity(5, 5), Tabulated{Matrix::Zero(1, 2), Vector::Ones(1)}}});
    try {
        assemble_from_affine(bad, {g0, g1});
        FAIL() << "expected UnsupportedCoefficient";
    } catch (const UnsupportedCoefficient& e) {
        EXPECT_NE(std::string(e.what()).find("operator term 0"), std::string::npos);
    }
}

TEST(Richardson, IdentityConvergesInOneStep) {
    std::mt19937_64 rng(34);
    const TTTensor b = random_tt({4, 5}, 2, rng);
    const KroneckerOperator id({{Matrix::Identity(4, 4), Matrix::Identity(5, 5)}});
    const RichardsonResult r = truncated_richardson(id, b, {1.0, 0.0, 10, 1e-14});
    EXPECT_EQ(r.stop_reason, "target");
    EXPECT_EQ(r.trace.size(), 2u);
    EXPECT_LE((to_dense(r.solution).to_vector() - to_dense(b).to_vector()).norm(), 1e-14 * tt_norm(b));
}

TEST(Richardson, KroneckerLaplacianMatchesDenseSolve) {
    const KroneckerOperator a = laplacian_2d(16);
    const TTTensor b = TTTensor::rank_one(std::vector<Vector>{Vector::Ones(16), Vector::Ones(16)});
    const RichardsonResult r = truncated_richardson(a, b, {std::nullopt, 1e-8, 3000, 1e-6});
    EXPECT_EQ(r.stop_reason, "target");
    const Vector u_ref = oracle::gauss_solve(to_dense(a), to_dense(b).to_vector());
    const Vector u = to_dense(r.solution).to_vector();
    EXPECT_LE((u - u_ref).norm(), 1e-5 * u_ref.norm());
    // TT residual agrees with the dense one
    const double dense_res = (to_dense(a) * u - to_dense(b).to_vector()).norm();
    const double tt_res = tt_norm(tt_axpy(b, -1.0, op_apply(a, r.solution)));
    EXPECT_NEAR(tt_res, dense_res, 1e-8 * dense_res);
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_GT(r.trace[k].k, r.trace[k - 1].k);
}

TEST(Richardson, ExactArithmeticDecreasesEnergyError) {
    const KroneckerOperator a = laplacian_2d(6);
    const TTTensor b = TTTensor::rank_one(std::vector<Vector>{Vector::LinSpaced(6, 1, 2), Vector::Ones(6)});
    const Matrix ad = to_dense(a);
    const Vector u_ref = oracle::gauss_solve(ad, to_dense(b).to_vector());
    double prev = INFINITY;
    for (std::size_t it = 1; it <= 20; ++it) {
        const RichardsonResult r = truncated_richardson(a, b, {0.12, 0.0, it, 0.0});
        const Vector e = to_dense(r.solution).to_vector() - u_ref;
        const double energy = std::sqrt(e.dot(ad * e));
        EXPECT_LT(energy, prev);
        prev = energy;
    }
}

TEST(Richardson, PlateauShrinksWithTolerance) {
    const KroneckerOperator a = laplacian_2d(16);
    const TTTensor b = TTTensor::rank_one(std::vector<Vector>{Vector::Ones(16), Vector::LinSpaced(16, 0, 1)});
    const RichardsonResult coarse = truncated_richardson(a, b, {std::nullopt, 1e-2, 800, 0.0});
    const RichardsonResult fine = truncated_richardson(a, b, {std::nullopt, 1e-3, 800, 0.0});
    const double pc = coarse.trace.plateau(20);
    const double pf = fine.trace.plateau(20);
    EXPECT_TRUE(std::isfinite(pc));
    EXPECT_GE(pc / pf, 2.0);
}

TEST(Richardson, DivergenceIsReported) {
    const KroneckerOperator a = laplacian_2d(8);
    const TTTensor b = TTTensor::rank_one(std::vector<Vector>{Vector::Ones(8), Vector::Ones(8)});
    EXPECT_THROW(truncated_richardson(a, b, {1.0, 0.0, 200, 0.0}), DivergenceError);
}

TEST(SolveTrace, CsvFormat) {
    SolveTrace t;
    t.add({0, {2, 3}, 1.5, 2.25, 0.1});
    t.add({1, {}, 0.5, 0.25, 0.2});
    std::stringstream ss;
    t.write_csv(ss, false);
    EXPECT_EQ(ss.str(), "k,ranks,resid,J,seconds\n0,2x3,1.5,2.25,0\n1,,0.5,0.25,0\n");
    EXPECT_THROW(t.add({1, {}, 0.1, 0.01, 0.0}), InvalidArgument);
}

TEST(Pgd, IdentityRankOneRhsRecoveredByFirstCorrection) {
    std::mt19937_64 rng(35);
    const std::vector<Vector> vs{oracle::random_vector(5, rng), oracle::random_vector(6, rng), oracle::random_vector(4, rng)};
    const TTTensor b = TTTensor::rank_one(vs);
    const KroneckerOperator id({{Matrix::Identity(5, 5), Matrix::Identity(6, 6), Matrix::Identity(4, 4)}});
    const PgdResult r = greedy_rank_one(id, b, {3, 50, 1e-14, 0});
    ASSERT_GE(r.trace.size(), 2u);
    EXPECT_LE(r.trace[1].J, 1e-12 * std::pow(tt_norm(b), 2));
    EXPECT_LE(r.max_mode_residual, 1e-10);
}

TEST(Pgd, IdentityOrder2ReproducesSvdTails) {
    std::mt19937_64 rng(36);
    // rank-3 with orthogonal factors and well separated singular values
    const Matrix q1 = oracle::mgs(oracle::random_matrix(8, 3, rng));
    const Matrix q2 = oracle::mgs(oracle::random_matrix(7, 3, rng));
    const Vector s = (Vector(3) << 5.0, 2.0, 0.5).finished();
    const Matrix bm = q1 * s.asDiagonal() * q2.transpose();
    const TTTensor b = tt_svd(DenseTensor::from_matrix(bm), 0.0);
    const KroneckerOperator id({{Matrix::Identity(8, 8), Matrix::Identity(7, 7)}});
    const PgdResult r = greedy_rank_one(id, b, {5, 500, 1e-15, 0});
    const double bb = bm.squaredNorm();
    ASSERT_GE(r.trace.size(), 4u);
    EXPECT_NEAR(r.trace[1].J, 2.0 * 2.0 + 0.25, 1e-8 * bb);
    EXPECT_NEAR(r.trace[2].J, 0.25, 1e-8 * bb);
    EXPECT_LE(r.trace[3].J, 1e-10 * bb);
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k].J, r.trace[k - 1].J);
}

TEST(Pgd, LaplacianErrorDecreasesWithRank) {
    const KroneckerOperator a = laplacian_2d(10);
    const TTTensor b = TTTensor::rank_one(std::vector<Vector>{Vector::Ones(10), Vector::LinSpaced(10, 0, 1)});
    const Vector u_ref = oracle::gauss_solve(to_dense(a), to_dense(b).to_vector());
    const PgdResult r = greedy_rank_one(a, b, {6, 100, 1e-12, 0});
    EXPECT_FALSE(r.breakdown) << r.message;
    for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k].J, r.trace[k - 1].J);
    // lifted error of the partial sums
    double prev = INFINITY;
    for (std::size_t m = 1; m <= r.solution.rank(); m += 2) {
        std::vector<Matrix> f;
        for (const auto& fac : r.solution.factors()) f.push_back(fac.leftCols(static_cast<Eigen::Index>(m)));
        const CPTensor part(r.solution.weights().head(static_cast<Eigen::Index>(m)), f);
        const double err = (to_dense(part).to_vector() - u_ref).norm();
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LE(r.max_mode_residual, 1e-10);
}
