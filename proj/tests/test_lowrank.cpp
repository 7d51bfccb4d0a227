#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"
#include "tensormor/lowrank.hpp"

using namespace tensormor;

namespace {

TTTensor random_tt(const Shape& shape, const RankTuple& ranks, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<DenseTensor> cores;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        const std::size_t r0 = k == 0 ? 1 : ranks[k - 1];
        const std::size_t r1 = k + 1 == shape.size() ? 1 : ranks[k];
        std::vector<double> data(r0 * shape[k] * r1);
        for (auto& v : data) v = n(rng);
        cores.emplace_back(Shape{r0, shape[k], r1}, std::move(data));
    }
    return TTTensor(std::move(cores));
}

DenseTensor random_dense(const Shape& shape, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = n(rng);
    return DenseTensor(shape, std::move(data));
}

// Tabulates f on the uniform grid of [0,1]^d with n points per mode.
template <typename F>
DenseTensor tabulate(std::size_t d, std::size_t n, F&& f) {
    DenseTensor t(Shape(d, n));
    for (std::size_t lin = 0; lin < t.numel(); ++lin) {
        const MultiIndex idx = t.multi_index(lin);
        std::vector<double> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = static_cast<double>(idx[k]) / static_cast<double>(n - 1);
        t.data()[lin] = f(x);
    }
    return t;
}

double additive(const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += std::sin(static_cast<double>(k + 1) * x[k]) + 0.5 * x[k] * x[k];
    return s;
}

double elementary(const std::vector<double>& x) {
    double p = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) p *= 1.0 + std::cos(static_cast<double>(k + 1) * x[k]) / 3.0;
    return p;
}

MultiIndex random_index(const Shape& shape, std::mt19937_64& rng) {
    MultiIndex idx;
    for (std::size_t n : shape) idx.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    return idx;
}

}  // namespace

TEST(CPTensor, RankOneAllOnesEvaluatesToWeight) {
    std::vector<Matrix> f{Matrix::Ones(3, 1), Matrix::Ones(4, 1), Matrix::Ones(2, 1)};
    Vector w(1);
    w << 2.5;
    const CPTensor t(w, f);
    EXPECT_EQ(eval(t, std::vector<std::size_t>{2, 3, 1}), 2.5);
    EXPECT_EQ(eval(t, std::vector<std::size_t>{0, 0, 0}), 2.5);
    EXPECT_THROW(eval(t, std::vector<std::size_t>{3, 0, 0}), InvalidArgument);
}

TEST(CPTensor, StorageCount) {
    std::mt19937_64 rng(1);
    std::vector<Matrix> f{oracle::random_matrix(4, 2, rng), oracle::random_matrix(4, 2, rng), oracle::random_matrix(4, 2, rng)};
    EXPECT_EQ(storage_count(CPTensor(Vector::Ones(2), f)), 26u);
}

TEST(CPTensor, AdditiveFunctionHasCanonicalRankD) {
    const std::size_t d = 5, n = 8;
    const DenseTensor dense = tabulate(d, n, additive);
    // one elementary term per dimension: g_k(x_k) times ones elsewhere
    std::vector<std::vector<Vector>> terms;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<Vector> vs(d, Vector::Ones(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(n - 1);
            vs[k](static_cast<Eigen::Index>(i)) = std::sin(static_cast<double>(k + 1) * x) + 0.5 * x * x;
        }
        terms.push_back(vs);
    }
    const std::vector<double> w(d, 1.0);
    const CPTensor cp = CPTensor::from_terms(Shape(d, n), w, terms);
    EXPECT_EQ(cp.rank(), d);
    EXPECT_LE((to_dense(cp) - dense).norm(), 1e-12 * dense.norm());
}

TEST(CPTensor, NormalizedHasUnitColumnsAndSameValue) {
    std::mt19937_64 rng(2);
    const CPTensor t(oracle::random_vector(3, rng),
                     {oracle::random_matrix(3, 3, rng), oracle::random_matrix(4, 3, rng)});
    const CPTensor nt = t.normalized();
    for (const auto& f : nt.factors())
        for (Eigen::Index i = 0; i < f.cols(); ++i) EXPECT_NEAR(f.col(i).norm(), 1.0, 1e-14);
    EXPECT_LE((to_dense(nt) - to_dense(t)).norm(), 1e-12 * to_dense(t).norm());
    EXPECT_NEAR(cp_norm(t), to_dense(t).norm(), 1e-12 * to_dense(t).norm());
}

TEST(TTTensor, UnitRanksEvaluateAsProductOfSlices) {
    Vector a(2), b(3);
    a << 2, -1;
    b << 0.5, 3, 4;
    const std::vector<Vector> vs{a, b};
    const TTTensor t = TTTensor::rank_one(vs);
    EXPECT_EQ(eval(t, std::vector<std::size_t>{1, 2}), -4.0);
    EXPECT_EQ(eval(t, std::vector<std::size_t>{0, 1}), 6.0);
}

TEST(TTTensor, RejectsInconsistentCores) {
    EXPECT_THROW(TTTensor({DenseTensor(Shape{1, 2, 2}), DenseTensor(Shape{3, 2, 1})}), InvalidArgument);
    EXPECT_THROW(TTTensor({DenseTensor(Shape{2, 2, 1})}), InvalidArgument);
    EXPECT_THROW(TTTensor({DenseTensor(Shape{1, 2})}), InvalidArgument);
}

TEST(TTTensor, EvalMatchesDenseAtRandomIndices) {
    std::mt19937_64 rng(3);
    const TTTensor t = random_tt({3, 4, 5, 3}, {2, 3, 2}, rng);
    const DenseTensor dense = to_dense(t);
    for (int trial = 0; trial < 50; ++trial) {
        const MultiIndex idx = random_index(t.shape(), rng);
        EXPECT_NEAR(eval(t, idx), dense(idx), 1e-12 * std::max(1.0, std::abs(dense(idx))));
    }
}

TEST(TTTensor, StorageCount) {
    std::mt19937_64 rng(4);
    EXPECT_EQ(storage_count(random_tt({5, 5, 5, 5}, {2, 2, 2}, rng)), 60u);
}

TEST(TTTensor, ToDenseHonoursCap) {
    std::mt19937_64 rng(5);
    const TTTensor t = random_tt({10, 10, 10}, {2, 2}, rng);
    const std::size_t old = dense_cap();
    set_dense_cap(999);
    EXPECT_THROW(to_dense(t), CapacityError);
    set_dense_cap(old);
}

TEST(TTSvd, ElementaryTensorHasUnitRanks) {
    const DenseTensor t = tabulate(4, 6, elementary);
    const TTTensor tt = tt_svd(t, 1e-10);
    EXPECT_EQ(tt.ranks(), (RankTuple{1, 1, 1}));
    EXPECT_LE((to_dense(tt) - t).norm(), 1e-10 * t.norm());
}

TEST(TTSvd, AdditiveFunctionRanksAtMostTwo) {
    const DenseTensor t = tabulate(4, 7, additive);
    const TTTensor tt = tt_svd(t, 1e-10);
    for (std::size_t r : tt.ranks()) EXPECT_LE(r, 2u);
    EXPECT_LE((to_dense(tt) - t).norm(), 1e-10 * t.norm());
}

TEST(TTSvd, ExactAtZeroTolerance) {
    std::mt19937_64 rng(6);
    const DenseTensor t = random_dense({3, 3, 3}, rng);
    const TTTensor tt = tt_svd(t, 0.0);
    EXPECT_LE((to_dense(tt) - t).norm(), 1e-12 * t.norm());
}

TEST(TTSvd, RankMinimalityMatchesAlphaRanks) {
    std::mt19937_64 rng(7);
    // low-rank ground truth so minimality is non-trivial
    const DenseTensor t = to_dense(random_tt({4, 5, 4, 3}, {2, 3, 2}, rng));
    const TTTensor tt = tt_svd(t, 0.0);
    for (std::size_t k = 0; k + 1 < t.order(); ++k) {
        ModeSet alpha;
        for (std::size_t j = 0; j <= k; ++j) alpha.push_back(j);
        EXPECT_EQ(tt.ranks()[k], alpha_rank(t, alpha, 1e-12));
    }
    EXPECT_EQ(tt.ranks(), (RankTuple{2, 3, 2}));
}

TEST(TTSvd, RespectsToleranceAndMaxRanks) {
    std::mt19937_64 rng(8);
    const DenseTensor t = random_dense({4, 4, 4, 4}, rng);
    for (double tol : {0.5, 0.1, 1e-3}) {
        const TTTensor tt = tt_svd(t, tol);
        EXPECT_LE((to_dense(tt) - t).norm(), tol * t.norm() * (1 + 1e-12));
    }
    const TTTensor capped = tt_svd(t, 0.0, RankTuple{2, 2, 2});
    for (std::size_t r : capped.ranks()) EXPECT_LE(r, 2u);
    EXPECT_THROW(tt_svd(t, -1.0), InvalidArgument);
}

TEST(TTRound, ZeroToleranceIsExact) {
    std::mt19937_64 rng(9);
    const TTTensor t = random_tt({3, 4, 3, 2}, {5, 6, 2}, rng);
    const TTTensor r = tt_round(t, 0.0);
    const DenseTensor dense = to_dense(t);
    EXPECT_LE((to_dense(r) - dense).norm(), 1e-12 * dense.norm());
    // ranks shrink to the exact ones (3 <= 3*4, 6 > 3*2 on the right side)
    EXPECT_EQ(r.ranks(), (RankTuple{3, 6, 2}));
}

TEST(TTRound, SumWithItselfRestoresRanks) {
    std::mt19937_64 rng(10);
    const TTTensor t = random_tt({4, 4, 4, 4}, {2, 3, 2}, rng);
    const TTTensor doubled = tt_add(t, t);
    EXPECT_EQ(doubled.ranks(), (RankTuple{4, 6, 4}));
    const TTTensor r = tt_round(doubled, 1e-12);
    EXPECT_EQ(r.ranks(), t.ranks());
    EXPECT_LE((to_dense(r) - 2.0 * to_dense(t)).norm(), 1e-11 * to_dense(doubled).norm());
}

TEST(TTRound, ErrorBoundAndRankContraction) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const TTTensor t = random_tt({5, 4, 5, 4}, {4, 5, 4}, rng);
        const DenseTensor dense = to_dense(t);
        for (double tol : {0.5, 0.1, 1e-4}) {
            const TTTensor r = tt_round(t, tol);
            EXPECT_LE((to_dense(r) - dense).norm(), tol * dense.norm());
            for (std::size_t k = 0; k < r.ranks().size(); ++k) EXPECT_LE(r.ranks()[k], t.ranks()[k]);
        }
    }
}

TEST(TTArithmetic, AddSubtractNormDot) {
    std::mt19937_64 rng(12);
    const TTTensor a = random_tt({3, 4, 5}, {2, 3}, rng);
    const TTTensor b = random_tt({3, 4, 5}, {3, 2}, rng);
    const TTTensor sum = tt_add(a, b);
    EXPECT_EQ(sum.ranks(), (RankTuple{5, 5}));
    EXPECT_LE((to_dense(sum) - (to_dense(a) + to_dense(b))).norm(), 1e-12 * to_dense(sum).norm());
    EXPECT_LE(tt_norm(tt_add(a, tt_scale(a, -1.0))), 1e-12 * tt_norm(a));
    EXPECT_NEAR(tt_dot(a, b), to_dense(a).dot(to_dense(b)), 1e-10 * to_dense(a).norm() * to_dense(b).norm());
    EXPECT_NEAR(tt_norm(a), to_dense(a).norm(), 1e-12 * to_dense(a).norm());
    EXPECT_LE((to_dense(tt_axpy(a, -0.5, b)) - (to_dense(a) - 0.5 * to_dense(b))).norm(), 1e-12 * to_dense(sum).norm());
    EXPECT_THROW(tt_add(a, random_tt({3, 4, 4}, {2, 2}, rng)), InvalidArgument);
}

TEST(TTArithmetic, DotOfRankOnesIsProductOfFactorDots) {
    std::mt19937_64 rng(13);
    std::vector<Vector> u{oracle::random_vector(3, rng), oracle::random_vector(4, rng), oracle::random_vector(2, rng)};
    std::vector<Vector> v{oracle::random_vector(3, rng), oracle::random_vector(4, rng), oracle::random_vector(2, rng)};
    const double expected = u[0].dot(v[0]) * u[1].dot(v[1]) * u[2].dot(v[2]);
    EXPECT_NEAR(tt_dot(TTTensor::rank_one(u), TTTensor::rank_one(v)), expected, 1e-13 * std::max(1.0, std::abs(expected)));
}

TEST(TTArithmetic, FromCpMatchesDense) {
    std::mt19937_64 rng(14);
    const CPTensor cp(oracle::random_vector(3, rng),
                      {oracle::random_matrix(3, 3, rng), oracle::random_matrix(4, 3, rng), oracle::random_matrix(5, 3, rng)});
    const TTTensor tt = TTTensor::from_cp(cp);
    EXPECT_LE((to_dense(tt) - to_dense(cp)).norm(), 1e-12 * to_dense(cp).norm());
}

TEST(TTArithmetic, PartialContractionMatchesDense) {
    std::mt19937_64 rng(15);
    const TTTensor t = random_tt({3, 4, 5}, {2, 3}, rng);
    const DenseTensor dense = to_dense(t);
    std::vector<Vector> vs{oracle::random_vector(3, rng), oracle::random_vector(4, rng), oracle::random_vector(5, rng)};
    const Vector got = tt_partial_contract(t, vs, 1);
    for (std::size_t j = 0; j < 4; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t k = 0; k < 5; ++k)
                s += vs[0](static_cast<Eigen::Index>(i)) * vs[2](static_cast<Eigen::Index>(k)) * dense(std::vector<std::size_t>{i, j, k});
        EXPECT_NEAR(got(static_cast<Eigen::Index>(j)), s, 1e-12 * dense.norm() * 10);
    }
}

TEST(Hosvd, FullRanksAreExact) {
    std::mt19937_64 rng(16);
    const DenseTensor t = random_dense({3, 4, 2}, rng);
    const TuckerTensor tk = hosvd(t, {3, 4, 2});
    EXPECT_LE((to_dense(tk) - t).norm(), 1e-12 * t.norm());
    for (const auto& f : tk.factors()) {
        EXPECT_LE((f.transpose() * f - Matrix::Identity(f.cols(), f.cols())).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Hosvd, ElementaryTensorWithUnitRanks) {
    const DenseTensor t = tabulate(3, 6, elementary);
    const TuckerTensor tk = hosvd(t, {1, 1, 1});
    EXPECT_LE((to_dense(tk) - t).norm(), 1e-12 * t.norm());
    EXPECT_EQ(storage_count(tk), 1u + 18u);
}

TEST(Hosvd, StorageCountFormula) {
    std::mt19937_64 rng(17);
    const TuckerTensor tk = hosvd(random_dense({6, 6, 6}, rng), {2, 2, 2});
    EXPECT_EQ(storage_count(tk), 44u);
}

TEST(Hosvd, QuasiOptimalityAgainstPerModeTails) {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 5; ++trial) {
        const DenseTensor t = random_dense({4, 4, 4}, rng);
        const TuckerTensor tk = hosvd(t, {2, 2, 2});
        double bound2 = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const Vector s = oracle::gram_singular_values(matricize(t, {k}).matrix);
            for (Eigen::Index i = 2; i < s.size(); ++i) bound2 += s(i) * s(i);
        }
        const double err = (to_dense(tk) - t).norm();
        EXPECT_LE(err, std::sqrt(bound2) * (1 + 1e-10));
        // evaluation agrees with the dense expansion
        const DenseTensor dense = to_dense(tk);
        const MultiIndex idx = random_index(t.shape(), rng);
        EXPECT_NEAR(eval(tk, idx), dense(idx), 1e-12 * dense.norm());
    }
}

TEST(Hosvd, RejectsOversizedRank) {
    DenseTensor t({2, 3});
    EXPECT_THROW(hosvd(t, {3, 1}), InvalidArgument);
    EXPECT_THROW(hosvd(t, {1}), InvalidArgument);
}

TEST(AlphaRank, AdditiveAtMostTwoForEverySubset) {
    const DenseTensor t = tabulate(4, 6, additive);
    for (const ModeSet& alpha : {ModeSet{0}, ModeSet{1}, ModeSet{0, 1}, ModeSet{0, 2}, ModeSet{1, 3}, ModeSet{0, 1, 2}}) {
        EXPECT_LE(alpha_rank(t, alpha, 1e-10), 2u);
    }
}

TEST(AlphaRank, FunctionOfDisjointModesHasUnitRank) {
    // depends on x_0 and x_1 only; any beta disjoint from {0,1} has rank 1
    const DenseTensor t = tabulate(4, 5, [](const std::vector<double>& x) { return std::exp(x[0] * x[1]) + x[0]; });
    EXPECT_EQ(alpha_rank(t, {2}, 1e-12), 1u);
    EXPECT_EQ(alpha_rank(t, {3}, 1e-12), 1u);
    EXPECT_EQ(alpha_rank(t, {2, 3}, 1e-12), 1u);
    EXPECT_GT(alpha_rank(t, {0}, 1e-12), 1u);
}

TEST(AlphaRank, MatchesGramJacobiRank) {
    std::mt19937_64 rng(19);
    const DenseTensor t = to_dense(random_tt({3, 4, 3, 4}, {2, 3, 2}, rng));
    for (const ModeSet& alpha : {ModeSet{0}, ModeSet{0, 1}, ModeSet{1, 2}, ModeSet{3}}) {
        EXPECT_EQ(alpha_rank(t, alpha, 1e-8), oracle::gram_rank(matricize(t, alpha).matrix, 1e-8));
    }
}

TEST(Serialization, RoundTripsAllFormats) {
    std::mt19937_64 rng(20);
    const TTTensor tt = random_tt({3, 4, 2}, {2, 3}, rng);
    std::stringstream s1;
    write_lrtt(s1, tt);
    EXPECT_EQ(s1.str().substr(0, 4), "LRTT");
    const TTTensor tt2 = read_lrtt(s1);
    EXPECT_EQ(tt2.ranks(), tt.ranks());
    EXPECT_EQ(to_dense(tt2), to_dense(tt));

    const CPTensor cp(oracle::random_vector(2, rng), {oracle::random_matrix(3, 2, rng), oracle::random_matrix(5, 2, rng)});
    std::stringstream s2;
    write_lrcp(s2, cp);
    EXPECT_EQ(to_dense(read_lrcp(s2)), to_dense(cp));

    const TuckerTensor tk = hosvd(random_dense({3, 4, 2}, rng), {2, 2, 1});
    std::stringstream s3;
    write_lrtk(s3, tk);
    EXPECT_EQ(to_dense(read_lrtk(s3)), to_dense(tk));

    std::stringstream wrong;
    write_lrcp(wrong, cp);
    EXPECT_THROW(read_lrtt(wrong), InvalidArgument);
}
