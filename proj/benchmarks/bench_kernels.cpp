#include <benchmark/benchmark.h>

#include <Eigen/QR>

#include <random>

#include "tensormor/bench.hpp"
#include "tensormor/galerkin.hpp"
#include "tensormor/linalg.hpp"
#include "tensormor/lowrank.hpp"
#include "tensormor/regression.hpp"
#include "tensormor/tensor_solver.hpp"

using namespace tensormor;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    }
    return m;
}

Matrix tridiag(Eigen::Index n) {
    Matrix t = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        t(i, i) = 2.0;
        if (i + 1 < n) t(i, i + 1) = t(i + 1, i) = -1.0;
    }
    return t;
}

void BM_Svd(benchmark::State& state) {
    const Matrix a = random_matrix(state.range(0), state.range(0) * 3 / 2, 1);
    for (auto _ : state) benchmark::DoNotOptimize(svd(a).singular_values.data());
}
BENCHMARK(BM_Svd)->Arg(32)->Arg(128)->Arg(512);

void BM_TtRound(benchmark::State& state) {
    const auto f = bench::make_function("multiquadric-fn", 4);
    const FeatureBasis box = FeatureBasis::uniform(BasisKind::Legendre, 4, 1, -1.0, 1.0);
    TensorGrid g;
    for (int nu = 0; nu < 4; ++nu) g.nodes.push_back(Vector::LinSpaced(state.range(0), -1.0, 1.0));
    const TTTensor t = tt_svd(grid_project(f, box, g, GridMode::Interpolation), 1e-12);
    const TTTensor doubled = tt_add(t, t);
    for (auto _ : state) benchmark::DoNotOptimize(tt_round(doubled, 1e-8).max_rank());
}
BENCHMARK(BM_TtRound)->Arg(8)->Arg(16);

void BM_SolveReduced(benchmark::State& state) {
    const AffineModel model = bench::diffusion_affine(static_cast<std::size_t>(state.range(0)), 4);
    Eigen::HouseholderQR<Matrix> qr(random_matrix(state.range(0), state.range(1), 2));
    const Matrix q = qr.householderQ() * Matrix::Identity(state.range(0), state.range(1));
    const ReducedModel rm = build_reduced(model, Subspace(q));
    const Vector xi = Vector::Constant(4, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(solve_reduced(rm, xi).residual);
}
BENCHMARK(BM_SolveReduced)->Args({256, 4})->Args({256, 8})->Args({1024, 8})->Args({2048, 8});

void BM_OpApply(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    const Matrix t = tridiag(n);
    const Matrix id = Matrix::Identity(n, n);
    const KroneckerOperator a({{t, id, id}, {id, t, id}, {id, id, t}});
    const TTTensor x = TTTensor::rank_one(std::vector<Vector>(3, Vector::Ones(n)));
    for (auto _ : state) benchmark::DoNotOptimize(op_apply(a, x).max_rank());
}
BENCHMARK(BM_OpApply)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
