#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tensormor/bench.hpp"
#include "tensormor/order2.hpp"

using namespace tensormor;
namespace tb = tensormor::bench;
namespace fs = std::filesystem;

namespace {

class BenchRun : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / (std::string("tensormor_bench_") + info->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path write_config(const std::string& name, const std::string& body) {
        const fs::path p = root_ / name;
        std::ofstream(p) << body;
        return p;
    }

    int run(const std::string& method, const fs::path& config, const fs::path& out) {
        tb::RunOptions ro;
        ro.method = method;
        ro.config = config;
        ro.out_dir = out;
        std::ostringstream log;
        err_.str("");
        return tb::run(ro, log, err_);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static ErrorReport report(const fs::path& p) {
        std::ifstream in(p);
        return ErrorReport::read_csv(in);
    }

    fs::path root_;
    std::ostringstream err_;
};

const char* kPod = R"({
  "problem": {"generator": "diffusion-affine", "M": 64, "d": 4},
  "options": {"K": 100, "m": 10},
  "seed": 3
})";

}  // namespace

TEST(Generators, DiffusionBoundsEncloseSpectrum) {
    const AffineModel model = tb::diffusion_affine(40, 4);
    ASSERT_TRUE(model.bounds.has_value());
    std::mt19937_64 rng(5);
    const Matrix pts = model.domain.sample(20, rng);
    for (Eigen::Index k = 0; k < pts.rows(); ++k) {
        const Vector xi = pts.row(k).transpose();
        const Matrix a = model.op.assemble(xi);
        EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        EXPECT_GT(lo, 0.0);
        EXPECT_LE(model.bounds->alpha_lb, lo * (1 + 1e-12));
        EXPECT_GE(model.bounds->beta_ub, hi * (1 - 1e-12));
        const Vector c = model.op.coefficients(xi);
        EXPECT_LE(model.bounds->alpha(c), lo * (1 + 1e-12));
        EXPECT_GE(model.bounds->beta(c), hi * (1 - 1e-12));
    }
}

TEST(Generators, FunctionsAreDeterministicAndStructured) {
    const auto add = tb::make_function("additive-fn", 3);
    const auto one = tb::make_function("rank-one-fn", 3);
    const auto mq = tb::make_function("multiquadric-fn", 3, 2.0);
    Vector x(3);
    x << 0.3, -0.2, 0.7;
    EXPECT_EQ(add(x), tb::make_function("additive-fn", 3)(x));
    // additive: f(x) + f(y) = f(x with y_1) + f(y with x_1)
    Vector y(3);
    y << -0.5, 0.1, 0.4;
    Vector xs = x;
    Vector ys = y;
    std::swap(xs(0), ys(0));
    EXPECT_NEAR(add(x) + add(y), add(xs) + add(ys), 1e-14);
    // rank one: f(x) f(y) = f(xs) f(ys)
    EXPECT_NEAR(one(x) * one(y), one(xs) * one(ys), 1e-14);
    EXPECT_NEAR(mq(x), std::sqrt(2.0 + x.squaredNorm()), 1e-15);
    EXPECT_THROW(tb::make_function("nope", 2), tb::UsageError);
}

TEST_F(BenchRun, PodWritesNonIncreasingErrors) {
    const fs::path out = root_ / "pod";
    ASSERT_EQ(run("pod", write_config("c.json", kPod), out), tb::kOk) << err_.str();
    const ErrorReport r = report(out / "pod.csv");
    ASSERT_EQ(r.size(), 10u);
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LE(r[i].error, r[i - 1].error);
    EXPECT_TRUE(fs::exists(out / "summary.json"));
}

TEST_F(BenchRun, WidthPodGreedyOrdering) {
    const fs::path cfg = write_config("c.json", kPod);
    ASSERT_EQ(run("pod", cfg, root_ / "a"), tb::kOk);
    ASSERT_EQ(run("strong-greedy", cfg, root_ / "b"), tb::kOk);
    const ErrorReport width = report(root_ / "a" / "width.csv");
    const ErrorReport pod = report(root_ / "a" / "pod.csv");
    const ErrorReport greedy = report(root_ / "b" / "greedy.csv");
    const double floor = 1e-10 * greedy[0].error;
    for (const auto& rec : pod.records()) {
        const auto w = width.at_rank(rec.m);
        const auto g = greedy.at_rank(rec.m);
        ASSERT_TRUE(w && g);
        EXPECT_LE(w->error, rec.error * (1 + 1e-10) + floor);
        EXPECT_LE(rec.error, g->error * (1 + 1e-10) + floor);
    }
}

TEST_F(BenchRun, CompareRatios) {
    const fs::path cfg = write_config("c.json", kPod);
    ASSERT_EQ(run("pod", cfg, root_ / "a"), tb::kOk);
    ASSERT_EQ(run("strong-greedy", cfg, root_ / "b"), tb::kOk);
    std::ostringstream out;
    std::ostringstream err;
    EXPECT_EQ(tb::compare(root_ / "a" / "pod.csv", root_ / "a" / "pod.csv", 1.0, out, err), tb::kOk);
    std::istringstream rows(out.str());
    std::string line;
    std::getline(rows, line);
    EXPECT_EQ(line, "m,a,b,ratio,flag");
    int n = 0;
    while (std::getline(rows, line)) {
        EXPECT_NE(line.find(",1,ok"), std::string::npos) << line;
        ++n;
    }
    EXPECT_EQ(n, 10);

    std::ostringstream cmp;
    EXPECT_EQ(tb::compare(root_ / "a" / "pod.csv", root_ / "b" / "greedy.csv", 1.5, cmp, err), tb::kRegression);
    EXPECT_NE(cmp.str().find("regression"), std::string::npos);

    std::ofstream(root_ / "empty.csv") << "m,error,p,seconds\n";
    EXPECT_EQ(tb::compare(root_ / "a" / "pod.csv", root_ / "empty.csv", 1.0, out, err), tb::kUsage);
    std::ofstream(root_ / "trace.csv") << "k,ranks,resid,J,seconds\n0,1,2,4,0\n";
    EXPECT_EQ(tb::compare(root_ / "a" / "pod.csv", root_ / "trace.csv", 1.0, out, err), tb::kUsage);
}

TEST_F(BenchRun, TtsvdAdditiveRanksAtMostTwo) {
    const fs::path cfg = write_config("c.json", R"({"problem": {"generator": "additive-fn", "d": 4},
        "options": {"grid_points": 8, "tol": 1e-10}})");
    const fs::path out = root_ / "tt";
    ASSERT_EQ(run("ttsvd", cfg, out), tb::kOk) << err_.str();
    std::ifstream in(out / "ttsvd.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "k,rank");
    int rows = 0;
    while (std::getline(in, line)) {
        const auto rank = std::stoul(line.substr(line.find(',') + 1));
        EXPECT_LE(rank, 2u);
        EXPECT_GE(rank, 1u);
        ++rows;
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(BenchRun, MalformedConfigsAreUsageErrorsWithoutArtifacts) {
    const std::vector<std::pair<std::string, std::string>> bad = {
        {"pod", "{ not json"},
        {"pod", R"({"problem": {"generator": "heat-3d"}, "seed": 1})"},
        {"pod", R"({"problem": {"generator": "diffusion-affine"}})"},
        {"pod", R"({"problem": {"generator": "diffusion-affine"}, "options": {"K": 10, "m": 11}, "seed": 1})"},
        {"pod", R"({"problem": {"generator": "diffusion-affine"}, "options": {"Kay": 10}, "seed": 1})"},
        {"pod", R"({"problem": {"generator": "additive-fn"}, "seed": 1})"},
        {"ttsvd", R"({"problem": {"generator": "diffusion-affine"}})"},
        {"richardson", R"({"problem": {"generator": "diffusion-affine"}, "options": {"eps": -1}, "seed": 1})"},
        {"ttsvd", R"({"problem": {"generator": "additive-fn"}, "method": "pod"})"},
        {"svd", R"({"problem": {"generator": "additive-fn"}})"},
    };
    int i = 0;
    for (const auto& [method, body] : bad) {
        const fs::path out = root_ / ("o" + std::to_string(i));
        EXPECT_EQ(run(method, write_config("bad" + std::to_string(i) + ".json", body), out), tb::kUsage) << body;
        EXPECT_FALSE(fs::exists(out)) << body;
        EXPECT_NE(err_.str().find("\"error\":\"usage\""), std::string::npos);
        ++i;
    }
}

TEST_F(BenchRun, DivergenceExitsWithBreakdownAndTrace) {
    const fs::path cfg = write_config("c.json", R"({"problem": {"generator": "diffusion-affine", "M": 8, "d": 2},
        "options": {"grid_points": 2, "step": 5.0, "maxit": 200}, "seed": 1})");
    const fs::path out = root_ / "r";
    EXPECT_EQ(run("richardson", cfg, out), tb::kBreakdown);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_NE(err_.str().find("numerical_breakdown"), std::string::npos);
    EXPECT_NE(err_.str().find("k,ranks,resid,J,seconds"), std::string::npos);
}

TEST_F(BenchRun, RerunsAreByteIdentical) {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"pod", kPod},
        {"weak-greedy", R"({"problem": {"generator": "diffusion-affine", "M": 32, "d": 2},
            "options": {"K": 50, "m": 6}, "seed": 9})"},
        {"rom", R"({"problem": {"generator": "diffusion-affine", "M": 32, "d": 2},
            "options": {"K": 50, "m": 5, "test_points": 10}, "seed": 9})"},
        {"regress", R"({"problem": {"generator": "rank-one-fn", "d": 3},
            "options": {"K": 200, "holdout": 50, "degree": 3, "rank": 1, "sweeps": 20}, "seed": 4})"},
        {"pgd", R"({"problem": {"generator": "diffusion-affine", "M": 8, "d": 2},
            "options": {"grid_points": 3, "max_rank": 4}, "seed": 2})"},
    };
    for (const auto& [method, body] : cases) {
        const fs::path cfg = write_config(method + ".json", body);
        ASSERT_EQ(run(method, cfg, root_ / (method + "1")), tb::kOk) << err_.str();
        ASSERT_EQ(run(method, cfg, root_ / (method + "2")), tb::kOk) << err_.str();
        int csvs = 0;
        for (const auto& e : fs::directory_iterator(root_ / (method + "1"))) {
            if (e.path().extension() != ".csv") continue;
            ++csvs;
            EXPECT_EQ(slurp(e.path()), slurp(root_ / (method + "2") / e.path().filename())) << method << " " << e.path();
        }
        EXPECT_GT(csvs, 0) << method;
    }
}

TEST_F(BenchRun, SeedOverrideChangesSamples) {
    const fs::path cfg = write_config("c.json", kPod);
    ASSERT_EQ(run("pod", cfg, root_ / "a"), tb::kOk);
    tb::RunOptions ro;
    ro.method = "pod";
    ro.config = cfg;
    ro.out_dir = root_ / "b";
    ro.seed = 4;
    std::ostringstream log;
    ASSERT_EQ(tb::run(ro, log, err_), tb::kOk);
    EXPECT_NE(slurp(root_ / "a" / "pod.csv"), slurp(root_ / "b" / "pod.csv"));
}

TEST(AtomicWrite, ReplacesContent) {
    const fs::path p = fs::temp_directory_path() / "tensormor_atomic.txt";
    tb::write_file_atomic(p, "one");
    tb::write_file_atomic(p, "two");
    std::ifstream in(p);
    std::string s;
    in >> s;
    EXPECT_EQ(s, "two");
    fs::remove(p);
}
