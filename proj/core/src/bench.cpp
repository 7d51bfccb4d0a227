#include "tensormor/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "json_io.hpp"
#include "tensormor/galerkin.hpp"
#include "tensormor/greedy.hpp"
#include "tensormor/regression.hpp"
#include "tensormor/tensor_solver.hpp"

#ifndef TENSORMOR_VERSION
#define TENSORMOR_VERSION "0.0.0"
#endif

namespace tensormor::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// n equispaced points on [lo, hi]; the midpoint when n is 1.
Vector nodes(std::size_t n, double lo, double hi) {
    if (n == 1) return Vector::Constant(1, 0.5 * (lo + hi));
    return Vector::LinSpaced(idx(n), lo, hi);
}

// k-th smallest eigenvalue (k = 1..n) of tridiag(-1, 2, -1) of size n.
double tridiag_eigenvalue(std::size_t n, std::size_t k) {
    const double pi = 3.14159265358979323846;
    return 2.0 - 2.0 * std::cos(static_cast<double>(k) * pi / static_cast<double>(n + 1));
}

Matrix tridiag(std::size_t n) {
    Matrix a = Matrix::Zero(idx(n), idx(n));
    for (std::size_t i = 0; i < n; ++i) {
        a(idx(i), idx(i)) = 2.0;
        if (i + 1 < n) {
            a(idx(i), idx(i + 1)) = -1.0;
            a(idx(i + 1), idx(i)) = -1.0;
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// config sections with key tracking and range checks
// ---------------------------------------------------------------------------

class Section {
public:
    Section(std::string name, json obj) : name_(std::move(name)), obj_(std::move(obj)) {
        if (obj_.is_null()) obj_ = json::object();
        if (!obj_.is_object()) throw UsageError(name_ + " must be a JSON object");
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return obj_.contains(key);
    }

    std::size_t count(const std::string& key, std::size_t def, std::size_t lo, std::size_t hi) {
        used_.insert(key);
        if (!obj_.contains(key)) return def;
        const json& v = obj_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) throw UsageError(where(key) + " must be a non-negative integer");
        const auto n = v.get<std::size_t>();
        if (n < lo || n > hi) throw UsageError(where(key) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return n;
    }

    double real(const std::string& key, double def, double lo, double hi) {
        used_.insert(key);
        if (!obj_.contains(key)) return def;
        const json& v = obj_.at(key);
        if (!v.is_number()) throw UsageError(where(key) + " must be a number");
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi)) throw UsageError(where(key) + " must lie in [" + fmt_double(lo) + ", " + fmt_double(hi) + "]");
        return x;
    }

    std::string text(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
        used_.insert(key);
        if (!obj_.contains(key)) return def;
        const json& v = obj_.at(key);
        if (!v.is_string()) throw UsageError(where(key) + " must be a string");
        const auto s = v.get<std::string>();
        if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) throw UsageError(where(key) + ": unknown value '" + s + "'");
        return s;
    }

    Section child(const std::string& key) {
        used_.insert(key);
        return Section(name_ + "." + key, obj_.contains(key) ? obj_.at(key) : json::object());
    }

    std::vector<std::size_t> counts(const std::string& key, std::size_t lo, std::size_t hi) {
        used_.insert(key);
        std::vector<std::size_t> out;
        const json& v = obj_.at(key);
        if (!v.is_array() || v.empty()) throw UsageError(where(key) + " must be a non-empty array");
        for (const auto& e : v) {
            if (!e.is_number_integer() || e.get<long long>() < static_cast<long long>(lo) || e.get<std::size_t>() > hi) {
                throw UsageError(where(key) + " entries must be integers in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            }
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    std::vector<double> reals(const std::string& key, double lo, double hi) {
        used_.insert(key);
        std::vector<double> out;
        const json& v = obj_.at(key);
        if (!v.is_array() || v.empty()) throw UsageError(where(key) + " must be a non-empty array");
        for (const auto& e : v) {
            if (!e.is_number() || !(e.get<double>() >= lo && e.get<double>() <= hi)) {
                throw UsageError(where(key) + " entries must be numbers in [" + fmt_double(lo) + ", " + fmt_double(hi) + "]");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!used_.count(k)) throw UsageError(name_ + ": unknown key '" + k + "'");
        }
    }

private:
    std::string where(const std::string& key) const { return name_ + "." + key; }

    std::string name_;
    json obj_;
    std::set<std::string> used_;
};

bool is_function_generator(const std::string& g) { return g != "diffusion-affine"; }

bool needs_model(const std::string& method) { return method != "regress" && method != "ttsvd"; }

struct Problem {
    std::string generator;
    std::size_t M = 64;
    std::size_t d = 4;
    double c = 1.0;
    double lower = -1.0;
    double upper = 1.0;
};

// Parsed and validated method options.
struct Options {
    std::size_t K = 100;
    std::size_t m = 10;
    std::string indicator = "residual";
    std::size_t test_points = 50;
    std::string basis = "weak-greedy";
    std::size_t grid_points = 3;
    double eps = 1e-6;
    std::size_t maxit = 500;
    double target = 1e-6;
    std::optional<double> step;
    std::size_t max_rank = 10;
    std::size_t inner_sweeps = 50;
    double tol = 1e-12;
    std::size_t holdout = 200;
    std::size_t degree = 3;
    std::string features = "legendre";
    std::size_t rank = 2;
    double ridge = 0.0;
    std::size_t sweeps = 100;
    std::optional<std::vector<std::size_t>> cv_ranks;
    std::vector<double> cv_ridges{0.0};
    std::size_t cv_folds = 5;
};

struct Config {
    std::string method;
    Problem problem;
    Options opt;
    std::optional<std::uint64_t> seed;
    fs::path out_dir = "tensormor_out";
    std::string hash;
};

std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

Config parse_config(const RunOptions& ro) {
    if (std::find(methods().begin(), methods().end(), ro.method) == methods().end()) {
        throw UsageError("unknown method '" + ro.method + "'");
    }
    std::ifstream in(ro.config);
    if (!in) throw UsageError("cannot open config file " + ro.config.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    Section top("config", root);
    Config cfg;
    cfg.method = ro.method;
    cfg.hash = fnv1a(root.dump());
    if (top.has("method")) {
        const auto m = top.text("method", ro.method, methods());
        if (m != ro.method) throw UsageError("config method '" + m + "' does not match the requested method '" + ro.method + "'");
    }

    Section prob = top.child("problem");
    if (!prob.has("generator")) throw UsageError("config.problem.generator is required");
    Problem& p = cfg.problem;
    p.generator = prob.text("generator", "", generators());
    p.d = prob.count("d", 4, 1, 64);
    if (p.generator == "diffusion-affine") {
        p.M = prob.count("M", 64, 2, 100000);
        if (p.d > p.M) throw UsageError("config.problem.d must not exceed M");
    } else {
        p.lower = prob.real("lower", -1.0, -1e6, 1e6);
        p.upper = prob.real("upper", 1.0, -1e6, 1e6);
        if (!(p.lower < p.upper)) throw UsageError("config.problem.lower must be below upper");
        if (p.generator == "multiquadric-fn") p.c = prob.real("c", 1.0, 1e-12, 1e12);
    }
    prob.finish();
    if (needs_model(cfg.method) == is_function_generator(p.generator)) {
        throw UsageError("method '" + cfg.method + "' cannot run on generator '" + p.generator + "'");
    }

    if (top.has("seed")) {
        const json& s = root.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw UsageError("config.seed must be a non-negative integer");
        }
        cfg.seed = s.get<std::uint64_t>();
    }
    if (ro.seed) cfg.seed = ro.seed;
    if (!cfg.seed && cfg.method != "ttsvd") throw UsageError("method '" + cfg.method + "' needs a seed (config.seed or --seed)");

    Section out = top.child("output");
    if (out.has("dir")) {
        const json& dir = root.at("output").at("dir");
        if (!dir.is_string() || dir.get<std::string>().empty()) throw UsageError("config.output.dir must be a non-empty string");
        cfg.out_dir = dir.get<std::string>();
    }
    out.finish();
    if (ro.out_dir) cfg.out_dir = *ro.out_dir;

    Section o = top.child("options");
    Options& op = cfg.opt;
    const std::string& m = cfg.method;
    if (m == "pod" || m == "strong-greedy" || m == "weak-greedy" || m == "rom") {
        op.K = o.count("K", 100, 1, 1000000);
        op.m = o.count("m", 10, 1, op.K);
        if (m == "pod" && op.m > std::min(op.K, p.M)) throw UsageError("config.options.m must not exceed min(M, K)");
        if (m == "weak-greedy") op.indicator = o.text("indicator", "residual", {"residual", "exact"});
        if (m == "rom") {
            op.test_points = o.count("test_points", 50, 1, 1000000);
            op.basis = o.text("basis", "weak-greedy", {"weak-greedy", "pod"});
            if (op.m > std::min(op.K, p.M)) throw UsageError("config.options.m must not exceed min(M, K)");
        }
    } else if (m == "richardson" || m == "pgd") {
        op.grid_points = o.count("grid_points", 3, 1, 4096);
        if (m == "richardson") {
            op.eps = o.real("eps", 1e-6, 0.0, 0.5);
            op.maxit = o.count("maxit", 500, 1, 10000000);
            op.target = o.real("target", 1e-6, 1e-300, 1.0);
            if (o.has("step")) op.step = o.real("step", 1.0, 1e-300, 1e300);
        } else {
            op.max_rank = o.count("max_rank", 10, 1, 100000);
            op.inner_sweeps = o.count("inner_sweeps", 50, 1, 100000);
            op.tol = o.real("tol", 1e-12, 0.0, 1.0);
        }
    } else if (m == "regress") {
        op.K = o.count("K", 500, 2, 10000000);
        op.holdout = o.count("holdout", 200, 0, 10000000);
        op.degree = o.count("degree", 3, 0, 50);
        op.features = o.text("features", "legendre", {"legendre", "monomial"});
        op.rank = o.count("rank", 2, 1, 1000);
        op.ridge = o.real("ridge", 0.0, 0.0, 1e12);
        op.sweeps = o.count("sweeps", 100, 1, 1000000);
        op.tol = o.real("tol", 1e-14, 0.0, 1.0);
        if (o.has("cv")) {
            Section cv = o.child("cv");
            if (!cv.has("ranks")) throw UsageError("config.options.cv.ranks is required");
            op.cv_ranks = cv.counts("ranks", 1, 1000);
            if (cv.has("ridges")) op.cv_ridges = cv.reals("ridges", 0.0, 1e12);
            op.cv_folds = cv.count("folds", 5, 2, op.K);
            cv.finish();
        }
    } else if (m == "ttsvd") {
        op.grid_points = o.count("grid_points", 8, 1, 4096);
        op.tol = o.real("tol", 1e-10, 0.0, 1.0);
    }
    o.finish();
    top.finish();
    return cfg;
}

// ---------------------------------------------------------------------------
// staged artifacts: written into a sibling directory, moved on success
// ---------------------------------------------------------------------------

class Staging {
public:
    explicit Staging(const fs::path& out_dir) : out_(out_dir) {
        fs::path parent = out_.parent_path();
        if (parent.empty()) parent = ".";
        fs::create_directories(parent);
        dir_ = parent / ("." + out_.filename().string() + ".staging." + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    Staging(const Staging&) = delete;
    Staging& operator=(const Staging&) = delete;
    ~Staging() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void text(const std::string& name, const std::string& content) {
        std::ofstream f(path(name), std::ios::binary);
        f << content;
        if (!f) throw Error("cannot write artifact " + name);
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& e : fs::directory_iterator(dir_)) out.push_back(e.path().filename().string());
        std::sort(out.begin(), out.end());
        return out;
    }

    void commit() {
        fs::create_directories(out_);
        for (const auto& n : names()) fs::rename(dir_ / n, out_ / n);
    }

private:
    fs::path out_;
    fs::path dir_;
};

std::string csv(const ErrorReport& r) {
    std::ostringstream o;
    r.write_csv(o, false);
    return o.str();
}

std::string csv(const SolveTrace& t) {
    std::ostringstream o;
    t.write_csv(o, false);
    return o.str();
}

struct Snapshots {
    Matrix params;
    Matrix vectors;
};

Snapshots snapshots(const AffineModel& model, std::size_t K, std::mt19937_64& rng) {
    Snapshots s;
    s.params = model.domain.sample(K, rng);
    s.vectors.resize(idx(model.dim()), idx(K));
    for (std::size_t k = 0; k < K; ++k) s.vectors.col(idx(k)) = full_solve(model, s.params.row(idx(k)).transpose());
    return s;
}

std::vector<Vector> parameter_grids(const AffineModel& model, std::size_t n) {
    std::vector<Vector> g;
    for (std::size_t nu = 0; nu < model.domain.dim(); ++nu) {
        const double lo = model.domain.lower(idx(nu));
        const double hi = model.domain.upper(idx(nu));
        g.push_back(nodes(n, lo, hi));
    }
    return g;
}

// 2 / (min alpha + max beta) over the grid points, from the model bounds.
std::optional<double> analytic_step(const AffineModel& model, const std::vector<Vector>& grids) {
    if (!model.bounds) return std::nullopt;
    Shape shape;
    for (const auto& g : grids) shape.push_back(static_cast<std::size_t>(g.size()));
    check_dense_cap(shape_numel(shape), "analytic step over the parameter grid");
    double lo = INFINITY;
    double hi = 0.0;
    std::vector<std::size_t> ix(shape.size(), 0);
    Vector xi(idx(shape.size()));
    for (std::size_t lin = 0, n = shape_numel(shape); lin < n; ++lin) {
        for (std::size_t nu = 0; nu < shape.size(); ++nu) xi(idx(nu)) = grids[nu](idx(ix[nu]));
        const Vector a = model.op.coefficients(xi);
        lo = std::min(lo, model.bounds->alpha(a));
        hi = std::max(hi, model.bounds->beta(a));
        for (std::size_t nu = shape.size(); nu-- > 0;) {
            if (++ix[nu] < shape[nu]) break;
            ix[nu] = 0;
        }
    }
    if (!(lo > 0.0) || !(hi >= lo)) return std::nullopt;
    return 2.0 / (lo + hi);
}

void dump_trace(std::ostream& err, const SolveTrace& t) {
    err << "trace:\n";
    t.write_csv(err, true);
}

struct Outcome {
    int code = kOk;
    json info = json::object();
};

Outcome run_model_method(const Config& cfg, const AffineModel& model, Staging& st, std::ostream& log, std::ostream& err,
                         bool verbose) {
    const Options& o = cfg.opt;
    const std::string& m = cfg.method;
    std::mt19937_64 rng(*cfg.seed);
    Outcome out;

    if (m == "pod" || m == "strong-greedy") {
        const Snapshots s = snapshots(model, o.K, rng);
        const SnapshotSet set = SnapshotSet::uniform(s.vectors, s.params);
        if (m == "pod") {
            const PodResult p = pod(set, o.m);
            st.text("pod.csv", csv(p.report));
            st.text("width.csv", csv(width_l2(set, o.m)));
            out.info["singular_values"] = detail::vector_to_json(p.singular_values);
        } else {
            const GreedyResult g = strong_greedy(set, o.m);
            st.text("greedy.csv", csv(g.report));
            st.text("greedy.json", to_json(g));
            for (const auto& w : g.warnings) err << "warning: " << w << '\n';
        }
        return out;
    }

    if (m == "weak-greedy" || m == "rom") {
        const TrainSet train(model.domain.sample(o.K, rng));
        GreedyResult g;
        Subspace space;
        if (m == "rom" && o.basis == "pod") {
            const Snapshots s{train.points(), [&] {
                                  Matrix v(idx(model.dim()), idx(o.K));
                                  for (std::size_t k = 0; k < o.K; ++k) v.col(idx(k)) = full_solve(model, train.point(k));
                                  return v;
                              }()};
            space = pod(SnapshotSet::uniform(s.vectors, s.params), o.m).subspace;
        } else {
            const Indicator ind = (m == "weak-greedy" && o.indicator == "exact") ? Indicator::Exact : Indicator::Residual;
            g = weak_greedy(model, ind, train, o.m);
            for (const auto& w : g.warnings) err << "warning: " << w << '\n';
            space = g.subspace;
        }
        if (m == "weak-greedy") {
            st.text("weak_greedy.csv", csv(g.report));
            st.text("weak_greedy.json", to_json(g));
            return out;
        }
        const Matrix test = model.domain.sample(o.test_points, rng);
        std::vector<Vector> truth;
        for (Eigen::Index k = 0; k < test.rows(); ++k) truth.push_back(full_solve(model, test.row(k).transpose()));
        ErrorReport report;
        ReducedModel rm;
        for (std::size_t j = 1; j <= space.dim(); ++j) {
            rm = build_reduced(model, Subspace(space.basis().leftCols(idx(j))));
            double worst = 0.0;
            for (Eigen::Index k = 0; k < test.rows(); ++k) {
                const ReducedSolution r = solve_reduced(rm, test.row(k).transpose());
                const Vector& u = truth[static_cast<std::size_t>(k)];
                worst = std::max(worst, (u - lift(rm, r.coefficients)).norm() / u.norm());
            }
            report.add({j, worst, NormKind::LInf, 0.0});
            if (verbose) log << "rom: m=" << j << " max relative error " << fmt_double(worst) << '\n';
        }
        st.text("rom.csv", csv(report));
        if (space.dim() > 0) save_reduced(st.path("rom_model.json"), rm);
        out.info["basis_dim"] = space.dim();
        return out;
    }

    const std::vector<Vector> grids = parameter_grids(model, o.grid_points);
    const TensorSystem sys = assemble_from_affine(model, grids);
    if (m == "richardson") {
        RichardsonOptions ro;
        ro.eps = o.eps;
        ro.maxit = o.maxit;
        ro.target_resid = o.target;
        ro.step = o.step ? o.step : analytic_step(model, grids);
        SolveTrace partial;
        ro.observer = [&](const TraceRecord& r) {
            partial.add(r);
            if (verbose) log << "richardson: k=" << r.k << " resid " << fmt_double(r.resid) << '\n';
        };
        try {
            const RichardsonResult r = truncated_richardson(sys.op, sys.rhs, ro);
            st.text("richardson.csv", csv(r.trace));
            save(st.path("solution.lrtt"), r.solution);
            out.info["step"] = r.step;
            out.info["stop_reason"] = r.stop_reason;
            out.info["final_resid"] = r.trace.back().resid;
        } catch (const NumericalBreakdown&) {
            dump_trace(err, partial);
            throw;
        }
        return out;
    }

    // pgd
    PgdOptions po;
    po.max_rank = o.max_rank;
    po.inner_sweeps = o.inner_sweeps;
    po.tol = o.tol;
    po.seed = *cfg.seed;
    const PgdResult r = greedy_rank_one(sys.op, sys.rhs, po);
    st.text("pgd.csv", csv(r.trace));
    save(st.path("solution.lrcp"), r.solution);
    out.info["breakdown"] = r.breakdown;
    out.info["message"] = r.message;
    out.info["max_mode_residual"] = r.max_mode_residual;
    if (r.breakdown) {
        err << "numerical breakdown: " << r.message << '\n';
        dump_trace(err, r.trace);
        out.code = kBreakdown;
    }
    return out;
}

Outcome run_function_method(const Config& cfg, Staging& st, std::ostream& log, bool verbose) {
    const Options& o = cfg.opt;
    const Problem& p = cfg.problem;
    const auto f = make_function(p.generator, p.d, p.c);
    Outcome out;

    if (cfg.method == "ttsvd") {
        const FeatureBasis box = FeatureBasis::uniform(BasisKind::Legendre, p.d, 1, p.lower, p.upper);
        TensorGrid grid;
        for (std::size_t nu = 0; nu < p.d; ++nu) {
            grid.nodes.push_back(nodes(o.grid_points, p.lower, p.upper));
        }
        const DenseTensor u = grid_project(f, box, grid, GridMode::Interpolation);
        const TTTensor tt = tt_svd(u, o.tol);
        const RankTuple ranks = tt.ranks();
        std::ostringstream c;
        c << "k,rank\n";
        for (std::size_t k = 0; k < ranks.size(); ++k) c << k + 1 << ',' << ranks[k] << '\n';
        st.text("ttsvd.csv", c.str());
        save(st.path("tt.lrtt"), tt);
        const double unorm = u.norm();
        const double rel = unorm > 0.0 ? (to_dense(tt) - u).norm() / unorm : 0.0;
        json j;
        j["ranks"] = ranks;
        j["relative_error"] = rel;
        j["storage"] = storage_count(tt);
        j["dense_entries"] = u.numel();
        st.text("ttsvd.json", j.dump(2) + "\n");
        if (verbose) log << "ttsvd: relative error " << fmt_double(rel) << '\n';
        out.info["max_rank"] = tt.max_rank();
        return out;
    }

    // regress
    std::mt19937_64 rng(*cfg.seed);
    ParameterDomain box{Vector::Constant(idx(p.d), p.lower), Vector::Constant(idx(p.d), p.upper), Measure::Uniform};
    auto draw = [&](std::size_t k) {
        const Matrix pts = box.sample(k, rng);
        Vector y(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) y(i) = f(pts.row(i).transpose());
        return SampleSet(pts, y);
    };
    const SampleSet train = draw(o.K);
    std::optional<SampleSet> holdout;
    if (o.holdout > 0) holdout = draw(o.holdout);
    const FeatureBasis basis = FeatureBasis::uniform(o.features == "legendre" ? BasisKind::Legendre : BasisKind::Monomial,
                                                     p.d, o.degree + 1, p.lower, p.upper);
    CpAlsOptions co{o.rank, o.ridge, o.sweeps, o.tol, *cfg.seed};
    json cvj;
    if (o.cv_ranks) {
        const CvReport cv = cross_validate(train, basis, *o.cv_ranks, o.cv_ridges, o.cv_folds, co);
        co.rank = cv.best_rank;
        co.ridge = cv.best_ridge;
        cvj["best_rank"] = cv.best_rank;
        cvj["best_ridge"] = cv.best_ridge;
        cvj["best_rmse"] = cv.best_rmse;
        cvj["entries"] = json::array();
        for (const auto& e : cv.entries) cvj["entries"].push_back({{"rank", e.rank}, {"ridge", e.ridge}, {"mean_rmse", e.mean_rmse}});
        if (verbose) log << "regress: cv picked rank " << cv.best_rank << " ridge " << fmt_double(cv.best_ridge) << '\n';
    }
    const CpFit fit = cp_als_fit(train, basis, co, holdout ? &*holdout : nullptr);
    std::ostringstream samples;
    train.write_csv(samples);
    st.text("samples.csv", samples.str());
    std::ostringstream obj;
    obj << "k,objective\n";
    for (std::size_t k = 0; k < fit.report.objective.size(); ++k) obj << k + 1 << ',' << fmt_double(fit.report.objective[k]) << '\n';
    st.text("regress.csv", obj.str());
    json report = json::parse(fit.report.to_json());
    if (!cvj.is_null()) report["cross_validation"] = cvj;
    st.text("fit.json", report.dump(2) + "\n");
    save(st.path("coefficients.lrcp"), fit.coefficients);
    out.info["train_rmse"] = fit.report.train_rmse;
    return out;
}

void apply_dense_cap_env() {
    const char* env = std::getenv("TENSORMOR_DENSE_CAP");
    if (!env || !*env) return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0 || env[0] == '-') throw UsageError(std::string("TENSORMOR_DENSE_CAP must be a positive integer, got '") + env + "'");
    set_dense_cap(static_cast<std::size_t>(v));
}

void structured_error(std::ostream& err, const std::string& kind, const std::string& method, const std::string& message) {
    json j{{"error", kind}, {"method", method}, {"message", message}};
    err << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct Series {
    std::string key;
    std::string value;
    std::vector<std::pair<std::string, double>> rows;
};

Series read_series(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open report " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw UsageError("report " + path.string() + " is empty");
    static const std::map<std::string, std::pair<std::size_t, std::string>> schemas = {
        {"m,error,p,seconds", {1, "error"}},
        {"k,ranks,resid,J,seconds", {2, "resid"}},
        {"k,objective", {1, "objective"}},
        {"k,rank", {1, "rank"}},
    };
    const auto it = schemas.find(header);
    if (it == schemas.end()) throw UsageError("report " + path.string() + " has an unknown header: " + header);
    Series s;
    s.key = header.substr(0, header.find(','));
    s.value = it->second.second;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() <= it->second.first) throw UsageError("malformed row in " + path.string() + ": " + line);
        try {
            s.rows.emplace_back(cells[0], std::stod(cells[it->second.first]));
        } catch (const std::exception&) {
            throw UsageError("malformed row in " + path.string() + ": " + line);
        }
    }
    if (s.rows.empty()) throw UsageError("report " + path.string() + " has no records");
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

AffineModel diffusion_affine(std::size_t M, std::size_t d) {
    if (M < 2 || d < 1 || d > M) throw InvalidArgument("diffusion_affine: need M >= 2 and 1 <= d <= M");
    std::vector<OperatorTerm> terms;
    StabilityBounds b;
    b.alpha_lb = tridiag_eigenvalue(M, 1);
    b.beta_ub = tridiag_eigenvalue(M, M);
    b.term_min.push_back(b.alpha_lb);
    b.term_max.push_back(b.beta_ub);
    terms.push_back({tridiag(M), CoefficientFunction::constant(1.0)});
    for (std::size_t nu = 0; nu < d; ++nu) {
        const std::size_t begin = nu * M / d;
        const std::size_t n = (nu + 1) * M / d - begin;
        Matrix a = Matrix::Zero(idx(M), idx(M));
        a.block(idx(begin), idx(begin), idx(n), idx(n)) = tridiag(n);
        // zero rows outside the block put 0 in the spectrum unless the block is everything
        b.term_min.push_back(n == M ? tridiag_eigenvalue(n, 1) : 0.0);
        b.term_max.push_back(tridiag_eigenvalue(n, n));
        b.beta_ub += b.term_max.back();
        terms.push_back({std::move(a), CoefficientFunction::affine(nu)});
    }
    AffineModel model;
    model.op = AffineOperator(std::move(terms));
    model.rhs = AffineVector({{Vector::Ones(idx(M)), CoefficientFunction::constant(1.0)}});
    model.domain = {Vector::Constant(idx(d), 0.1), Vector::Constant(idx(d), 1.0), Measure::Uniform};
    model.spd = true;
    model.bounds = b;
    model.validate();
    return model;
}

std::function<double(const Vector&)> make_function(const std::string& name, std::size_t d, double c) {
    if (d < 1) throw InvalidArgument("make_function: d must be positive");
    if (name == "additive-fn") {
        return [d](const Vector& x) {
            double s = 0.0;
            for (std::size_t nu = 0; nu < d; ++nu) s += std::sin(static_cast<double>(nu + 1) * x(idx(nu)));
            return s;
        };
    }
    if (name == "rank-one-fn") {
        return [d](const Vector& x) {
            double p = 1.0;
            for (std::size_t nu = 0; nu < d; ++nu) p *= 1.0 + 0.5 * std::cos(static_cast<double>(nu + 1) * x(idx(nu)));
            return p;
        };
    }
    if (name == "multiquadric-fn") {
        if (!(c > 0.0)) throw InvalidArgument("make_function: multiquadric shift must be positive");
        return [c](const Vector& x) { return std::sqrt(c + x.squaredNorm()); };
    }
    throw UsageError("unknown function generator '" + name + "'");
}

const std::vector<std::string>& methods() {
    static const std::vector<std::string> m = {"pod", "strong-greedy", "weak-greedy", "rom", "richardson", "pgd", "regress", "ttsvd"};
    return m;
}

const std::vector<std::string>& generators() {
    static const std::vector<std::string> g = {"diffusion-affine", "additive-fn", "rank-one-fn", "multiquadric-fn"};
    return g;
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary);
        f << content;
        f.flush();
        if (!f) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("cannot write " + path.string());
        }
    }
    fs::rename(tmp, path);
}

int run(const RunOptions& options, std::ostream& log, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    Config cfg;
    try {
        apply_dense_cap_env();
        cfg = parse_config(options);
    } catch (const UsageError& e) {
        structured_error(err, "usage", options.method, e.what());
        return kUsage;
    }

    try {
        Staging st(cfg.out_dir);
        Outcome res;
        if (needs_model(cfg.method)) {
            const AffineModel model = diffusion_affine(cfg.problem.M, cfg.problem.d);
            res = run_model_method(cfg, model, st, log, err, options.verbose);
        } else {
            res = run_function_method(cfg, st, log, options.verbose);
        }
        json summary;
        summary["method"] = cfg.method;
        summary["generator"] = cfg.problem.generator;
        summary["config_hash"] = cfg.hash;
        summary["version"] = TENSORMOR_VERSION;
        summary["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
        summary["exit_code"] = res.code;
        summary["result"] = res.info;
        summary["artifacts"] = st.names();
        summary["artifacts"].push_back("summary.json");
        summary["timings"] = {{"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
        st.text("summary.json", summary.dump(2) + "\n");
        st.commit();
        if (options.verbose) log << cfg.method << ": wrote " << summary["artifacts"].size() << " artifacts to " << cfg.out_dir.string() << '\n';
        return res.code;
    } catch (const NumericalBreakdown& e) {
        structured_error(err, "numerical_breakdown", cfg.method, e.what());
        return kBreakdown;
    } catch (const UsageError& e) {
        structured_error(err, "usage", cfg.method, e.what());
        return kUsage;
    } catch (const std::exception& e) {
        structured_error(err, "failure", cfg.method, e.what());
        return kFailure;
    }
}

int compare(const fs::path& a, const fs::path& b, double factor, std::ostream& out, std::ostream& err) {
    try {
        if (!(factor > 0.0)) throw UsageError("compare factor must be positive");
        const Series sa = read_series(a);
        const Series sb = read_series(b);
        if (sa.key != sb.key || sa.value != sb.value) throw UsageError("reports do not share a schema");
        std::map<std::string, double> bv(sb.rows.begin(), sb.rows.end());
        std::ostringstream o;
        o << sa.key << ",a,b,ratio,flag\n";
        std::size_t shared = 0;
        std::size_t flagged = 0;
        for (const auto& [key, va] : sa.rows) {
            const auto it = bv.find(key);
            if (it == bv.end()) continue;
            ++shared;
            const double vb = it->second;
            const double ratio = va == vb ? 1.0 : (va == 0.0 ? INFINITY : vb / va);
            const bool bad = ratio > factor;
            flagged += bad;
            o << key << ',' << fmt_double(va) << ',' << fmt_double(vb) << ',' << fmt_double(ratio) << ',' << (bad ? "regression" : "ok") << '\n';
        }
        if (shared == 0) throw UsageError("reports share no " + sa.key + " values");
        out << o.str();
        return flagged ? kRegression : kOk;
    } catch (const UsageError& e) {
        structured_error(err, "usage", "compare", e.what());
        return kUsage;
    }
}

}  // namespace tensormor::bench
