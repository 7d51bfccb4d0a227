#include "tensormor/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"

namespace tensormor {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// SampleSet
// ---------------------------------------------------------------------------

SampleSet::SampleSet(Matrix points, Vector values) : points_(std::move(points)), values_(std::move(values)) {
    if (points_.rows() < 1) throw InvalidArgument("sample set needs at least one sample");
    if (points_.cols() < 1) throw InvalidArgument("sample points need at least one coordinate");
    if (values_.size() != points_.rows()) throw InvalidArgument("sample value count must equal point count");
    if (!points_.allFinite() || !values_.allFinite()) throw InvalidArgument("sample data must be finite");
}

SampleSet SampleSet::subset(const std::vector<std::size_t>& rows) const {
    Matrix p(idx(rows.size()), points_.cols());
    Vector v(idx(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= size()) throw InvalidArgument("sample subset index out of range");
        p.row(idx(i)) = points_.row(idx(rows[i]));
        v(idx(i)) = values_(idx(rows[i]));
    }
    return SampleSet(std::move(p), std::move(v));
}

void SampleSet::write_csv(std::ostream& out) const {
    for (std::size_t c = 0; c < dim(); ++c) out << "xi_" << c + 1 << ',';
    out << "y\n";
    for (Eigen::Index k = 0; k < points_.rows(); ++k) {
        for (Eigen::Index c = 0; c < points_.cols(); ++c) out << fmt_double(points_(k, c)) << ',';
        out << fmt_double(values_(k)) << '\n';
    }
}

SampleSet SampleSet::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("sample CSV is empty");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    if (header.size() < 2 || header.back() != "y") throw InvalidArgument("sample CSV header must end with y");
    for (std::size_t c = 0; c + 1 < header.size(); ++c) {
        if (header[c] != "xi_" + std::to_string(c + 1)) throw InvalidArgument("sample CSV header must be xi_1,...,xi_d,y");
    }
    const std::size_t d = header.size() - 1;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw InvalidArgument("malformed sample CSV value: " + tok);
            }
        }
        if (row.size() != d + 1) throw InvalidArgument("sample CSV row has the wrong number of fields");
        rows.push_back(std::move(row));
    }
    Matrix p(idx(rows.size()), idx(d));
    Vector v(idx(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t c = 0; c < d; ++c) p(idx(k), idx(c)) = rows[k][c];
        v(idx(k)) = rows[k][d];
    }
    return SampleSet(std::move(p), std::move(v));
}

// ---------------------------------------------------------------------------
// FeatureBasis
// ---------------------------------------------------------------------------

FeatureBasis::FeatureBasis(BasisKind kind, std::vector<std::size_t> sizes, Vector lower, Vector upper)
    : kind_(kind), sizes_(std::move(sizes)), lower_(std::move(lower)), upper_(std::move(upper)) {
    if (sizes_.empty()) throw InvalidArgument("feature basis needs at least one dimension");
    if (lower_.size() != idx(sizes_.size()) || upper_.size() != idx(sizes_.size())) {
        throw InvalidArgument("feature basis interval count must equal its dimension");
    }
    for (std::size_t nu = 0; nu < sizes_.size(); ++nu) {
        if (sizes_[nu] < 1) throw InvalidArgument("feature basis sizes must be positive");
        if (!(upper_(idx(nu)) > lower_(idx(nu)))) throw InvalidArgument("feature basis intervals must be non-empty");
    }
}

FeatureBasis FeatureBasis::uniform(BasisKind kind, std::size_t dim, std::size_t size, double lower, double upper) {
    return FeatureBasis(kind, std::vector<std::size_t>(dim, size), Vector::Constant(idx(dim), lower),
                        Vector::Constant(idx(dim), upper));
}

Vector FeatureBasis::eval(std::size_t nu, double x) const {
    const std::size_t n = sizes_.at(nu);
    Vector out(idx(n));
    if (kind_ == BasisKind::Monomial) {
        double p = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            out(idx(k)) = p;
            p *= x;
        }
        return out;
    }
    const double a = lower_(idx(nu));
    const double b = upper_(idx(nu));
    const double t = (2.0 * x - a - b) / (b - a);
    double p0 = 1.0;
    double p1 = t;
    for (std::size_t k = 0; k < n; ++k) {
        double pk;
        if (k == 0) {
            pk = p0;
        } else if (k == 1) {
            pk = p1;
        } else {
            const double kk = static_cast<double>(k - 1);
            pk = ((2.0 * kk + 1.0) * t * p1 - kk * p0) / (kk + 1.0);
            p0 = p1;
            p1 = pk;
        }
        out(idx(k)) = std::sqrt(2.0 * static_cast<double>(k) + 1.0) * pk;
    }
    return out;
}

std::pair<Vector, Vector> gauss_legendre(std::size_t n) {
    if (n < 1) throw InvalidArgument("gauss_legendre: need at least one node");
    Matrix j = Matrix::Zero(idx(n), idx(n));
    for (std::size_t k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        j(idx(k - 1), idx(k)) = j(idx(k), idx(k - 1)) = kk / std::sqrt(4.0 * kk * kk - 1.0);
    }
    const SymEigResult e = sym_eig(j);
    Vector nodes(idx(n));
    Vector weights(idx(n));
    // eigenvalues come non-increasing; emit ascending nodes
    for (std::size_t k = 0; k < n; ++k) {
        const Eigen::Index src = idx(n - 1 - k);
        nodes(idx(k)) = e.values(src);
        weights(idx(k)) = 2.0 * e.vectors(0, src) * e.vectors(0, src);
    }
    return {nodes, weights};
}

// ---------------------------------------------------------------------------
// CP-ALS regression
// ---------------------------------------------------------------------------

double predict(const CPTensor& c, const FeatureBasis& basis, const Vector& xi) {
    if (c.order() != basis.dim() || xi.size() != idx(basis.dim())) throw InvalidArgument("predict: dimension mismatch");
    Vector prod = c.weights();
    for (std::size_t nu = 0; nu < basis.dim(); ++nu) {
        prod.array() *= (c.factor(nu).transpose() * basis.eval(nu, xi(idx(nu)))).array();
    }
    return prod.sum();
}

double rmse(const CPTensor& c, const FeatureBasis& basis, const SampleSet& samples) {
    double s = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double e = samples.values()(idx(k)) - predict(c, basis, samples.point(k));
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(samples.size()));
}

std::string FitReport::to_json() const {
    nlohmann::json j;
    j["rank"] = rank;
    j["ridge"] = ridge;
    j["sweeps"] = sweeps;
    j["seed"] = seed;
    j["train_rmse"] = train_rmse;
    j["validation_rmse"] = validation_rmse ? nlohmann::json(*validation_rmse) : nlohmann::json(nullptr);
    j["sample_ratio"] = sample_ratio;
    j["monotone"] = monotone;
    j["warnings"] = warnings;
    return j.dump(2);
}

CpFit cp_als_fit(const SampleSet& samples, const FeatureBasis& basis, const CpAlsOptions& opt, const SampleSet* holdout) {
    if (samples.dim() != basis.dim()) throw InvalidArgument("cp_als_fit: sample and basis dimensions differ");
    if (opt.rank < 1) throw InvalidArgument("cp_als_fit: rank must be positive");
    if (!(opt.ridge >= 0.0) || !std::isfinite(opt.ridge)) throw InvalidArgument("cp_als_fit: ridge must be non-negative");
    const std::size_t K = samples.size();
    const std::size_t d = basis.dim();
    const Eigen::Index r = idx(opt.rank);
    const double kd = static_cast<double>(K);
    const Vector& y = samples.values();

    std::vector<Matrix> phi(d);
    for (std::size_t nu = 0; nu < d; ++nu) {
        phi[nu].resize(idx(K), idx(basis.size(nu)));
        for (std::size_t k = 0; k < K; ++k) phi[nu].row(idx(k)) = basis.eval(nu, samples.points()(idx(k), idx(nu))).transpose();
    }

    CpFit out;
    FitReport& rep = out.report;
    rep.rank = opt.rank;
    rep.ridge = opt.ridge;
    rep.seed = opt.seed;
    std::size_t params = 0;
    for (std::size_t nu = 0; nu < d; ++nu) params += basis.size(nu) * opt.rank;
    rep.sample_ratio = kd / static_cast<double>(params);
    if (rep.sample_ratio < 3.0) {
        rep.warnings.push_back("sample count below 3x the number of free parameters (ratio " + fmt_double(rep.sample_ratio) + ")");
    }

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Matrix> c(d);
    std::vector<Matrix> proj(d);
    for (std::size_t nu = 0; nu < d; ++nu) {
        c[nu].resize(idx(basis.size(nu)), r);
        for (Eigen::Index j = 0; j < c[nu].cols(); ++j) {
            for (Eigen::Index i = 0; i < c[nu].rows(); ++i) c[nu](i, j) = normal(rng);
        }
        proj[nu] = phi[nu] * c[nu];
    }
    auto penalty = [&]() {
        double p = 0.0;
        for (const auto& m : c) p += m.squaredNorm();
        return opt.ridge * p;
    };

    bool warned_deficient = false;
    const double scale = y.squaredNorm() / kd;
    double prev_sweep = INFINITY;
    double prev = INFINITY;
    for (std::size_t sweep = 0; sweep < opt.sweeps; ++sweep) {
        for (std::size_t nu = 0; nu < d; ++nu) {
            const Eigen::Index n = idx(basis.size(nu));
            Matrix q = Matrix::Ones(idx(K), r);
            for (std::size_t mu = 0; mu < d; ++mu) {
                if (mu != nu) q.array() *= proj[mu].array();
            }
            Matrix z(idx(K), n * r);
            for (Eigen::Index i = 0; i < r; ++i) z.middleCols(i * n, n) = q.col(i).asDiagonal() * phi[nu];
            Vector x;
            if (opt.ridge == 0.0) {
                Eigen::CompleteOrthogonalDecomposition<Matrix> cod(z);
                if (cod.rank() < z.cols() && !warned_deficient) {
                    rep.warnings.push_back("rank-deficient sub-problem with zero ridge; minimum-norm solution used");
                    warned_deficient = true;
                }
                x = cod.solve(y);
            } else {
                Matrix aug(z.rows() + z.cols(), z.cols());
                aug << z, std::sqrt(kd * opt.ridge) * Matrix::Identity(z.cols(), z.cols());
                Vector rhs = Vector::Zero(aug.rows());
                rhs.head(idx(K)) = y;
                x = aug.householderQr().solve(rhs);
            }
            c[nu] = Eigen::Map<const Matrix>(x.data(), n, r);
            proj[nu] = phi[nu] * c[nu];
            const double obj = (z * x - y).squaredNorm() / kd + penalty();
            rep.objective.push_back(obj);
            if (obj > prev * (1.0 + 1e-10) + 1e-15 * scale) rep.monotone = false;
            prev = obj;
        }
        rep.sweeps = sweep + 1;
        if (prev <= 1e-30 * scale) break;
        if (std::isfinite(prev_sweep) && std::abs(prev_sweep - prev) <= opt.tol * prev_sweep) break;
        prev_sweep = prev;
    }
    if (!rep.monotone) rep.warnings.push_back("objective increased during a mode update");
    out.coefficients = CPTensor(Vector::Ones(r), c).normalized();
    rep.train_rmse = rmse(out.coefficients, basis, samples);
    if (holdout) rep.validation_rmse = rmse(out.coefficients, basis, *holdout);
    return out;
}

// ---------------------------------------------------------------------------
// cross-validation
// ---------------------------------------------------------------------------

CvReport cross_validate(const SampleSet& samples, const FeatureBasis& basis, const std::vector<std::size_t>& ranks,
                        const std::vector<double>& ridges, std::size_t folds, const CpAlsOptions& base) {
    const std::size_t K = samples.size();
    if (folds < 2) throw InvalidArgument("cross_validate: need at least two folds");
    if (folds > K) throw InvalidArgument("cross_validate: more folds than samples");
    if (ranks.empty() || ridges.empty()) throw InvalidArgument("cross_validate: empty rank or ridge grid");

    // Fisher-Yates with raw engine output keeps the split identical across standard libraries
    std::vector<std::size_t> perm(K);
    for (std::size_t i = 0; i < K; ++i) perm[i] = i;
    std::mt19937_64 rng(base.seed);
    for (std::size_t i = K; i-- > 1;) std::swap(perm[i], perm[static_cast<std::size_t>(rng() % (i + 1))]);
    std::vector<std::vector<std::size_t>> train(folds), test(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t i = 0; i < K; ++i) (i % folds == f ? test[f] : train[f]).push_back(perm[i]);
    }

    std::vector<std::size_t> rs = ranks;
    std::vector<double> ls = ridges;
    std::sort(rs.begin(), rs.end());
    std::sort(ls.begin(), ls.end());
    CvReport rep;
    const double tie = 1e-12 * std::sqrt(samples.values().squaredNorm() / static_cast<double>(K)) + 1e-300;
    bool have = false;
    for (std::size_t r : rs) {
        for (double l : ls) {
            CpAlsOptions o = base;
            o.rank = r;
            o.ridge = l;
            double sum = 0.0;
            for (std::size_t f = 0; f < folds; ++f) {
                const SampleSet tr = samples.subset(train[f]);
                const SampleSet te = samples.subset(test[f]);
                sum += *cp_als_fit(tr, basis, o, &te).report.validation_rmse;
            }
            const double mean = sum / static_cast<double>(folds);
            rep.entries.push_back({r, l, mean});
            if (!have || mean < rep.best_rmse - tie) {
                rep.best_rank = r;
                rep.best_ridge = l;
                rep.best_rmse = mean;
                have = true;
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// grid evaluation and projection
// ---------------------------------------------------------------------------

TensorGrid gauss_grid(const FeatureBasis& basis, std::size_t points) {
    const auto [x, w] = gauss_legendre(points);
    TensorGrid g;
    for (std::size_t nu = 0; nu < basis.dim(); ++nu) {
        const double a = basis.lower()(idx(nu));
        const double b = basis.upper()(idx(nu));
        g.nodes.push_back(((x.array() + 1.0) * 0.5 * (b - a) + a).matrix());
        g.weights.push_back(0.5 * w);
    }
    return g;
}

DenseTensor grid_project(const std::function<double(const Vector&)>& f, const FeatureBasis& basis, const TensorGrid& grid,
                         GridMode mode) {
    const std::size_t d = basis.dim();
    if (grid.nodes.size() != d) throw InvalidArgument("grid_project: one node set per dimension required");
    Shape shape;
    for (const auto& n : grid.nodes) {
        if (n.size() < 1) throw InvalidArgument("grid_project: empty node set");
        shape.push_back(static_cast<std::size_t>(n.size()));
    }
    std::size_t numel = 1;
    for (std::size_t n : shape) {
        if (numel > dense_cap() / n + 1) {
            numel = dense_cap() + 1;
            break;
        }
        numel *= n;
    }
    check_dense_cap(numel, "grid_project: tensorized grid exceeds the dense cap; use tt compression at smaller d");
    std::vector<double> vals(numel);
    MultiIndex mi(d, 0);
    Vector xi(idx(d));
    for (std::size_t lin = 0; lin < numel; ++lin) {
        for (std::size_t nu = 0; nu < d; ++nu) xi(idx(nu)) = grid.nodes[nu](idx(mi[nu]));
        vals[lin] = f(xi);
        for (std::size_t nu = d; nu-- > 0;) {
            if (++mi[nu] < shape[nu]) break;
            mi[nu] = 0;
        }
    }
    DenseTensor u(shape, std::move(vals));
    if (mode == GridMode::Interpolation) return u;

    if (grid.weights.size() != d) throw InvalidArgument("grid_project: quadrature mode needs weights per dimension");
    for (std::size_t nu = 0; nu < d; ++nu) {
        if (grid.weights[nu].size() != grid.nodes[nu].size()) throw InvalidArgument("grid_project: weight count mismatch");
        Matrix op(idx(basis.size(nu)), grid.nodes[nu].size());
        for (Eigen::Index k = 0; k < op.cols(); ++k) op.col(k) = grid.weights[nu](k) * basis.eval(nu, grid.nodes[nu](k));
        u = mode_product(u, nu, op);
    }
    return u;
}

}  // namespace tensormor
