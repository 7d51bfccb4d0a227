#include "tensormor/greedy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "tensormor/error.hpp"
#include "tensormor/galerkin.hpp"

namespace tensormor {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kBreakdown = 1e-12;

// Gram-Schmidt twice in the given inner product; nullopt when the remainder
// falls below the breakdown threshold relative to ||x||.
std::optional<Vector> gs_twice(const Matrix& basis, const Vector& x, const InnerProduct& inner) {
    const double scale = inner.norm(x);
    if (!(scale > 0.0)) return std::nullopt;
    Vector v = x;
    for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) v -= basis * (basis.transpose() * inner.apply(v));
    }
    const double n = inner.norm(v);
    if (!(n > kBreakdown * scale)) return std::nullopt;
    return Vector(v / n);
}

// Index of the largest value among allowed entries, lowest index on ties.
std::optional<std::size_t> argmax(const Vector& values, const std::vector<bool>& allowed) {
    std::optional<std::size_t> best;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (!allowed[static_cast<std::size_t>(k)]) continue;
        if (!best || values(k) > values(idx(*best))) best = static_cast<std::size_t>(k);
    }
    return best;
}

Vector column_norms(const Matrix& r, const InnerProduct& inner) {
    Vector n(r.cols());
    for (Eigen::Index k = 0; k < r.cols(); ++k) n(k) = inner.norm(r.col(k));
    return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainSet
// ---------------------------------------------------------------------------

TrainSet::TrainSet(Matrix points, std::optional<Vector> weights) : points_(std::move(points)) {
    if (points_.rows() < 1) throw InvalidArgument("train set needs at least one point");
    if (!points_.allFinite()) throw InvalidArgument("train points must be finite");
    weights_ = weights ? *weights : Vector::Ones(points_.rows());
    if (weights_.size() != points_.rows()) throw InvalidArgument("train weight count must equal point count");
    if (!weights_.allFinite() || (weights_.array() <= 0.0).any()) throw InvalidArgument("train weights must be positive");
    std::set<std::vector<double>> seen;
    for (Eigen::Index k = 0; k < points_.rows(); ++k) {
        std::vector<double> row(static_cast<std::size_t>(points_.cols()));
        for (Eigen::Index c = 0; c < points_.cols(); ++c) row[static_cast<std::size_t>(c)] = points_(k, c);
        if (!seen.insert(row).second) throw InvalidArgument("train points must be distinct");
    }
}

// ---------------------------------------------------------------------------
// empirical interpolation
// ---------------------------------------------------------------------------

Vector EmpiricalInterpolation::coefficients_from_entries(const Vector& entries) const {
    if (entries.size() != matrix.rows()) throw InvalidArgument("interpolation: entry count mismatch");
    return matrix.fullPivLu().solve(entries);
}

Vector EmpiricalInterpolation::coefficients(const Vector& v) const {
    if (v.size() != basis.rows()) throw InvalidArgument("interpolation: vector length mismatch");
    Vector e(idx(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) e(idx(i)) = v(idx(points[i]));
    return coefficients_from_entries(e);
}

Vector EmpiricalInterpolation::interpolate(const Vector& v) const { return basis * coefficients(v); }

double EmpiricalInterpolation::lebesgue_factor() const {
    const Eigen::JacobiSVD<Matrix> s(matrix);
    return 1.0 / s.singularValues()(s.singularValues().size() - 1);
}

EmpiricalInterpolation geim_functionals(const Matrix& basis) {
    if (basis.cols() < 1 || basis.rows() < basis.cols()) {
        throw InvalidArgument("geim_functionals: need 1 <= m <= M basis vectors");
    }
    EmpiricalInterpolation out;
    out.basis = basis;
    const Eigen::Index m = basis.cols();
    for (Eigen::Index j = 0; j < m; ++j) {
        Vector r = basis.col(j);
        if (j > 0) {
            Matrix pw(j, j);
            Vector pr(j);
            for (Eigen::Index i = 0; i < j; ++i) {
                pw.row(i) = basis.row(idx(out.points[static_cast<std::size_t>(i)])).head(j);
                pr(i) = basis(idx(out.points[static_cast<std::size_t>(i)]), j);
            }
            r -= basis.leftCols(j) * pw.fullPivLu().solve(pr);
        }
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < r.size(); ++k) {
            if (std::abs(r(k)) > std::abs(r(best))) best = k;
        }
        const double scale = basis.col(j).cwiseAbs().maxCoeff();
        if (!(std::abs(r(best)) > kBreakdown * scale)) {
            throw DegeneracyError("geim_functionals: interpolation matrix is singular", static_cast<std::size_t>(j));
        }
        out.points.push_back(static_cast<std::size_t>(best));
    }
    out.matrix.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) out.matrix.row(i) = basis.row(idx(out.points[static_cast<std::size_t>(i)]));
    const Eigen::JacobiSVD<Matrix> s(out.matrix);
    out.condition = s.singularValues()(0) / s.singularValues()(m - 1);
    return out;
}

// ---------------------------------------------------------------------------
// strong greedy
// ---------------------------------------------------------------------------

GreedyResult strong_greedy(const Matrix& columns, std::size_t m, const Vector& weights, const InnerProduct& inner) {
    const auto t0 = Clock::now();
    const std::size_t K = static_cast<std::size_t>(columns.cols());
    if (K < 1) throw InvalidArgument("strong_greedy: no snapshots");
    if (m < 1 || m > K) throw InvalidArgument("strong_greedy: m must lie in [1, K]");
    if (weights.size() != columns.cols()) throw InvalidArgument("strong_greedy: weight count mismatch");
    if (!inner.euclidean() && inner.weight().rows() != columns.rows()) {
        throw InvalidArgument("strong_greedy: inner product dimension mismatch");
    }

    GreedyResult out;
    Matrix residual = columns;
    Matrix basis(columns.rows(), 0);
    std::vector<bool> allowed(K, true);
    const Vector base_norms = column_norms(columns, inner).cwiseProduct(weights);
    const double scale = base_norms.maxCoeff();

    for (std::size_t j = 0;; ++j) {
        const Vector err = column_norms(residual, inner).cwiseProduct(weights);
        double worst = 0.0;
        for (std::size_t k = 0; k < K; ++k) worst = std::max(worst, err(idx(k)));
        out.report.add({j, worst, NormKind::LInf, seconds_since(t0)});
        if (j == m) break;
        const auto pick = argmax(err, allowed);
        if (!pick || !(err(idx(*pick)) > kBreakdown * scale)) {
            out.degenerate = true;
            out.warnings.push_back("snapshots exhausted after " + std::to_string(j) + " selections");
            break;
        }
        const auto v = gs_twice(basis, columns.col(idx(*pick)), inner);
        if (!v) {
            out.degenerate = true;
            out.warnings.push_back("orthonormalization breakdown at step " + std::to_string(j));
            break;
        }
        out.selected.push_back(*pick);
        allowed[*pick] = false;
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = *v;
        residual -= *v * (v->transpose() * inner.apply(residual));
    }
    out.subspace = Subspace(std::move(basis), inner);
    return out;
}

GreedyResult strong_greedy(const SnapshotSet& snapshots, std::size_t m, const InnerProduct& inner) {
    return strong_greedy(snapshots.vectors(), m, Vector::Ones(snapshots.vectors().cols()), inner);
}

// ---------------------------------------------------------------------------
// weak greedy
// ---------------------------------------------------------------------------

std::optional<double> weak_greedy_gamma(const AffineModel& model, const TrainSet& train) {
    if (!model.bounds) return std::nullopt;
    double alpha_min = INFINITY;
    double beta_max = 0.0;
    double ratio_min = INFINITY;
    for (std::size_t k = 0; k < train.size(); ++k) {
        const Vector a = model.op.coefficients(train.point(k));
        const double al = model.bounds->alpha(a);
        const double be = model.bounds->beta(a);
        if (!(al > 0.0) || !(be >= al)) return std::nullopt;
        alpha_min = std::min(alpha_min, al);
        beta_max = std::max(beta_max, be);
        ratio_min = std::min(ratio_min, al / be);
    }
    const double omega = train.weights().minCoeff() / train.weights().maxCoeff();
    return alpha_min / beta_max * ratio_min * omega;
}

namespace {

GreedyResult weak_greedy_exact(const AffineModel& model, const TrainSet& train, std::size_t m) {
    std::vector<std::string> warnings;
    std::vector<std::size_t> kept;
    std::vector<Vector> sols;
    for (std::size_t k = 0; k < train.size(); ++k) {
        try {
            sols.push_back(full_solve(model, train.point(k)));
            kept.push_back(k);
        } catch (const Error& e) {
            warnings.push_back("point " + std::to_string(k) + " excluded: " + e.what());
        }
    }
    if (kept.empty()) throw NumericalBreakdown("weak_greedy: indicator failed at every train point");
    Matrix u(idx(model.dim()), idx(kept.size()));
    Vector w(idx(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        u.col(idx(i)) = sols[i];
        w(idx(i)) = train.weights()(idx(kept[i]));
    }
    GreedyResult r = strong_greedy(u, std::min(m, kept.size()), w);
    for (auto& s : r.selected) s = kept[s];
    r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
    r.gamma = 1.0;
    return r;
}

}  // namespace

GreedyResult weak_greedy(const AffineModel& model, Indicator indicator, const TrainSet& train, std::size_t m,
                         const InnerProduct& residual_weight) {
    model.validate();
    if (m < 1 || m > train.size()) throw InvalidArgument("weak_greedy: m must lie in [1, K]");
    if (train.points().cols() != idx(model.domain.dim())) {
        throw InvalidArgument("weak_greedy: train points do not match the parameter dimension");
    }
    if (indicator == Indicator::Exact) return weak_greedy_exact(model, train, m);

    const auto t0 = Clock::now();
    const std::size_t K = train.size();
    GreedyResult out;
    std::vector<bool> allowed(K, true);
    Matrix basis(idx(model.dim()), 0);
    double scale = 0.0;

    for (std::size_t j = 0;; ++j) {
        Vector delta = Vector::Zero(idx(K));
        std::optional<ReducedModel> rm;
        if (j > 0) rm = build_reduced(model, Subspace(basis), residual_weight);
        for (std::size_t k = 0; k < K; ++k) {
            if (!allowed[k] && j < m) continue;
            try {
                const Vector xi = train.point(k);
                double d;
                if (rm) {
                    d = solve_reduced(*rm, xi).residual;
                } else {
                    d = residual_weight.norm(model.rhs.assemble(xi));
                }
                delta(idx(k)) = train.weights()(idx(k)) * d;
            } catch (const Error& e) {
                if (allowed[k]) {
                    allowed[k] = false;
                    out.warnings.push_back("point " + std::to_string(k) + " excluded: " + e.what());
                }
            }
        }
        out.report.add({j, delta.maxCoeff(), NormKind::LInf, seconds_since(t0)});
        if (j == m) break;
        if (j == 0) scale = delta.maxCoeff();

        std::optional<Vector> v;
        while (!v) {
            const auto pick = argmax(delta, allowed);
            if (!pick || !(delta(idx(*pick)) > kBreakdown * scale)) break;
            try {
                v = gs_twice(basis, full_solve(model, train.point(*pick)), InnerProduct{});
                if (!v) {
                    allowed[*pick] = false;
                    out.warnings.push_back("point " + std::to_string(*pick) + " already represented; skipped");
                    continue;
                }
                out.selected.push_back(*pick);
                allowed[*pick] = false;
            } catch (const Error& e) {
                allowed[*pick] = false;
                out.warnings.push_back("point " + std::to_string(*pick) + " excluded: " + e.what());
            }
        }
        if (!v) {
            out.degenerate = true;
            out.warnings.push_back("no admissible candidate after " + std::to_string(j) + " selections");
            break;
        }
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = *v;
    }
    out.subspace = Subspace(std::move(basis));
    if (residual_weight.euclidean()) out.gamma = weak_greedy_gamma(model, train);
    return out;
}

// ---------------------------------------------------------------------------
// affine approximation
// ---------------------------------------------------------------------------

AffineApproximation affine_approximate(const std::vector<Matrix>& samples, const Matrix& params, std::size_t L) {
    const std::size_t K = samples.size();
    if (K < 1) throw InvalidArgument("affine_approximate: no samples");
    if (params.rows() != idx(K)) throw InvalidArgument("affine_approximate: one parameter point per sample required");
    if (L < 1 || L > K) throw InvalidArgument("affine_approximate: L must lie in [1, K]");
    const Eigen::Index rows = samples.front().rows();
    const Eigen::Index cols = samples.front().cols();
    Matrix vecs(rows * cols, idx(K));
    for (std::size_t k = 0; k < K; ++k) {
        if (samples[k].rows() != rows || samples[k].cols() != cols) {
            throw InvalidArgument("affine_approximate: samples must share their shape");
        }
        vecs.col(idx(k)) = Eigen::Map<const Vector>(samples[k].data(), rows * cols);
    }
    const GreedyResult g = strong_greedy(vecs, L, Vector::Ones(idx(K)));
    if (g.selected.empty()) throw DegeneracyError("affine_approximate: all samples vanish", 0);

    AffineApproximation out;
    out.selected = g.selected;
    out.terms = g.selected.size();
    out.degenerate = g.degenerate;
    out.interpolation = geim_functionals(g.subspace.basis());
    Matrix coeffs(idx(out.terms), idx(K));
    for (std::size_t k = 0; k < K; ++k) coeffs.col(idx(k)) = out.interpolation.coefficients(vecs.col(idx(k)));
    std::vector<OperatorTerm> terms;
    for (std::size_t i = 0; i < out.terms; ++i) {
        const Vector q = g.subspace.basis().col(idx(i));
        terms.push_back({Eigen::Map<const Matrix>(q.data(), rows, cols), Tabulated{params, coeffs.row(idx(i)).transpose()}});
    }
    if (rows == cols) out.op = AffineOperator(std::move(terms));
    else throw InvalidArgument("affine_approximate: operator samples must be square");
    return out;
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

std::string to_json(const GreedyResult& r) {
    nlohmann::json j;
    j["selected"] = r.selected;
    std::vector<double> errs;
    for (const auto& rec : r.report.records()) errs.push_back(rec.error);
    j["max_errors"] = errs;
    j["gamma"] = r.gamma ? nlohmann::json(*r.gamma) : nlohmann::json(nullptr);
    j["degenerate"] = r.degenerate;
    j["warnings"] = r.warnings;
    if (r.interpolation) {
        j["magic_points"] = r.interpolation->points;
        j["interpolation_condition"] = r.interpolation->condition;
    }
    return j.dump(2);
}

}  // namespace tensormor
