#include "tensormor/order2.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"

namespace tensormor {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// InnerProduct
// ---------------------------------------------------------------------------

InnerProduct::InnerProduct(Matrix weight) {
    factor_ = cholesky_lower(weight);
    weight_ = std::move(weight);
}

double InnerProduct::dot(const Vector& x, const Vector& y) const {
    if (euclidean()) return x.dot(y);
    return x.dot(*weight_ * y);
}

double InnerProduct::norm(const Vector& x) const {
    if (euclidean()) return x.norm();
    return (factor_->transpose() * x).norm();
}

Vector InnerProduct::apply(const Vector& x) const { return euclidean() ? x : Vector(*weight_ * x); }

Matrix InnerProduct::apply(const Matrix& x) const { return euclidean() ? x : Matrix(*weight_ * x); }

// ---------------------------------------------------------------------------
// SnapshotSet / Subspace
// ---------------------------------------------------------------------------

SnapshotSet::SnapshotSet(Matrix vectors, Vector weights, Matrix params)
    : vectors_(std::move(vectors)), weights_(std::move(weights)), params_(std::move(params)) {
    if (vectors_.cols() < 1) throw InvalidArgument("snapshot set needs at least one snapshot");
    if (weights_.size() != vectors_.cols()) throw InvalidArgument("snapshot weight count must equal snapshot count");
    if (params_.rows() != vectors_.cols()) throw InvalidArgument("snapshot parameter count must equal snapshot count");
    if (!vectors_.allFinite() || !params_.allFinite()) throw InvalidArgument("snapshot data must be finite");
    for (Eigen::Index k = 0; k < weights_.size(); ++k) {
        if (!(weights_(k) > 0.0) || !std::isfinite(weights_(k))) {
            throw InvalidArgument("snapshot weights must be strictly positive and finite");
        }
    }
}

SnapshotSet SnapshotSet::uniform(Matrix vectors, Matrix params) {
    const Eigen::Index k = vectors.cols();
    if (k < 1) throw InvalidArgument("snapshot set needs at least one snapshot");
    Vector w = Vector::Constant(k, 1.0 / static_cast<double>(k));
    return SnapshotSet(std::move(vectors), std::move(w), std::move(params));
}

Matrix SnapshotSet::scaled() const { return vectors_ * weights_.cwiseSqrt().asDiagonal(); }

Subspace::Subspace(Matrix basis, InnerProduct inner) : basis_(std::move(basis)), inner_(std::move(inner)) {
    if (!inner_.euclidean() && inner_.weight().rows() != basis_.rows()) {
        throw InvalidArgument("inner product dimension does not match subspace ambient dimension");
    }
    const Matrix gram = basis_.transpose() * inner_.apply(basis_);
    if (basis_.cols() > 0 &&
        (gram - Matrix::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff() > 1e-10) {
        throw InvalidArgument("subspace basis is not orthonormal");
    }
}

// ---------------------------------------------------------------------------
// ErrorReport
// ---------------------------------------------------------------------------

std::string to_string(NormKind p) { return p == NormKind::L2 ? "2" : "inf"; }

void ErrorReport::add(ErrorRecord record) {
    if (!records_.empty() && record.m <= records_.back().m) throw InvalidArgument("error report ranks must increase");
    if (!(record.error >= 0.0) || !std::isfinite(record.error)) {
        throw InvalidArgument("error report values must be finite and non-negative");
    }
    records_.push_back(record);
}

std::optional<ErrorRecord> ErrorReport::at_rank(std::size_t m) const {
    for (const auto& r : records_) {
        if (r.m == m) return r;
    }
    return std::nullopt;
}

void ErrorReport::write_csv(std::ostream& out, bool timings) const {
    out << "m,error,p,seconds\n";
    for (const auto& r : records_) {
        out << r.m << ',' << fmt_double(r.error) << ',' << to_string(r.p) << ',' << (timings ? fmt_double(r.seconds) : "0")
            << '\n';
    }
}

ErrorReport ErrorReport::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "m,error,p,seconds") {
        throw InvalidArgument("error report CSV must start with header m,error,p,seconds");
    }
    ErrorReport rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string m, e, p, s;
        if (!std::getline(ss, m, ',') || !std::getline(ss, e, ',') || !std::getline(ss, p, ',') || !std::getline(ss, s)) {
            throw InvalidArgument("malformed error report row: " + line);
        }
        ErrorRecord r;
        try {
            r.m = std::stoul(m);
            r.error = std::stod(e);
            r.seconds = std::stod(s);
        } catch (const std::exception&) {
            throw InvalidArgument("malformed error report row: " + line);
        }
        if (p == "2") {
            r.p = NormKind::L2;
        } else if (p == "inf") {
            r.p = NormKind::LInf;
        } else {
            throw InvalidArgument("unknown norm kind in error report: " + p);
        }
        rep.add(r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// POD, projection, widths
// ---------------------------------------------------------------------------

namespace {

// L^T U D^{1/2}; the Euclidean case skips the factor
Matrix weighted_snapshots(const SnapshotSet& s, const InnerProduct& inner) {
    if (!inner.euclidean() && static_cast<std::size_t>(inner.weight().rows()) != s.dim()) {
        throw InvalidArgument("inner product dimension does not match snapshot dimension");
    }
    Matrix scaled = s.scaled();
    if (!inner.euclidean()) scaled = inner.factor().transpose() * scaled;
    return scaled;
}

double tail_norm(const Vector& sigma, std::size_t m) {
    double t = 0.0;
    for (Eigen::Index i = static_cast<Eigen::Index>(m); i < sigma.size(); ++i) t += sigma(i) * sigma(i);
    return std::sqrt(t);
}

}  // namespace

PodResult pod(const SnapshotSet& snapshots, std::size_t m, const InnerProduct& inner) {
    const auto t0 = Clock::now();
    if (m < 1 || m > std::min(snapshots.dim(), snapshots.count())) {
        throw InvalidArgument("pod: target dimension must lie in [1, min(M, K)]");
    }
    const SvdResult s = svd(weighted_snapshots(snapshots, inner));
    Matrix basis = s.left.leftCols(static_cast<Eigen::Index>(m));
    if (!inner.euclidean()) {
        basis = inner.factor().transpose().triangularView<Eigen::Upper>().solve(basis);
    }
    canonicalize_signs(basis);
    PodResult out;
    out.singular_values = s.singular_values;
    const double elapsed = seconds_since(t0);
    for (std::size_t j = 1; j <= m; ++j) {
        out.report.add({j, tail_norm(s.singular_values, j), NormKind::L2, elapsed});
    }
    out.subspace = Subspace(std::move(basis), inner);
    return out;
}

Vector project(const Subspace& space, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != space.ambient_dim()) throw InvalidArgument("project: dimension mismatch");
    const Matrix& v = space.basis();
    return v * (v.transpose() * space.inner().apply(x));
}

Matrix project(const Subspace& space, const Matrix& xs) {
    if (static_cast<std::size_t>(xs.rows()) != space.ambient_dim()) throw InvalidArgument("project: dimension mismatch");
    const Matrix& v = space.basis();
    return v * (v.transpose() * space.inner().apply(xs));
}

ErrorReport width_l2(const SnapshotSet& snapshots, std::size_t m_max, const InnerProduct& inner) {
    const auto t0 = Clock::now();
    if (m_max > std::min(snapshots.dim(), snapshots.count())) {
        throw InvalidArgument("width_l2: m_max must not exceed min(M, K)");
    }
    const SvdResult s = svd(weighted_snapshots(snapshots, inner));
    const double elapsed = seconds_since(t0);
    ErrorReport rep;
    for (std::size_t m = 0; m <= m_max; ++m) rep.add({m, tail_norm(s.singular_values, m), NormKind::L2, elapsed});
    return rep;
}

// ---------------------------------------------------------------------------
// snapshot files
// ---------------------------------------------------------------------------

void save_snapshots(const std::filesystem::path& stem, const SnapshotSet& s) {
    std::filesystem::path lrtf = stem;
    lrtf += ".lrtf";
    std::filesystem::path side = stem;
    side += ".json";
    save_lrtf(lrtf, DenseTensor::from_matrix(s.vectors()));
    nlohmann::json j;
    j["weights"] = std::vector<double>(s.weights().data(), s.weights().data() + s.weights().size());
    nlohmann::json params = nlohmann::json::array();
    for (Eigen::Index k = 0; k < s.params().rows(); ++k) {
        std::vector<double> row(static_cast<std::size_t>(s.params().cols()));
        for (Eigen::Index c = 0; c < s.params().cols(); ++c) row[static_cast<std::size_t>(c)] = s.params()(k, c);
        params.push_back(row);
    }
    j["params"] = params;
    std::ofstream out(side);
    if (!out) throw Error("cannot open " + side.string() + " for writing");
    out << j.dump(2) << '\n';
}

SnapshotSet load_snapshots(const std::filesystem::path& stem) {
    std::filesystem::path lrtf = stem;
    lrtf += ".lrtf";
    std::filesystem::path side = stem;
    side += ".json";
    const DenseTensor t = load_lrtf(lrtf);
    if (t.order() != 2) throw InvalidArgument("snapshot LRTF must be an order-2 tensor");
    std::ifstream in(side);
    if (!in) throw InvalidArgument("cannot open " + side.string());
    nlohmann::json j;
    try {
        in >> j;
        const auto w = j.at("weights").get<std::vector<double>>();
        const auto p = j.at("params").get<std::vector<std::vector<double>>>();
        const std::size_t dim = p.empty() ? 0 : p.front().size();
        Matrix params(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (p[k].size() != dim) throw InvalidArgument("ragged parameter points in snapshot sidecar");
            for (std::size_t c = 0; c < dim; ++c) params(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = p[k][c];
        }
        return SnapshotSet(t.to_matrix(), Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())), params);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed snapshot sidecar: ") + e.what());
    }
}

}  // namespace tensormor
