#include "tensormor/affine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/LU>

#include "json_io.hpp"
#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"

namespace tensormor {

// ---------------------------------------------------------------------------
// online probe
// ---------------------------------------------------------------------------

namespace online_probe {
namespace {
thread_local std::size_t touches = 0;
}
std::size_t full_order_touches() { return touches; }
void reset() { touches = 0; }
void note_full_order_touch() { ++touches; }
}  // namespace online_probe

// ---------------------------------------------------------------------------
// CoefficientFunction
// ---------------------------------------------------------------------------

CoefficientFunction::CoefficientFunction(Descriptor desc) : desc_(std::move(desc)) {
    if (const auto* t = std::get_if<Tabulated>(&desc_)) {
        if (t->nodes.rows() != t->values.size()) throw InvalidArgument("tabulated coefficient: node/value count mismatch");
        if (!t->values.allFinite()) throw InvalidArgument("tabulated coefficient values must be finite");
    }
    if (const auto* n = std::get_if<Named>(&desc_)) {
        if (!std::isfinite(n->c)) throw InvalidArgument("named coefficient constant must be finite");
    }
}

namespace {

double named_value(const Named& n, double x) {
    switch (n.form) {
        case NamedForm::Constant: return n.c;
        case NamedForm::Affine: return x;
        case NamedForm::Exp: return std::exp(n.c * x);
        case NamedForm::Inverse: return 1.0 / (n.c + x);
    }
    return 0.0;
}

double component(const Vector& xi, std::size_t dim) {
    if (dim >= static_cast<std::size_t>(xi.size())) {
        throw DomainError("coefficient refers to parameter dimension " + std::to_string(dim) + " beyond xi");
    }
    return xi(static_cast<Eigen::Index>(dim));
}

}  // namespace

double CoefficientFunction::operator()(const Vector& xi) const {
    double v = 0.0;
    if (const auto* m = std::get_if<Monomial>(&desc_)) {
        v = m->scale;
        for (std::size_t k = 0; k < m->exponents.size(); ++k) {
            if (m->exponents[k] != 0) v *= std::pow(component(xi, k), static_cast<double>(m->exponents[k]));
        }
    } else if (const auto* n = std::get_if<Named>(&desc_)) {
        v = named_value(*n, n->form == NamedForm::Constant ? 0.0 : component(xi, n->dim));
    } else {
        const auto& t = std::get<Tabulated>(desc_);
        bool found = false;
        for (Eigen::Index k = 0; k < t.nodes.rows(); ++k) {
            if (t.nodes.cols() == xi.size() &&
                (t.nodes.row(k).transpose() - xi).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, xi.cwiseAbs().maxCoeff())) {
                v = t.values(k);
                found = true;
                break;
            }
        }
        if (!found) throw DomainError("tabulated coefficient is only defined at its nodes");
    }
    if (!std::isfinite(v)) throw DomainError("coefficient " + describe() + " is not finite at the requested parameter");
    return v;
}

bool CoefficientFunction::separable() const noexcept { return !std::holds_alternative<Tabulated>(desc_); }

double CoefficientFunction::factor(std::size_t dim, double x) const {
    if (const auto* m = std::get_if<Monomial>(&desc_)) {
        double v = dim == 0 ? m->scale : 1.0;
        if (dim < m->exponents.size() && m->exponents[dim] != 0) v *= std::pow(x, static_cast<double>(m->exponents[dim]));
        return v;
    }
    if (const auto* n = std::get_if<Named>(&desc_)) {
        if (n->form == NamedForm::Constant) return dim == 0 ? n->c : 1.0;
        return dim == n->dim ? named_value(*n, x) : 1.0;
    }
    throw UnsupportedCoefficient("coefficient " + describe() + " does not factorize over parameter dimensions");
}

std::string CoefficientFunction::describe() const {
    std::ostringstream os;
    if (const auto* m = std::get_if<Monomial>(&desc_)) {
        os << "monomial(scale=" << m->scale << ", exponents=[";
        for (std::size_t k = 0; k < m->exponents.size(); ++k) os << (k ? "," : "") << m->exponents[k];
        os << "])";
    } else if (const auto* n = std::get_if<Named>(&desc_)) {
        switch (n->form) {
            case NamedForm::Constant: os << "constant(" << n->c << ")"; break;
            case NamedForm::Affine: os << "xi_" << n->dim; break;
            case NamedForm::Exp: os << "exp(" << n->c << "*xi_" << n->dim << ")"; break;
            case NamedForm::Inverse: os << "1/(" << n->c << "+xi_" << n->dim << ")"; break;
        }
    } else {
        os << "tabulated(" << std::get<Tabulated>(desc_).values.size() << " nodes)";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// ParameterDomain
// ---------------------------------------------------------------------------

bool ParameterDomain::contains(const Vector& xi) const {
    if (xi.size() != lower.size()) return false;
    for (Eigen::Index k = 0; k < xi.size(); ++k) {
        const double slack = 1e-12 * std::max(1.0, std::abs(upper(k) - lower(k)));
        if (!(xi(k) >= lower(k) - slack && xi(k) <= upper(k) + slack)) return false;
    }
    return true;
}

void ParameterDomain::check(const Vector& xi) const {
    if (!contains(xi)) throw DomainError("parameter point outside the declared domain");
}

Matrix ParameterDomain::sample(std::size_t count, std::mt19937_64& rng) const {
    Matrix pts(static_cast<Eigen::Index>(count), lower.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < pts.rows(); ++k) {
        for (Eigen::Index j = 0; j < pts.cols(); ++j) {
            const double lo = lower(j);
            const double hi = upper(j);
            if (measure == Measure::GaussianTruncated) {
                // centred normal with sigma = width/4, rejected outside the box
                double x;
                do {
                    x = 0.5 * (lo + hi) + 0.25 * (hi - lo) * normal(rng);
                } while (x < lo || x > hi);
                pts(k, j) = x;
            } else {
                pts(k, j) = lo + (hi - lo) * unit(rng);
            }
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// AffineOperator / AffineVector
// ---------------------------------------------------------------------------

AffineOperator::AffineOperator(std::vector<OperatorTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw InvalidArgument("affine operator needs at least one term");
    const Eigen::Index m = terms_.front().matrix.rows();
    for (const auto& t : terms_) {
        if (t.matrix.rows() != m || t.matrix.cols() != m) throw InvalidArgument("affine operator terms must be square of equal size");
        if (!t.matrix.allFinite()) throw InvalidArgument("affine operator term has non-finite entries");
    }
}

Vector AffineOperator::coefficients(const Vector& xi) const {
    Vector c(static_cast<Eigen::Index>(terms_.size()));
    for (std::size_t i = 0; i < terms_.size(); ++i) c(static_cast<Eigen::Index>(i)) = terms_[i].coeff(xi);
    return c;
}

Matrix AffineOperator::assemble(const Vector& xi) const {
    const Vector c = coefficients(xi);
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < terms_.size(); ++i) a += c(static_cast<Eigen::Index>(i)) * terms_[i].matrix;
    return a;
}

AffineVector::AffineVector(std::vector<VectorTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw InvalidArgument("affine vector needs at least one term");
    const Eigen::Index m = terms_.front().vector.size();
    for (const auto& t : terms_) {
        if (t.vector.size() != m) throw InvalidArgument("affine vector terms must have equal length");
        if (!t.vector.allFinite()) throw InvalidArgument("affine vector term has non-finite entries");
    }
}

Vector AffineVector::coefficients(const Vector& xi) const {
    Vector c(static_cast<Eigen::Index>(terms_.size()));
    for (std::size_t i = 0; i < terms_.size(); ++i) c(static_cast<Eigen::Index>(i)) = terms_[i].coeff(xi);
    return c;
}

Vector AffineVector::assemble(const Vector& xi) const {
    const Vector c = coefficients(xi);
    Vector b = Vector::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < terms_.size(); ++i) b += c(static_cast<Eigen::Index>(i)) * terms_[i].vector;
    return b;
}

double StabilityBounds::alpha(const Vector& coefficients) const {
    if (term_min.size() == static_cast<std::size_t>(coefficients.size()) && (coefficients.array() >= 0.0).all()) {
        double a = 0.0;
        for (std::size_t i = 0; i < term_min.size(); ++i) a += coefficients(static_cast<Eigen::Index>(i)) * term_min[i];
        return std::max(a, alpha_lb);
    }
    return alpha_lb;
}

double StabilityBounds::beta(const Vector& coefficients) const {
    if (term_max.size() == static_cast<std::size_t>(coefficients.size()) && (coefficients.array() >= 0.0).all()) {
        double b = 0.0;
        for (std::size_t i = 0; i < term_max.size(); ++i) b += coefficients(static_cast<Eigen::Index>(i)) * term_max[i];
        return beta_ub > 0.0 ? std::min(b, beta_ub) : b;
    }
    return beta_ub;
}

void AffineModel::validate() const {
    if (op.size() == 0 || rhs.size() == 0) throw InvalidArgument("model needs operator and right-hand side terms");
    if (op.dim() != rhs.dim()) throw InvalidArgument("operator and right-hand side dimensions differ");
    if (domain.lower.size() != domain.upper.size()) throw InvalidArgument("domain bounds have different lengths");
    if ((domain.lower.array() > domain.upper.array()).any()) throw InvalidArgument("domain lower bound exceeds upper bound");
    if (bounds) {
        if (!bounds->term_min.empty() && bounds->term_min.size() != op.size()) {
            throw InvalidArgument("per-term stability bounds must match operator term count");
        }
        if (!bounds->term_max.empty() && bounds->term_max.size() != op.size()) {
            throw InvalidArgument("per-term stability bounds must match operator term count");
        }
    }
}

std::pair<Matrix, Vector> assemble(const AffineModel& model, const Vector& xi) {
    model.domain.check(xi);
    online_probe::note_full_order_touch();
    return {model.op.assemble(xi), model.rhs.assemble(xi)};
}

Vector full_solve(const AffineModel& model, const Vector& xi) {
    auto [a, b] = assemble(model, xi);
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vector::Zero(b.size());
    Vector x;
    if (model.spd) {
        x = solve_spd(a, b);
    } else {
        Eigen::PartialPivLU<Matrix> lu(a);
        const double rcond = lu.rcond();
        if (!(rcond > 1e-14)) {
            throw NumericalBreakdown("full_solve: assembled operator is singular or ill-conditioned", -1,
                                     rcond > 0 ? 1.0 / rcond : INFINITY);
        }
        x = lu.solve(b);
        x += lu.solve(Vector(b - a * x));  // one refinement step
    }
    const double rel = (a * x - b).norm() / bnorm;
    if (!(rel <= 1e-10)) {
        Eigen::PartialPivLU<Matrix> lu(a);
        throw NumericalBreakdown("full_solve: residual " + std::to_string(rel) + " above 1e-10", -1, 1.0 / lu.rcond());
    }
    return x;
}

// ---------------------------------------------------------------------------
// JSON helpers and model files
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

std::string measure_name(Measure m) {
    switch (m) {
        case Measure::Uniform: return "uniform";
        case Measure::GaussianTruncated: return "gaussian-truncated";
        case Measure::Quadrature: return "quadrature";
    }
    return "uniform";
}

Measure measure_from_name(const std::string& s) {
    if (s == "uniform") return Measure::Uniform;
    if (s == "gaussian-truncated") return Measure::GaussianTruncated;
    if (s == "quadrature") return Measure::Quadrature;
    throw InvalidArgument("unknown measure tag: " + s);
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows) throw InvalidArgument("matrix JSON row count mismatch");
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vector r = vector_from_json(data.at(static_cast<std::size_t>(i)));
        if (r.size() != cols) throw InvalidArgument("matrix JSON column count mismatch");
        m.row(i) = r.transpose();
    }
    return m;
}

json coefficient_to_json(const CoefficientFunction& f) {
    const auto& d = f.descriptor();
    if (const auto* m = std::get_if<Monomial>(&d)) {
        return json{{"kind", "monomial"}, {"exponents", m->exponents}, {"scale", m->scale}};
    }
    if (const auto* n = std::get_if<Named>(&d)) {
        switch (n->form) {
            case NamedForm::Constant: return json{{"kind", "constant"}, {"c", n->c}};
            case NamedForm::Affine: return json{{"kind", "affine"}, {"dim", n->dim}};
            case NamedForm::Exp: return json{{"kind", "exp"}, {"dim", n->dim}, {"c", n->c}};
            case NamedForm::Inverse: return json{{"kind", "inverse"}, {"dim", n->dim}, {"c", n->c}};
        }
    }
    const auto& t = std::get<Tabulated>(d);
    return json{{"kind", "tabulated"}, {"nodes", matrix_to_json(t.nodes)}, {"values", vector_to_json(t.values)}};
}

CoefficientFunction coefficient_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "monomial") {
        return Monomial{j.at("exponents").get<std::vector<unsigned>>(), j.value("scale", 1.0)};
    }
    if (kind == "constant") return Named{NamedForm::Constant, 0, j.value("c", 1.0)};
    if (kind == "affine") return Named{NamedForm::Affine, j.at("dim").get<std::size_t>(), 1.0};
    if (kind == "exp") return Named{NamedForm::Exp, j.at("dim").get<std::size_t>(), j.value("c", 1.0)};
    if (kind == "inverse") return Named{NamedForm::Inverse, j.at("dim").get<std::size_t>(), j.value("c", 1.0)};
    if (kind == "tabulated") return Tabulated{matrix_from_json(j.at("nodes")), vector_from_json(j.at("values"))};
    throw InvalidArgument("unknown coefficient kind: " + kind);
}

json domain_to_json(const ParameterDomain& d) {
    return json{{"lower", vector_to_json(d.lower)}, {"upper", vector_to_json(d.upper)}, {"measure", measure_name(d.measure)}};
}

ParameterDomain domain_from_json(const json& j) {
    ParameterDomain d;
    d.lower = vector_from_json(j.at("lower"));
    d.upper = vector_from_json(j.at("upper"));
    d.measure = measure_from_name(j.value("measure", std::string("uniform")));
    return d;
}

json bounds_to_json(const StabilityBounds& b) {
    return json{{"alpha_lb", b.alpha_lb}, {"beta_ub", b.beta_ub}, {"term_min", b.term_min}, {"term_max", b.term_max}};
}

StabilityBounds bounds_from_json(const json& j) {
    StabilityBounds b;
    b.alpha_lb = j.value("alpha_lb", 0.0);
    b.beta_ub = j.value("beta_ub", 0.0);
    b.term_min = j.value("term_min", std::vector<double>{});
    b.term_max = j.value("term_max", std::vector<double>{});
    return b;
}

}  // namespace detail

AffineModel load_model(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw InvalidArgument("cannot open model file " + json_path.string());
    const auto base = json_path.parent_path();
    AffineModel model;
    try {
        nlohmann::json j;
        in >> j;
        std::vector<OperatorTerm> op;
        for (const auto& t : j.at("operator")) {
            const DenseTensor m = load_lrtf(base / t.at("matrix").get<std::string>());
            if (m.order() != 2) throw InvalidArgument("operator term file must hold an order-2 tensor");
            op.push_back({m.to_matrix(), detail::coefficient_from_json(t.at("coeff"))});
        }
        std::vector<VectorTerm> rhs;
        for (const auto& t : j.at("rhs")) {
            const DenseTensor v = load_lrtf(base / t.at("vector").get<std::string>());
            if (v.order() != 1) throw InvalidArgument("rhs term file must hold an order-1 tensor");
            rhs.push_back({v.to_vector(), detail::coefficient_from_json(t.at("coeff"))});
        }
        model.op = AffineOperator(std::move(op));
        model.rhs = AffineVector(std::move(rhs));
        model.domain = detail::domain_from_json(j.at("domain"));
        model.spd = j.value("spd", false);
        if (j.contains("bounds")) model.bounds = detail::bounds_from_json(j.at("bounds"));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed model file: ") + e.what());
    }
    model.validate();
    return model;
}

void save_model(const std::filesystem::path& json_path, const AffineModel& model) {
    const auto base = json_path.parent_path();
    const auto stem = json_path.stem().string();
    nlohmann::json j;
    j["operator"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.op.size(); ++i) {
        const std::string file = stem + "_A" + std::to_string(i) + ".lrtf";
        save_lrtf(base / file, DenseTensor::from_matrix(model.op[i].matrix));
        j["operator"].push_back({{"matrix", file}, {"coeff", detail::coefficient_to_json(model.op[i].coeff)}});
    }
    j["rhs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.rhs.size(); ++i) {
        const std::string file = stem + "_b" + std::to_string(i) + ".lrtf";
        save_lrtf(base / file, DenseTensor::from_vector(model.rhs[i].vector));
        j["rhs"].push_back({{"vector", file}, {"coeff", detail::coefficient_to_json(model.rhs[i].coeff)}});
    }
    j["domain"] = detail::domain_to_json(model.domain);
    j["spd"] = model.spd;
    if (model.bounds) j["bounds"] = detail::bounds_to_json(*model.bounds);
    std::ofstream out(json_path);
    if (!out) throw Error("cannot open " + json_path.string() + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace tensormor
