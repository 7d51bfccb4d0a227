#include "tensormor/tensor_solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "tensormor/error.hpp"
#include "tensormor/linalg.hpp"

namespace tensormor {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// KroneckerOperator
// ---------------------------------------------------------------------------

KroneckerOperator::KroneckerOperator(std::vector<std::vector<Matrix>> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw InvalidArgument("Kronecker operator needs at least one term");
    const std::size_t d = terms_.front().size();
    if (d == 0) throw InvalidArgument("Kronecker operator terms need at least one mode");
    for (const auto& t : terms_) {
        if (t.size() != d) throw InvalidArgument("Kronecker operator terms must share the order");
        for (std::size_t nu = 0; nu < d; ++nu) {
            if (t[nu].rows() != t[nu].cols() || t[nu].rows() != terms_.front()[nu].rows()) {
                throw InvalidArgument("Kronecker operator factors must be square with common mode sizes");
            }
            if (!t[nu].allFinite()) throw InvalidArgument("Kronecker operator factor has non-finite entries");
        }
    }
}

Shape KroneckerOperator::shape() const {
    Shape s;
    if (terms_.empty()) return s;
    for (const auto& m : terms_.front()) s.push_back(static_cast<std::size_t>(m.rows()));
    return s;
}

TTTensor op_apply(const KroneckerOperator& a, const TTTensor& x) {
    if (x.shape() != a.shape()) throw InvalidArgument("op_apply: operator and tensor mode sizes differ");
    std::optional<TTTensor> out;
    for (const auto& term : a.terms()) {
        std::vector<DenseTensor> cores;
        cores.reserve(x.order());
        for (std::size_t k = 0; k < x.order(); ++k) cores.push_back(mode_product(x.core(k), 1, term[k]));
        TTTensor y(std::move(cores));
        out = out ? tt_add(*out, y) : std::move(y);
    }
    return *out;
}

Matrix to_dense(const KroneckerOperator& a) {
    const std::size_t n = shape_numel(a.shape());
    check_dense_cap(n * n, "dense Kronecker operator");
    Matrix total = Matrix::Zero(idx(n), idx(n));
    for (const auto& term : a.terms()) {
        Matrix k = term.front();
        for (std::size_t nu = 1; nu < term.size(); ++nu) {
            const Matrix& f = term[nu];
            Matrix next(k.rows() * f.rows(), k.cols() * f.cols());
            for (Eigen::Index i = 0; i < k.rows(); ++i) {
                for (Eigen::Index j = 0; j < k.cols(); ++j) next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = k(i, j) * f;
            }
            k = std::move(next);
        }
        total += k;
    }
    return total;
}

std::pair<double, double> extreme_eigenvalues(const KroneckerOperator& a) {
    const Matrix d = to_dense(a);
    const SymEigResult e = sym_eig(0.5 * (d + d.transpose()));
    return {e.values(e.values.size() - 1), e.values(0)};
}

// ---------------------------------------------------------------------------
// assembly from affine models
// ---------------------------------------------------------------------------

TensorSystem assemble_from_affine(const AffineModel& model, const std::vector<Vector>& grids) {
    model.validate();
    if (grids.size() != model.domain.dim()) throw InvalidArgument("assemble_from_affine: one grid per parameter dimension");
    for (std::size_t nu = 0; nu < grids.size(); ++nu) {
        if (grids[nu].size() < 1) throw InvalidArgument("assemble_from_affine: empty grid");
        for (Eigen::Index k = 0; k < grids[nu].size(); ++k) {
            const double x = grids[nu](k);
            if (x < model.domain.lower(idx(nu)) || x > model.domain.upper(idx(nu))) {
                throw DomainError("assemble_from_affine: grid point outside the parameter box");
            }
        }
    }
    auto factor_vector = [&](const CoefficientFunction& c, std::size_t nu, const std::string& name) {
        Vector f(grids[nu].size());
        try {
            for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = c.factor(nu, grids[nu](k));
        } catch (const UnsupportedCoefficient& e) {
            throw UnsupportedCoefficient(name + ": " + e.what());
        }
        if (!f.allFinite()) throw DomainError(name + ": coefficient is not finite on the grid");
        return f;
    };

    std::vector<std::vector<Matrix>> terms;
    for (std::size_t i = 0; i < model.op.size(); ++i) {
        std::vector<Matrix> t{model.op[i].matrix};
        for (std::size_t nu = 0; nu < grids.size(); ++nu) {
            t.push_back(factor_vector(model.op[i].coeff, nu, "operator term " + std::to_string(i)).asDiagonal());
        }
        terms.push_back(std::move(t));
    }
    std::optional<TTTensor> rhs;
    for (std::size_t j = 0; j < model.rhs.size(); ++j) {
        std::vector<Vector> vecs{model.rhs[j].vector};
        for (std::size_t nu = 0; nu < grids.size(); ++nu) {
            vecs.push_back(factor_vector(model.rhs[j].coeff, nu, "rhs term " + std::to_string(j)));
        }
        TTTensor r = TTTensor::rank_one(vecs);
        rhs = rhs ? tt_add(*rhs, r) : std::move(r);
    }
    return {KroneckerOperator(std::move(terms)), *rhs};
}

// ---------------------------------------------------------------------------
// SolveTrace
// ---------------------------------------------------------------------------

void SolveTrace::add(TraceRecord r) {
    if (!records_.empty() && r.k <= records_.back().k) throw InvalidArgument("solve trace iterations must increase");
    if (!std::isfinite(r.resid)) throw InvalidArgument("solve trace residual must be finite");
    records_.push_back(std::move(r));
}

double SolveTrace::plateau(std::size_t window) const {
    if (records_.empty()) throw InvalidArgument("plateau of an empty trace");
    const std::size_t n = std::min(window, records_.size());
    double s = 0.0;
    for (std::size_t i = records_.size() - n; i < records_.size(); ++i) s += records_[i].resid;
    return s / static_cast<double>(n);
}

void SolveTrace::write_csv(std::ostream& out, bool timings) const {
    out << "k,ranks,resid,J,seconds\n";
    for (const auto& r : records_) {
        out << r.k << ',';
        for (std::size_t i = 0; i < r.ranks.size(); ++i) out << (i ? "x" : "") << r.ranks[i];
        out << ',' << fmt_double(r.resid) << ',' << fmt_double(r.J) << ',' << (timings ? fmt_double(r.seconds) : "0") << '\n';
    }
}

// ---------------------------------------------------------------------------
// truncated Richardson
// ---------------------------------------------------------------------------

RichardsonResult truncated_richardson(const KroneckerOperator& a, const TTTensor& b, const RichardsonOptions& options) {
    const auto t0 = Clock::now();
    if (b.shape() != a.shape()) throw InvalidArgument("truncated_richardson: rhs shape does not match the operator");
    if (!(options.eps >= 0.0) || options.maxit < 1) throw InvalidArgument("truncated_richardson: invalid options");
    RichardsonResult out;
    if (options.step) {
        if (!(*options.step > 0.0)) throw InvalidArgument("truncated_richardson: step must be positive");
        out.step = *options.step;
    } else {
        const auto [lo, hi] = extreme_eigenvalues(a);
        if (!(lo > 0.0)) throw NumericalBreakdown("truncated_richardson: operator is not positive definite", -1, hi / lo);
        out.step = 2.0 / (lo + hi);
    }
    const double bnorm = tt_norm(b);
    TTTensor u = TTTensor::zeros(b.shape());
    std::vector<double> hist;
    out.stop_reason = "maxit";
    for (std::size_t k = 0;; ++k) {
        const TTTensor res = tt_axpy(b, -1.0, op_apply(a, u));
        const double r = tt_norm(tt_round(res, options.eps / 10.0));
        hist.push_back(r);
        out.trace.add({k, u.ranks(), r, r * r, seconds_since(t0)});
        if (options.observer) options.observer(out.trace.back());
        if (r <= options.target_resid * bnorm) {
            out.stop_reason = "target";
            break;
        }
        if (k >= 10 && r > 10.0 * hist[k - 10]) {
            throw DivergenceError("truncated_richardson: residual grew tenfold over 10 iterations; reduce the step", -1, r);
        }
        if (options.eps > 0.0 && k >= 5 && std::abs(r - hist[k - 5]) < options.eps / 10.0 * r) {
            out.stop_reason = "stagnation";
            break;
        }
        if (k == options.maxit) break;
        u = tt_round(tt_axpy(u, out.step, res), options.eps);
    }
    out.solution = std::move(u);
    return out;
}

// ---------------------------------------------------------------------------
// greedy rank-one corrections
// ---------------------------------------------------------------------------

namespace {

struct Correction {
    std::vector<Vector> factors;
    double j_model = 0.0;  // predicted ||r - A w||^2
    bool ok = false;
    std::string failure;
};

Correction als_correction(const KroneckerOperator& a, const TTTensor& r, double rr, const PgdOptions& opt,
                          std::uint64_t seed, double& max_mode_residual) {
    const std::size_t d = a.order();
    const auto& terms = a.terms();
    const std::size_t L = terms.size();
    const Shape shape = a.shape();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Correction c;
    c.factors.resize(d);
    for (std::size_t nu = 0; nu < d; ++nu) {
        c.factors[nu] = Vector(idx(shape[nu]));
        for (Eigen::Index i = 0; i < c.factors[nu].size(); ++i) c.factors[nu](i) = normal(rng);
        c.factors[nu].normalize();
    }
    double prev = rr;
    for (std::size_t sweep = 0; sweep < std::max<std::size_t>(opt.inner_sweeps, 1); ++sweep) {
        const double sweep_start = prev;
        for (std::size_t nu = 0; nu < d; ++nu) {
            for (std::size_t mu = 0; mu < d; ++mu) {
                if (mu == nu) continue;
                const double n = c.factors[mu].norm();
                if (!(n > 0.0)) {
                    c.failure = "zero factor";
                    return c;
                }
                c.factors[mu] /= n;
            }
            // w[i][mu] = A_i^mu v^mu
            std::vector<std::vector<Vector>> w(L, std::vector<Vector>(d));
            for (std::size_t i = 0; i < L; ++i) {
                for (std::size_t mu = 0; mu < d; ++mu) {
                    if (mu != nu) w[i][mu] = terms[i][mu] * c.factors[mu];
                    else w[i][mu] = Vector::Zero(idx(shape[mu]));
                }
            }
            const Eigen::Index n = idx(shape[nu]);
            Matrix h = Matrix::Zero(n, n);
            Vector g = Vector::Zero(n);
            for (std::size_t i = 0; i < L; ++i) {
                g += terms[i][nu].transpose() * tt_partial_contract(r, w[i], nu);
                for (std::size_t j = 0; j < L; ++j) {
                    double s = 1.0;
                    for (std::size_t mu = 0; mu < d; ++mu) {
                        if (mu != nu) s *= w[i][mu].dot(w[j][mu]);
                    }
                    h += s * (terms[i][nu].transpose() * terms[j][nu]);
                }
            }
            h = 0.5 * (h + h.transpose()).eval();
            Vector v;
            try {
                v = solve_spd(h, g);
            } catch (const NumericalBreakdown&) {
                c.failure = "singular mode system";
                return c;
            }
            const double gn = g.norm();
            if (gn > 0.0) max_mode_residual = std::max(max_mode_residual, (h * v - g).norm() / gn);
            c.factors[nu] = v;
            const double jm = rr - g.dot(v);
            if (jm > prev * (1.0 + 1e-10) + 1e-14 * rr) {
                c.failure = "mode update increased the functional";
                return c;
            }
            prev = std::min(prev, jm);
            c.j_model = jm;
        }
        if (std::abs(sweep_start - prev) <= opt.tol * std::max(sweep_start, 1e-300)) break;
    }
    c.ok = true;
    return c;
}

}  // namespace

PgdResult greedy_rank_one(const KroneckerOperator& a, const TTTensor& b, const PgdOptions& options) {
    const auto t0 = Clock::now();
    if (b.shape() != a.shape()) throw InvalidArgument("greedy_rank_one: rhs shape does not match the operator");
    PgdResult out;
    out.solution = CPTensor::zeros(b.shape());
    TTTensor r = b;
    const double bb = std::pow(tt_norm(b), 2);
    double J = bb;
    out.trace.add({0, {0}, std::sqrt(J), J, seconds_since(t0)});
    for (std::size_t m = 1; m <= options.max_rank; ++m) {
        if (J <= options.tol * bb) break;
        Correction c;
        for (int attempt = 0; attempt < 2 && !c.ok; ++attempt) {
            const std::uint64_t seed = options.seed + 1000003ULL * m + 7919ULL * static_cast<std::uint64_t>(attempt);
            c = als_correction(a, r, J, options, seed, out.max_mode_residual);
        }
        if (!c.ok) {
            out.breakdown = true;
            out.message = "correction " + std::to_string(m) + " failed: " + c.failure;
            break;
        }
        const TTTensor w = TTTensor::rank_one(c.factors);
        const TTTensor rn = tt_round(tt_axpy(r, -1.0, op_apply(a, w)), 1e-14);
        const double Jn = std::pow(tt_norm(rn), 2);
        if (!(Jn < J)) {
            out.breakdown = true;
            out.message = "correction " + std::to_string(m) + " does not decrease the functional (local minimum)";
            break;
        }
        double weight = 1.0;
        std::vector<Vector> unit = c.factors;
        for (auto& v : unit) {
            const double n = v.norm();
            weight *= n;
            v /= n;
        }
        out.solution.push_back(weight, unit);
        r = rn;
        J = Jn;
        out.trace.add({m, {m}, std::sqrt(J), J, seconds_since(t0)});
    }
    return out;
}

}  // namespace tensormor
