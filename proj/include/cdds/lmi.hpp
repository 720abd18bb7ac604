#pragma once

/// \file cdds/lmi.hpp
/// \brief Assembly of the dissipativity LMIs as affine constraints over a
/// packed decision vector, plus the structural equivalence checks between the
/// direct-substitution and slack-variable forms.
///
/// Block vectors are ordered as
///   chi = (w, x, y(t-r), int F y)            of size q + n + nu + rho
///   eta = (chi, x')                          of size q + 2n + nu + rho
/// and the slack-variable conditions encode the dynamics as [A  -I] eta = 0
/// with A = [D1 A1 A2 A3].

#include "cdds/blockmat.hpp"
#include "cdds/kernel.hpp"
#include "cdds/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cdds {

// ---------------------------------------------------------------------------
// Decision variables
// ---------------------------------------------------------------------------

enum class VarKind { symmetric, rectangular };

struct VariableDesc {
    std::string name;
    VarKind kind = VarKind::symmetric;
    Index rows = 0;
    Index cols = 0;
    Index offset = 0;

    [[nodiscard]] Index length() const { return kind == VarKind::symmetric ? rows * (rows + 1) / 2 : rows * cols; }
};

/// Ordered variables packed contiguously into one scalar vector. Symmetric
/// variables store their upper triangle row by row; rectangular ones are
/// stored row-major.
class DecisionLayout {
public:
    Index add_symmetric(std::string name, Index dim) { return add({std::move(name), VarKind::symmetric, dim, dim, 0}); }

    Index add_rectangular(std::string name, Index rows, Index cols) {
        return add({std::move(name), VarKind::rectangular, rows, cols, 0});
    }

    [[nodiscard]] Index size() const { return size_; }
    [[nodiscard]] const std::vector<VariableDesc>& variables() const { return vars_; }

    [[nodiscard]] const VariableDesc* find(const std::string& name) const {
        for (const auto& v : vars_) {
            if (v.name == name) return &v;
        }
        return nullptr;
    }

    [[nodiscard]] const VariableDesc& at(const std::string& name) const {
        const auto* v = find(name);
        if (v == nullptr) throw std::out_of_range("layout: no variable named " + name);
        return *v;
    }

    [[nodiscard]] Mat unpack(const Vec& x, const VariableDesc& v) const {
        check_length(x);
        Mat out(v.rows, v.cols);
        Index k = v.offset;
        if (v.kind == VarKind::symmetric) {
            for (Index i = 0; i < v.rows; ++i) {
                for (Index j = i; j < v.cols; ++j) {
                    out(i, j) = x(k);
                    out(j, i) = x(k);
                    ++k;
                }
            }
        } else {
            for (Index i = 0; i < v.rows; ++i) {
                for (Index j = 0; j < v.cols; ++j) out(i, j) = x(k++);
            }
        }
        return out;
    }

    [[nodiscard]] Mat unpack(const Vec& x, const std::string& name) const { return unpack(x, at(name)); }

    void pack(const Mat& value, const VariableDesc& v, Vec& x) const {
        check_length(x);
        if (value.rows() != v.rows || value.cols() != v.cols) {
            throw std::invalid_argument("layout: value for " + v.name + " has wrong shape");
        }
        Index k = v.offset;
        if (v.kind == VarKind::symmetric) {
            for (Index i = 0; i < v.rows; ++i) {
                for (Index j = i; j < v.cols; ++j) x(k++) = 0.5 * (value(i, j) + value(j, i));
            }
        } else {
            for (Index i = 0; i < v.rows; ++i) {
                for (Index j = 0; j < v.cols; ++j) x(k++) = value(i, j);
            }
        }
    }

private:
    Index add(VariableDesc v) {
        if (find(v.name) != nullptr) throw std::invalid_argument("layout: duplicate variable " + v.name);
        v.offset = size_;
        size_ += v.length();
        vars_.push_back(std::move(v));
        return static_cast<Index>(vars_.size()) - 1;
    }

    void check_length(const Vec& x) const {
        if (x.size() != size_) {
            throw std::invalid_argument("layout: decision vector has length " + std::to_string(x.size()) +
                                        ", expected " + std::to_string(size_));
        }
    }

    std::vector<VariableDesc> vars_;
    Index size_ = 0;
};

// ---------------------------------------------------------------------------
// Affine constraints
// ---------------------------------------------------------------------------

enum class Sense { negdef, posdef };

inline const char* to_string(Sense s) { return s == Sense::negdef ? "negdef" : "posdef"; }

/// LHS(x) = constant + sum_i x_i coeff_i, required negative (or positive)
/// definite. Coefficients are stored only for variables that enter.
struct AffineConstraint {
    struct Term {
        Index var = 0;
        SymMat coeff;
    };

    std::string name;
    Sense sense = Sense::negdef;
    SymMat constant;
    std::vector<Term> terms;

    [[nodiscard]] Index size() const { return constant.dim(); }

    [[nodiscard]] SymMat evaluate(const Vec& x) const {
        Mat out = constant.mat();
        for (const auto& t : terms) {
            if (t.var >= x.size()) throw std::invalid_argument("constraint " + name + ": decision vector too short");
            out.noalias() += x(t.var) * t.coeff.mat();
        }
        return SymMat(out);
    }
};

struct DecisionValues {
    Mat p, s, u, y;
};

inline DecisionValues unpack_values(const DecisionLayout& layout, const Vec& x) {
    DecisionValues v;
    v.p = layout.unpack(x, "P");
    v.s = layout.unpack(x, "S");
    v.u = layout.unpack(x, "U");
    if (layout.find("Y") != nullptr) v.y = layout.unpack(x, "Y");
    return v;
}

/// Builds an affine constraint from a block formula that is affine in the
/// decision variables by evaluating it at zero and at every unit vector.
/// Exact for affine formulas up to rounding in the formula itself.
inline AffineConstraint probe_affine(const DecisionLayout& layout, std::string name, Sense sense,
                                     const std::function<Mat(const Vec&)>& formula) {
    AffineConstraint c;
    c.name = std::move(name);
    c.sense = sense;
    Vec x = Vec::Zero(layout.size());
    const Mat base = formula(x);
    c.constant = SymMat(base);
    for (Index i = 0; i < layout.size(); ++i) {
        x.setZero();
        x(i) = 1.0;
        const Mat delta = formula(x) - base;
        if (max_abs(delta) > 0.0) c.terms.push_back({i, SymMat(delta)});
    }
    return c;
}

// ---------------------------------------------------------------------------
// Block structure
// ---------------------------------------------------------------------------

struct BlockDims {
    Index n = 0, nu = 0, m = 0, q = 0, d = 0, rho = 0;

    [[nodiscard]] Index chi() const { return q + n + nu + rho; }
    [[nodiscard]] Index eta() const { return chi() + n; }
};

inline BlockDims block_dims(const CddsModel& s) { return {s.n, s.nu, s.m, s.q, s.d(), s.rho()}; }

/// Selector H, derivative map Theta, y-map Gamma, output map Sigma and the
/// inverse Gram matrix of the kernel.
struct Theorem1Blocks {
    Mat h;
    Mat theta;
    Mat gamma;
    Mat sigma;
    Mat f_mat;
};

/// Blocks over the extended vector eta = (chi, x').
struct Theorem2Blocks {
    Mat a_row;    ///< [D1 A1 A2 A3]
    Mat h_t;      ///< [H; 0]
    Mat theta_t;  ///< [[0 0 0 0 I], [0 F(0)A4 F(0)A5-F(-r) -M^ 0]]
    Mat gamma_t;  ///< [Gamma 0]
    Mat sigma_t;  ///< [Sigma 0]
};

inline Theorem1Blocks theorem1_blocks(const CddsModel& s) {
    require_valid(s);
    const BlockDims k = block_dims(s);
    const Mat f0 = eval_big_f(s.kernel, 0.0, s.nu);
    const Mat fr = eval_big_f(s.kernel, -s.r, s.nu);
    const Mat mhat = kron(s.kernel.m_mat, eye(s.nu));

    Theorem1Blocks b;
    b.h = assemble({{zeros(k.q, k.n), zeros(k.q, k.rho)},
                    {eye(k.n), zeros(k.n, k.rho)},
                    {zeros(k.nu, k.n), zeros(k.nu, k.rho)},
                    {zeros(k.rho, k.n), eye(k.rho)}});
    b.theta = assemble({{s.d1, s.a1, s.a2, s.a3}, {zeros(k.rho, k.q), f0 * s.a4, f0 * s.a5 - fr, -mhat}});
    b.gamma = hcat({zeros(k.nu, k.q), s.a4, s.a5, zeros(k.nu, k.rho)});
    b.sigma = hcat({s.d2, s.c1, s.c2, s.c3});
    b.f_mat = gram(s.kernel).f_inv.mat();
    return b;
}

inline Theorem2Blocks theorem2_blocks(const CddsModel& s, const Theorem1Blocks& t1) {
    const BlockDims k = block_dims(s);
    Theorem2Blocks b;
    b.a_row = hcat({s.d1, s.a1, s.a2, s.a3});
    b.h_t = vcat({t1.h, zeros(k.n, k.n + k.rho)});
    const Mat derivative_row = t1.theta.bottomRows(k.rho);
    b.theta_t = assemble({{zeros(k.n, k.chi()), eye(k.n)}, {derivative_row, zeros(k.rho, k.n)}});
    b.gamma_t = hcat({t1.gamma, zeros(k.nu, k.n)});
    b.sigma_t = hcat({t1.sigma, zeros(k.m, k.n)});
    return b;
}

/// J1^{-1} by symmetric eigendecomposition; empty when m = 0, nullopt when J1
/// is not negative definite or its condition number exceeds 1e12.
inline std::optional<Mat> j1_inverse(const SupplyRate& sr) {
    if (sr.m() == 0) return Mat(0, 0);
    if (!sr.strict()) return std::nullopt;
    Eigen::SelfAdjointEigenSolver<Mat> es(sr.j1().mat());
    const Vec ev = es.eigenvalues();
    const double big = std::abs(ev(0));
    const double small = std::abs(ev(ev.size() - 1));
    if (small == 0.0 || big / small > 1e12) return std::nullopt;
    const Mat& v = es.eigenvectors();
    return SymMat(v * ev.cwiseInverse().asDiagonal() * v.transpose()).mat();
}

/// Precomputed data shared by the block formulas.
struct LmiContext {
    BlockDims dims;
    double r = 1.0;
    Theorem1Blocks t1;
    Theorem2Blocks t2;
    SupplyRate supply;
    std::optional<Mat> j1_inv;

    LmiContext(const CddsModel& s, const SupplyRate& sr)
        : dims(block_dims(s)), r(s.r), t1(theorem1_blocks(s)), t2(theorem2_blocks(s, t1)), supply(sr),
          j1_inv(j1_inverse(sr)) {
        if (sr.m() != s.m || sr.q() != s.q) {
            throw std::invalid_argument("supply rate dimensions (" + std::to_string(sr.m()) + ", " +
                                        std::to_string(sr.q()) + ") do not match model (m, q) = (" +
                                        std::to_string(s.m) + ", " + std::to_string(s.q) + ")");
        }
    }

    [[nodiscard]] Mat fu(const Mat& u) const { return kron(t1.f_mat, u); }

    void check_values(const Mat& p, const Mat& s, const Mat& u) const {
        const Index np = dims.n + dims.rho;
        if (p.rows() != np || p.cols() != np) throw std::invalid_argument("P must be " + std::to_string(np) + " square");
        if (s.rows() != dims.nu || s.cols() != dims.nu) throw std::invalid_argument("S must be nu x nu");
        if (u.rows() != dims.nu || u.cols() != dims.nu) throw std::invalid_argument("U must be nu x nu");
    }

    /// Phi = Sy(H P Theta) + Gamma^T (S + rU) Gamma - (J3 (+) 0 (+) S (+) Finv(x)U) - Sy([Sigma^T J2, 0]).
    [[nodiscard]] Mat phi(const Mat& p, const Mat& s, const Mat& u) const {
        check_values(p, s, u);
        const Index nc = dims.chi();
        Mat out = sy(t1.h * p * t1.theta).mat();
        out += t1.gamma.transpose() * (s + r * u) * t1.gamma;
        out -= dirsum({supply.j3().mat(), zeros(dims.n, dims.n), s, fu(u)});
        Mat cross = zeros(nc, nc);
        cross.leftCols(dims.q) = t1.sigma.transpose() * supply.j2();
        out -= cross + cross.transpose();
        return out;
    }

    [[nodiscard]] Mat phi_tilde(const Mat& p, const Mat& s, const Mat& u) const {
        check_values(p, s, u);
        const Index ne = dims.eta();
        Mat out = sy(t2.h_t * p * t2.theta_t).mat();
        out += t2.gamma_t.transpose() * (s + r * u) * t2.gamma_t;
        out -= dirsum({supply.j3().mat(), zeros(dims.n, dims.n), s, fu(u), zeros(dims.n, dims.n)});
        Mat cross = zeros(ne, ne);
        cross.leftCols(dims.q) = t2.sigma_t.transpose() * supply.j2();
        out -= cross + cross.transpose();
        return out;
    }

    [[nodiscard]] const Mat& require_j1_inv() const {
        if (!j1_inv) throw std::domain_error("J1 is not (well-conditioned) negative definite; Schur form unavailable");
        return *j1_inv;
    }

    /// [[J1^{-1}, Sigma], [Sigma^T, Phi]].
    [[nodiscard]] Mat schur_form(const Mat& p, const Mat& s, const Mat& u) const {
        return assemble({{require_j1_inv(), t1.sigma}, {t1.sigma.transpose(), phi(p, s, u)}});
    }

    /// Phi - Sigma^T J1 Sigma.
    [[nodiscard]] Mat direct_form(const Mat& p, const Mat& s, const Mat& u) const {
        return phi(p, s, u) - t1.sigma.transpose() * supply.j1().mat() * t1.sigma;
    }

    [[nodiscard]] Mat schur_form_tilde(const Mat& p, const Mat& s, const Mat& u) const {
        return assemble({{require_j1_inv(), t2.sigma_t}, {t2.sigma_t.transpose(), phi_tilde(p, s, u)}});
    }

    [[nodiscard]] Mat direct_form_tilde(const Mat& p, const Mat& s, const Mat& u) const {
        return phi_tilde(p, s, u) - t2.sigma_t.transpose() * supply.j1().mat() * t2.sigma_t;
    }

    /// P + (0_n (+) Finv (x) S).
    [[nodiscard]] Mat positivity(const Mat& p, const Mat& s) const {
        return p + dirsum({zeros(dims.n, dims.n), kron(t1.f_mat, s)});
    }

    /// [0_{n x m}  A  -I_n] (Schur form) or [A  -I_n] (direct form).
    [[nodiscard]] Mat annihilator(bool schur) const {
        return hcat({zeros(dims.n, schur ? dims.m : 0), t2.a_row, -eye(dims.n)});
    }

    /// [I; [0_{n x m}  A]], whose columns span the kernel of the annihilator.
    [[nodiscard]] Mat structured_basis(bool schur) const {
        const Index lead = (schur ? dims.m : 0) + dims.chi();
        return vcat({eye(lead), hcat({zeros(dims.n, schur ? dims.m : 0), t2.a_row})});
    }
};

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

/// Which dissipation inequality to emit: the Schur-complemented form
/// [[J1^{-1}, Sigma], [*, Phi]] < 0 or the direct form Phi - Sigma^T J1 Sigma < 0.
/// `automatic` picks the Schur form whenever J1 is strictly negative definite
/// and well conditioned.
enum class DissipationForm { automatic, schur, direct };

/// Row span of the slack multiplier: `full` lets Y act on every row of eta
/// (including w), `reduced` drops the w rows.
enum class SlackWidth { full, reduced };

struct SlackStructure {
    std::size_t constraint = 0;  ///< index of the slack-carrying constraint
    Mat annihilator;             ///< rows of the dynamical constraint
    Mat structured_basis;        ///< explicit kernel basis of the annihilator
    Index row_offset = 0;        ///< first row of the slack term within the constraint
};

struct LmiProblem {
    DecisionLayout layout;
    std::vector<AffineConstraint> constraints;
    int theorem = 0;
    std::uint64_t model_hash = 0;
    bool schur_form = true;
    std::optional<SlackStructure> slack;
};

inline bool resolve_schur(const LmiContext& ctx, DissipationForm form) {
    switch (form) {
        case DissipationForm::schur:
            (void)ctx.require_j1_inv();
            return true;
        case DissipationForm::direct:
            return false;
        case DissipationForm::automatic:
        default:
            return ctx.j1_inv.has_value();
    }
}

namespace detail {

inline LmiProblem common_constraints(const CddsModel& model, const LmiContext& ctx, int theorem) {
    LmiProblem prob;
    prob.theorem = theorem;
    prob.model_hash = model_hash(model);
    prob.layout.add_symmetric("P", ctx.dims.n + ctx.dims.rho);
    prob.layout.add_symmetric("S", ctx.dims.nu);
    prob.layout.add_symmetric("U", ctx.dims.nu);
    return prob;
}

inline void add_positivity(LmiProblem& prob, const LmiContext& ctx) {
    const auto& layout = prob.layout;
    prob.constraints.push_back(probe_affine(layout, "positivity", Sense::posdef, [&](const Vec& x) {
        return ctx.positivity(layout.unpack(x, "P"), layout.unpack(x, "S"));
    }));
    prob.constraints.push_back(
        probe_affine(layout, "s_posdef", Sense::posdef, [&](const Vec& x) { return layout.unpack(x, "S"); }));
    prob.constraints.push_back(
        probe_affine(layout, "u_posdef", Sense::posdef, [&](const Vec& x) { return layout.unpack(x, "U"); }));
}

}  // namespace detail

/// Conditions (i) P + (0 (+) Finv (x) S) > 0, (ii) S > 0, (iii) U > 0 and
/// (iv) the dissipation inequality without slack variables.
inline LmiProblem build_theorem1(const CddsModel& model, const SupplyRate& supply,
                                 DissipationForm form = DissipationForm::automatic) {
    const LmiContext ctx(model, supply);
    LmiProblem prob = detail::common_constraints(model, ctx, 1);
    prob.schur_form = resolve_schur(ctx, form);
    detail::add_positivity(prob, ctx);
    const auto& layout = prob.layout;
    const bool schur = prob.schur_form;
    prob.constraints.push_back(probe_affine(layout, "dissipation", Sense::negdef, [&](const Vec& x) {
        const Mat p = layout.unpack(x, "P");
        const Mat s = layout.unpack(x, "S");
        const Mat u = layout.unpack(x, "U");
        return schur ? ctx.schur_form(p, s, u) : ctx.direct_form(p, s, u);
    }));
    return prob;
}

/// As build_theorem1 but the dissipation inequality is stated over eta with
/// the dynamics carried by Sy(E Y [.. A  -I]).
inline LmiProblem build_theorem2(const CddsModel& model, const SupplyRate& supply,
                                 DissipationForm form = DissipationForm::automatic,
                                 SlackWidth width = SlackWidth::full) {
    const LmiContext ctx(model, supply);
    LmiProblem prob = detail::common_constraints(model, ctx, 2);
    prob.schur_form = resolve_schur(ctx, form);
    const bool schur = prob.schur_form;
    const Index skip = width == SlackWidth::reduced ? ctx.dims.q : 0;
    const Index y_rows = ctx.dims.eta() - skip;
    prob.layout.add_rectangular("Y", y_rows, ctx.dims.n);
    detail::add_positivity(prob, ctx);

    const Index offset = (schur ? ctx.dims.m : 0) + skip;
    const Mat ann = ctx.annihilator(schur);
    const Index total = ann.cols();
    const auto& layout = prob.layout;
    prob.constraints.push_back(probe_affine(layout, "dissipation", Sense::negdef, [&](const Vec& x) {
        const Mat p = layout.unpack(x, "P");
        const Mat s = layout.unpack(x, "S");
        const Mat u = layout.unpack(x, "U");
        Mat lifted = zeros(total, ctx.dims.n);
        lifted.middleRows(offset, y_rows) = layout.unpack(x, "Y");
        const Mat base = schur ? ctx.schur_form_tilde(p, s, u) : ctx.direct_form_tilde(p, s, u);
        return Mat(base + sy(lifted * ann).mat());
    }));
    prob.slack = SlackStructure{prob.constraints.size() - 1, ann, ctx.structured_basis(schur), offset};
    return prob;
}

inline SymMat build_phi(const CddsModel& model, const SupplyRate& supply, const Mat& p, const Mat& s, const Mat& u) {
    return SymMat(LmiContext(model, supply).phi(p, s, u));
}

inline SymMat build_phi_tilde(const CddsModel& model, const SupplyRate& supply, const Mat& p, const Mat& s,
                              const Mat& u) {
    return SymMat(LmiContext(model, supply).phi_tilde(p, s, u));
}

/// Max-abs residual of [[J1^{-1}, Sigma], [*, Phi]] = V^T [[J1^{-1}, Sigma~], [*, Phi~]] V
/// with V = [I; [0 A]], evaluated at (P, S, U).
inline double congruence_check(const CddsModel& model, const SupplyRate& supply, const Mat& p, const Mat& s,
                               const Mat& u) {
    const LmiContext ctx(model, supply);
    const Mat lhs = ctx.schur_form(p, s, u);
    const Mat v = ctx.structured_basis(true);
    const Mat rhs = v.transpose() * ctx.schur_form_tilde(p, s, u) * v;
    return max_abs(lhs - rhs);
}

struct EliminatedConstraint {
    AffineConstraint constraint;
    /// Largest projected coefficient of a slack variable before it was dropped;
    /// zero up to rounding because the basis annihilates the slack term.
    double slack_residual = 0.0;
};

/// Projects the slack-carrying constraint of a second-theorem problem onto a
/// kernel basis of its annihilator. With `structured` the basis is [I; [0 A]]
/// and the result coincides with the first-theorem dissipation constraint;
/// otherwise an orthonormal SVD basis is used (a congruent result).
inline EliminatedConstraint eliminate_slack(const LmiProblem& problem, bool structured = true) {
    if (!problem.slack) throw std::invalid_argument("eliminate_slack: problem carries no slack structure");
    const auto& sl = *problem.slack;
    const AffineConstraint& src = problem.constraints.at(sl.constraint);
    const Mat basis = structured ? sl.structured_basis : null_basis(sl.annihilator);
    const VariableDesc* yvar = problem.layout.find("Y");

    EliminatedConstraint out;
    out.constraint.name = src.name + "_eliminated";
    out.constraint.sense = src.sense;
    out.constraint.constant = SymMat(basis.transpose() * src.constant.mat() * basis);
    for (const auto& t : src.terms) {
        const Mat projected = basis.transpose() * t.coeff.mat() * basis;
        const bool is_slack = yvar != nullptr && t.var >= yvar->offset && t.var < yvar->offset + yvar->length();
        if (is_slack) {
            out.slack_residual = std::max(out.slack_residual, max_abs(projected));
            continue;
        }
        if (max_abs(projected) > 0.0) out.constraint.terms.push_back({t.var, SymMat(projected)});
    }
    return out;
}

}  // namespace cdds
