#pragma once

/// \file cdds/solver.hpp
/// \brief Feasibility of an LmiProblem via the margin program
///
///     maximize t  s.t.  LHS_k(x) + t I <= 0   (negdef constraints)
///                       LHS_k(x) - t I >= 0   (posdef constraints)
///                       ||x||_2 <= variable_bound
///
/// solved by a dense primal-dual interior-point method (HKM search direction,
/// Mehrotra predictor-corrector). The program is posed in the dual form
/// max b^T y s.t. C - sum_i y_i A_i = Z >= 0 with y = (x, t); the ball is the
/// arrow block [[I, x/R], [x^T/R, 1]] >= 0.
///
/// Iterates stay dual feasible, so every iterate's x is a valid point whose
/// margins are recomputed independently by eigenvalue decomposition.

#include "cdds/blockmat.hpp"
#include "cdds/lmi.hpp"
#include "cdds/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cdds {

struct SolveOptions {
    double margin_floor = 1e-7;
    double variable_bound = 1e4;
    int max_iterations = 200;
    double kkt_tolerance = 1e-9;
    double cert_epsilon = 1e-7;  ///< relative margin required by verify_certificate
};

enum class Verdict { feasible, infeasible_within_bound, indeterminate };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::feasible:
            return "feasible";
        case Verdict::infeasible_within_bound:
            return "infeasible-within-bound";
        case Verdict::indeterminate:
        default:
            return "indeterminate";
    }
}

struct ConstraintMargin {
    std::string name;
    double margin = 0.0;  ///< -lambda_max for negdef, lambda_min for posdef
    double scale = 1.0;   ///< 1 + ||LHS||_2
    bool pass = false;
};

struct SolveOutcome {
    Verdict verdict = Verdict::indeterminate;
    Vec x;                                   ///< best decision vector found (dual feasible)
    std::optional<Certificate> certificate;  ///< present iff verdict == feasible and layout has P, S, U
    double achieved_margin = 0.0;            ///< min over constraints of the recomputed margin at x
    double t_star = 0.0;                     ///< optimal margin estimate (dual objective)
    double upper_bound = 0.0;                ///< upper bound on the optimal margin (primal objective)
    int iterations = 0;
    bool converged = false;
    bool touches_bound = false;
    std::vector<ConstraintMargin> margins;
    std::string diagnostics;
};

inline void check_problem(const LmiProblem& problem) {
    if (problem.constraints.empty()) throw std::invalid_argument("LMI problem has no constraints");
    for (const auto& c : problem.constraints) {
        for (const auto& t : c.terms) {
            if (t.var < 0 || t.var >= problem.layout.size()) {
                throw std::invalid_argument("constraint " + c.name + " references an unknown variable");
            }
            if (t.coeff.dim() != c.size()) throw std::invalid_argument("constraint " + c.name + " has a misfit block");
        }
    }
}

/// Signed margins of every constraint at x, computed by eig_sym only.
inline std::vector<ConstraintMargin> verify_point(const LmiProblem& problem, const Vec& x, double epsilon = 1e-7) {
    if (x.size() != problem.layout.size()) throw std::invalid_argument("verify: decision vector has wrong length");
    std::vector<ConstraintMargin> out;
    out.reserve(problem.constraints.size());
    for (const auto& c : problem.constraints) {
        const SymMat lhs = c.evaluate(x);
        const Vec ev = eig_sym(lhs);
        ConstraintMargin cm;
        cm.name = c.name;
        if (ev.size() == 0) {
            cm.margin = std::numeric_limits<double>::infinity();
            cm.scale = 1.0;
        } else {
            cm.margin = c.sense == Sense::negdef ? -ev(ev.size() - 1) : ev(0);
            cm.scale = 1.0 + std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
        }
        cm.pass = cm.margin >= epsilon * cm.scale;
        out.push_back(cm);
    }
    return out;
}

inline bool all_pass(const std::vector<ConstraintMargin>& margins) {
    for (const auto& m : margins) {
        if (!m.pass) return false;
    }
    return true;
}

inline Vec pack_certificate(const DecisionLayout& layout, const Certificate& cert) {
    Vec x = Vec::Zero(layout.size());
    layout.pack(cert.p.mat(), layout.at("P"), x);
    layout.pack(cert.s.mat(), layout.at("S"), x);
    layout.pack(cert.u.mat(), layout.at("U"), x);
    if (const auto* yv = layout.find("Y")) {
        if (!cert.y) throw std::invalid_argument("certificate lacks the slack variable Y");
        layout.pack(*cert.y, *yv, x);
    }
    return x;
}

inline std::vector<ConstraintMargin> verify_certificate(const LmiProblem& problem, const Certificate& cert,
                                                        double epsilon = 1e-7) {
    return verify_point(problem, pack_certificate(problem.layout, cert), epsilon);
}

namespace detail {

struct Entry {
    Index row;
    Index col;
    double value;
};

/// One semidefinite block of the dual-form program. Generic blocks carry a
/// sparse coefficient list per variable; the arrow block encodes the ball.
struct SdpBlock {
    Index size = 0;
    Mat c;
    std::vector<std::vector<Entry>> coeffs;  // per variable (x..., t)
    bool arrow = false;
    double inv_radius = 0.0;
};

inline std::vector<Entry> to_entries(const Mat& a, double sign) {
    std::vector<Entry> out;
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            if (a(i, j) != 0.0) out.push_back({i, j, sign * a(i, j)});
        }
    }
    return out;
}

class MarginProgram {
public:
    MarginProgram(const LmiProblem& problem, const SolveOptions& opts) : nvar_(problem.layout.size()) {
        const Index m = nvar_ + 1;
        for (const auto& c : problem.constraints) {
            SdpBlock b;
            b.size = c.size();
            if (b.size == 0) continue;
            const double sign = c.sense == Sense::negdef ? -1.0 : 1.0;
            // negdef: -LHS - tI >= 0 ; posdef: LHS - tI >= 0 ; as C - sum y_i A_i.
            b.c = sign * c.constant.mat();
            b.coeffs.assign(static_cast<std::size_t>(m), {});
            for (const auto& t : c.terms) {
                auto& dst = b.coeffs[static_cast<std::size_t>(t.var)];
                auto add = to_entries(t.coeff.mat(), -sign);
                dst.insert(dst.end(), add.begin(), add.end());
            }
            for (Index i = 0; i < b.size; ++i) b.coeffs[static_cast<std::size_t>(nvar_)].push_back({i, i, 1.0});
            blocks_.push_back(std::move(b));
        }
        if (nvar_ > 0) {
            SdpBlock ball;
            ball.size = nvar_ + 1;
            ball.c = Mat::Identity(ball.size, ball.size);
            ball.arrow = true;
            ball.inv_radius = 1.0 / opts.variable_bound;
            blocks_.push_back(std::move(ball));
        }
        for (const auto& b : blocks_) total_dim_ += b.size;
    }

    [[nodiscard]] Index nvar() const { return nvar_; }
    [[nodiscard]] Index m() const { return nvar_ + 1; }
    [[nodiscard]] const std::vector<SdpBlock>& blocks() const { return blocks_; }
    [[nodiscard]] Index total_dim() const { return total_dim_; }

    /// sum_i y_i A_i for block b.
    [[nodiscard]] Mat adjoint(const SdpBlock& b, const Vec& y) const {
        Mat out = Mat::Zero(b.size, b.size);
        if (b.arrow) {
            const Index last = b.size - 1;
            for (Index i = 0; i < nvar_; ++i) {
                out(i, last) = -y(i) * b.inv_radius;
                out(last, i) = out(i, last);
            }
            return out;
        }
        for (std::size_t i = 0; i < b.coeffs.size(); ++i) {
            const double yi = y(static_cast<Index>(i));
            if (yi == 0.0) continue;
            for (const auto& e : b.coeffs[i]) out(e.row, e.col) += yi * e.value;
        }
        return out;
    }

    /// Adds <A_i, G> over block b into out.
    void accumulate_inner(const SdpBlock& b, const Mat& g, Vec& out) const {
        if (b.arrow) {
            const Index last = b.size - 1;
            for (Index i = 0; i < nvar_; ++i) out(i) += -(g(i, last) + g(last, i)) * b.inv_radius;
            return;
        }
        for (std::size_t i = 0; i < b.coeffs.size(); ++i) {
            double acc = 0.0;
            for (const auto& e : b.coeffs[i]) acc += e.value * g(e.row, e.col);
            out(static_cast<Index>(i)) += acc;
        }
    }

    /// Adds M_ij = tr(A_i X A_j W) over block b into schur.
    void accumulate_schur(const SdpBlock& b, const Mat& x, const Mat& w, Mat& schur) const {
        if (b.arrow) {
            const Index last = b.size - 1;
            const double s = b.inv_radius * b.inv_radius;
            for (Index j = 0; j < nvar_; ++j) {
                for (Index i = 0; i < nvar_; ++i) {
                    schur(i, j) += s * (x(last, j) * w(last, i) + x(last, last) * w(j, i) + x(i, j) * w(last, last) +
                                        x(i, last) * w(j, last));
                }
            }
            return;
        }
        Mat t(b.size, b.size);
        for (std::size_t j = 0; j < b.coeffs.size(); ++j) {
            const auto& aj = b.coeffs[j];
            if (aj.empty()) continue;
            t.setZero();
            for (const auto& e : aj) t.col(e.col) += e.value * x.col(e.row);
            const Mat k = t * w;
            for (std::size_t i = 0; i < b.coeffs.size(); ++i) {
                double acc = 0.0;
                for (const auto& e : b.coeffs[i]) acc += e.value * k(e.col, e.row);
                schur(static_cast<Index>(i), static_cast<Index>(j)) += acc;
            }
        }
    }

private:
    Index nvar_ = 0;
    std::vector<SdpBlock> blocks_;
    Index total_dim_ = 0;
};

/// Largest alpha in (0, inf] keeping x + alpha dx positive semidefinite.
inline double max_step(const Mat& x, const Mat& dx) {
    Eigen::LLT<Mat> llt(x);
    double lmin = 0.0;
    if (llt.info() == Eigen::Success) {
        const Mat linv_dx = llt.matrixL().solve(dx);
        const Mat b = llt.matrixL().solve(linv_dx.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (b + b.transpose()), Eigen::EigenvaluesOnly);
        lmin = es.eigenvalues()(0);
    } else {
        return 0.0;
    }
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double frob_inner(const Mat& a, const Mat& b) { return a.cwiseProduct(b).sum(); }

}  // namespace detail

inline SolveOutcome solve(const LmiProblem& problem, const SolveOptions& opts = {}) {
    check_problem(problem);
    if (!(opts.margin_floor > 0) || !(opts.variable_bound > 0) || opts.max_iterations <= 0 ||
        !(opts.kkt_tolerance > 0) || !(opts.cert_epsilon > 0)) {
        throw std::invalid_argument("solve: all options must be positive");
    }
    using detail::frob_inner;
    const detail::MarginProgram prog(problem, opts);
    const auto& blocks = prog.blocks();
    const Index m = prog.m();
    const Index nv = prog.nvar();
    const std::size_t nb = blocks.size();
    Vec b = Vec::Zero(m);
    b(nv) = 1.0;

    // Dual-feasible start: x = 0 and t below every constraint's spectrum.
    Vec y = Vec::Zero(m);
    double t0 = 0.0;
    for (const auto& blk : blocks) {
        if (!blk.arrow) t0 = std::min(t0, lambda_min(SymMat(blk.c)));
    }
    y(nv) = t0 - 1.0;

    std::vector<Mat> xs(nb);
    std::vector<Mat> zs(nb);
    auto refresh_z = [&]() {
        for (std::size_t k = 0; k < nb; ++k) zs[k] = blocks[k].c - prog.adjoint(blocks[k], y);
    };
    refresh_z();
    for (std::size_t k = 0; k < nb; ++k) xs[k] = Mat::Identity(blocks[k].size, blocks[k].size);

    SolveOutcome out;
    std::ostringstream diag;
    const double n_total = static_cast<double>(prog.total_dim());
    double pobj = 0.0;
    double rp_x_norm = 0.0;
    double rp_t = 0.0;
    double best_kkt = std::numeric_limits<double>::infinity();
    int best_it = 0;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        double gap = 0.0;
        pobj = 0.0;
        Vec ax = Vec::Zero(m);
        for (std::size_t k = 0; k < nb; ++k) {
            gap += frob_inner(xs[k], zs[k]);
            pobj += frob_inner(blocks[k].c, xs[k]);
            prog.accumulate_inner(blocks[k], xs[k], ax);
        }
        const Vec rp = b - ax;
        rp_x_norm = rp.head(nv).norm();
        rp_t = rp(nv);
        const double dobj = y(nv);
        const double mu = gap / n_total;
        const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        const double pinf = rp.norm() / (1.0 + b.norm());
        if (relgap < opts.kkt_tolerance && pinf < opts.kkt_tolerance) {
            out.converged = true;
            break;
        }
        // Rounding error eventually stalls the primal residual on degenerate
        // problems; stop once the KKT error has not halved in a while.
        const double kkt = std::max(relgap, pinf);
        if (kkt < 0.5 * best_kkt) {
            best_kkt = kkt;
            best_it = it;
        } else if (it - best_it >= 8) {
            out.converged = best_kkt < std::sqrt(opts.kkt_tolerance);
            diag << "progress stalled at KKT error " << best_kkt << "; ";
            break;
        }

        std::vector<Mat> ws(nb);
        bool breakdown = false;
        for (std::size_t k = 0; k < nb; ++k) {
            Eigen::LLT<Mat> llt(zs[k]);
            if (llt.info() != Eigen::Success) {
                breakdown = true;
                break;
            }
            ws[k] = llt.solve(Mat::Identity(blocks[k].size, blocks[k].size));
        }
        if (breakdown) {
            diag << "slack matrix lost definiteness at iteration " << it << "; ";
            break;
        }
        Mat schur = Mat::Zero(m, m);
        for (std::size_t k = 0; k < nb; ++k) prog.accumulate_schur(blocks[k], xs[k], ws[k], schur);
        schur = 0.5 * (schur + schur.transpose());
        Eigen::LLT<Mat> mfac(schur);
        Eigen::LDLT<Mat> mfac_fallback;
        bool use_ldlt = false;
        if (mfac.info() != Eigen::Success) {
            const double reg = 1e-14 * (1.0 + schur.diagonal().cwiseAbs().maxCoeff());
            mfac_fallback.compute(schur + reg * Mat::Identity(m, m));
            use_ldlt = true;
            if (mfac_fallback.info() != Eigen::Success) {
                diag << "Schur complement factorization failed at iteration " << it << "; ";
                break;
            }
        }
        auto solve_m = [&](const Vec& rhs) -> Vec {
            if (use_ldlt) return mfac_fallback.solve(rhs);
            return mfac.solve(rhs);
        };

        // Predictor.
        const Vec dy_a = solve_m(b);
        std::vector<Mat> dz_a(nb);
        std::vector<Mat> dx_a(nb);
        double ap = 1.0;
        double ad = 1.0;
        for (std::size_t k = 0; k < nb; ++k) {
            dz_a[k] = -prog.adjoint(blocks[k], dy_a);
            Mat dx = -xs[k] - xs[k] * dz_a[k] * ws[k];
            dx_a[k] = 0.5 * (dx + dx.transpose());
            ap = std::min(ap, detail::max_step(xs[k], dx_a[k]));
            ad = std::min(ad, detail::max_step(zs[k], dz_a[k]));
        }
        double gap_aff = 0.0;
        for (std::size_t k = 0; k < nb; ++k) gap_aff += frob_inner(xs[k] + ap * dx_a[k], zs[k] + ad * dz_a[k]);
        const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / std::max(gap, 1e-300), 3.0), 0.0, 1.0);

        // Corrector.
        Vec rhs = b;
        std::vector<Mat> qs(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            qs[k] = dx_a[k] * dz_a[k] * ws[k];
            Vec tmp = Vec::Zero(m);
            prog.accumulate_inner(blocks[k], sigma * mu * ws[k] - qs[k], tmp);
            rhs -= tmp;
        }
        const Vec dy = solve_m(rhs);
        std::vector<Mat> dz(nb);
        std::vector<Mat> dxs(nb);
        ap = std::numeric_limits<double>::infinity();
        ad = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nb; ++k) {
            dz[k] = -prog.adjoint(blocks[k], dy);
            Mat dx = sigma * mu * ws[k] - xs[k] - qs[k] - xs[k] * dz[k] * ws[k];
            dxs[k] = 0.5 * (dx + dx.transpose());
            ap = std::min(ap, detail::max_step(xs[k], dxs[k]));
            ad = std::min(ad, detail::max_step(zs[k], dz[k]));
        }
        ap = std::min(1.0, 0.95 * ap);
        ad = std::min(1.0, 0.95 * ad);
        if (ap < 1e-12 && ad < 1e-12) {
            diag << "step length collapsed at iteration " << it << "; ";
            break;
        }
        for (std::size_t k = 0; k < nb; ++k) xs[k] += ap * dxs[k];
        const Vec y_prev = y;
        y += ad * dy;
        refresh_z();
        bool dual_ok = true;
        for (std::size_t k = 0; k < nb; ++k) {
            if (Eigen::LLT<Mat>(zs[k]).info() != Eigen::Success) dual_ok = false;
        }
        if (!dual_ok) {
            y = y_prev;
            refresh_z();
            diag << "dual step rejected at iteration " << it << "; ";
            break;
        }
    }
    out.iterations = it;
    if (!out.converged && it >= opts.max_iterations) diag << "iteration limit reached; ";

    out.x = y.head(nv);
    out.t_star = y(nv);
    // Weak duality with the primal residual folded in: t* <= (<C,X> + R ||r_x||) / (1 - r_t).
    const double denom = 1.0 - rp_t;
    out.upper_bound = denom > 0.0 ? (pobj + opts.variable_bound * rp_x_norm) / denom
                                  : std::numeric_limits<double>::infinity();
    out.margins = verify_point(problem, out.x, opts.cert_epsilon);
    out.achieved_margin = std::numeric_limits<double>::infinity();
    for (const auto& cm : out.margins) out.achieved_margin = std::min(out.achieved_margin, cm.margin);
    out.touches_bound = nv > 0 && out.x.norm() >= (1.0 - 1e-3) * opts.variable_bound;
    if (out.touches_bound) diag << "solution touches the variable bound; ";

    if (!out.converged && it >= opts.max_iterations) {
        out.verdict = Verdict::indeterminate;
    } else if (out.achieved_margin >= opts.margin_floor && all_pass(out.margins)) {
        out.verdict = Verdict::feasible;
    } else if (out.upper_bound <= -opts.margin_floor) {
        out.verdict = Verdict::infeasible_within_bound;
    } else {
        out.verdict = Verdict::indeterminate;
        if (out.achieved_margin >= opts.margin_floor) diag << "margin below the relative certificate threshold; ";
    }

    if (out.verdict == Verdict::feasible && problem.layout.find("P") && problem.layout.find("S") &&
        problem.layout.find("U")) {
        Certificate cert;
        cert.p = SymMat(problem.layout.unpack(out.x, "P"));
        cert.s = SymMat(problem.layout.unpack(out.x, "S"));
        cert.u = SymMat(problem.layout.unpack(out.x, "U"));
        if (problem.layout.find("Y")) cert.y = problem.layout.unpack(out.x, "Y");
        cert.margin = out.achieved_margin;
        cert.theorem = problem.theorem;
        out.certificate = std::move(cert);
    }
    out.diagnostics = diag.str();
    return out;
}

}  // namespace cdds
