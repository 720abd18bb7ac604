#pragma once

/// \file cdds/lemmas.hpp
/// \brief Numerical deciders for Finsler's lemma and the projection
/// (elimination) lemma, plus seeded generators of non-degenerate instances.
///
/// Finsler: for Pi symmetric and P with a nontrivial kernel, the following are
/// equivalent
///   (a) x^T Pi x < 0 for every nonzero x with P x = 0
///   (b) there is Y with Pi + Sy(Y P) < 0
///   (c) Pperp^T Pi Pperp < 0 for a kernel basis Pperp of P.
/// Projection: there is Ups with Pi + P^T Ups^T Q + Q^T Ups P < 0 iff
/// Pperp^T Pi Pperp < 0 and Qperp^T Pi Qperp < 0 (empty kernels impose nothing).

#include "cdds/blockmat.hpp"
#include "cdds/lmi.hpp"
#include "cdds/solver.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace cdds {

struct FinslerInstance {
    SymMat pi;
    Mat p;
};

struct ProjectionInstance {
    SymMat pi;
    Mat p;      ///< q x n
    Mat q_mat;  ///< p x n
};

struct FinslerVerdicts {
    bool ke = false;   ///< negativity on ker P
    bool mei = false;  ///< slack LMI feasible
    bool pra = false;  ///< projected LMI
    bool decided = true;  ///< false when the slack solve was indeterminate
    double projected_lambda_max = 0.0;
};

struct ProjectionVerdicts {
    bool slack = false;
    bool projec = false;
    bool decided = true;
    double lambda_p = 0.0;  ///< lambda_max on ker P (-inf when the kernel is trivial)
    double lambda_q = 0.0;
};

/// lambda_max(K^T Pi K) for an orthonormal kernel basis K of p; -inf when the
/// kernel is trivial.
inline double projected_lambda_max(const SymMat& pi, const Mat& p) {
    if (p.cols() != pi.dim()) throw std::invalid_argument("projection: column count must match Pi");
    const Mat k = null_basis(p);
    if (k.cols() == 0) return -std::numeric_limits<double>::infinity();
    return lambda_max(SymMat(k.transpose() * pi.mat() * k));
}

inline FinslerVerdicts finsler_verdicts(const FinslerInstance& inst, std::uint64_t sample_seed = 1,
                                        const SolveOptions& opts = {}) {
    const Index n = inst.pi.dim();
    if (inst.p.cols() != n) throw std::invalid_argument("finsler: P must have " + std::to_string(n) + " columns");
    const Mat k = null_basis(inst.p);
    if (k.cols() == 0) throw std::invalid_argument("finsler: P has full column rank, its kernel is trivial");

    FinslerVerdicts v;
    const SymMat projected(k.transpose() * inst.pi.mat() * k);
    Eigen::SelfAdjointEigenSolver<Mat> es(projected.mat());
    v.projected_lambda_max = es.eigenvalues()(es.eigenvalues().size() - 1);
    v.pra = v.projected_lambda_max < 0.0;

    // The quantifier over ker P is decided by the eigenvalue test; random
    // kernel samples and the top eigenvector corroborate it.
    std::mt19937_64 rng(sample_seed);
    std::normal_distribution<double> gauss;
    bool sampled_negative = true;
    for (int s = 0; s < 200; ++s) {
        Vec c(k.cols());
        for (Index i = 0; i < c.size(); ++i) c(i) = gauss(rng);
        const Vec x = k * c.normalized();
        if (x.dot(inst.pi.mat() * x) >= 0.0) sampled_negative = false;
    }
    const Vec witness = k * es.eigenvectors().col(es.eigenvectors().cols() - 1);
    const bool witness_negative = witness.dot(inst.pi.mat() * witness) < 0.0;
    v.ke = v.pra && sampled_negative && witness_negative;
    if (v.pra != v.ke) v.decided = false;

    DecisionLayout layout;
    layout.add_rectangular("Y", n, inst.p.rows());
    LmiProblem prob;
    prob.layout = layout;
    prob.constraints.push_back(probe_affine(prob.layout, "finsler", Sense::negdef, [&](const Vec& x) {
        return Mat(inst.pi.mat() + sy(prob.layout.unpack(x, "Y") * inst.p).mat());
    }));
    const SolveOutcome out = solve(prob, opts);
    v.mei = out.verdict == Verdict::feasible;
    if (out.verdict == Verdict::indeterminate) v.decided = false;
    return v;
}

inline ProjectionVerdicts projection_verdicts(const ProjectionInstance& inst, const SolveOptions& opts = {}) {
    const Index n = inst.pi.dim();
    if (inst.p.cols() != n || inst.q_mat.cols() != n) {
        throw std::invalid_argument("projection: P and Q must have " + std::to_string(n) + " columns");
    }
    ProjectionVerdicts v;
    v.lambda_p = projected_lambda_max(inst.pi, inst.p);
    v.lambda_q = projected_lambda_max(inst.pi, inst.q_mat);
    v.projec = v.lambda_p < 0.0 && v.lambda_q < 0.0;

    LmiProblem prob;
    prob.layout.add_rectangular("Ups", inst.q_mat.rows(), inst.p.rows());
    prob.constraints.push_back(probe_affine(prob.layout, "projection", Sense::negdef, [&](const Vec& x) {
        const Mat ups = prob.layout.unpack(x, "Ups");
        const Mat cross = inst.p.transpose() * ups.transpose() * inst.q_mat;
        return Mat(inst.pi.mat() + cross + cross.transpose());
    }));
    if (prob.layout.size() == 0) {
        v.slack = lambda_max(inst.pi) < 0.0;
        return v;
    }
    const SolveOutcome out = solve(prob, opts);
    v.slack = out.verdict == Verdict::feasible;
    if (out.verdict == Verdict::indeterminate) v.decided = false;
    return v;
}

namespace detail {

inline Mat gaussian(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> g;
    Mat out(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) out(i, j) = g(rng);
    }
    return out;
}

/// Symmetric matrix whose spectrum is shifted so that roughly half the
/// instances are negative on a given subspace.
inline SymMat random_symmetric(std::mt19937_64& rng, Index n) {
    const Mat a = gaussian(rng, n, n);
    std::uniform_real_distribution<double> shift(-2.5, 1.0);
    return SymMat(0.5 * (a + a.transpose()) + shift(rng) * eye(n));
}

}  // namespace detail

/// Finsler instance with n in [2, max_n] and rank(P) < n, resampled until the
/// projected spectrum stays at least `reject_band` away from zero.
inline FinslerInstance sample_finsler_instance(std::mt19937_64& rng, Index max_n = 8, double reject_band = 1e-6) {
    std::uniform_int_distribution<Index> dim(2, max_n);
    for (;;) {
        const Index n = dim(rng);
        std::uniform_int_distribution<Index> rk(1, n - 1);
        const Index rank = rk(rng);
        std::uniform_int_distribution<Index> extra(0, 2);
        const Index rows = rank + extra(rng);
        // rows x n of the requested rank
        const Mat p = detail::gaussian(rng, rows, rank) * detail::gaussian(rng, rank, n);
        FinslerInstance inst{detail::random_symmetric(rng, n), p};
        if (numerical_rank(p) >= n) continue;
        if (std::abs(projected_lambda_max(inst.pi, p)) < reject_band) continue;
        return inst;
    }
}

/// Projection instance of size n with P (rows_p x n), Q (rows_q x n) of random
/// rank, resampled until both projected spectra avoid the band around zero.
inline ProjectionInstance sample_projection_instance(std::mt19937_64& rng, Index n = 4, double reject_band = 1e-6) {
    std::uniform_int_distribution<Index> rows(1, n);
    for (;;) {
        const Index qp = rows(rng);
        const Index pq = rows(rng);
        std::uniform_int_distribution<Index> rk_p(1, qp);
        std::uniform_int_distribution<Index> rk_q(1, pq);
        const Index rp = rk_p(rng);
        const Index rq = rk_q(rng);
        ProjectionInstance inst{detail::random_symmetric(rng, n),
                                detail::gaussian(rng, qp, rp) * detail::gaussian(rng, rp, n),
                                detail::gaussian(rng, pq, rq) * detail::gaussian(rng, rq, n)};
        const double lp = projected_lambda_max(inst.pi, inst.p);
        const double lq = projected_lambda_max(inst.pi, inst.q_mat);
        if (std::isfinite(lp) && std::abs(lp) < reject_band) continue;
        if (std::isfinite(lq) && std::abs(lq) < reject_band) continue;
        if (!std::isfinite(lp) && !std::isfinite(lq) && std::abs(lambda_max(inst.pi)) < reject_band) continue;
        return inst;
    }
}

}  // namespace cdds
