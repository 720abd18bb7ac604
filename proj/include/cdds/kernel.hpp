#pragma once

/// \file cdds/kernel.hpp
/// \brief Distributed-delay basis f(tau) on [-r, 0] closed under
/// differentiation (f' = M f), its Kronecker lift F(tau) = f(tau) (x) I_nu, and
/// the Gram matrix G = int f f^T with inverse.

#include "cdds/blockmat.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace cdds {

/// The basis is parameterized by its companion matrix and anchor value:
/// f(tau) = expm(M tau) f(0).
struct DelayKernel {
    Mat m_mat;       ///< d x d companion matrix M
    Vec f0;          ///< f(0)
    double r = 1.0;  ///< delay, > 0

    [[nodiscard]] Index d() const { return f0.size(); }

    /// f == 1; encodes systems without distributed delay.
    static DelayKernel constant(double r) { return {Mat::Zero(1, 1), Vec::Ones(1), r}; }

    /// f(tau) = (1, tau, ..., tau^k / k!).
    static DelayKernel polynomial(int degree, double r) {
        const Index d = degree + 1;
        Mat m = Mat::Zero(d, d);
        for (Index i = 1; i < d; ++i) m(i, i - 1) = 1.0;
        Vec f0 = Vec::Zero(d);
        f0(0) = 1.0;
        return {m, f0, r};
    }

    /// f(tau) = (e^{lambda_1 tau}, ..., e^{lambda_d tau}).
    static DelayKernel exponential(const Vec& rates, double r) {
        return {Mat(rates.asDiagonal()), Vec::Ones(rates.size()), r};
    }
};

struct KernelGram {
    SymMat g;      ///< int_{-r}^0 f f^T
    SymMat f_inv;  ///< G^{-1}
};

inline void check_kernel_shape(const DelayKernel& k) {
    if (k.d() < 1) throw std::invalid_argument("kernel: basis dimension must be >= 1");
    if (k.m_mat.rows() != k.d() || k.m_mat.cols() != k.d()) {
        throw std::invalid_argument("kernel: m_mat must be " + std::to_string(k.d()) + "x" + std::to_string(k.d()));
    }
    if (!(k.r > 0.0) || !std::isfinite(k.r)) throw std::invalid_argument("kernel: delay r must be positive");
    require_finite(k.m_mat, "kernel m_mat");
    require_finite(k.f0, "kernel f0");
}

inline Vec eval_f(const DelayKernel& k, double tau) {
    check_kernel_shape(k);
    // Quadrature nodes are computed as -r + j*h and may overshoot by an ulp.
    const double slack = 1e-12 * k.r;
    if (tau < -k.r - slack || tau > slack) {
        throw std::out_of_range("kernel: tau=" + std::to_string(tau) + " outside [-r, 0]");
    }
    return expm(k.m_mat * tau) * k.f0;
}

/// F(tau) = f(tau) (x) I_nu, a (nu d) x nu matrix.
inline Mat eval_big_f(const DelayKernel& k, double tau, Index nu) {
    if (nu < 1) throw std::invalid_argument("kernel: nu must be >= 1");
    return kron(eval_f(k, tau), Mat::Identity(nu, nu));
}

/// Composite 5-point Gauss-Legendre quadrature of f f^T over [-r, 0].
inline SymMat gram_matrix(const DelayKernel& k, int panels = 64) {
    check_kernel_shape(k);
    if (panels < 1) throw std::invalid_argument("kernel: panels must be >= 1");
    static constexpr std::array<double, 5> nodes = {-0.906179845938663992797626878299, -0.538469310105683091036314420700,
                                                    0.0, 0.538469310105683091036314420700,
                                                    0.906179845938663992797626878299};
    static constexpr std::array<double, 5> weights = {0.236926885056189087514264040720, 0.478628670499366468041291514836,
                                                      0.568888888888888888888888888889, 0.478628670499366468041291514836,
                                                      0.236926885056189087514264040720};
    const double width = k.r / panels;
    Mat g = Mat::Zero(k.d(), k.d());
    for (int p = 0; p < panels; ++p) {
        const double a = -k.r + p * width;
        const double mid = a + 0.5 * width;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const Vec f = expm(k.m_mat * (mid + 0.5 * width * nodes[j])) * k.f0;
            g.noalias() += (0.5 * width * weights[j]) * (f * f.transpose());
        }
    }
    return SymMat(g);
}

/// Gram matrix and its inverse. Throws std::domain_error when the basis is
/// numerically dependent: lambda_min(G) <= 1e-10 trace(G)/d or cond(G) > 1e12.
inline KernelGram gram(const DelayKernel& k, int panels = 64) {
    SymMat g = gram_matrix(k, panels);
    const Vec ev = eig_sym(g);
    const double lmin = ev(0);
    const double lmax = ev(ev.size() - 1);
    const double threshold = 1e-10 * g.mat().trace() / static_cast<double>(k.d());
    if (lmin <= 0.0 || lmin <= threshold || lmax / lmin > 1e12) {
        throw std::domain_error("kernel: basis functions are linearly dependent on [-r, 0] (lambda_min(G)=" +
                                std::to_string(lmin) + ")");
    }
    Mat inv = g.mat().ldlt().solve(Mat::Identity(k.d(), k.d()));
    return {std::move(g), SymMat(inv)};
}

}  // namespace cdds
