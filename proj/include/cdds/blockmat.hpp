#pragma once

/// \file cdds/blockmat.hpp
/// \brief Dense real-matrix utilities: Kronecker products, direct sums,
/// symmetrization, block assembly, matrix exponential, symmetric spectra and
/// null-space bases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdds {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Mat& x) { return x.allFinite(); }

inline void require_finite(const Mat& x, const char* what) {
    if (!x.allFinite()) {
        throw std::domain_error(std::string(what) + ": non-finite entry");
    }
}

inline void require_square(const Mat& x, const char* what) {
    if (x.rows() != x.cols()) {
        throw std::invalid_argument(std::string(what) + ": expected a square matrix, got " +
                                    std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
    }
}

/// Largest absolute entry; zero for empty matrices.
inline double max_abs(const Mat& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

/// Symmetric matrix. Every constructor symmetrizes its input as (X + X^T)/2,
/// so the stored matrix is exactly symmetric.
class SymMat {
public:
    SymMat() = default;

    explicit SymMat(const Mat& x) {
        require_square(x, "SymMat");
        m_ = 0.5 * (x + x.transpose());
        require_finite(m_, "SymMat");
    }

    static SymMat zero(Index n) { return SymMat(Mat::Zero(n, n)); }
    static SymMat identity(Index n) { return SymMat(Mat::Identity(n, n)); }

    [[nodiscard]] Index dim() const { return m_.rows(); }
    [[nodiscard]] const Mat& mat() const { return m_; }
    operator const Mat&() const { return m_; }  // NOLINT(google-explicit-constructor)

    [[nodiscard]] double operator()(Index i, Index j) const { return m_(i, j); }

private:
    Mat m_;
};

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Block-diagonal stacking X1 (+) X2 (+) ... ; blocks need not be square.
inline Mat dirsum(const std::vector<Mat>& blocks) {
    Index rows = 0;
    Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Mat out = Mat::Zero(rows, cols);
    Index r = 0;
    Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

inline Mat dirsum(std::initializer_list<Mat> blocks) { return dirsum(std::vector<Mat>(blocks)); }

/// Sy(X) = X + X^T.
inline SymMat sy(const Mat& x) {
    require_square(x, "sy");
    return SymMat(x + x.transpose());
}

/// Assembles a block matrix from a grid of blocks given row by row. All blocks
/// in a block row share a row count and all blocks in a block column share a
/// column count; zero-sized blocks are allowed.
inline Mat assemble(const std::vector<std::vector<Mat>>& grid) {
    if (grid.empty()) return Mat(0, 0);
    const std::size_t ncols = grid.front().size();
    std::vector<Index> heights(grid.size());
    std::vector<Index> widths(ncols);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].size() != ncols) throw std::invalid_argument("assemble: ragged block grid");
        heights[i] = grid[i].front().rows();
        for (std::size_t j = 0; j < ncols; ++j) {
            if (grid[i][j].rows() != heights[i]) throw std::invalid_argument("assemble: block row height mismatch");
            if (i == 0) widths[j] = grid[i][j].cols();
            if (grid[i][j].cols() != widths[j]) throw std::invalid_argument("assemble: block column width mismatch");
        }
    }
    Index rows = 0;
    Index cols = 0;
    for (auto h : heights) rows += h;
    for (auto w : widths) cols += w;
    Mat out(rows, cols);
    Index r = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Index c = 0;
        for (std::size_t j = 0; j < ncols; ++j) {
            out.block(r, c, heights[i], widths[j]) = grid[i][j];
            c += widths[j];
        }
        r += heights[i];
    }
    return out;
}

inline Mat hcat(const std::vector<Mat>& parts) { return assemble({parts}); }

inline Mat vcat(const std::vector<Mat>& parts) {
    std::vector<std::vector<Mat>> grid;
    grid.reserve(parts.size());
    for (const auto& p : parts) grid.push_back({p});
    return assemble(grid);
}

inline Mat zeros(Index r, Index c) { return Mat::Zero(r, c); }
inline Mat eye(Index n) { return Mat::Identity(n, n); }

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant (Higham's 2005 coefficients).
inline Mat expm(const Mat& a) {
    require_square(a, "expm");
    require_finite(a, "expm");
    const Index n = a.rows();
    if (n == 0) return Mat(0, 0);

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 == 0.0) return Mat::Identity(n, n);
    int s = 0;
    if (norm1 > theta13) s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    const Mat as = a / std::ldexp(1.0, s);

    const Mat id = Mat::Identity(n, n);
    const Mat a2 = as * as;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;
    const Mat u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    const Mat u = as * u_inner;
    const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Mat r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < s; ++k) r = r * r;
    require_finite(r, "expm");
    return r;
}

/// Orthonormal basis of ker(p) from the SVD; rank tolerance is
/// max(rows, cols) * eps * sigma_max. Full column rank gives a 0-column result.
inline Mat null_basis(const Mat& p) {
    const Index cols = p.cols();
    if (cols == 0) return Mat(0, 0);
    if (p.rows() == 0) return Mat::Identity(cols, cols);
    Eigen::JacobiSVD<Mat> svd(p, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double tol = static_cast<double>(std::max(p.rows(), cols)) * std::numeric_limits<double>::epsilon() * smax;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) ++rank;
    }
    return svd.matrixV().rightCols(cols - rank);
}

inline Index numerical_rank(const Mat& p) {
    if (p.size() == 0) return 0;
    return p.cols() - null_basis(p).cols();
}

/// Eigenvalues in ascending order.
inline Vec eig_sym(const SymMat& x) {
    if (x.dim() == 0) return Vec(0);
    Eigen::SelfAdjointEigenSolver<Mat> es(x.mat(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double lambda_max(const SymMat& x) {
    const Vec ev = eig_sym(x);
    return ev.size() == 0 ? -std::numeric_limits<double>::infinity() : ev(ev.size() - 1);
}

inline double lambda_min(const SymMat& x) {
    const Vec ev = eig_sym(x);
    return ev.size() == 0 ? std::numeric_limits<double>::infinity() : ev(0);
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
inline double spectral_norm(const SymMat& x) {
    const Vec ev = eig_sym(x);
    return ev.size() == 0 ? 0.0 : std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

/// Largest singular value of a general matrix.
inline double norm2(const Mat& x) {
    if (x.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(x);
    return svd.singularValues()(0);
}

}  // namespace cdds
