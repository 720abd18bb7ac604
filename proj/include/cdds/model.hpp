#pragma once

/// \file cdds/model.hpp
/// \brief Linear coupled differential-difference system with a distributed
/// delay, quadratic supply rates and Krasovskii certificates.
///
///   x'(t) = A1 x(t) + A2 y(t-r) + int_{-r}^0 A3 F(tau) y(t+tau) dtau + D1 w(t)
///   y(t)  = A4 x(t) + A5 y(t-r)
///   z(t)  = C1 x(t) + C2 y(t-r) + int_{-r}^0 C3 F(tau) y(t+tau) dtau + D2 w(t)

#include "cdds/blockmat.hpp"
#include "cdds/kernel.hpp"

#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdds {

struct CddsModel {
    Index n = 0;   ///< differential state x
    Index nu = 0;  ///< difference state y
    Index m = 0;   ///< regulated output z (may be 0)
    Index q = 0;   ///< disturbance w (may be 0)
    double r = 1.0;
    Mat a1, a2, a3, a4, a5;
    Mat c1, c2, c3;
    Mat d1, d2;
    DelayKernel kernel = DelayKernel::constant(1.0);

    [[nodiscard]] Index d() const { return kernel.d(); }
    [[nodiscard]] Index rho() const { return nu * kernel.d(); }
};

/// Zero-initialized model with consistent shapes.
inline CddsModel make_model(Index n, Index nu, Index m, Index q, const DelayKernel& kernel) {
    CddsModel s;
    s.n = n;
    s.nu = nu;
    s.m = m;
    s.q = q;
    s.r = kernel.r;
    s.kernel = kernel;
    const Index rho = nu * kernel.d();
    s.a1 = zeros(n, n);
    s.a2 = zeros(n, nu);
    s.a3 = zeros(n, rho);
    s.a4 = zeros(nu, n);
    s.a5 = zeros(nu, nu);
    s.c1 = zeros(m, n);
    s.c2 = zeros(m, nu);
    s.c3 = zeros(m, rho);
    s.d1 = zeros(n, q);
    s.d2 = zeros(m, q);
    return s;
}

struct Violation {
    std::string field;
    std::string message;
};

/// Every violated invariant of the model; empty iff the model is well formed.
inline std::vector<Violation> validate(const CddsModel& s) {
    std::vector<Violation> out;
    if (s.n < 1) out.push_back({"n", "n must be >= 1"});
    if (s.nu < 1) out.push_back({"nu", "nu must be >= 1"});
    if (s.m < 0) out.push_back({"m", "m must be >= 0"});
    if (s.q < 0) out.push_back({"q", "q must be >= 0"});
    if (!(s.r > 0.0) || !std::isfinite(s.r)) out.push_back({"r", "delay must be positive and finite"});

    bool kernel_ok = true;
    try {
        check_kernel_shape(s.kernel);
    } catch (const std::exception& e) {
        out.push_back({"kernel", e.what()});
        kernel_ok = false;
    }
    if (kernel_ok && std::abs(s.kernel.r - s.r) > 1e-12 * (1.0 + std::abs(s.r))) {
        out.push_back({"kernel", "kernel delay differs from system delay"});
    }
    if (!out.empty()) return out;

    const Index rho = s.rho();
    struct Expected {
        const char* name;
        const Mat* mat;
        Index rows;
        Index cols;
    };
    const Expected shapes[] = {
        {"a1", &s.a1, s.n, s.n},  {"a2", &s.a2, s.n, s.nu}, {"a3", &s.a3, s.n, rho},  {"a4", &s.a4, s.nu, s.n},
        {"a5", &s.a5, s.nu, s.nu}, {"c1", &s.c1, s.m, s.n},  {"c2", &s.c2, s.m, s.nu}, {"c3", &s.c3, s.m, rho},
        {"d1", &s.d1, s.n, s.q},  {"d2", &s.d2, s.m, s.q},
    };
    bool shapes_ok = true;
    for (const auto& e : shapes) {
        if (e.mat->rows() != e.rows || e.mat->cols() != e.cols) {
            out.push_back({e.name, "expected " + std::to_string(e.rows) + "x" + std::to_string(e.cols) + ", got " +
                                       std::to_string(e.mat->rows()) + "x" + std::to_string(e.mat->cols())});
            shapes_ok = false;
        } else if (!e.mat->allFinite()) {
            out.push_back({e.name, "non-finite entry"});
            shapes_ok = false;
        }
    }
    if (shapes_ok) {
        const double a5norm = norm2(s.a5);
        if (a5norm >= 1.0 - 1e-9) {
            out.push_back({"a5", "spectral norm " + std::to_string(a5norm) + " violates ||A5|| < 1"});
        }
    }
    try {
        (void)gram(s.kernel);
    } catch (const std::exception& e) {
        out.push_back({"kernel", e.what()});
    }
    return out;
}

inline void require_valid(const CddsModel& s) {
    const auto report = validate(s);
    if (!report.empty()) {
        std::string msg = "invalid model:";
        for (const auto& v : report) msg += " [" + v.field + "] " + v.message + ";";
        throw std::invalid_argument(msg);
    }
}

/// s(z, w) = [z; w]^T [[J1, J2], [J2^T, J3]] [z; w] with J1 <= 0.
class SupplyRate {
public:
    SupplyRate() = default;

    SupplyRate(SymMat j1, Mat j2, SymMat j3) : j1_(std::move(j1)), j2_(std::move(j2)), j3_(std::move(j3)) {
        if (j2_.rows() != j1_.dim() || j2_.cols() != j3_.dim()) {
            throw std::invalid_argument("supply: J2 must be " + std::to_string(j1_.dim()) + "x" +
                                        std::to_string(j3_.dim()));
        }
        require_finite(j2_, "supply J2");
        const double scale = 1.0 + spectral_norm(j1_);
        const double lmax = lambda_max(j1_);
        if (j1_.dim() > 0 && lmax > 1e-12 * scale) {
            throw std::invalid_argument("supply: J1 must be negative semidefinite (lambda_max=" + std::to_string(lmax) +
                                        ")");
        }
        strict_ = j1_.dim() == 0 || lmax <= -1e-9 * scale;
    }

    [[nodiscard]] const SymMat& j1() const { return j1_; }
    [[nodiscard]] const Mat& j2() const { return j2_; }
    [[nodiscard]] const SymMat& j3() const { return j3_; }
    [[nodiscard]] Index m() const { return j1_.dim(); }
    [[nodiscard]] Index q() const { return j3_.dim(); }

    /// J1 negative definite (vacuously true when m = 0).
    [[nodiscard]] bool strict() const { return strict_; }

    [[nodiscard]] Mat joint() const { return assemble({{j1_.mat(), j2_}, {j2_.transpose(), j3_.mat()}}); }

private:
    SymMat j1_;
    Mat j2_;
    SymMat j3_;
    bool strict_ = true;
};

/// H-infinity supply gamma^2 w^T w - z^T z.
inline SupplyRate supply_hinf(double gamma, Index m, Index q) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("supply_hinf: gamma must be positive");
    return {SymMat(-eye(m)), zeros(m, q), SymMat(gamma * gamma * eye(q))};
}

inline double eval_supply(const SupplyRate& sr, const Vec& z, const Vec& w) {
    if (z.size() != sr.m() || w.size() != sr.q()) {
        throw std::invalid_argument("eval_supply: expected z in R^" + std::to_string(sr.m()) + " and w in R^" +
                                    std::to_string(sr.q()));
    }
    return z.dot(sr.j1().mat() * z) + 2.0 * z.dot(sr.j2() * w) + w.dot(sr.j3().mat() * w);
}

/// Solved decision variables of either theorem.
struct Certificate {
    SymMat p;              ///< (n + rho) square
    SymMat s;              ///< nu square
    SymMat u;              ///< nu square
    std::optional<Mat> y;  ///< slack multiplier (second theorem only)
    double margin = 0.0;   ///< smallest eigenvalue margin over all constraints
    int theorem = 1;
};

/// FNV-1a over dimensions and raw matrix bytes.
inline std::uint64_t model_hash(const CddsModel& s) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    auto feed_mat = [&](const Mat& x) {
        const Index dims[2] = {x.rows(), x.cols()};
        feed(dims, sizeof(dims));
        if (x.size() > 0) feed(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
    };
    const Index dims[4] = {s.n, s.nu, s.m, s.q};
    feed(dims, sizeof(dims));
    feed(&s.r, sizeof(double));
    for (const Mat* x : {&s.a1, &s.a2, &s.a3, &s.a4, &s.a5, &s.c1, &s.c2, &s.c3, &s.d1, &s.d2, &s.kernel.m_mat}) {
        feed_mat(*x);
    }
    feed_mat(s.kernel.f0);
    return h;
}

}  // namespace cdds
