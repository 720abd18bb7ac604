#pragma once

/// \file cdds/simulator.hpp
/// \brief Method-of-steps integration of the coupled differential-difference
/// system, evaluation of the Krasovskii functional along a trajectory and the
/// integrated dissipation inequality.
///
/// Time is discretized on the delay grid t_j = j h, h = r / N. x is advanced
/// by classical RK4 with step h. y is stored at grid nodes with both one-sided
/// limits (it jumps where the initial data is inconsistent and those jumps
/// propagate by multiples of r); between nodes it is reconstructed by cubic
/// Hermite interpolation from the one-sided values and derivatives. All query
/// points are quarter-steps, addressed by integer index to avoid rounding in
/// the location of nodes.

#include "cdds/blockmat.hpp"
#include "cdds/kernel.hpp"
#include "cdds/model.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdds {

using SignalFn = std::function<Vec(double)>;

/// Samples of y over the trailing window [t - r, t] at N + 1 equispaced nodes.
/// Node values are the values of y (right limits where y jumps).
struct History {
    double t = 0.0;
    double h = 0.0;
    std::vector<Vec> values;

    [[nodiscard]] Index intervals() const { return static_cast<Index>(values.size()) - 1; }
};

struct Trajectory {
    double r = 0.0;
    Index steps_per_delay = 0;
    std::vector<double> t;
    std::vector<Vec> x;
    std::vector<Vec> y;    ///< y(t_i)
    std::vector<Vec> z;    ///< z(t_i) with the right limit of y(t_i - r)
    std::vector<Vec> w;
    std::vector<Vec> eta;  ///< int F(tau) y(t_i + tau) dtau
    std::vector<double> v;                ///< functional value (zero without a certificate)
    std::vector<double> supply_integral;  ///< int_0^{t_i} s(z, w) dt (zero without a supply rate)
    std::vector<Vec> y_initial;           ///< phi at t_j = j h, j = -N .. -1

    [[nodiscard]] std::size_t size() const { return t.size(); }

    /// y over [t_i - r, t_i].
    [[nodiscard]] History history(std::size_t i) const {
        const auto n = static_cast<std::size_t>(steps_per_delay);
        History hist;
        hist.t = t.at(i);
        hist.h = r / static_cast<double>(steps_per_delay);
        hist.values.reserve(n + 1);
        for (std::size_t k = 0; k <= n; ++k) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(n) +
                                     static_cast<std::ptrdiff_t>(k);
            hist.values.push_back(j < 0 ? y_initial[static_cast<std::size_t>(j + static_cast<std::ptrdiff_t>(n))]
                                        : y[static_cast<std::size_t>(j)]);
        }
        return hist;
    }
};

class SimulationDiverged : public std::runtime_error {
public:
    explicit SimulationDiverged(double t)
        : std::runtime_error("diverged: ||x|| exceeded 1e9 at t=" + std::to_string(t)), time_(t) {}
    [[nodiscard]] double time() const { return time_; }

private:
    double time_;
};

/// Constant initial function.
inline SignalFn constant_signal(const Vec& value) {
    return [value](double) { return value; };
}

/// w(t) = sum_{k<5} a_k sin(omega_k t + theta_k) per channel with a in
/// U(-1, 1), omega in U(0.2, 5), theta in U(0, 2 pi), seeded.
inline SignalFn band_limited_disturbance(Index q, std::uint64_t seed, int terms = 5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(0.2, 5.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    Mat a(q, terms);
    Mat om(q, terms);
    Mat th(q, terms);
    for (Index c = 0; c < q; ++c) {
        for (int k = 0; k < terms; ++k) {
            a(c, k) = amp(rng);
            om(c, k) = freq(rng);
            th(c, k) = phase(rng);
        }
    }
    return [a, om, th](double t) {
        Vec w = Vec::Zero(a.rows());
        for (Index c = 0; c < a.rows(); ++c) {
            for (Index k = 0; k < a.cols(); ++k) w(c) += a(c, k) * std::sin(om(c, k) * t + th(c, k));
        }
        return w;
    };
}

namespace detail {

/// Composite Simpson weights (without the h/3 factor) for an even number of
/// intervals.
inline std::vector<double> simpson_weights(Index intervals) {
    if (intervals < 2 || intervals % 2 != 0) {
        throw std::invalid_argument("Simpson quadrature needs an even number of intervals >= 2");
    }
    std::vector<double> w(static_cast<std::size_t>(intervals + 1), 2.0);
    for (Index k = 1; k < intervals; k += 2) w[static_cast<std::size_t>(k)] = 4.0;
    w.front() = 1.0;
    w.back() = 1.0;
    return w;
}

inline void check_history(const CddsModel& model, const History& hist) {
    const Index n = hist.intervals();
    if (n < 2) throw std::invalid_argument("history: needs at least 3 nodes");
    if (std::abs(hist.h * static_cast<double>(n) - model.r) > 1e-9 * model.r) {
        throw std::invalid_argument("history: grid does not span one delay");
    }
    for (const auto& v : hist.values) {
        if (v.size() != model.nu) throw std::invalid_argument("history: values must have nu entries");
    }
}

/// f(tau_k) at tau_k = -r + k h, k = 0..N.
inline std::vector<Vec> kernel_on_grid(const DelayKernel& k, Index intervals) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(intervals + 1));
    const double h = k.r / static_cast<double>(intervals);
    for (Index j = 0; j <= intervals; ++j) out.push_back(eval_f(k, -k.r + static_cast<double>(j) * h));
    return out;
}

inline Vec big_f_times(const Vec& f, const Vec& y) { return kron(f, y); }

struct HistoryIntegrals {
    Vec eta;       ///< int F y
    double s_int;  ///< int y^T S y
    double u_int;  ///< int (tau + r) y^T U y
};

inline HistoryIntegrals history_integrals(const CddsModel& model, const History& hist, const std::vector<Vec>& fgrid,
                                          const Mat& s, const Mat& u) {
    const Index n = hist.intervals();
    const auto w = simpson_weights(n);
    HistoryIntegrals out{Vec::Zero(model.rho()), 0.0, 0.0};
    for (Index k = 0; k <= n; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const Vec& y = hist.values[ks];
        const double wk = w[ks] * hist.h / 3.0;
        out.eta += wk * big_f_times(fgrid[ks], y);
        out.s_int += wk * y.dot(s * y);
        out.u_int += wk * static_cast<double>(k) * hist.h * y.dot(u * y);
    }
    return out;
}

}  // namespace detail

/// V = [x; eta]^T P [x; eta] + int_{-r}^0 y^T (S + (tau + r) U) y dtau, both
/// integrals by composite Simpson on the history grid.
inline double eval_functional(const CddsModel& model, const Certificate& cert, const Vec& x, const History& hist) {
    if (x.size() != model.n) throw std::invalid_argument("eval_functional: x must have n entries");
    if (cert.p.dim() != model.n + model.rho() || cert.s.dim() != model.nu || cert.u.dim() != model.nu) {
        throw std::invalid_argument("eval_functional: certificate dimensions do not match the model");
    }
    detail::check_history(model, hist);
    const auto fgrid = detail::kernel_on_grid(model.kernel, hist.intervals());
    const auto ints = detail::history_integrals(model, hist, fgrid, cert.s, cert.u);
    Vec xe(model.n + model.rho());
    xe << x, ints.eta;
    return xe.dot(cert.p.mat() * xe) + ints.s_int + ints.u_int;
}

/// int y^T S y - (int F y)^T (Finv (x) S) (int F y) over the history window.
inline double jensen_gap(const CddsModel& model, const SymMat& s_mat, const History& hist) {
    if (s_mat.dim() != model.nu) throw std::invalid_argument("jensen_gap: S must be nu x nu");
    detail::check_history(model, hist);
    const auto fgrid = detail::kernel_on_grid(model.kernel, hist.intervals());
    const auto ints = detail::history_integrals(model, hist, fgrid, s_mat, Mat::Zero(model.nu, model.nu));
    const Mat fs = kron(gram(model.kernel).f_inv.mat(), s_mat.mat());
    return ints.s_int - ints.eta.dot(fs * ints.eta);
}

namespace detail {

class StepIntegrator {
public:
    StepIntegrator(const CddsModel& model, SignalFn phi, SignalFn w, Index steps)
        : m_(model), phi_(std::move(phi)), w_(std::move(w)), n_(steps), h_(model.r / static_cast<double>(steps)) {
        fq_.resize(m_.d(), 4 * n_ + 1);
        for (Index k = 0; k <= 4 * n_; ++k) fq_.col(k) = eval_f(m_.kernel, -m_.r + static_cast<double>(k) * h_ / 4.0);
    }

    [[nodiscard]] double h() const { return h_; }
    [[nodiscard]] const std::vector<Vec>& x() const { return x_; }
    [[nodiscard]] const std::vector<Vec>& eta() const { return eta_; }
    [[nodiscard]] const Vec& y_right(Index j) const { return yq_[static_cast<std::size_t>(4 * (j + n_))]; }
    [[nodiscard]] const Vec& y_left(Index j) const { return yl_[static_cast<std::size_t>(j + n_)]; }

    void start(const Vec& x0) {
        for (Index q = -4 * n_; q <= 0; ++q) {
            Vec v = phi_(static_cast<double>(q) * h_ / 4.0);
            if (v.size() != m_.nu) throw std::invalid_argument("initial function must return nu entries");
            yq_.push_back(std::move(v));
        }
        for (Index j = -n_; j <= 0; ++j) {
            yl_.push_back(y_right(j));
            ydr_.push_back(phi_derivative(static_cast<double>(j) * h_));
            ydl_.push_back(ydr_.back());
        }
        x_.push_back(x0);
        // At t = 0, y jumps from phi(0-) to A4 x0 + A5 phi(-r).
        yq_.back() = m_.a4 * x0 + m_.a5 * y_right(-n_);
        eta_.push_back(eta_past(0));
        finish_node(0);
    }

    /// Advances from node i to node i + 1.
    void step() {
        const Index i = static_cast<Index>(x_.size()) - 1;
        const Index ti = 4 * i;
        const Vec xi = x_.back();
        const Vec w0 = disturbance(ti);
        const Vec wm = disturbance(ti + 2);
        const Vec w1 = disturbance(ti + 4);

        const Vec k1 = rhs(xi, y_right(i - n_), eta_.back(), w0);
        const Vec& yd_mid = yq_[qidx(ti + 2 - 4 * n_)];
        const Vec x2 = xi + 0.5 * h_ * k1;
        const Vec k2 = rhs(x2, yd_mid, eta_future(i, 2, m_.a4 * x2 + m_.a5 * yd_mid), wm);
        const Vec x3 = xi + 0.5 * h_ * k2;
        const Vec k3 = rhs(x3, yd_mid, eta_future(i, 2, m_.a4 * x3 + m_.a5 * yd_mid), wm);
        const Vec x4 = xi + h_ * k3;
        const Vec yd_end = y_left(i + 1 - n_);
        const Vec k4 = rhs(x4, yd_end, eta_future(i, 4, m_.a4 * x4 + m_.a5 * yd_end), w1);

        Vec xn = xi + (h_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!xn.allFinite() || xn.norm() > 1e9) throw SimulationDiverged(static_cast<double>(i + 1) * h_);
        const Vec y_r = m_.a4 * xn + m_.a5 * y_right(i + 1 - n_);
        Vec y_l = m_.a4 * xn + m_.a5 * yd_end;
        x_.push_back(std::move(xn));
        eta_.push_back(eta_future(i, 4, y_l));
        yl_.push_back(std::move(y_l));
        ydr_.emplace_back();
        ydl_.emplace_back();
        finish_node(i + 1);

        // Interior quarter points of [t_i, t_{i+1}] by cubic Hermite.
        const Vec y0 = y_right(i);
        const Vec d0 = ydr_[nidx(i)];
        const Vec& y1 = y_left(i + 1);
        const Vec& d1 = ydl_[nidx(i + 1)];
        for (int k = 1; k < 4; ++k) {
            const double th = k / 4.0;
            const double h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
            const double h10 = th * (1.0 - th) * (1.0 - th);
            const double h01 = th * th * (3.0 - 2.0 * th);
            const double h11 = th * th * (th - 1.0);
            yq_.push_back(h00 * y0 + h10 * h_ * d0 + h01 * y1 + h11 * h_ * d1);
        }
        yq_.push_back(y_r);
    }

    /// Quantities at the midpoint of [t_i, t_{i+1}] once both nodes are known.
    struct Midpoint {
        Vec x, y_delayed, eta, w;
    };

    [[nodiscard]] Midpoint midpoint(Index i) const {
        const auto a = static_cast<std::size_t>(i);
        Midpoint mp;
        mp.x = 0.5 * (x_[a] + x_[a + 1]) + (h_ / 8.0) * (xdr_[a] - xdl_[a + 1]);
        mp.y_delayed = yq_[qidx(4 * i + 2 - 4 * n_)];
        mp.eta = eta_past(4 * i + 2);
        mp.w = disturbance(4 * i + 2);
        return mp;
    }

    [[nodiscard]] Vec disturbance(Index quarter) const {
        if (m_.q == 0) return Vec(0);
        Vec w = w_(static_cast<double>(quarter) * h_ / 4.0);
        if (w.size() != m_.q) throw std::invalid_argument("disturbance must return q entries");
        return w;
    }

private:
    [[nodiscard]] std::size_t qidx(Index q) const { return static_cast<std::size_t>(q + 4 * n_); }
    [[nodiscard]] std::size_t nidx(Index j) const { return static_cast<std::size_t>(j + n_); }

    [[nodiscard]] Vec phi_derivative(double s) const {
        const double delta = 1e-5 * m_.r;
        const double lo = std::max(-m_.r, s - delta);
        const double hi = std::min(0.0, s + delta);
        return (phi_(hi) - phi_(lo)) / (hi - lo);
    }

    [[nodiscard]] Vec rhs(const Vec& x, const Vec& y_delayed, const Vec& eta, const Vec& w) const {
        Vec dx = m_.a1 * x + m_.a2 * y_delayed + m_.a3 * eta;
        if (m_.q > 0) dx += m_.d1 * w;
        return dx;
    }

    /// One-sided derivatives at node j once x_j, y_j and eta_j are stored.
    void finish_node(Index j) {
        const Vec w = disturbance(4 * j);
        const auto jj = static_cast<std::size_t>(j);
        xdr_.push_back(rhs(x_[jj], y_right(j - n_), eta_[jj], w));
        xdl_.push_back(rhs(x_[jj], y_left(j - n_), eta_[jj], w));
        ydr_[nidx(j)] = m_.a4 * xdr_[jj] + m_.a5 * ydr_[nidx(j - n_)];
        if (j > 0) ydl_[nidx(j)] = m_.a4 * xdl_[jj] + m_.a5 * ydl_[nidx(j - n_)];
    }

    /// eta += weight * F(tau) y with tau given by its quarter index from -r.
    void add(Vec& eta, double weight, Index tau_quarter, const Vec& y) const {
        for (Index l = 0; l < fq_.rows(); ++l) eta.segment(l * m_.nu, m_.nu) += (weight * fq_(l, tau_quarter)) * y;
    }

    /// Simpson pieces over [t_end - r, upto], split at grid nodes, using
    /// stored samples only (right limits at piece starts, left at piece ends).
    [[nodiscard]] Vec eta_range(Index t_end, Index upto) const {
        Vec acc = Vec::Zero(m_.rho());
        const Index base = t_end - 4 * n_;
        Index qa = base;
        while (qa < upto) {
            const Index rem = ((qa % 4) + 4) % 4;
            const Index qb = std::min(qa + (4 - rem), upto);
            const Index qm = (qa + qb) / 2;
            const double w6 = static_cast<double>(qb - qa) * h_ / 24.0;
            add(acc, w6, qa - base, yq_[qidx(qa)]);
            add(acc, 4.0 * w6, qm - base, yq_[qidx(qm)]);
            add(acc, w6, qb - base, qb % 4 == 0 ? y_left(qb / 4) : yq_[qidx(qb)]);
            qa = qb;
        }
        return acc;
    }

    [[nodiscard]] Vec eta_past(Index t_end) const { return eta_range(t_end, t_end); }

    /// Window ending at t_i + len h / 4; the piece [t_i, t_end] uses the given
    /// end value and a quadratic Hermite midpoint from node i.
    [[nodiscard]] Vec eta_future(Index i, Index len, const Vec& y_final) const {
        const Index t_end = 4 * i + len;
        const Index base = t_end - 4 * n_;
        Vec acc = eta_range(t_end, 4 * i);
        const double width = static_cast<double>(len) * h_ / 4.0;
        const Vec& y0 = y_right(i);
        const Vec ym = 0.75 * y0 + 0.25 * y_final + 0.25 * width * ydr_[nidx(i)];
        add(acc, width / 6.0, 4 * i - base, y0);
        add(acc, 4.0 * width / 6.0, 4 * i + len / 2 - base, ym);
        add(acc, width / 6.0, t_end - base, y_final);
        return acc;
    }

    const CddsModel& m_;
    SignalFn phi_;
    SignalFn w_;
    Index n_;
    double h_;
    Mat fq_;                         // f at tau = -r + k h / 4, one column per k
    std::vector<Vec> x_, xdr_, xdl_, eta_;
    std::vector<Vec> yq_;            // y at every quarter point from -r (right limits at nodes)
    std::vector<Vec> yl_;            // left limits at nodes
    std::vector<Vec> ydr_, ydl_;     // one-sided derivatives at nodes
};

}  // namespace detail

/// Integrates on [0, t_final] (rounded up to whole steps) with h = r / N.
/// With a certificate the functional is sampled at every node; with a supply
/// rate its running integral is accumulated by per-step Simpson quadrature.
inline Trajectory integrate(const CddsModel& model, const Vec& x0, const SignalFn& phi, const SignalFn& w,
                            double t_final, Index steps_per_delay, const std::optional<Certificate>& cert = {},
                            const std::optional<SupplyRate>& supply = {}) {
    require_valid(model);
    if (x0.size() != model.n) throw std::invalid_argument("integrate: x0 must have n entries");
    if (!(t_final > 0.0) || !std::isfinite(t_final)) throw std::invalid_argument("integrate: t_final must be positive");
    if (steps_per_delay < 32) throw std::invalid_argument("integrate: steps_per_delay must be >= 32");
    if (steps_per_delay % 2 != 0) throw std::invalid_argument("integrate: steps_per_delay must be even");
    if (!phi) throw std::invalid_argument("integrate: initial function missing");
    if (model.q > 0 && !w) throw std::invalid_argument("integrate: disturbance missing");
    if (supply && (supply->m() != model.m || supply->q() != model.q)) {
        throw std::invalid_argument("integrate: supply rate dimensions do not match the model");
    }

    detail::StepIntegrator sim(model, phi, w, steps_per_delay);
    const double h = sim.h();
    const double ratio = t_final / h;
    const auto steps = static_cast<Index>(std::abs(ratio - std::round(ratio)) < 1e-9 * ratio ? std::round(ratio)
                                                                                             : std::ceil(ratio));
    sim.start(x0);
    for (Index i = 0; i < steps; ++i) sim.step();

    Trajectory tr;
    tr.r = model.r;
    tr.steps_per_delay = steps_per_delay;
    for (Index j = -steps_per_delay; j < 0; ++j) tr.y_initial.push_back(sim.y_right(j));
    auto output = [&](const Vec& x, const Vec& y_delayed, const Vec& eta, const Vec& wv) {
        Vec z = model.c1 * x + model.c2 * y_delayed + model.c3 * eta;
        if (model.q > 0) z += model.d2 * wv;
        return z;
    };
    double supply_acc = 0.0;
    for (Index i = 0; i <= steps; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        tr.t.push_back(static_cast<double>(i) * h);
        tr.x.push_back(sim.x()[ii]);
        tr.y.push_back(sim.y_right(i));
        tr.eta.push_back(sim.eta()[ii]);
        const Vec wv = sim.disturbance(4 * i);
        tr.w.push_back(wv);
        tr.z.push_back(output(sim.x()[ii], sim.y_right(i - steps_per_delay), sim.eta()[ii], wv));
        if (supply && i > 0) {
            const auto mp = sim.midpoint(i - 1);
            const Vec w_prev = sim.disturbance(4 * (i - 1));
            const double s0 = eval_supply(*supply, tr.z[ii - 1], w_prev);
            const double sm = eval_supply(*supply, output(mp.x, mp.y_delayed, mp.eta, mp.w), mp.w);
            const double s1 =
                eval_supply(*supply, output(sim.x()[ii], sim.y_left(i - steps_per_delay), sim.eta()[ii], wv), wv);
            supply_acc += (h / 6.0) * (s0 + 4.0 * sm + s1);
        }
        tr.supply_integral.push_back(supply_acc);
    }
    tr.v.assign(tr.t.size(), 0.0);
    if (cert) {
        for (std::size_t i = 0; i < tr.t.size(); ++i) tr.v[i] = eval_functional(model, *cert, tr.x[i], tr.history(i));
    }
    return tr;
}

/// V(t_b) - V(t_a) - int_{t_a}^{t_b} s dt over consecutive windows of one delay.
inline std::vector<double> dissipation_residuals(const Trajectory& traj) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(traj.steps_per_delay);
    if (n == 0) return out;
    for (std::size_t a = 0; a + n < traj.size(); a += n) {
        const std::size_t b = a + n;
        out.push_back(traj.v[b] - traj.v[a] - (traj.supply_integral[b] - traj.supply_integral[a]));
    }
    return out;
}

/// Header "t,x_1,..,y_1,..,z_1,..,w_1,..,V,supply_integral", 12 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.size() == 0) throw std::invalid_argument("write_csv: empty trajectory");
    os << "t";
    auto names = [&os](const char* p, Index k) {
        for (Index i = 1; i <= k; ++i) os << ',' << p << '_' << i;
    };
    names("x", traj.x[0].size());
    names("y", traj.y[0].size());
    names("z", traj.z[0].size());
    names("w", traj.w[0].size());
    os << ",V,supply_integral\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < traj.size(); ++i) {
        num(traj.t[i]);
        for (const auto* col : {&traj.x[i], &traj.y[i], &traj.z[i], &traj.w[i]}) {
            for (Index k = 0; k < col->size(); ++k) {
                os << ',';
                num((*col)(k));
            }
        }
        os << ',';
        num(traj.v[i]);
        os << ',';
        num(traj.supply_integral[i]);
        os << '\n';
    }
}

}  // namespace cdds
