// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "cdds/cdds.hpp"

#include "battery.hpp"
#include "random_systems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace cdds;

namespace {

using Clock = std::chrono::steady_clock;

struct Result {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int id, const char* title, double limit_s, const std::function<Result()>& body) {
    const auto t0 = Clock::now();
    Result r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs < limit_s;
    const bool ok = r.pass && in_time;
    if (!ok) ++failures;
    std::printf("[%s] %2d %-34s %8.3fs (limit %gs)%s  %s\n", ok ? "PASS" : "FAIL", id, title, secs, limit_s,
                in_time ? "" : " TIMEOUT", r.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel_err(const Mat& a, const Mat& b) { return max_abs(a - b) / (1.0 + max_abs(b)); }

// Independent re-verification of every feasible verdict (criterion 13).
struct Soundness {
    int verdicts = 0;
    int failed = 0;
    double worst = std::numeric_limits<double>::infinity();
    std::vector<std::string> where;

    void check(const std::string& tag, const LmiProblem& prob, const SolveOutcome& out) {
        if (out.verdict != Verdict::feasible) return;
        ++verdicts;
        bool ok = true;
        for (const auto& con : prob.constraints) {
            const Vec ev = eig_sym(con.evaluate(out.x));
            const double margin = con.sense == Sense::negdef ? -ev(ev.size() - 1) : ev(0);
            worst = std::min(worst, margin);
            if (margin < 1e-7) ok = false;
        }
        if (out.certificate) {
            for (const auto& m : verify_certificate(prob, *out.certificate)) ok = ok && m.pass && m.margin >= 1e-7;
        }
        if (!ok) {
            ++failed;
            where.push_back(tag);
        }
    }
} soundness;

bool decided(const SolveOutcome& o) { return o.verdict != Verdict::indeterminate && std::abs(o.t_star) >= 1e-6; }

struct BatterySolve {
    battery::Case c;
    LmiProblem p1, p2;
    SolveOutcome o1, o2;
};

std::vector<BatterySolve>& battery_solves() {
    static std::vector<BatterySolve> cache = [] {
        std::vector<BatterySolve> out;
        for (const auto& c : battery::cases()) {
            BatterySolve b{c, build_theorem1(c.model, c.supply), build_theorem2(c.model, c.supply), {}, {}};
            b.o1 = solve(b.p1);
            b.o2 = solve(b.p2);
            soundness.check(c.name + "/T1", b.p1, b.o1);
            soundness.check(c.name + "/T2", b.p2, b.o2);
            out.push_back(std::move(b));
        }
        return out;
    }();
    return cache;
}

Result kron_identities() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<Index> dim(1, 4);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const Index p = dim(rng), q = dim(rng), n = dim(rng), m = dim(rng), r = dim(rng), k = dim(rng);
        const Mat pm = randsys::gaussian(rng, p, q);
        const Mat qm = randsys::gaussian(rng, n, m);
        const Mat pq = kron(pm, qm);
        worst = std::max(worst, rel_err(kron(pm, eye(n)) * kron(eye(q), qm), pq));
        worst = std::max(worst, rel_err(kron(eye(p), qm) * kron(pm, eye(m)), pq));
        const Mat x = randsys::gaussian(rng, n, m);
        const Mat y = randsys::gaussian(rng, m, k);
        const Mat z = randsys::gaussian(rng, q, r);
        worst = std::max(worst, rel_err(kron(x, z) * kron(y, eye(r)), kron(x * y, z)));
    }
    return {worst <= 1e-12, fmt("max rel err %.2e", worst)};
}

Result finsler() {
    std::mt19937_64 rng(4101);
    int agree = 0;
    for (int t = 0; t < 100; ++t) {
        const auto inst = sample_finsler_instance(rng, 8);
        const auto v = finsler_verdicts(inst, static_cast<std::uint64_t>(t) + 1);
        if (v.decided && v.ke == v.mei && v.mei == v.pra) ++agree;
    }
    return {agree == 100, fmt("agreement %d/100", agree)};
}

Result projection() {
    std::mt19937_64 rng(4201);
    int agree = 0;
    for (int t = 0; t < 100; ++t) {
        const auto v = projection_verdicts(sample_projection_instance(rng));
        if (v.decided && v.slack == v.projec) ++agree;
    }
    return {agree == 100, fmt("agreement %d/100", agree)};
}

Result congruence() {
    std::mt19937_64 rng(4301);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const CddsModel s = randsys::random_model(rng, 3, 2);
        const SupplyRate sr = randsys::random_strict_supply(rng, s.m, s.q);
        const auto pt = randsys::random_point(rng, s);
        const LmiContext ctx(s, sr);
        const double scale = max_abs(ctx.schur_form(pt.p, pt.s, pt.u));
        worst = std::max(worst, congruence_check(s, sr, pt.p, pt.s, pt.u) / (1.0 + scale));
    }
    return {worst <= 1e-10, fmt("max residual/(1+scale) %.2e", worst)};
}

Result theorem_agreement() {
    int compared = 0, excluded = 0, agree = 0, feasible = 0;
    std::string mismatch;
    for (const auto& b : battery_solves()) {
        if (!decided(b.o1) || !decided(b.o2)) {
            ++excluded;
            continue;
        }
        ++compared;
        if (b.o1.verdict == b.o2.verdict) {
            ++agree;
        } else {
            mismatch += " " + b.c.name;
        }
        if (b.o1.verdict == Verdict::feasible) ++feasible;
    }
    return {compared > 0 && agree == compared,
            fmt("agree %d/%d, feasible %d, excluded %d", agree, compared, feasible, excluded) + mismatch};
}

Result schur_vs_direct() {
    int compared = 0, excluded = 0, agree = 0;
    std::string mismatch;
    for (const auto& c : battery::cases()) {
        if (!c.supply.strict()) continue;
        for (int theorem : {1, 2}) {
            auto build = [&](DissipationForm f) {
                return theorem == 1 ? build_theorem1(c.model, c.supply, f) : build_theorem2(c.model, c.supply, f);
            };
            const auto ps = build(DissipationForm::schur);
            const auto pd = build(DissipationForm::direct);
            const auto os = solve(ps);
            const auto od = solve(pd);
            soundness.check(c.name + "/schur" + std::to_string(theorem), ps, os);
            soundness.check(c.name + "/direct" + std::to_string(theorem), pd, od);
            if (!decided(os) || !decided(od)) {
                ++excluded;
                continue;
            }
            ++compared;
            if (os.verdict == od.verdict) {
                ++agree;
            } else {
                mismatch += " " + c.name + "/T" + std::to_string(theorem);
            }
        }
    }
    return {compared > 0 && agree == compared, fmt("agree %d/%d, excluded %d", agree, compared, excluded) + mismatch};
}

Result known_systems() {
    const SupplyRate sr = supply_hinf(10.0, 1, 1);
    const std::vector<std::pair<double, Verdict>> expect = {
        {0.5, Verdict::feasible}, {1.0, Verdict::feasible}, {2.0, Verdict::infeasible_within_bound}};
    bool ok = true;
    std::string detail;
    for (const auto& [r, want] : expect) {
        const auto prob = build_theorem1(battery::scalar_delay(r), sr);
        const auto out = solve(prob);
        soundness.check(fmt("scalar r=%.1f", r), prob, out);
        ok = ok && out.verdict == want;
        detail += fmt("r=%.1f %s (t*=%.3g) ", r, to_string(out.verdict), out.t_star);
    }
    return {ok, detail};
}

Result dissipation() {
    int systems = 0, windows = 0;
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const auto& b : battery_solves()) {
        const SolveOutcome* o = b.o1.verdict == Verdict::feasible   ? &b.o1
                                : b.o2.verdict == Verdict::feasible ? &b.o2
                                                                    : nullptr;
        if (o == nullptr || !o->certificate) continue;
        ++systems;
        const CddsModel& s = b.c.model;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto tr = integrate(s, Vec::Zero(s.n), constant_signal(Vec::Zero(s.nu)),
                                      band_limited_disturbance(s.q, seed), 5.0 * s.r, 64, o->certificate, b.c.supply);
            double vmax = 0.0;
            for (double v : tr.v) vmax = std::max(vmax, std::abs(v));
            for (double res : dissipation_residuals(tr)) {
                ++windows;
                const double rel = res / (1.0 + vmax);
                worst = std::max(worst, rel);
                if (res > 1e-5 * (1.0 + vmax)) ok = false;
            }
        }
    }
    return {ok && systems > 0, fmt("%d systems, %d windows, max residual/(1+max|V|) %.2e", systems, windows, worst)};
}

CddsModel scalar_with_kernel(const DelayKernel& k) {
    CddsModel s = make_model(1, 1, 1, 1, k);
    s.a1(0, 0) = -1.0;
    s.a2(0, 0) = 0.3;
    s.a3 = Mat::Constant(1, s.rho(), -0.4);
    s.a4(0, 0) = 1.0;
    s.a5(0, 0) = 0.2;
    s.c1(0, 0) = 1.0;
    s.d1(0, 0) = 1.0;
    return s;
}

std::vector<DelayKernel> three_kernels(double r) {
    Vec rates(2);
    rates << -0.5, 1.0;
    return {DelayKernel::constant(r), DelayKernel::polynomial(1, r), DelayKernel::exponential(rates, r)};
}

Result jensen() {
    std::mt19937_64 rng(4901);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> knots_count(2, 16);
    const Index n = 128;
    const double r = 0.8;
    double worst = std::numeric_limits<double>::infinity();
    int histories = 0;
    for (const auto& k : three_kernels(r)) {
        const CddsModel s = scalar_with_kernel(k);
        for (int t = 0; t < 100; ++t) {
            // Piecewise linear through random knots plus a random oscillation.
            const int nk = knots_count(rng);
            std::vector<double> knots(static_cast<std::size_t>(nk) + 1);
            for (auto& v : knots) v = g(rng);
            const double amp = g(rng), freq = 1.0 + 10.0 * std::abs(g(rng));
            History h;
            h.h = r / static_cast<double>(n);
            for (Index j = 0; j <= n; ++j) {
                const double pos = static_cast<double>(j) * nk / static_cast<double>(n);
                const auto i0 = std::min<std::size_t>(static_cast<std::size_t>(pos), static_cast<std::size_t>(nk - 1));
                const double frac = pos - static_cast<double>(i0);
                const double v = (1 - frac) * knots[i0] + frac * knots[i0 + 1] + amp * std::sin(freq * j * h.h);
                h.values.push_back(Vec::Constant(1, v));
            }
            const SymMat weight(randsys::spd(rng, 1));
            worst = std::min(worst, jensen_gap(s, weight, h));
            ++histories;
        }
    }
    return {worst >= -1e-8, fmt("%d histories, min gap %.3e", histories, worst)};
}

Result gram_closed_forms() {
    double worst = 0.0;
    for (double r : {0.5, 1.0, 2.0}) {
        worst = std::max(worst, std::abs(gram(DelayKernel::constant(r)).g(0, 0) - r));
        Mat aff(2, 2);
        aff << r, -r * r / 2.0, -r * r / 2.0, r * r * r / 3.0;
        worst = std::max(worst, max_abs(gram(DelayKernel::polynomial(1, r)).g.mat() - aff));
        Vec rates(2);
        rates << 0.5, 2.0;
        Mat ex(2, 2);
        for (Index i = 0; i < 2; ++i) {
            for (Index j = 0; j < 2; ++j) {
                const double s = rates(i) + rates(j);
                ex(i, j) = (1.0 - std::exp(-s * r)) / s;
            }
        }
        worst = std::max(worst, max_abs(gram(DelayKernel::exponential(rates, r)).g.mat() - ex));
    }
    return {worst <= 1e-10, fmt("max abs err %.2e", worst)};
}

double classic_at(double t, Index n) {
    const CddsModel s = battery::scalar_delay(1.0);
    const auto tr = integrate(s, Vec::Ones(1), constant_signal(Vec::Ones(1)), constant_signal(Vec::Zero(1)), t, n);
    return tr.x.back()(0);
}

Result classic_example() {
    // On [1, 2] the solution is a quadratic, so RK4 reproduces x(2) up to
    // rounding and the error there cannot shrink further; the fourth-order
    // rate is measured at t = 8 where the solution is no longer polynomial
    // of low degree.
    const double e64 = std::abs(classic_at(2.0, 64) + 0.5);
    const double e128 = std::abs(classic_at(2.0, 128) + 0.5);
    const bool shrinks = e128 <= e64 / 4.0 || e64 <= 1e-13;
    const double ref = classic_at(8.0, 1024);
    const double f64 = std::abs(classic_at(8.0, 64) - ref);
    const double f128 = std::abs(classic_at(8.0, 128) - ref);
    const double ratio = f64 / f128;
    return {e64 <= 1e-4 && shrinks && ratio >= 4.0,
            fmt("|x(2)+0.5| N=64 %.1e, N=128 %.1e; x(8) error ratio %.1f", e64, e128, ratio)};
}

Result derivative_relation() {
    double worst = 0.0;
    for (const auto& k : three_kernels(1.0)) {
        const CddsModel s = scalar_with_kernel(k);
        const Index n = 64;
        const auto tr = integrate(s, Vec::Ones(1), constant_signal(Vec::Constant(1, 0.5)),
                                  band_limited_disturbance(1, 4), 4.0, n);
        const double h = tr.t[1] - tr.t[0];
        const Mat f0 = eval_big_f(k, 0.0, 1);
        const Mat fr = eval_big_f(k, -1.0, 1);
        const Mat mhat = kron(k.m_mat, eye(1));
        double scale = 1.0;
        for (const auto& e : tr.eta) scale = std::max(scale, 1.0 + e.cwiseAbs().maxCoeff());
        for (std::size_t i = 1; i + 1 < tr.size(); ++i) {
            if (i % static_cast<std::size_t>(n) == 0) continue;  // y jumps at multiples of r
            const Vec fd = (tr.eta[i + 1] - tr.eta[i - 1]) / (2 * h);
            const Vec yd = tr.history(i).values.front();
            const Vec rhs = f0 * s.a4 * tr.x[i] + (f0 * s.a5 - fr) * yd - mhat * tr.eta[i];
            worst = std::max(worst, (fd - rhs).cwiseAbs().maxCoeff() / (10 * h * scale));
        }
    }
    return {worst <= 1.0, fmt("max error / (10 h scale) %.3f", worst)};
}

}  // namespace

int main() {
    run(1, "Kronecker identities", 1, kron_identities);
    run(2, "Finsler three-way equivalence", 30, finsler);
    run(3, "Projection lemma equivalence", 60, projection);
    run(4, "Congruence identity", 5, congruence);
    run(5, "Slack-free vs slack agreement", 300, theorem_agreement);
    run(6, "Schur vs direct form", 300, schur_vs_direct);
    run(7, "Known scalar delay systems", 60, known_systems);
    run(8, "Certificate vs simulation", 120, dissipation);
    run(9, "Jensen-type bound", 10, jensen);
    run(10, "Gram closed forms", 1, gram_closed_forms);
    run(11, "Classic delay example", 5, classic_example);
    run(12, "History integral derivative", 5, derivative_relation);
    run(13, "Solver soundness", 1, [] {
        std::string detail = fmt("%d feasible verdicts, %d failed, min margin %.2e", soundness.verdicts,
                                 soundness.failed, soundness.worst);
        for (const auto& w : soundness.where) detail += " " + w;
        return Result{soundness.verdicts > 0 && soundness.failed == 0, detail};
    });
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
