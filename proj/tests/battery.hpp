#pragma once

// Twenty small systems shared by the test suites. Every entry uses an
// H-infinity supply so that an infeasible margin program ends strictly
// below zero.

#include "cdds/kernel.hpp"
#include "cdds/model.hpp"

#include <string>
#include <vector>

namespace battery {

using cdds::CddsModel;
using cdds::DelayKernel;
using cdds::Mat;
using cdds::SupplyRate;
using cdds::Vec;

struct Case {
    std::string name;
    CddsModel model;
    SupplyRate supply;
    bool open_loop_stable;  // from the characteristic equation, for reporting only
};

inline Mat m(std::initializer_list<std::initializer_list<double>> rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (double v : row) out(i, j++) = v;
        ++i;
    }
    return out;
}

/// x' = -x(t - r), y = x, z = x, w enters additively.
inline CddsModel scalar_delay(double r) {
    CddsModel s = cdds::make_model(1, 1, 1, 1, DelayKernel::constant(r));
    s.a2 = m({{-1}});
    s.a4 = m({{1}});
    s.c1 = m({{1}});
    s.d1 = m({{1}});
    return s;
}

/// n = nu, y = x; a1, a2 given, distributed term a3 over the kernel.
inline CddsModel retarded(const Mat& a1, const Mat& a2, const Mat& a3, const DelayKernel& k) {
    const auto n = a1.rows();
    CddsModel s = cdds::make_model(n, n, 1, 1, k);
    s.a1 = a1;
    s.a2 = a2;
    s.a3 = a3;
    s.a4 = Mat::Identity(n, n);
    s.c1 = Mat::Ones(1, n);
    s.d1 = Mat::Ones(n, 1) * 0.5;
    return s;
}

inline std::vector<Case> cases() {
    std::vector<Case> out;
    auto hinf = [](const CddsModel& s, double gamma) { return cdds::supply_hinf(gamma, s.m, s.q); };
    auto add = [&](std::string name, CddsModel s, double gamma, bool stable) {
        SupplyRate sr = hinf(s, gamma);
        out.push_back({std::move(name), std::move(s), std::move(sr), stable});
    };

    add("scalar_r0.5", scalar_delay(0.5), 10.0, true);
    add("scalar_r1.0", scalar_delay(1.0), 10.0, true);
    add("scalar_r2.0", scalar_delay(2.0), 10.0, false);
    add("scalar_r1.2", scalar_delay(1.2), 10.0, true);

    {
        const double r = 1.0;
        add("classic_2d_r1", retarded(m({{-2, 0}, {0, -0.9}}), m({{-1, 0}, {-1, -1}}), Mat::Zero(2, 2),
                                      DelayKernel::constant(r)),
            20.0, true);
    }
    add("unstable_growth", retarded(m({{0.5}}), m({{-0.2}}), Mat::Zero(1, 1), DelayKernel::constant(1.0)), 10.0,
        false);
    add("dist_const_stable", retarded(m({{-1}}), m({{0}}), m({{0.5}}), DelayKernel::constant(1.0)), 10.0, true);
    add("dist_const_negative", retarded(m({{-1}}), m({{-0.2}}), m({{-0.4}}), DelayKernel::constant(1.0)), 10.0, true);
    add("dist_const_unstable", retarded(m({{-1}}), m({{0}}), m({{2.0}}), DelayKernel::constant(1.0)), 10.0, false);
    add("dist_affine", retarded(m({{-1.5}}), m({{0.2}}), m({{-0.5, 0.3}}), DelayKernel::polynomial(1, 1.0)), 10.0,
        true);
    add("dist_exp1", retarded(m({{-1}}), m({{0.1}}), m({{-0.5}}), DelayKernel::exponential(Vec::Constant(1, 1.0), 1.0)),
        10.0, true);
    {
        Vec rates(2);
        rates << 0.5, 2.0;
        add("dist_exp2", retarded(m({{-2}}), m({{0.3}}), m({{0.4, -0.6}}), DelayKernel::exponential(rates, 0.8)), 10.0,
            true);
    }
    {
        CddsModel s = cdds::make_model(1, 1, 1, 1, DelayKernel::constant(1.0));
        s.a1 = m({{-2}});
        s.a2 = m({{0.5}});
        s.a4 = m({{1}});
        s.a5 = m({{0.3}});
        s.c1 = m({{1}});
        s.d1 = m({{1}});
        add("difference_a5", std::move(s), 10.0, true);
    }
    {
        CddsModel s = cdds::make_model(1, 1, 1, 1, DelayKernel::constant(1.0));
        s.a1 = m({{0.2}});
        s.a2 = m({{0.5}});
        s.a4 = m({{1}});
        s.a5 = m({{0.5}});
        s.c1 = m({{1}});
        s.d1 = m({{1}});
        add("difference_unstable", std::move(s), 10.0, false);
    }
    {
        // two difference channels, one differential state
        CddsModel s = cdds::make_model(1, 2, 1, 1, DelayKernel::constant(0.7));
        s.a1 = m({{-3}});
        s.a2 = m({{0.5, -0.4}});
        s.a4 = m({{1}, {0.5}});
        s.a5 = m({{0.2, 0.1}, {0, -0.3}});
        s.c1 = m({{1}});
        s.c2 = m({{0.1, 0}});
        s.d1 = m({{1}});
        s.d2 = m({{0.1}});
        add("nu2_coupled", std::move(s), 10.0, true);
    }
    {
        const Mat a1 = m({{-3, 0.5, 0}, {0.2, -2.5, 0.3}, {0, -0.4, -2}});
        const Mat a2 = m({{0.3, 0, 0.1}, {0, -0.5, 0}, {0.2, 0.1, -0.4}});
        add("three_state", retarded(a1, a2, Mat::Zero(3, 3), DelayKernel::constant(0.6)), 20.0, true);
    }
    {
        const Mat a1 = m({{-2, 0.3}, {0, -1.5}});
        const Mat a3 = m({{-0.4, 0.2, 0.1, 0}, {0, -0.3, 0, 0.2}});
        add("two_state_affine", retarded(a1, Mat::Zero(2, 2), a3, DelayKernel::polynomial(1, 0.5)), 20.0, true);
    }
    add("oscillator_unstable",
        retarded(m({{0.1, 1}, {-1, 0.1}}), m({{0, 0}, {0, -0.05}}), Mat::Zero(2, 2), DelayKernel::constant(0.5)), 20.0,
        false);
    {
        CddsModel s = cdds::make_model(2, 1, 2, 1, DelayKernel::constant(0.4));
        s.a1 = m({{-1, 1}, {0, -2}});
        s.a2 = m({{0}, {-0.5}});
        s.a3 = m({{0.2}, {0}});
        s.a4 = m({{0, 1}});
        s.c1 = m({{1, 0}, {0, 1}});
        s.d1 = m({{0}, {1}});
        add("mimo_output", std::move(s), 20.0, true);
    }
    add("dist_exp_unstable",
        retarded(m({{0.3}}), m({{0}}), m({{0.5}}), DelayKernel::exponential(Vec::Constant(1, -1.0), 1.0)), 10.0, false);
    return out;
}

}  // namespace battery
