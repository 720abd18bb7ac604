// Largest delay for which x'(t) = -x(t - r) gets a certificate, by bisection
// on r, compared with the exact stability limit pi/2.

#include "cdds/cdds.hpp"

#include <cstdio>
#include <numbers>

namespace {

cdds::CddsModel scalar_delay(double r) {
    cdds::CddsModel s = cdds::make_model(1, 1, 1, 1, cdds::DelayKernel::constant(r));
    s.a2(0, 0) = -1.0;
    s.a4(0, 0) = 1.0;
    s.c1(0, 0) = 1.0;
    s.d1(0, 0) = 1.0;
    return s;
}

bool certified(double r, int theorem) {
    const cdds::CddsModel s = scalar_delay(r);
    const cdds::SupplyRate supply = cdds::supply_hinf(10.0, 1, 1);
    const auto prob = theorem == 1 ? cdds::build_theorem1(s, supply) : cdds::build_theorem2(s, supply);
    return cdds::solve(prob).verdict == cdds::Verdict::feasible;
}

}  // namespace

int main() {
    for (int theorem : {1, 2}) {
        double lo = 0.1;
        double hi = 3.0;
        for (int it = 0; it < 30; ++it) {
            const double mid = 0.5 * (lo + hi);
            (certified(mid, theorem) ? lo : hi) = mid;
        }
        std::printf("theorem %d: certified up to r = %.6f (stability limit %.6f)\n", theorem, lo,
                    std::numbers::pi / 2.0);
    }
    return 0;
}
