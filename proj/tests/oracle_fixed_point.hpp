#pragma once

// Test-side oracle: smallest fixed point of a pgf on [0,1] by bisection,
// independent of the propagation engine under test. A pgf f is convex with
// f(1) = 1, so f(s) - s has at most one interior sign change; if f(s) >= s on
// all of [0,1) the smallest fixed point is 1.

#include <cmath>
#include <functional>

namespace oracle {

inline double smallest_fixed_point(const std::function<double(double)>& f) {
    double lo = 0.0;
    double hi = 1.0;
    bool interior = false;
    for (int j = 1; j <= 52; ++j) {
        double s = 1.0 - std::ldexp(1.0, -j);
        if (f(s) < s) {
            hi = s;
            interior = true;
            break;
        }
    }
    if (!interior) return 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) - mid >= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace oracle
