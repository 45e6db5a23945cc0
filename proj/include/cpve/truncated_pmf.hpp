#pragma once

#include <cstdint>
#include <vector>

namespace cpve {

// Law of Z_n restricted to a finite window [0, mass.size()).
//
// Two kinds of unlocated mass are carried explicitly and never renormalized:
//   leaked  - trimmed tail mass whose location is unknown (could be anywhere,
//             including 0 later on), so it widens every downstream interval;
//   escaped - mass that crossed the configured top barrier. Its location at
//             crossing time is known to be >= the barrier, which keeps
//             extinction upper bounds useful when a survival certificate for
//             large states is available.
// Invariant: sum(mass) + leaked + escaped stays within 1e-9 of 1.
struct truncated_pmf {
    std::vector<double> mass;
    double leaked = 0.0;
    double escaped = 0.0;
    std::uint64_t generation = 0;

    double mass_at(std::uint64_t k) const {
        return k < mass.size() ? mass[k] : 0.0;
    }
    double mass0() const { return mass.empty() ? 0.0 : mass[0]; }

    double dense_sum() const {
        long double s = 0.0L;
        for (double v : mass) s += v;
        return static_cast<double>(s);
    }
    double total() const {
        return static_cast<double>(static_cast<long double>(dense_sum()) + leaked + escaped);
    }
    // Moments of the located part only; interval widening is the caller's job.
    double dense_mean() const {
        long double s = 0.0L;
        for (std::size_t k = 1; k < mass.size(); ++k)
            s += static_cast<long double>(k) * mass[k];
        return static_cast<double>(s);
    }
    double dense_second() const {
        long double s = 0.0L;
        for (std::size_t k = 1; k < mass.size(); ++k) {
            long double kd = static_cast<long double>(k);
            s += kd * kd * mass[k];
        }
        return static_cast<double>(s);
    }
};

} // namespace cpve
