#pragma once

// Shared model builders for the test suite. The same four models ship as
// config files under fixtures/.

#include "cpve/model.hpp"

namespace fixtures {

// supercritical, mean 1.25, extinction probability exactly 1/2
inline cpve::model_spec gw_supercritical() {
    return cpve::model_spec(
        cpve::offspring_schedule::constant(
            cpve::integer_law::tabulated({{0, 0.25}, {1, 0.25}, {2, 0.5}})),
        cpve::control_family::identity(), 1);
}

// binomial thinning c = 1/2 over a supercritical law; per-line pgf
// h(s) = 0.55 + 0.05 s + 0.4 s^3
inline cpve::model_spec thinned_supercritical() {
    return cpve::model_spec(
        cpve::offspring_schedule::constant(
            cpve::integer_law::tabulated({{0, 0.1}, {1, 0.1}, {3, 0.8}})),
        cpve::control_family::binomial(0.5), 1);
}

// subcritical, mean 2/3: dies out almost surely
inline cpve::model_spec subcritical_geometric() {
    return cpve::model_spec(
        cpve::offspring_schedule::constant(cpve::integer_law::geometric(0.4)),
        cpve::control_family::identity(), 1);
}

// supercritical offspring (mean 1.5) strangled by a cap of 5 progenitors
inline cpve::model_spec capped_supercritical() {
    return cpve::model_spec(
        cpve::offspring_schedule::constant(cpve::integer_law::geometric(0.6)),
        cpve::control_family::capped(5), 1);
}

} // namespace fixtures
