#pragma once

#include <cstdint>
#include <utility>

#include "cpve/control.hpp"
#include "cpve/errors.hpp"
#include "cpve/schedule.hpp"

namespace cpve {

// Z_{n+1} = sum_{i=1}^{phi_n(Z_n)} X_{n,i} with X_{n,i} ~ offspring.law(n) i.i.d.
// and phi drawn fresh from control.law(Z_n) each generation.
struct model_spec {
    offspring_schedule offspring;
    control_family control;
    std::uint64_t initial = 1;

    model_spec(offspring_schedule o, control_family c, std::uint64_t z0)
        : offspring(std::move(o)), control(std::move(c)), initial(z0) {
        validate();
    }

    void validate() const {
        if (initial == 0)
            throw validation_error("model: initial population must be >= 1");
    }

    friend bool operator==(const model_spec& a, const model_spec& b) {
        return a.offspring == b.offspring && a.control == b.control && a.initial == b.initial;
    }
};

} // namespace cpve
