#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "cpve/errors.hpp"

namespace cpve {

// Closed-form real sequence a_n = limit + coeff * ratio^n with ratio in [0,1).
// Monotone in n, so its range envelope and limit are exact.
class real_seq {
public:
    static real_seq constant(double c) { return real_seq(c, 0.0, 0.0); }

    static real_seq geometric_approach(double limit, double coeff, double ratio) {
        if (!(ratio >= 0.0 && ratio < 1.0))
            throw validation_error("sequence ratio must lie in [0,1), got " + std::to_string(ratio));
        return real_seq(limit, coeff, ratio);
    }

    double at(std::uint64_t n) const {
        if (coeff_ == 0.0) return limit_;
        return limit_ + coeff_ * std::pow(ratio_, static_cast<double>(n));
    }

    double limit() const { return limit_; }
    double coeff() const { return coeff_; }
    double ratio() const { return ratio_; }
    bool is_constant() const { return coeff_ == 0.0; }

    // exact bounds over all n >= 0
    double lo() const { return std::min(limit_, limit_ + coeff_); }
    double hi() const { return std::max(limit_, limit_ + coeff_); }

    // exact bounds over n >= n0
    double lo_from(std::uint64_t n0) const { return std::min(limit_, at(n0)); }
    double hi_from(std::uint64_t n0) const { return std::max(limit_, at(n0)); }

    friend bool operator==(const real_seq& a, const real_seq& b) {
        return a.limit_ == b.limit_ && a.coeff_ == b.coeff_ && a.ratio_ == b.ratio_;
    }

private:
    real_seq(double limit, double coeff, double ratio)
        : limit_(limit), coeff_(coeff), ratio_(ratio) {}

    double limit_;
    double coeff_;
    double ratio_;
};

} // namespace cpve
