#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/laws.hpp"
#include "cpve/sequences.hpp"

namespace cpve {

enum class schedule_kind { explicit_with_tail, geometric_seq };

// Closed interval bound on a scalar sequence, valid for every index >= the
// queried start. Exact for this menu (tails are constant laws or monotone
// parameter sequences).
struct seq_bounds {
    double lo = 0.0;
    double hi = 0.0;
};

// Generation-dependent offspring law n -> law(n). Two shapes:
//  - explicit head laws for n < head.size(), a constant tail law beyond;
//  - Geometric(alpha_n) with alpha_n a closed-form monotone sequence.
// Both have exact limits, so criteria that need liminf/limsup are conclusive.
class offspring_schedule {
public:
    static offspring_schedule constant(integer_law law) {
        return explicit_with_tail({}, std::move(law));
    }

    static offspring_schedule explicit_with_tail(std::vector<integer_law> head,
                                                 integer_law tail) {
        offspring_schedule s;
        s.kind_ = schedule_kind::explicit_with_tail;
        s.head_ = std::move(head);
        s.tail_.push_back(std::move(tail));
        return s;
    }

    static offspring_schedule geometric_seq(real_seq alpha) {
        if (!(alpha.lo() > 0.0 && alpha.hi() < 1.0))
            throw validation_error(
                "geometric offspring sequence: alpha_n must stay in (0,1); range is [" +
                std::to_string(alpha.lo()) + ", " + std::to_string(alpha.hi()) + "]");
        offspring_schedule s;
        s.kind_ = schedule_kind::geometric_seq;
        s.alpha_ = alpha;
        return s;
    }

    schedule_kind kind() const { return kind_; }

    integer_law law(std::uint64_t n) const {
        if (kind_ == schedule_kind::explicit_with_tail) {
            if (n < head_.size()) return head_[n];
            return tail_.front();
        }
        return integer_law::geometric(alpha_->at(n));
    }

    double mean(std::uint64_t n) const {
        if (kind_ == schedule_kind::geometric_seq) {
            double a = alpha_->at(n);
            return a / (1.0 - a);
        }
        return law(n).mean();
    }

    double variance(std::uint64_t n) const {
        if (kind_ == schedule_kind::geometric_seq) {
            double a = alpha_->at(n);
            return a / ((1.0 - a) * (1.0 - a));
        }
        return law(n).variance();
    }

    double pmf0(std::uint64_t n) const {
        if (kind_ == schedule_kind::geometric_seq) return 1.0 - alpha_->at(n);
        return law(n).pmf(0);
    }

    double pgf(std::uint64_t n, double s) const { return law(n).pgf(s); }

    // Index from which the per-generation law is the constant tail (exact for
    // explicit schedules; for parametric ones the parameters keep moving, so
    // only the envelope queries below apply).
    std::uint64_t head_length() const {
        return kind_ == schedule_kind::explicit_with_tail ? head_.size() : 0;
    }
    bool eventually_constant() const { return kind_ == schedule_kind::explicit_with_tail; }

    double mean_limit() const {
        if (kind_ == schedule_kind::geometric_seq) {
            double a = alpha_->limit();
            return a / (1.0 - a);
        }
        return tail_.front().mean();
    }
    double variance_limit() const {
        if (kind_ == schedule_kind::geometric_seq) {
            double a = alpha_->limit();
            return a / ((1.0 - a) * (1.0 - a));
        }
        return tail_.front().variance();
    }
    double pmf0_limit() const {
        if (kind_ == schedule_kind::geometric_seq) return 1.0 - alpha_->limit();
        return tail_.front().pmf(0);
    }

    // liminf/limsup of m_n coincide with the limit for this menu
    double mean_liminf() const { return mean_limit(); }
    double mean_limsup() const { return mean_limit(); }
    double pmf0_liminf() const { return pmf0_limit(); }

    seq_bounds mean_bounds_from(std::uint64_t n0) const {
        return bounds_from(n0, [this](std::uint64_t n) { return mean(n); },
                           mean_limit());
    }
    seq_bounds variance_bounds_from(std::uint64_t n0) const {
        return bounds_from(n0, [this](std::uint64_t n) { return variance(n); },
                           variance_limit());
    }
    // sup/inf of sigma_n^2 / m_n^2 from n0 on (geometric case: equals 1/alpha_n)
    seq_bounds var_over_mean2_bounds_from(std::uint64_t n0) const {
        if (kind_ == schedule_kind::geometric_seq) {
            double a_lo = alpha_->lo_from(n0), a_hi = alpha_->hi_from(n0);
            return {1.0 / a_hi, 1.0 / a_lo};
        }
        seq_bounds b{0.0, 0.0};
        bool first = true;
        auto upd = [&](double m, double v) {
            double r = m > 0.0 ? v / (m * m) : 0.0;
            if (first) { b = {r, r}; first = false; }
            else { b.lo = std::min(b.lo, r); b.hi = std::max(b.hi, r); }
        };
        for (std::uint64_t n = n0; n < head_.size(); ++n) upd(mean(n), variance(n));
        upd(tail_.front().mean(), tail_.front().variance());
        return b;
    }

    friend bool operator==(const offspring_schedule& a, const offspring_schedule& b) {
        if (a.kind_ != b.kind_) return false;
        if (a.kind_ == schedule_kind::geometric_seq) return *a.alpha_ == *b.alpha_;
        return a.head_ == b.head_ && a.tail_ == b.tail_;
    }

    // representation accessors for serialization
    const std::vector<integer_law>& head_laws() const { return head_; }
    const integer_law& tail_law() const { return tail_.front(); }
    const real_seq& alpha_seq() const { return *alpha_; }

private:
    offspring_schedule() = default;

    template <typename F>
    seq_bounds bounds_from(std::uint64_t n0, F value, double limit) const {
        if (kind_ == schedule_kind::geometric_seq) {
            // all tracked scalars are monotone images of the monotone alpha_n
            double v0 = value(n0);
            return {std::min(v0, limit), std::max(v0, limit)};
        }
        seq_bounds b{limit, limit};
        for (std::uint64_t n = n0; n < head_.size(); ++n) {
            double v = value(n);
            b.lo = std::min(b.lo, v);
            b.hi = std::max(b.hi, v);
        }
        return b;
    }

    schedule_kind kind_ = schedule_kind::explicit_with_tail;
    std::vector<integer_law> head_;
    std::vector<integer_law> tail_;   // single element; vector dodges a default-ctor need
    std::optional<real_seq> alpha_;
};

} // namespace cpve
