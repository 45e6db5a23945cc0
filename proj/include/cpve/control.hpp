#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/laws.hpp"

namespace cpve {

enum class control_kind { identity, binomial, poisson_scaled, capped, tabulated_per_k };

inline const char* to_string(control_kind k) {
    switch (k) {
        case control_kind::identity: return "identity";
        case control_kind::binomial: return "binomial";
        case control_kind::poisson_scaled: return "poisson_scaled";
        case control_kind::capped: return "capped";
        case control_kind::tabulated_per_k: return "tabulated_per_k";
    }
    return "?";
}

// Size-dependent control law family k -> phi(k), i.i.d. across generations for
// each k. Closed menu so that E(k) = E[phi(k)], tau^2(k) = Var[phi(k)] and the
// k -> infinity behaviour of E(k)/k all have exact closed forms.
class control_family {
public:
    // phi(k) = k (no control)
    static control_family identity() { return control_family(control_kind::identity); }

    // phi(k) ~ Binomial(k, c): each individual independently kept with prob c
    static control_family binomial(double c) {
        if (!(c >= 0.0 && c <= 1.0))
            throw validation_error("binomial control: c must lie in [0,1], got " +
                                   std::to_string(c));
        control_family f(control_kind::binomial);
        f.c_ = c;
        return f;
    }

    // phi(k) ~ Poisson(lambda * k)
    static control_family poisson_scaled(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw validation_error("poisson_scaled control: lambda must be finite and >= 0, got " +
                                   std::to_string(lambda));
        control_family f(control_kind::poisson_scaled);
        f.lambda_ = lambda;
        return f;
    }

    // phi(k) = min(k, cap)
    static control_family capped(std::uint64_t cap) {
        if (cap == 0) throw validation_error("capped control: cap must be >= 1");
        control_family f(control_kind::capped);
        f.cap_ = cap;
        return f;
    }

    // Explicit laws for k = 0..head.size()-1, a parametric rule beyond.
    static control_family tabulated_per_k(std::vector<integer_law> head, control_family tail) {
        if (head.empty())
            throw validation_error("tabulated_per_k control: head must cover at least k = 0");
        if (tail.kind() == control_kind::tabulated_per_k)
            throw validation_error("tabulated_per_k control: tail rule must be parametric");
        control_family f(control_kind::tabulated_per_k);
        f.head_ = std::move(head);
        f.tail_ = std::make_shared<control_family>(std::move(tail));
        return f;
    }

    control_kind kind() const { return kind_; }
    double binomial_c() const { return c_; }
    double poisson_lambda() const { return lambda_; }
    std::uint64_t cap_value() const { return cap_; }
    const std::vector<integer_law>& head_laws() const { return head_; }
    const control_family& tail_rule() const { return *tail_; }

    integer_law law(std::uint64_t k) const {
        switch (kind_) {
            case control_kind::identity: return integer_law::deterministic(k);
            case control_kind::binomial: return integer_law::binomial(k, c_);
            case control_kind::poisson_scaled:
                return integer_law::poisson(lambda_ * static_cast<double>(k));
            case control_kind::capped: return integer_law::deterministic(std::min(k, cap_));
            case control_kind::tabulated_per_k:
                if (k < head_.size()) return head_[k];
                return tail_->law(k);
        }
        throw internal_error("control_family::law: bad kind");
    }

    // E(k) = E[phi(k)]
    double mean_at(std::uint64_t k) const {
        switch (kind_) {
            case control_kind::identity: return static_cast<double>(k);
            case control_kind::binomial: return c_ * static_cast<double>(k);
            case control_kind::poisson_scaled: return lambda_ * static_cast<double>(k);
            case control_kind::capped: return static_cast<double>(std::min(k, cap_));
            case control_kind::tabulated_per_k:
                if (k < head_.size()) return head_[k].mean();
                return tail_->mean_at(k);
        }
        return 0.0;
    }

    // tau^2(k) = Var[phi(k)]
    double var_at(std::uint64_t k) const {
        switch (kind_) {
            case control_kind::identity: return 0.0;
            case control_kind::binomial: return c_ * (1.0 - c_) * static_cast<double>(k);
            case control_kind::poisson_scaled: return lambda_ * static_cast<double>(k);
            case control_kind::capped: return 0.0;
            case control_kind::tabulated_per_k:
                if (k < head_.size()) return head_[k].variance();
                return tail_->var_at(k);
        }
        return 0.0;
    }

    // d^2(k) = E[phi(k)^2]
    double second_at(std::uint64_t k) const {
        double m = mean_at(k);
        return var_at(k) + m * m;
    }

    // g_k(s) = E[s^phi(k)]
    double pgf_at(std::uint64_t k, double s) const {
        switch (kind_) {
            case control_kind::identity: return std::pow(s, static_cast<double>(k));
            case control_kind::binomial:
                return std::pow(1.0 - c_ + c_ * s, static_cast<double>(k));
            case control_kind::poisson_scaled:
                return std::exp(-lambda_ * static_cast<double>(k) * (1.0 - s));
            case control_kind::capped:
                return std::pow(s, static_cast<double>(std::min(k, cap_)));
            case control_kind::tabulated_per_k:
                if (k < head_.size()) return head_[k].pgf(s);
                return tail_->pgf_at(k, s);
        }
        return 0.0;
    }

    std::uint64_t sample_at(std::uint64_t k, rng_stream& g) const {
        switch (kind_) {
            case control_kind::identity: return k;
            case control_kind::binomial:
                if (k == 0 || c_ == 0.0) return 0;
                if (c_ == 1.0) return k;
                return std::binomial_distribution<std::uint64_t>(k, c_)(g);
            case control_kind::poisson_scaled: {
                double l = lambda_ * static_cast<double>(k);
                if (l == 0.0) return 0;
                return std::poisson_distribution<std::uint64_t>(l)(g);
            }
            case control_kind::capped: return std::min(k, cap_);
            case control_kind::tabulated_per_k:
                if (k < head_.size()) return head_[k].sample(g);
                return tail_->sample_at(k, g);
        }
        return 0;
    }

    // P(phi(0) = 0) == 1
    bool zero_absorbing() const {
        if (kind_ == control_kind::tabulated_per_k)
            return head_[0].kind() == law_kind::deterministic &&
                   head_[0].deterministic_value() == 0;
        return true;
    }

    // ---- exact asymptotics of the ratio E(k)/k over k >= 1 ----

    double ratio_at(std::uint64_t k) const {
        return mean_at(k) / static_cast<double>(k);
    }

    // lim_{k->inf} E(k)/k; exists for the whole menu
    double ratio_limit() const {
        switch (kind_) {
            case control_kind::identity: return 1.0;
            case control_kind::binomial: return c_;
            case control_kind::poisson_scaled: return lambda_;
            case control_kind::capped: return 0.0;
            case control_kind::tabulated_per_k: return tail_->ratio_limit();
        }
        return 0.0;
    }

    double ratio_limsup() const { return ratio_limit(); }

    // inf over k >= 1
    double ratio_inf() const {
        switch (kind_) {
            case control_kind::identity: return 1.0;
            case control_kind::binomial: return c_;
            case control_kind::poisson_scaled: return lambda_;
            case control_kind::capped: return 0.0; // min(k,M)/k -> 0
            case control_kind::tabulated_per_k: {
                double r = tail_ratio_inf_beyond(head_size_k());
                for (std::uint64_t k = 1; k < head_.size(); ++k)
                    r = std::min(r, ratio_at(k));
                return r;
            }
        }
        return 0.0;
    }

    // sup over k >= 1 (the constant named a in the second-moment conditions)
    double ratio_sup() const {
        switch (kind_) {
            case control_kind::identity: return 1.0;
            case control_kind::binomial: return c_;
            case control_kind::poisson_scaled: return lambda_;
            case control_kind::capped: return 1.0; // attained at k <= M
            case control_kind::tabulated_per_k: {
                double r = tail_ratio_sup_beyond(head_size_k());
                for (std::uint64_t k = 1; k < head_.size(); ++k)
                    r = std::max(r, ratio_at(k));
                return r;
            }
        }
        return 0.0;
    }

    bool ratio_nondecreasing() const {
        switch (kind_) {
            case control_kind::identity:
            case control_kind::binomial:
            case control_kind::poisson_scaled:
                return true; // constant ratio
            case control_kind::capped:
                return false; // min(k,M)/k decays past M
            case control_kind::tabulated_per_k: {
                if (!tail_ratio_nondecreasing_beyond(head_size_k())) return false;
                double prev = 0.0;
                bool have_prev = false;
                for (std::uint64_t k = 1; k < head_.size(); ++k) {
                    double r = ratio_at(k);
                    if (have_prev && r < prev - 1e-15) return false;
                    prev = r;
                    have_prev = true;
                }
                if (have_prev && tail_ratio_inf_beyond(head_size_k()) < prev - 1e-15) return false;
                return true;
            }
        }
        return false;
    }

    // sup over k >= 1 of tau^2(k)/k (the constant named b)
    double var_over_k_sup() const {
        switch (kind_) {
            case control_kind::identity: return 0.0;
            case control_kind::binomial: return c_ * (1.0 - c_);
            case control_kind::poisson_scaled: return lambda_;
            case control_kind::capped: return 0.0;
            case control_kind::tabulated_per_k: {
                double r = tail_->var_over_k_sup();
                for (std::uint64_t k = 1; k < head_.size(); ++k)
                    r = std::max(r, head_[k].variance() / static_cast<double>(k));
                return r;
            }
        }
        return 0.0;
    }

    // sup over k >= 1 of d^2(k)/k^2
    double d2_over_k2_sup() const {
        switch (kind_) {
            case control_kind::identity: return 1.0;
            case control_kind::binomial: return c_ * c_ + c_ * (1.0 - c_); // peak at k = 1
            case control_kind::poisson_scaled: return lambda_ * lambda_ + lambda_;
            case control_kind::capped: return 1.0;
            case control_kind::tabulated_per_k: {
                double r = tail_d2_sup_beyond(head_size_k());
                for (std::uint64_t k = 1; k < head_.size(); ++k) {
                    double kd = static_cast<double>(k);
                    r = std::max(r, second_at(k) / (kd * kd));
                }
                return r;
            }
        }
        return 0.0;
    }

    // is k^{-2} tau^2(k) non-increasing over k >= 1
    bool var_over_k2_nonincreasing() const {
        switch (kind_) {
            case control_kind::identity:
            case control_kind::capped:
                return true; // identically 0
            case control_kind::binomial:
            case control_kind::poisson_scaled:
                return true; // slope/k
            case control_kind::tabulated_per_k: {
                double prev = 0.0;
                bool have_prev = false;
                for (std::uint64_t k = 1; k < head_.size(); ++k) {
                    double kd = static_cast<double>(k);
                    double r = head_[k].variance() / (kd * kd);
                    if (have_prev && r > prev + 1e-15) return false;
                    prev = r;
                    have_prev = true;
                }
                std::uint64_t k0 = head_size_k();
                double kd = static_cast<double>(k0);
                double tail_first = tail_->var_at(k0) / (kd * kd);
                if (have_prev && tail_first > prev + 1e-15) return false;
                return true; // parametric tails are slope/k or 0 beyond
            }
        }
        return false;
    }

    // inf over k >= 1 of g_k(u) for u in [0,1]
    double gk_inf(double u) const {
        switch (kind_) {
            case control_kind::identity:
                return u < 1.0 ? 0.0 : 1.0;
            case control_kind::binomial: {
                double base = 1.0 - c_ + c_ * u;
                return base < 1.0 ? 0.0 : 1.0;
            }
            case control_kind::poisson_scaled:
                return (lambda_ > 0.0 && u < 1.0) ? 0.0 : 1.0;
            case control_kind::capped:
                return std::pow(u, static_cast<double>(cap_));
            case control_kind::tabulated_per_k: {
                double r = tail_gk_inf_beyond(head_size_k(), u);
                for (std::uint64_t k = 1; k < head_.size(); ++k)
                    r = std::min(r, head_[k].pgf(u));
                return r;
            }
        }
        return 0.0;
    }

    // g_k(s) = base(s)^k; the branching property then survives the control.
    bool multiplicative() const {
        return kind_ == control_kind::identity || kind_ == control_kind::binomial ||
               kind_ == control_kind::poisson_scaled;
    }
    // E(k) = c k for multiplicative kinds
    double mult_ratio() const {
        switch (kind_) {
            case control_kind::identity: return 1.0;
            case control_kind::binomial: return c_;
            case control_kind::poisson_scaled: return lambda_;
            default: throw internal_error("mult_ratio on a non-multiplicative control");
        }
    }
    // tau^2(k) = t k for multiplicative kinds
    double mult_var_slope() const {
        switch (kind_) {
            case control_kind::identity: return 0.0;
            case control_kind::binomial: return c_ * (1.0 - c_);
            case control_kind::poisson_scaled: return lambda_;
            default: throw internal_error("mult_var_slope on a non-multiplicative control");
        }
    }

    // delta_k = tau - E(k)/k vanishes for k >= the returned index (if any)
    std::optional<std::uint64_t> delta_zero_from() const {
        switch (kind_) {
            case control_kind::identity:
            case control_kind::binomial:
            case control_kind::poisson_scaled:
                return 1;
            case control_kind::capped:
                return std::nullopt; // ratio -> 0, tau = 0
            case control_kind::tabulated_per_k:
                if (!tail_->multiplicative()) return std::nullopt;
                return head_size_k();
        }
        return std::nullopt;
    }

    // tau^2(k) = t k for all k >= the returned index, with slope t
    std::optional<std::pair<std::uint64_t, double>> var_linear_from() const {
        switch (kind_) {
            case control_kind::identity: return std::make_pair(std::uint64_t{1}, 0.0);
            case control_kind::binomial: return std::make_pair(std::uint64_t{1}, c_ * (1.0 - c_));
            case control_kind::poisson_scaled: return std::make_pair(std::uint64_t{1}, lambda_);
            case control_kind::capped: return std::make_pair(std::uint64_t{1}, 0.0);
            case control_kind::tabulated_per_k: {
                auto t = tail_->var_linear_from();
                if (!t) return std::nullopt;
                return std::make_pair(head_size_k(), t->second);
            }
        }
        return std::nullopt;
    }

    friend bool operator==(const control_family& a, const control_family& b) {
        if (a.kind_ != b.kind_) return false;
        switch (a.kind_) {
            case control_kind::identity: return true;
            case control_kind::binomial: return a.c_ == b.c_;
            case control_kind::poisson_scaled: return a.lambda_ == b.lambda_;
            case control_kind::capped: return a.cap_ == b.cap_;
            case control_kind::tabulated_per_k:
                return a.head_ == b.head_ && *a.tail_ == *b.tail_;
        }
        return false;
    }

private:
    explicit control_family(control_kind k) : kind_(k) {}

    std::uint64_t head_size_k() const { return static_cast<std::uint64_t>(head_.size()); }

    // ratio bounds of the parametric tail restricted to k >= k0 (k0 >= 1)
    double tail_ratio_inf_beyond(std::uint64_t k0) const {
        if (tail_->kind() == control_kind::capped) return 0.0;
        return tail_->ratio_limit();
    }
    double tail_ratio_sup_beyond(std::uint64_t k0) const {
        if (tail_->kind() == control_kind::capped) {
            std::uint64_t m = tail_->cap_;
            if (m >= k0) return 1.0;
            return static_cast<double>(m) / static_cast<double>(k0);
        }
        return tail_->ratio_limit();
    }
    bool tail_ratio_nondecreasing_beyond(std::uint64_t k0) const {
        if (tail_->kind() == control_kind::capped) return false;
        return true;
    }
    double tail_d2_sup_beyond(std::uint64_t k0) const {
        switch (tail_->kind()) {
            case control_kind::identity: return 1.0;
            case control_kind::binomial: {
                double c = tail_->c_;
                return c * c + c * (1.0 - c) / static_cast<double>(k0);
            }
            case control_kind::poisson_scaled: {
                double l = tail_->lambda_;
                return l * l + l / static_cast<double>(k0);
            }
            case control_kind::capped: {
                double m = static_cast<double>(tail_->cap_);
                double kd = static_cast<double>(k0);
                return m >= kd ? 1.0 : (m * m) / (kd * kd);
            }
            default: throw internal_error("nested tabulated tail");
        }
    }
    double tail_gk_inf_beyond(std::uint64_t k0, double u) const {
        switch (tail_->kind()) {
            case control_kind::identity:
                return u < 1.0 ? 0.0 : 1.0;
            case control_kind::binomial: {
                double base = 1.0 - tail_->c_ + tail_->c_ * u;
                return base < 1.0 ? 0.0 : 1.0;
            }
            case control_kind::poisson_scaled:
                return (tail_->lambda_ > 0.0 && u < 1.0) ? 0.0 : 1.0;
            case control_kind::capped:
                return std::pow(u, static_cast<double>(tail_->cap_));
            default: throw internal_error("nested tabulated tail");
        }
    }

    control_kind kind_;
    double c_ = 0.0;
    double lambda_ = 0.0;
    std::uint64_t cap_ = 0;
    std::vector<integer_law> head_;
    std::shared_ptr<const control_family> tail_;
};

} // namespace cpve
