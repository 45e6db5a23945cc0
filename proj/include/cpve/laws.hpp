#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/rng.hpp"

namespace cpve {

enum class law_kind { tabulated, geometric, poisson, binomial, deterministic };

inline const char* to_string(law_kind k) {
    switch (k) {
        case law_kind::tabulated: return "tabulated";
        case law_kind::geometric: return "geometric";
        case law_kind::poisson: return "poisson";
        case law_kind::binomial: return "binomial";
        case law_kind::deterministic: return "deterministic";
    }
    return "?";
}

// Prefix truncation of a law on {0,1,2,...}: pmf[j] = P(X=j) for j < pmf.size(),
// leaked = mass of the complement. Leaked mass is carried, never renormalized.
struct truncated_law {
    std::vector<double> pmf;
    double leaked = 0.0;
};

namespace detail {

// Largest prefix vector a single truncation may allocate.
inline constexpr std::uint64_t truncation_state_budget = 1ull << 26;

inline double stable_residual(const std::vector<double>& pmf) {
    long double s = 0.0L;
    for (double v : pmf) s += v;
    long double r = 1.0L - s;
    return r > 0.0L ? static_cast<double>(r) : 0.0;
}

inline truncated_law geometric_prefix(double alpha, double eps) {
    if (eps <= 0.0)
        throw budget_error("geometric law has infinite support; truncation eps must be positive");
    // tail beyond {0..J} is alpha^(J+1)
    double est = std::log(eps) / std::log(alpha) - 1.0;
    std::uint64_t J = est > 0 ? static_cast<std::uint64_t>(est) : 0;
    while (std::pow(alpha, static_cast<double>(J + 1)) > eps) ++J;
    while (J > 0 && std::pow(alpha, static_cast<double>(J)) <= eps) --J;
    if (J + 1 > truncation_state_budget)
        throw budget_error("geometric truncation needs " + std::to_string(J + 1) +
                           " states, over the truncation budget");
    truncated_law out;
    out.pmf.resize(J + 1);
    double p = 1.0 - alpha;
    for (std::uint64_t j = 0; j <= J; ++j) {
        out.pmf[j] = p;
        p *= alpha;
    }
    out.leaked = stable_residual(out.pmf);
    return out;
}

inline truncated_law poisson_prefix(double lambda, double eps) {
    if (lambda == 0.0) return truncated_law{{1.0}, 0.0};
    if (eps <= 0.0)
        throw budget_error("poisson law has infinite support; truncation eps must be positive");
    if (lambda > 1e7)
        throw budget_error("poisson truncation with mean " + std::to_string(lambda) +
                           " is over the truncation budget");
    truncated_law out;
    long double cum = 0.0L;
    const long double target = 1.0L - static_cast<long double>(eps);
    const bool log_space = lambda > 600.0;
    const double loglam = std::log(lambda);
    double p = log_space ? 0.0 : std::exp(-lambda);
    for (std::uint64_t j = 0;; ++j) {
        double pj;
        if (log_space) {
            pj = std::exp(-lambda + static_cast<double>(j) * loglam -
                          std::lgamma(static_cast<double>(j) + 1.0));
        } else {
            pj = p;
            p *= lambda / static_cast<double>(j + 1);
        }
        out.pmf.push_back(pj);
        cum += pj;
        if (cum >= target && static_cast<double>(j) > lambda) break;
        if (out.pmf.size() > truncation_state_budget)
            throw budget_error("poisson truncation exceeded the truncation budget");
    }
    out.leaked = stable_residual(out.pmf);
    return out;
}

inline truncated_law binomial_prefix(std::uint64_t trials, double prob, double eps) {
    if (trials == 0 || prob == 0.0) return truncated_law{{1.0}, 0.0};
    if (prob == 1.0) {
        if (trials + 1 > truncation_state_budget)
            throw budget_error("binomial truncation exceeds the truncation budget");
        truncated_law out;
        out.pmf.assign(trials + 1, 0.0);
        out.pmf[trials] = 1.0;
        return out;
    }
    const double n = static_cast<double>(trials);
    const double log_q = std::log1p(-prob);
    const bool log_space = n * log_q < -700.0;
    const double log_p = std::log(prob);
    const double lg_n1 = std::lgamma(n + 1.0);
    truncated_law out;
    long double cum = 0.0L;
    const long double target = 1.0L - static_cast<long double>(eps);
    double p = log_space ? 0.0 : std::exp(n * log_q);
    for (std::uint64_t j = 0; j <= trials; ++j) {
        double pj;
        const double jd = static_cast<double>(j);
        if (log_space) {
            pj = std::exp(lg_n1 - std::lgamma(jd + 1.0) - std::lgamma(n - jd + 1.0) +
                          jd * log_p + (n - jd) * log_q);
        } else {
            pj = p;
            p *= (n - jd) / (jd + 1.0) * (prob / (1.0 - prob));
        }
        out.pmf.push_back(pj);
        cum += pj;
        if (cum >= target && jd >= n * prob) break;
        if (out.pmf.size() > truncation_state_budget)
            throw budget_error("binomial truncation exceeded the truncation budget");
    }
    out.leaked = stable_residual(out.pmf);
    return out;
}

} // namespace detail

// Offspring and control laws are drawn from a closed menu of integer laws on
// {0,1,2,...}. Values are immutable after construction.
class integer_law {
public:
    static integer_law tabulated(std::vector<std::pair<std::uint64_t, double>> entries) {
        if (entries.empty()) throw validation_error("tabulated law: empty pmf");
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        tabulated_t t;
        long double sum = 0.0L;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (i > 0 && entries[i].first == entries[i - 1].first)
                throw validation_error("tabulated law: duplicate value " +
                                       std::to_string(entries[i].first));
            if (!(entries[i].second >= 0.0))
                throw validation_error("tabulated law: negative probability at value " +
                                       std::to_string(entries[i].first));
            t.values.push_back(entries[i].first);
            t.probs.push_back(entries[i].second);
            sum += entries[i].second;
        }
        if (std::abs(static_cast<double>(sum - 1.0L)) > 1e-12)
            throw validation_error("tabulated law: pmf sums to " +
                                   std::to_string(static_cast<double>(sum)) +
                                   ", expected 1 within 1e-12");
        t.cum.resize(t.probs.size());
        long double c = 0.0L;
        for (std::size_t i = 0; i < t.probs.size(); ++i) {
            c += t.probs[i];
            t.cum[i] = static_cast<double>(c);
        }
        t.cum.back() = 1.0;
        return integer_law(std::move(t));
    }

    // P(X=j) = (1-alpha) alpha^j, mean alpha/(1-alpha)
    static integer_law geometric(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw validation_error("geometric law: alpha must lie in (0,1), got " +
                                   std::to_string(alpha));
        return integer_law(geometric_t{alpha});
    }

    static integer_law poisson(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw validation_error("poisson law: lambda must be finite and >= 0, got " +
                                   std::to_string(lambda));
        return integer_law(poisson_t{lambda});
    }

    static integer_law binomial(std::uint64_t trials, double p) {
        if (!(p >= 0.0 && p <= 1.0))
            throw validation_error("binomial law: p must lie in [0,1], got " + std::to_string(p));
        return integer_law(binomial_t{trials, p});
    }

    static integer_law deterministic(std::uint64_t value) {
        return integer_law(deterministic_t{value});
    }

    law_kind kind() const { return static_cast<law_kind>(rep_.index()); }

    double pmf(std::uint64_t j) const {
        switch (kind()) {
            case law_kind::tabulated: {
                const auto& t = std::get<tabulated_t>(rep_);
                auto it = std::lower_bound(t.values.begin(), t.values.end(), j);
                if (it == t.values.end() || *it != j) return 0.0;
                return t.probs[static_cast<std::size_t>(it - t.values.begin())];
            }
            case law_kind::geometric: {
                double a = std::get<geometric_t>(rep_).alpha;
                return (1.0 - a) * std::pow(a, static_cast<double>(j));
            }
            case law_kind::poisson: {
                double l = std::get<poisson_t>(rep_).lambda;
                if (l == 0.0) return j == 0 ? 1.0 : 0.0;
                return std::exp(-l + static_cast<double>(j) * std::log(l) -
                                std::lgamma(static_cast<double>(j) + 1.0));
            }
            case law_kind::binomial: {
                const auto& b = std::get<binomial_t>(rep_);
                if (j > b.trials) return 0.0;
                if (b.p == 0.0) return j == 0 ? 1.0 : 0.0;
                if (b.p == 1.0) return j == b.trials ? 1.0 : 0.0;
                double n = static_cast<double>(b.trials), jd = static_cast<double>(j);
                return std::exp(std::lgamma(n + 1.0) - std::lgamma(jd + 1.0) -
                                std::lgamma(n - jd + 1.0) + jd * std::log(b.p) +
                                (n - jd) * std::log1p(-b.p));
            }
            case law_kind::deterministic:
                return j == std::get<deterministic_t>(rep_).value ? 1.0 : 0.0;
        }
        return 0.0;
    }

    double mean() const {
        switch (kind()) {
            case law_kind::tabulated: {
                const auto& t = std::get<tabulated_t>(rep_);
                long double m = 0.0L;
                for (std::size_t i = 0; i < t.values.size(); ++i)
                    m += static_cast<long double>(t.values[i]) * t.probs[i];
                return static_cast<double>(m);
            }
            case law_kind::geometric: {
                double a = std::get<geometric_t>(rep_).alpha;
                return a / (1.0 - a);
            }
            case law_kind::poisson: return std::get<poisson_t>(rep_).lambda;
            case law_kind::binomial: {
                const auto& b = std::get<binomial_t>(rep_);
                return static_cast<double>(b.trials) * b.p;
            }
            case law_kind::deterministic:
                return static_cast<double>(std::get<deterministic_t>(rep_).value);
        }
        return 0.0;
    }

    double variance() const {
        switch (kind()) {
            case law_kind::tabulated:
                return second_moment() - mean() * mean();
            case law_kind::geometric: {
                double a = std::get<geometric_t>(rep_).alpha;
                return a / ((1.0 - a) * (1.0 - a));
            }
            case law_kind::poisson: return std::get<poisson_t>(rep_).lambda;
            case law_kind::binomial: {
                const auto& b = std::get<binomial_t>(rep_);
                return static_cast<double>(b.trials) * b.p * (1.0 - b.p);
            }
            case law_kind::deterministic: return 0.0;
        }
        return 0.0;
    }

    double second_moment() const {
        if (kind() == law_kind::tabulated) {
            const auto& t = std::get<tabulated_t>(rep_);
            long double m2 = 0.0L;
            for (std::size_t i = 0; i < t.values.size(); ++i) {
                long double v = static_cast<long double>(t.values[i]);
                m2 += v * v * t.probs[i];
            }
            return static_cast<double>(m2);
        }
        double m = mean();
        return variance() + m * m;
    }

    // E[s^X] for s in [0,1]
    double pgf(double s) const {
        if (!(s >= 0.0 && s <= 1.0))
            throw validation_error("pgf argument must lie in [0,1], got " + std::to_string(s));
        switch (kind()) {
            case law_kind::tabulated: {
                const auto& t = std::get<tabulated_t>(rep_);
                long double acc = 0.0L;
                for (std::size_t i = 0; i < t.values.size(); ++i)
                    acc += t.probs[i] * std::pow(s, static_cast<double>(t.values[i]));
                return static_cast<double>(acc);
            }
            case law_kind::geometric: {
                double a = std::get<geometric_t>(rep_).alpha;
                return (1.0 - a) / (1.0 - a * s);
            }
            case law_kind::poisson:
                return std::exp(-std::get<poisson_t>(rep_).lambda * (1.0 - s));
            case law_kind::binomial: {
                const auto& b = std::get<binomial_t>(rep_);
                return std::pow(1.0 - b.p + b.p * s, static_cast<double>(b.trials));
            }
            case law_kind::deterministic:
                return std::pow(s, static_cast<double>(std::get<deterministic_t>(rep_).value));
        }
        return 0.0;
    }

    // Exact draw; no truncation. Deterministic laws consume no generator state.
    std::uint64_t sample(rng_stream& g) const {
        switch (kind()) {
            case law_kind::tabulated: {
                const auto& t = std::get<tabulated_t>(rep_);
                double u = std::uniform_real_distribution<double>(0.0, 1.0)(g);
                auto it = std::upper_bound(t.cum.begin(), t.cum.end(), u);
                if (it == t.cum.end()) --it;
                return t.values[static_cast<std::size_t>(it - t.cum.begin())];
            }
            case law_kind::geometric: {
                double a = std::get<geometric_t>(rep_).alpha;
                return std::geometric_distribution<std::uint64_t>(1.0 - a)(g);
            }
            case law_kind::poisson: {
                double l = std::get<poisson_t>(rep_).lambda;
                if (l == 0.0) return 0;
                return std::poisson_distribution<std::uint64_t>(l)(g);
            }
            case law_kind::binomial: {
                const auto& b = std::get<binomial_t>(rep_);
                if (b.trials == 0 || b.p == 0.0) return 0;
                if (b.p == 1.0) return b.trials;
                return std::binomial_distribution<std::uint64_t>(b.trials, b.p)(g);
            }
            case law_kind::deterministic:
                return std::get<deterministic_t>(rep_).value;
        }
        return 0;
    }

    // Smallest prefix {0..J} whose complement mass is <= eps.
    truncated_law truncate(double eps) const {
        if (!(eps > 0.0 && eps < 1.0))
            throw validation_error("truncation eps must lie in (0,1), got " + std::to_string(eps));
        switch (kind()) {
            case law_kind::tabulated: {
                // already finite: kept verbatim, nothing leaks
                const auto& t = std::get<tabulated_t>(rep_);
                std::uint64_t top = t.values.back();
                if (top + 1 > detail::truncation_state_budget)
                    throw budget_error("tabulated law needs " + std::to_string(top + 1) +
                                       " states, over the truncation budget");
                truncated_law out;
                out.pmf.assign(top + 1, 0.0);
                for (std::size_t i = 0; i < t.values.size(); ++i)
                    out.pmf[t.values[i]] = t.probs[i];
                return out;
            }
            case law_kind::geometric:
                return detail::geometric_prefix(std::get<geometric_t>(rep_).alpha, eps);
            case law_kind::poisson:
                return detail::poisson_prefix(std::get<poisson_t>(rep_).lambda, eps);
            case law_kind::binomial: {
                const auto& b = std::get<binomial_t>(rep_);
                return detail::binomial_prefix(b.trials, b.p, eps);
            }
            case law_kind::deterministic: {
                std::uint64_t v = std::get<deterministic_t>(rep_).value;
                if (v + 1 > detail::truncation_state_budget)
                    throw budget_error("deterministic law at " + std::to_string(v) +
                                       " is over the truncation budget");
                truncated_law out;
                out.pmf.assign(v + 1, 0.0);
                out.pmf[v] = 1.0;
                return out;
            }
        }
        return {};
    }

    // Parameter accessors (valid only for the matching kind).
    double geometric_alpha() const { return std::get<geometric_t>(rep_).alpha; }
    double poisson_lambda() const { return std::get<poisson_t>(rep_).lambda; }
    std::uint64_t binomial_trials() const { return std::get<binomial_t>(rep_).trials; }
    double binomial_p() const { return std::get<binomial_t>(rep_).p; }
    std::uint64_t deterministic_value() const { return std::get<deterministic_t>(rep_).value; }
    const std::vector<std::uint64_t>& tabulated_values() const {
        return std::get<tabulated_t>(rep_).values;
    }
    const std::vector<double>& tabulated_probs() const { return std::get<tabulated_t>(rep_).probs; }

    friend bool operator==(const integer_law& a, const integer_law& b) {
        if (a.kind() != b.kind()) return false;
        switch (a.kind()) {
            case law_kind::tabulated:
                return a.tabulated_values() == b.tabulated_values() &&
                       a.tabulated_probs() == b.tabulated_probs();
            case law_kind::geometric: return a.geometric_alpha() == b.geometric_alpha();
            case law_kind::poisson: return a.poisson_lambda() == b.poisson_lambda();
            case law_kind::binomial:
                return a.binomial_trials() == b.binomial_trials() && a.binomial_p() == b.binomial_p();
            case law_kind::deterministic:
                return a.deterministic_value() == b.deterministic_value();
        }
        return false;
    }

private:
    struct tabulated_t {
        std::vector<std::uint64_t> values;
        std::vector<double> probs;
        std::vector<double> cum; // inclusive cumulative, for inverse-cdf sampling
    };
    struct geometric_t { double alpha; };
    struct poisson_t { double lambda; };
    struct binomial_t { std::uint64_t trials; double p; };
    struct deterministic_t { std::uint64_t value; };

    using rep_t =
        std::variant<tabulated_t, geometric_t, poisson_t, binomial_t, deterministic_t>;

    explicit integer_law(rep_t rep) : rep_(std::move(rep)) {}

    rep_t rep_;
};

} // namespace cpve
