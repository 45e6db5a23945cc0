#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/laws.hpp"
#include "cpve/model.hpp"
#include "cpve/truncated_pmf.hpp"

namespace cpve {

// Knobs for exact propagation of the population law.
//
// eps is the tail-trim budget spent per generation; whatever is trimmed is
// accounted in truncated_pmf::leaked, never renormalized away. Without a
// barrier the support of a growing process eventually overflows state_cap and
// propagation stops with a budget error. With a barrier B, mass reaching
// states >= B is moved to truncated_pmf::escaped instead; such mass is known
// to sit on a large population, so extinction bounds stay sharp whenever a
// survival certificate applies.
struct propagate_options {
    double eps = 1e-12;
    std::uint64_t state_cap = 1'000'000;
    std::optional<std::uint64_t> barrier;
};

struct propagation_result {
    std::vector<truncated_pmf> pmfs;
    propagate_options options;
    model_spec model;
};

struct value_interval {
    double low = 0.0;
    double high = 0.0;
};

struct extinction_bracket {
    double low = 0.0;
    double high = 1.0;
};

// Paley-Zygmund style forever-survival bound for one founding line.
//
// For identity, binomial and poisson_scaled controls the progenitor draw
// factorizes over individuals, so the process started from one individual is
// an ordinary branching process in varying environment with per-generation
// offspring pgf h_n(s) = base(f_n(s)) and moments
//   mu_n = c m_n,   v_n / mu_n^2 = t/c^2 + sigma_n^2 / (c m_n^2),
// where E[phi(k)] = c k and Var[phi(k)] = t k. When mu_lo = c inf_n m_n > 1,
// the normalized line W_n has E[W_n] = 1 and
//   E[W_n^2] <= 1 + sup_n(v_n/mu_n^2) * mu_lo/(mu_lo - 1) =: r_bar,
// hence P(line survives forever) >= 1/r_bar by Paley-Zygmund applied to every
// W_n and taking the decreasing limit of {Z_n > 0}. Lines from a size-k state
// survive independently, so P(extinction from k) <= (1 - rho)^k.
struct survival_certificate {
    double rho;                 // forever-survival probability of one line
    double line_mean_lo;        // mu_lo = c * inf_n m_n
    double second_moment_bound; // r_bar
};

inline std::optional<survival_certificate> make_survival_certificate(const model_spec& m) {
    if (!m.control.multiplicative()) return std::nullopt;
    double c = m.control.mult_ratio();
    double t = m.control.mult_var_slope();
    double m_lo = m.offspring.mean_bounds_from(0).lo;
    double mu_lo = c * m_lo;
    if (!(mu_lo > 1.0)) return std::nullopt;
    double s_sup = m.offspring.var_over_mean2_bounds_from(0).hi;
    if (!std::isfinite(s_sup)) return std::nullopt;
    double r_bar = 1.0 + (t / (c * c) + s_sup / c) * (mu_lo / (mu_lo - 1.0));
    if (!std::isfinite(r_bar) || r_bar < 1.0) return std::nullopt;
    return survival_certificate{1.0 / r_bar, mu_lo, r_bar};
}

namespace detail {

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        double ai = a[i];
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b[j];
    }
    return out;
}

// Drop top entries while their running sum stays within eps.
inline void trim_top(std::vector<double>& v, double eps) {
    if (v.size() <= 1) return;
    long double acc = 0.0L;
    std::size_t keep = v.size();
    while (keep > 1) {
        long double next = acc + v[keep - 1];
        if (next > static_cast<long double>(eps)) break;
        acc = next;
        --keep;
    }
    v.resize(keep);
}

// Move mass at indices >= barrier out of the vector; returns the moved mass.
inline long double escape_top(std::vector<double>& v, std::uint64_t barrier) {
    if (v.size() <= barrier) return 0.0L;
    long double acc = 0.0L;
    for (std::size_t j = barrier; j < v.size(); ++j) acc += v[j];
    v.resize(barrier);
    return acc;
}

// w[l] = sum_k mass[k] P(phi(k) = l), the law of the progenitor count.
inline std::vector<double> progenitor_mixture(const control_family& control,
                                              const std::vector<double>& mass,
                                              double eps_budget) {
    if (control.kind() == control_kind::identity) return mass;
    if (control.kind() == control_kind::capped) {
        std::uint64_t cap = control.cap_value();
        if (mass.size() <= cap + 1) return mass;
        std::vector<double> w(mass.begin(), mass.begin() + static_cast<std::ptrdiff_t>(cap + 1));
        long double top = 0.0L;
        for (std::size_t k = cap + 1; k < mass.size(); ++k) top += mass[k];
        w[cap] = static_cast<double>(static_cast<long double>(w[cap]) + top);
        return w;
    }
    std::size_t populated = 0;
    for (double v : mass)
        if (v > 0.0) ++populated;
    double eps_row =
        std::max(eps_budget / static_cast<double>(std::max<std::size_t>(populated, 1)), 1e-300);
    std::vector<double> w;
    for (std::size_t k = 0; k < mass.size(); ++k) {
        if (mass[k] <= 0.0) continue;
        auto row = control.law(k).truncate(eps_row);
        if (w.size() < row.pmf.size()) w.resize(row.pmf.size(), 0.0);
        for (std::size_t l = 0; l < row.pmf.size(); ++l) w[l] += mass[k] * row.pmf[l];
    }
    if (w.empty()) w.push_back(0.0);
    return w;
}

struct chain_result {
    std::vector<double> v;
    long double escaped = 0.0L;
};

// Horner evaluation of sum_l w[l] X^{*l} in the convolution algebra:
//   acc = w[L]; repeat acc = acc (*) X, acc[0] += w[l].
// Each step escapes barrier-crossing mass (sound: offspring counts are
// non-negative, so mass at >= B stays at >= B through later convolutions) and
// trims an eps_step tail.
inline chain_result compound_mixture(std::vector<double> w, const std::vector<double>& x,
                                     double eps_budget, std::uint64_t state_cap,
                                     std::optional<std::uint64_t> barrier) {
    trim_top(w, eps_budget * 0.25);
    std::size_t top = w.size();
    while (top > 0 && w[top - 1] == 0.0) --top;
    chain_result out;
    if (top == 0) {
        out.v = {0.0};
        return out;
    }
    double eps_step = (eps_budget * 0.5) / static_cast<double>(top);
    out.v = {w[top - 1]};
    for (std::size_t l = top - 1; l-- > 0;) {
        out.v = convolve(out.v, x);
        if (barrier) out.escaped += escape_top(out.v, *barrier);
        trim_top(out.v, eps_step);
        if (out.v.size() > state_cap)
            throw budget_error("state cap " + std::to_string(state_cap) +
                               " exceeded during propagation; raise eps, set a barrier, or "
                               "lower the horizon");
        out.v[0] += w[l];
    }
    if (barrier) out.escaped += escape_top(out.v, *barrier);
    return out;
}

// X^{*t} by binary exponentiation over convolution. Barrier escape is applied
// only to the accumulator (a factor's high mass would overcount).
inline chain_result compound_power(const std::vector<double>& x, std::uint64_t t,
                                   double eps_budget, std::uint64_t state_cap,
                                   std::optional<std::uint64_t> barrier) {
    chain_result out;
    out.v = {1.0};
    if (t == 0) return out;
    std::uint64_t bits = 0;
    for (std::uint64_t u = t; u > 1; u >>= 1) ++bits;
    double eps_step = eps_budget / static_cast<double>(2 * std::max<std::uint64_t>(bits, 1) + 1);
    std::vector<double> base = x;
    std::uint64_t e = t;
    while (true) {
        if (e & 1) {
            out.v = convolve(out.v, base);
            if (barrier) out.escaped += escape_top(out.v, *barrier);
            trim_top(out.v, eps_step);
            if (out.v.size() > state_cap)
                throw budget_error("state cap exceeded while raising a law to power " +
                                   std::to_string(t));
        }
        e >>= 1;
        if (e == 0) break;
        base = convolve(base, base);
        trim_top(base, eps_step);
        if (base.size() > state_cap)
            throw budget_error("state cap exceeded while raising a law to power " +
                               std::to_string(t));
    }
    return out;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

} // namespace detail

// Law of Z_{n+1} given Z_n = k: the phi(k)-mixture of convolution powers of
// the generation-n offspring law. Leaked mass is bounded by eps.
inline truncated_pmf transition_row(const model_spec& model, std::uint64_t n, std::uint64_t k,
                                    double eps) {
    if (!(eps > 0.0 && eps < 1.0))
        throw validation_error("transition_row eps must lie in (0,1), got " + std::to_string(eps));
    const std::uint64_t state_cap = propagate_options{}.state_cap;
    integer_law offspring = model.offspring.law(n);
    integer_law phi = model.control.law(k);
    detail::chain_result chain;
    if (phi.kind() == law_kind::deterministic) {
        std::uint64_t t = phi.deterministic_value();
        if (t == 0) {
            truncated_pmf row;
            row.mass = {1.0};
            row.generation = n + 1;
            return row;
        }
        auto x = offspring.truncate(eps / 4.0);
        chain = detail::compound_power(x.pmf, t, eps / 2.0, state_cap, std::nullopt);
    } else {
        auto w = phi.truncate(eps / 4.0);
        double eps_x =
            std::max(eps / (4.0 * static_cast<double>(std::max<std::size_t>(w.pmf.size(), 1))),
                     1e-300);
        auto x = offspring.truncate(eps_x);
        chain = detail::compound_mixture(w.pmf, x.pmf, eps / 2.0, state_cap, std::nullopt);
    }
    truncated_pmf row;
    row.mass = std::move(chain.v);
    row.generation = n + 1;
    long double s = 0.0L;
    for (double v : row.mass) s += v;
    long double lost = 1.0L - s;
    row.leaked = lost > 0.0L ? static_cast<double>(lost) : 0.0;
    return row;
}

// Laws of Z_0..Z_horizon. Mass conservation is maintained by difference
// against the exact initial total of 1, so sum(mass)+leaked+escaped stays
// within floating-point noise of 1 at every generation.
inline propagation_result propagate(const model_spec& model, std::uint64_t horizon,
                                    propagate_options options = {}) {
    if (!(options.eps > 0.0 && options.eps < 1.0))
        throw validation_error("propagate eps must lie in (0,1), got " +
                               std::to_string(options.eps));
    if (options.state_cap < 4)
        throw validation_error("propagate state cap must be at least 4");
    if (options.barrier) {
        if (*options.barrier < 2 || *options.barrier > options.state_cap)
            throw validation_error("propagate barrier must lie in [2, state_cap]");
        if (model.initial >= *options.barrier)
            throw validation_error("initial population must be below the barrier");
    }
    if (model.initial + 1 > options.state_cap)
        throw budget_error("initial population exceeds the state cap");

    propagation_result result{{}, options, model};
    truncated_pmf start;
    start.mass.assign(model.initial + 1, 0.0);
    start.mass[model.initial] = 1.0;
    start.generation = 0;
    result.pmfs.push_back(std::move(start));

    long double cum_escaped = 0.0L;
    double prev_leaked = 0.0;
    for (std::uint64_t n = 0; n < horizon; ++n) {
        const truncated_pmf& cur = result.pmfs.back();
        auto w = detail::progenitor_mixture(model.control, cur.mass, options.eps / 4.0);
        double eps_x = std::max(
            options.eps / (4.0 * static_cast<double>(std::max<std::size_t>(w.size(), 1))),
            1e-300);
        auto x = model.offspring.law(n).truncate(eps_x);
        auto chain = detail::compound_mixture(std::move(w), x.pmf, options.eps / 2.0,
                                              options.state_cap, options.barrier);
        cum_escaped += chain.escaped;

        truncated_pmf next;
        next.mass = std::move(chain.v);
        next.generation = n + 1;
        next.escaped = static_cast<double>(cum_escaped);
        long double s = 0.0L;
        for (double v : next.mass) s += v;
        long double lost = 1.0L - s - cum_escaped;
        next.leaked = std::max(prev_leaked, lost > 0.0L ? static_cast<double>(lost) : 0.0);
        prev_leaked = next.leaked;
        result.pmfs.push_back(std::move(next));
    }
    return result;
}

// Per-generation brackets for P(Z_n = 0). The lower end is located mass at 0;
// the upper end adds unlocated trimmed mass and, for escaped mass, the best
// available bound on a large state ever dying out.
inline std::vector<extinction_bracket> extinction_bounds(const propagation_result& result) {
    const model_spec& model = result.model;
    if (!model.control.zero_absorbing())
        throw validation_error("extinction bounds require phi(0) = 0");
    double escape_death_bound = 1.0;
    if (result.options.barrier) {
        if (auto cert = make_survival_certificate(model))
            escape_death_bound =
                std::pow(1.0 - cert->rho, static_cast<double>(*result.options.barrier));
    }
    std::vector<extinction_bracket> out;
    out.reserve(result.pmfs.size());
    for (const auto& pmf : result.pmfs) {
        extinction_bracket b;
        b.low = detail::clamp01(pmf.mass0());
        b.high = detail::clamp01(pmf.mass0() + pmf.leaked + pmf.escaped * escape_death_bound);
        if (b.high < b.low) b.high = b.low;
        out.push_back(b);
    }
    return out;
}

// Bracket for q = lim_n P(Z_n = 0) from the final propagated law.
//
// Lower end: P(Z_H = 0) (non-decreasing in H when phi(0) = 0). Upper end:
// every located state k >= 1 dies out with probability at most (1-rho)^k
// under a survival certificate; escaped mass was at barrier or above when
// last seen; trimmed mass may die with probability up to 1. Without a
// certificate the honest upper end is 1.
inline extinction_bracket extinction_limit_bracket(const propagation_result& result) {
    const model_spec& model = result.model;
    if (!model.control.zero_absorbing())
        throw validation_error("extinction bounds require phi(0) = 0");
    if (result.pmfs.empty()) throw internal_error("extinction_limit_bracket: no pmfs");
    const truncated_pmf& last = result.pmfs.back();
    extinction_bracket b;
    b.low = detail::clamp01(last.mass0());
    auto cert = make_survival_certificate(model);
    if (!cert) {
        b.high = 1.0;
        return b;
    }
    double r = 1.0 - cert->rho;
    long double tail = 0.0L;
    double rk = 1.0;
    for (std::size_t k = 1; k < last.mass.size(); ++k) {
        rk *= r;
        tail += static_cast<long double>(last.mass[k]) * rk;
    }
    if (result.options.barrier)
        tail += static_cast<long double>(last.escaped) *
                std::pow(r, static_cast<double>(*result.options.barrier));
    else
        tail += static_cast<long double>(last.escaped);
    b.high = detail::clamp01(last.mass0() + static_cast<double>(tail) + last.leaked);
    if (b.high < b.low) b.high = b.low;
    return b;
}

struct moment_intervals {
    value_interval mean;
    value_interval second;
};

// Interval moments per generation. Trimmed mass is assigned to [0, state_cap];
// escaped mass is known to be at or above the barrier, unbounded above.
inline std::vector<moment_intervals> exact_moments(const propagation_result& result) {
    const double cap = static_cast<double>(result.options.state_cap);
    const double bar =
        result.options.barrier ? static_cast<double>(*result.options.barrier) : 0.0;
    std::vector<moment_intervals> out;
    out.reserve(result.pmfs.size());
    for (const auto& pmf : result.pmfs) {
        moment_intervals mi;
        double mean_dense = pmf.dense_mean();
        double second_dense = pmf.dense_second();
        mi.mean.low = mean_dense + pmf.escaped * bar;
        mi.second.low = second_dense + pmf.escaped * bar * bar;
        if (pmf.escaped > 0.0) {
            mi.mean.high = std::numeric_limits<double>::infinity();
            mi.second.high = std::numeric_limits<double>::infinity();
        } else {
            mi.mean.high = mean_dense + pmf.leaked * cap;
            mi.second.high = second_dense + pmf.leaked * cap * cap;
        }
        out.push_back(mi);
    }
    return out;
}

} // namespace cpve
