#pragma once

// Extinction and survival criteria evaluated on a model in closed form.
// Every check returns a condition_report: named hypotheses with three-valued
// verdicts and numeric evidence, plus a conclusion that is allowed to be
// non-trivial only when every hypothesis holds. The survival checks also
// extract the explicit lower bounds their arguments yield, clamping to
// "vacuous" instead of reporting a non-positive probability.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/model.hpp"

namespace cpve {

enum class verdict { holds, fails, inconclusive };

inline const char* to_string(verdict v) {
    switch (v) {
        case verdict::holds: return "HOLDS";
        case verdict::fails: return "FAILS";
        case verdict::inconclusive: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

enum class evidence_method { closed_form, tail_sampled };

inline const char* to_string(evidence_method m) {
    return m == evidence_method::closed_form ? "closed-form" : "tail-sampled";
}

// A liminf/limsup/series value with provenance. value is empty when the
// quantity diverges ("unbounded"). Closed-form evidence is always conclusive;
// sampled evidence is conclusive only when a declared parametric tail rule
// pins the limit exactly.
struct limit_evidence {
    std::optional<double> value;
    evidence_method method = evidence_method::closed_form;
    std::string probe_range = "closed form";
    bool conclusive = true;
};

struct hypothesis_report {
    std::string name;
    verdict result = verdict::inconclusive;
    limit_evidence evidence;
    std::string note;
};

enum class conclusion_kind { extinction_certain, survival_possible, no_conclusion };

inline const char* to_string(conclusion_kind c) {
    switch (c) {
        case conclusion_kind::extinction_certain: return "q=1";
        case conclusion_kind::survival_possible: return "q<1";
        case conclusion_kind::no_conclusion: return "no-conclusion";
    }
    return "no-conclusion";
}

struct condition_report {
    std::string criterion;
    std::vector<hypothesis_report> hypotheses;
    conclusion_kind conclusion = conclusion_kind::no_conclusion;
    std::optional<double> survival_lower_bound;
    std::optional<std::uint64_t> minimal_viable_initial;
    std::optional<double> bound_at_minimal_initial;
    std::vector<std::string> notes;

    bool all_hold() const {
        for (const auto& h : hypotheses)
            if (h.result != verdict::holds) return false;
        return !hypotheses.empty();
    }

    // the one place a non-trivial conclusion can be set
    void conclude(conclusion_kind kind) {
        conclusion = all_hold() ? kind : conclusion_kind::no_conclusion;
    }
};

struct probe_options {
    std::uint64_t k_max = 10000;
    std::uint64_t n_max = 1000;
    std::vector<double> s_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::optional<double> delta;       // sustained-growth slack; default (eta-1)/2
    std::optional<double> delta_prime; // override for the half-split delta'
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// pgf of the limiting offspring law (exact: tails are declared parametrically)
inline double limiting_offspring_pgf(const offspring_schedule& sched, double s) {
    if (sched.eventually_constant()) return sched.tail_law().pgf(s);
    return integer_law::geometric(sched.alpha_seq().limit()).pgf(s);
}

// Sum over n >= 0 of coeff(n) / base^n, base > 1. Eventually-constant
// schedules get an exact geometric tail; parametric ones are summed until the
// terms vanish in double precision (they decay at least geometrically).
template <typename F>
double geometric_weighted_series(F coeff, double base, std::uint64_t head_len,
                                 bool eventually_constant, double coeff_limit) {
    long double sum = 0.0L;
    long double scale = 1.0L;
    if (eventually_constant) {
        for (std::uint64_t n = 0; n < head_len; ++n) {
            sum += static_cast<long double>(coeff(n)) * scale;
            scale /= base;
        }
        // remaining terms: coeff_limit * base^{-head_len} * sum of base^{-j}
        sum += static_cast<long double>(coeff_limit) * scale * (base / (base - 1.0));
        return static_cast<double>(sum);
    }
    for (std::uint64_t n = 0; n < 2000000; ++n) {
        long double term = static_cast<long double>(coeff(n)) * scale;
        sum += term;
        scale /= base;
        if (term < sum * 1e-19L || scale == 0.0L) return static_cast<double>(sum);
    }
    throw budget_error("series probe did not exhaust within 2e6 terms");
}

} // namespace detail

// Dichotomy check: zero absorbing plus a floor on the offspring zero mass
// force every path to either die out or grow without bound.
inline condition_report check_duality(const model_spec& model) {
    condition_report report;
    report.criterion = "duality";

    hypothesis_report absorbing;
    absorbing.name = "zero state is absorbing";
    bool abs_ok = model.control.zero_absorbing();
    absorbing.result = abs_ok ? verdict::holds : verdict::fails;
    absorbing.evidence.value = abs_ok ? 1.0 : 0.0;
    absorbing.evidence.probe_range = "control at k = 0";
    report.hypotheses.push_back(std::move(absorbing));

    hypothesis_report floor;
    floor.name = "offspring zero-mass floor";
    double p0 = model.offspring.pmf0_liminf();
    floor.result = p0 > 0.0 ? verdict::holds : verdict::fails;
    floor.evidence.value = p0;
    floor.evidence.method = model.offspring.eventually_constant()
                                ? evidence_method::closed_form
                                : evidence_method::tail_sampled;
    floor.evidence.probe_range = "n tail rule";
    report.hypotheses.push_back(std::move(floor));

    if (report.all_hold())
        report.notes.push_back(
            "extinction and unbounded growth are the only limit events");
    return report; // the dichotomy itself decides neither q=1 nor q<1
}

// q = 1 when the per-progenitor production stays uniformly below replacement:
// limsup_k E(k)/k < liminf_n 1/m_n.
inline condition_report check_subcritical_ratio(const model_spec& model) {
    condition_report report;
    report.criterion = "subcritical-ratio";

    double lhs = model.control.ratio_limsup();
    double m_hi = model.offspring.mean_limsup();
    double rhs = m_hi > 0.0 ? 1.0 / m_hi : std::numeric_limits<double>::infinity();

    hypothesis_report left;
    left.name = "limsup progenitor-mean ratio";
    left.result = verdict::holds;
    left.evidence.value = lhs;
    left.evidence.probe_range = "k tail";
    report.hypotheses.push_back(std::move(left));

    hypothesis_report right;
    right.name = "liminf inverse offspring mean";
    right.result = verdict::holds;
    right.evidence.value = rhs;
    right.evidence.method = model.offspring.eventually_constant()
                                ? evidence_method::closed_form
                                : evidence_method::tail_sampled;
    right.evidence.probe_range = "n tail rule";
    report.hypotheses.push_back(std::move(right));

    hypothesis_report strict;
    strict.name = "strict dominance";
    strict.result = lhs < rhs ? verdict::holds : verdict::fails;
    strict.evidence.value = rhs - lhs;
    strict.evidence.probe_range = "margin";
    report.hypotheses.push_back(std::move(strict));

    report.conclude(conclusion_kind::extinction_certain);
    return report;
}

// Infimum over progenitor counts of the control pgf evaluated at the
// generation-n offspring pgf. k_max only matters for per-k tabulated heads;
// every supported control kind has a closed-form tail, so the result is
// conclusive for the whole menu.
inline std::pair<double, bool> control_pgf_floor(const model_spec& model, std::uint64_t n,
                                                 double s, std::uint64_t k_max) {
    if (!(s >= 0.0 && s < 1.0))
        throw validation_error("control_pgf_floor: s must lie in [0,1); got " +
                               detail::fmt(s));
    (void)k_max; // closed-form tails make a wider probe redundant
    double u = model.offspring.pgf(n, s);
    return {model.control.gk_inf(u), true};
}

// q = 1 when the control pgf floor stays positive along the generations for
// some probe point s. Only the limiting offspring law matters for the liminf,
// and that limit is exact for both schedule shapes.
inline condition_report check_control_pgf_floor(const model_spec& model,
                                                const probe_options& probe = {}) {
    condition_report report;
    report.criterion = "control-pgf-floor";

    double best = -1.0;
    double best_s = 0.0;
    for (double s : probe.s_grid) {
        if (!(s >= 0.0 && s < 1.0))
            throw validation_error("probe grid point outside [0,1): " + detail::fmt(s));
        double u = detail::limiting_offspring_pgf(model.offspring, s);
        double floor = model.control.gk_inf(u);
        report.notes.push_back("s=" + detail::fmt(s) + ": floor " + detail::fmt(floor));
        if (floor > best) {
            best = floor;
            best_s = s;
        }
    }

    hypothesis_report positive;
    positive.name = "pgf floor positive at some probe s";
    positive.result = best > 0.0 ? verdict::holds : verdict::fails;
    positive.evidence.value = best;
    positive.evidence.probe_range =
        "s grid of " + std::to_string(probe.s_grid.size()) + " points, k infimum closed form";
    if (positive.result == verdict::fails)
        positive.note = "not detected on grid; positivity at some s off the grid is not excluded";
    else
        positive.note = "attained at s=" + detail::fmt(best_s);
    report.hypotheses.push_back(std::move(positive));

    report.conclude(conclusion_kind::extinction_certain);
    return report;
}

// Largest eta with liminf m_n >= eta * k / E(k) for every k >= 1, i.e.
// (liminf m_n) * inf_k E(k)/k. Meaningful (uniformly supercritical) only
// above 1; callers get the raw value for reporting either way.
inline double uniform_growth_factor_value(const model_spec& model) {
    return model.offspring.mean_liminf() * model.control.ratio_inf();
}

inline std::optional<double> uniform_growth_factor(const model_spec& model) {
    double eta = uniform_growth_factor_value(model);
    if (eta > 1.0) return eta;
    return std::nullopt;
}

// The survival probability the variance-series argument guarantees.
inline double survival_bound_from_variance_series(double mean_t0, double series) {
    return 1.0 / (series / mean_t0 + 1.0);
}

namespace detail {

inline hypothesis_report growth_factor_hypothesis(const model_spec& model) {
    hypothesis_report h;
    h.name = "uniform growth factor above 1";
    double eta = uniform_growth_factor_value(model);
    h.result = eta > 1.0 ? verdict::holds : verdict::fails;
    h.evidence.value = eta;
    h.evidence.probe_range = "liminf m_n times inf_k E(k)/k";
    return h;
}

inline hypothesis_report skipped_hypothesis(std::string name) {
    hypothesis_report h;
    h.name = std::move(name);
    h.result = verdict::inconclusive;
    h.evidence.value = std::nullopt;
    h.evidence.probe_range = "not evaluated";
    h.evidence.conclusive = false;
    h.note = "requires a growth factor above 1";
    return h;
}

} // namespace detail

// q < 1 via second moments: a margin gamma/eta^2 < 1 between the squared
// growth factor and the control mean square, plus a convergent offspring
// variance series. When both hold the argument yields the explicit bound
// 1 / (series / E[T_0] + 1) on the probability of unbounded growth.
inline condition_report check_second_moment_survival(const model_spec& model) {
    condition_report report;
    report.criterion = "second-moment-survival";

    report.hypotheses.push_back(detail::growth_factor_hypothesis(model));
    auto eta_opt = uniform_growth_factor(model);
    if (!eta_opt) {
        report.hypotheses.push_back(detail::skipped_hypothesis("second-moment ratio margin"));
        report.hypotheses.push_back(detail::skipped_hypothesis("offspring variance series"));
        return report;
    }
    const double eta = *eta_opt;

    double m_hi = model.offspring.mean_limsup();
    double gamma = m_hi * m_hi * model.control.d2_over_k2_sup();
    double ratio = gamma / (eta * eta);
    hypothesis_report margin;
    margin.name = "second-moment ratio margin";
    margin.result = ratio < 1.0 ? verdict::holds : verdict::fails;
    margin.evidence.value = ratio;
    margin.evidence.probe_range = "limsup m_n^2 * sup_k d^2(k)/k^2 over eta^2";
    margin.note =
        "satisfiability diagnostic: by Jensen d^2(k) >= E(k)^2, so this ratio is at "
        "least (limsup m_n / liminf m_n)^2 * (sup_k E(k)/k / inf_k E(k)/k)^2 >= 1 "
        "for every supported control family; a strict margin needs slack none of them has";
    report.hypotheses.push_back(std::move(margin));

    const auto& sched = model.offspring;
    auto coeff = [&sched](std::uint64_t n) {
        double m = sched.mean(n);
        return m > 0.0 ? sched.variance(n) / (m * m) : 0.0;
    };
    double m_lim = sched.mean_limit();
    double coeff_limit = m_lim > 0.0 ? sched.variance_limit() / (m_lim * m_lim) : 0.0;
    double series = detail::geometric_weighted_series(
        coeff, eta, sched.head_length(), sched.eventually_constant(), coeff_limit);
    hypothesis_report var_series;
    var_series.name = "offspring variance series";
    var_series.result = verdict::holds; // geometric decay: convergent whenever eta > 1
    var_series.evidence.value = series;
    var_series.evidence.method = sched.eventually_constant()
                                     ? evidence_method::closed_form
                                     : evidence_method::tail_sampled;
    var_series.evidence.probe_range = "sum of sigma_n^2 / (m_n^2 eta^n)";
    report.hypotheses.push_back(std::move(var_series));

    report.conclude(conclusion_kind::survival_possible);
    if (report.conclusion == conclusion_kind::survival_possible) {
        double mean_t0 = model.control.mean_at(model.initial);
        report.survival_lower_bound = survival_bound_from_variance_series(mean_t0, series);
    }
    return report;
}

namespace detail {

// One Chebyshev factor of the sustained-growth product. The conditional
// variance m_n^2 tau^2(k) + sigma_n^2 E(k) is bounded through tau^2(k) <= b k
// and E(k) <= a k, so the constant pairs m_n^2 with b and sigma_n^2 with a.
struct growth_event_terms {
    double a = 0.0;
    double b = 0.0;
    double eta_minus_dp = 0.0;
    double dp = 0.0;

    double c_at(const offspring_schedule& sched, std::uint64_t n) const {
        double m = sched.mean(n);
        return m * m * b + sched.variance(n) * a;
    }
    double c_limit(const offspring_schedule& sched) const {
        double m = sched.mean_limit();
        return m * m * b + sched.variance_limit() * a;
    }
};

// first factor: Chebyshev at the exact initial state
inline double first_growth_factor(const model_spec& model, double dp, std::uint64_t n0_init) {
    double n = static_cast<double>(n0_init);
    double m0 = model.offspring.mean(0);
    double s0 = model.offspring.variance(0);
    double var = m0 * m0 * model.control.var_at(n0_init) +
                 s0 * model.control.mean_at(n0_init);
    return 1.0 - var / (n * n * dp * dp);
}

// log of prod_{n>=1} (1 - C_n / ((eta-dp)^n N dp^2)), or nullopt if any
// factor is non-positive (bound vacuous at this N)
inline std::optional<double> log_growth_product(const offspring_schedule& sched,
                                                const growth_event_terms& t,
                                                double initial) {
    long double log_sum = 0.0L;
    long double scale = 1.0L / t.eta_minus_dp;
    for (std::uint64_t n = 1; n < 2000000; ++n) {
        double x = t.c_at(sched, n) * static_cast<double>(scale) / (initial * t.dp * t.dp);
        if (x >= 1.0) return std::nullopt;
        log_sum += std::log1p(-static_cast<long double>(x));
        scale /= t.eta_minus_dp;
        if (x < 1e-300) return static_cast<double>(log_sum);
    }
    throw budget_error("growth product did not exhaust within 2e6 factors");
}

// worst n >= 1 of C_n / (eta-dp)^n, the binding constraint for factor positivity
inline double peak_growth_constraint(const offspring_schedule& sched,
                                     const growth_event_terms& t) {
    double c_hi = std::max(t.c_limit(sched), 0.0);
    for (std::uint64_t n = 0; n < sched.head_length(); ++n)
        c_hi = std::max(c_hi, t.c_at(sched, n));
    if (!sched.eventually_constant()) {
        double m_hi = sched.mean_bounds_from(0).hi;
        double v_hi = sched.variance_bounds_from(0).hi;
        c_hi = std::max(c_hi, m_hi * m_hi * t.b + v_hi * t.a);
    }
    if (c_hi <= 0.0) return 0.0; // all factors are exactly 1
    double peak = 0.0;
    long double scale = 1.0L / t.eta_minus_dp;
    for (std::uint64_t n = 1; n < 2000000; ++n) {
        double term = t.c_at(sched, n) * static_cast<double>(scale);
        peak = std::max(peak, term);
        scale /= t.eta_minus_dp;
        if (c_hi * static_cast<double>(scale) < peak * 1e-12) return peak;
    }
    throw budget_error("growth constraint scan did not exhaust within 2e6 terms");
}

} // namespace detail

// q < 1 via bounded ratios and a Chebyshev product over the events
// {Z_{n+1} > (eta - delta') Z_n}: a = sup E(k)/k and b = sup tau^2(k)/k must
// be finite and the combined second-moment series must converge at eta-delta.
// The product bound is evaluated at the model's initial state, clamped to
// "vacuous" when a factor is non-positive, and the minimal initial state that
// makes every factor positive is reported alongside the bound there.
inline condition_report check_sustained_growth(const model_spec& model,
                                               const probe_options& probe = {}) {
    condition_report report;
    report.criterion = "sustained-growth";

    report.hypotheses.push_back(detail::growth_factor_hypothesis(model));
    auto eta_opt = uniform_growth_factor(model);
    if (!eta_opt) {
        report.hypotheses.push_back(detail::skipped_hypothesis("progenitor ratio bounded"));
        report.hypotheses.push_back(detail::skipped_hypothesis("control dispersion ratio bounded"));
        report.hypotheses.push_back(detail::skipped_hypothesis("combined second-moment series"));
        return report;
    }
    const double eta = *eta_opt;

    double delta = probe.delta.value_or((eta - 1.0) / 2.0);
    if (!(delta > 0.0 && delta < eta - 1.0))
        throw validation_error("sustained-growth slack delta must lie in (0, eta-1) = (0, " +
                               detail::fmt(eta - 1.0) + "); got " + detail::fmt(delta));
    double dp = probe.delta_prime.value_or(std::min(eta - 1.0, delta) / 2.0);
    if (!(dp > 0.0 && dp < std::min(eta - 1.0, delta)))
        throw validation_error("delta' must lie in (0, min(eta-1, delta)); got " +
                               detail::fmt(dp));

    double a = model.control.ratio_sup();
    hypothesis_report ratio_bounded;
    ratio_bounded.name = "progenitor ratio bounded";
    ratio_bounded.result = std::isfinite(a) ? verdict::holds : verdict::fails;
    if (std::isfinite(a)) ratio_bounded.evidence.value = a;
    ratio_bounded.evidence.probe_range = "sup_k E(k)/k";
    report.hypotheses.push_back(std::move(ratio_bounded));

    double b = model.control.var_over_k_sup();
    hypothesis_report dispersion_bounded;
    dispersion_bounded.name = "control dispersion ratio bounded";
    dispersion_bounded.result = std::isfinite(b) ? verdict::holds : verdict::fails;
    if (std::isfinite(b)) dispersion_bounded.evidence.value = b;
    dispersion_bounded.evidence.probe_range = "sup_k tau^2(k)/k";
    report.hypotheses.push_back(std::move(dispersion_bounded));

    const auto& sched = model.offspring;
    auto coeff = [&sched](std::uint64_t n) {
        double m = sched.mean(n);
        return m * m + sched.variance(n);
    };
    double m_lim = sched.mean_limit();
    double coeff_limit = m_lim * m_lim + sched.variance_limit();
    double series = detail::geometric_weighted_series(
        coeff, eta - delta, sched.head_length(), sched.eventually_constant(), coeff_limit);
    hypothesis_report moment_series;
    moment_series.name = "combined second-moment series";
    moment_series.result = verdict::holds; // eta - delta > 1 by the delta check
    moment_series.evidence.value = series;
    moment_series.evidence.method = sched.eventually_constant()
                                        ? evidence_method::closed_form
                                        : evidence_method::tail_sampled;
    moment_series.evidence.probe_range =
        "sum of (m_n^2 + sigma_n^2) / (eta - delta)^n at delta=" + detail::fmt(delta);
    report.hypotheses.push_back(std::move(moment_series));

    report.conclude(conclusion_kind::survival_possible);
    if (report.conclusion != conclusion_kind::survival_possible) return report;

    detail::growth_event_terms terms{a, b, eta - dp, dp};
    auto bound_at = [&](std::uint64_t n0) -> std::optional<double> {
        double p0 = detail::first_growth_factor(model, dp, n0);
        if (p0 <= 0.0) return std::nullopt;
        auto log_prod = detail::log_growth_product(sched, terms, static_cast<double>(n0));
        if (!log_prod) return std::nullopt;
        return p0 * std::exp(*log_prod);
    };

    report.survival_lower_bound = bound_at(model.initial);
    if (!report.survival_lower_bound)
        report.notes.push_back("bound vacuous at initial state " +
                               std::to_string(model.initial));

    // smallest initial state with every Chebyshev factor positive
    double peak = detail::peak_growth_constraint(sched, terms);
    std::uint64_t n_min = static_cast<std::uint64_t>(std::floor(peak / (dp * dp))) + 1;
    n_min = std::max<std::uint64_t>(n_min, 1);
    std::optional<double> minimal_bound;
    for (std::uint64_t guard = 0; guard < 2000000; ++guard, ++n_min) {
        minimal_bound = bound_at(n_min);
        if (minimal_bound) break;
    }
    if (minimal_bound) {
        report.minimal_viable_initial = n_min;
        report.bound_at_minimal_initial = minimal_bound;
        report.notes.push_back("every product factor positive from initial state " +
                               std::to_string(n_min) + " on; bound there " +
                               detail::fmt(*minimal_bound));
    }
    return report;
}

// mu_{n,k} = m_n * E(k)/k on a probe grid; the extinction/survival threshold
// sits where these cross 1.
inline std::vector<std::vector<double>> growth_rate_matrix(const model_spec& model,
                                                           std::uint64_t n_max,
                                                           std::uint64_t k_max) {
    if (n_max < 1 || k_max < 1)
        throw validation_error("growth_rate_matrix probe grid must be at least 1x1");
    std::vector<std::vector<double>> out(n_max, std::vector<double>(k_max, 0.0));
    for (std::uint64_t n = 0; n < n_max; ++n) {
        double m = model.offspring.mean(n);
        for (std::uint64_t k = 1; k <= k_max; ++k)
            out[n][k - 1] = m * model.control.ratio_at(k);
    }
    return out;
}

} // namespace cpve
