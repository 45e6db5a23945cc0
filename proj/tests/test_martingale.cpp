#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cpve/martingale.hpp"
#include "fixtures.hpp"
#include "oracle_stats.hpp"

using cpve::attach_w_samples;
using cpve::build_delta;
using cpve::build_normalizer;
using cpve::check_normalized_limit;
using cpve::control_family;
using cpve::derive_seed;
using cpve::integer_law;
using cpve::mc_options;
using cpve::model_spec;
using cpve::monte_carlo;
using cpve::offspring_schedule;
using cpve::real_seq;
using cpve::second_moment_recursion;
using cpve::supermartingale_check;
using cpve::validation_error;
using cpve::verdict;
using cpve::w_statistics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// deterministic doubling: Z_n = 2^n, W_n = 1 exactly
model_spec doubling() {
    return model_spec(offspring_schedule::constant(integer_law::deterministic(2)),
                      control_family::identity(), 1);
}

// one tabulated head entry halves the progenitor yield at k = 1 only
model_spec defect_at_one() {
    std::vector<integer_law> head;
    head.push_back(integer_law::deterministic(0));
    head.push_back(integer_law::tabulated({{0, 0.5}, {1, 0.5}}));
    auto control = control_family::tabulated_per_k(std::move(head), control_family::identity());
    return model_spec(offspring_schedule::constant(integer_law::deterministic(2)),
                      std::move(control), 1);
}

}  // namespace

TEST_CASE("normalizer closed forms", "[martingale]") {
    auto gw = build_normalizer(fixtures::gw_supercritical(), 10);
    CHECK(gw.tau == 1.0);
    CHECK(gw.monotone_ratio_ok);
    CHECK_THAT(gw.r_at(4), WithinRel(std::pow(1.25, 4), 1e-12));
    REQUIRE(gw.eta.has_value());
    CHECK_THAT(*gw.eta, WithinRel(1.25, 1e-12));
    REQUIRE(gw.growth_dominant_from.has_value());
    CHECK(*gw.growth_dominant_from == 0);
    CHECK(gw.horizon() == 10);
    CHECK(gw.w_value(0, 10) == 0.0);
    CHECK_THAT(gw.w_value(16, 4), WithinRel(16.0 / std::pow(1.25, 4), 1e-12));

    auto th = build_normalizer(fixtures::thinned_supercritical(), 6);
    CHECK(th.tau == 0.5);
    CHECK_THAT(th.r_at(2), WithinRel(1.5625, 1e-12));
    REQUIRE(th.eta.has_value());
    CHECK_THAT(*th.eta, WithinRel(1.25, 1e-12));
    CHECK(th.growth_dominant_from.has_value());
    CHECK(*th.growth_dominant_from == 0);

    // capped progenitor ratio tends to zero: no usable scaling
    CHECK_THROWS_AS(build_normalizer(fixtures::capped_supercritical(), 5), validation_error);

    // zero offspring mean collapses r_n
    model_spec dead(offspring_schedule::constant(integer_law::deterministic(0)),
                    control_family::identity(), 1);
    CHECK_THROWS_AS(build_normalizer(dead, 3), validation_error);
}

TEST_CASE("normalizer reports when scaling dominance is only asymptotic", "[martingale]") {
    // means decrease to the limit: tau * m_n >= eta from the start
    model_spec from_above(
        offspring_schedule::geometric_seq(real_seq::geometric_approach(0.6, 0.2, 0.5)),
        control_family::identity(), 1);
    auto above = build_normalizer(from_above, 5);
    REQUIRE(above.eta.has_value());
    CHECK_THAT(*above.eta, WithinRel(1.5, 1e-12));
    REQUIRE(above.growth_dominant_from.has_value());
    CHECK(*above.growth_dominant_from == 0);

    // means increase to the limit: tau * m_n < eta at every finite n, and a
    // slow approach keeps the gap visible across the whole probe range
    model_spec from_below(
        offspring_schedule::geometric_seq(real_seq::geometric_approach(0.6, -0.2, 0.999)),
        control_family::identity(), 1);
    auto below = build_normalizer(from_below, 5);
    REQUIRE(below.eta.has_value());
    CHECK_THAT(*below.eta, WithinRel(1.5, 1e-12));
    CHECK_FALSE(below.growth_dominant_from.has_value());

    // a fast approach closes the gap within double precision, so the probe
    // reports the index where the two become numerically indistinguishable
    model_spec fast(
        offspring_schedule::geometric_seq(real_seq::geometric_approach(0.6, -0.2, 0.5)),
        control_family::identity(), 1);
    auto fast_nz = build_normalizer(fast, 5);
    REQUIRE(fast_nz.growth_dominant_from.has_value());
    CHECK(*fast_nz.growth_dominant_from > 10);
    CHECK(*fast_nz.growth_dominant_from < 200);
}

TEST_CASE("ratio defect vanishes for constant-ratio controls", "[martingale]") {
    for (const auto& model : {fixtures::gw_supercritical(), fixtures::thinned_supercritical(),
                              fixtures::subcritical_geometric()}) {
        auto d = build_delta(model);
        CHECK(d.zero_beyond_window);
        CHECK(d.summability == verdict::holds);
        CHECK(d.weighted_sum == 0.0);
        CHECK(d.nonnegative);
        CHECK(d.nonincreasing);
        for (double dk : d.head) CHECK(dk == 0.0);
    }
}

TEST_CASE("ratio defect on a tabulated head", "[martingale]") {
    auto model = defect_at_one();
    auto d = build_delta(model);
    CHECK(d.tau == 1.0);
    REQUIRE(d.head.size() >= 2);
    CHECK_THAT(d.head[0], WithinRel(0.5, 1e-14));
    CHECK(d.head[1] == 0.0);
    CHECK_THAT(d.weighted_sum, WithinRel(0.5, 1e-14));
    CHECK(d.zero_beyond_window);
    CHECK(d.nonnegative);
    CHECK(d.nonincreasing);
    CHECK(model.control.ratio_nondecreasing());
}

TEST_CASE("w statistics on deterministic doubling", "[martingale]") {
    auto model = doubling();
    auto nz = build_normalizer(model, 10);
    auto report = monte_carlo(model, 10, 50, 1);
    auto s = w_statistics(report, nz);
    REQUIRE(s.mean_w_by_gen.size() == 11);
    for (double mw : s.mean_w_by_gen) CHECK_THAT(mw, WithinAbs(1.0, 1e-12));
    for (double vw : s.var_w_by_gen) CHECK_THAT(vw, WithinAbs(0.0, 1e-12));
    CHECK(s.p_w_positive == 1.0);
    CHECK(s.p_w_ci.low > 0.9);
    for (double w : s.w_at_horizon) CHECK_THAT(w, WithinAbs(1.0, 1e-12));

    CHECK(report.w_samples_at_horizon.empty());
    auto attached = attach_w_samples(report, nz);
    CHECK(report.w_samples_at_horizon.size() == 50);
    CHECK(report.w_samples_at_horizon == attached.w_at_horizon);

    auto short_nz = build_normalizer(model, 5);
    CHECK_THROWS_AS(w_statistics(report, short_nz), validation_error);
}

TEST_CASE("w positivity matches survival", "[martingale]") {
    auto model = fixtures::subcritical_geometric();
    auto nz = build_normalizer(model, 40);
    auto report = monte_carlo(model, 40, 2000, 9);
    auto s = w_statistics(report, nz);
    CHECK(s.p_w_positive == report.survival_at_horizon);
    CHECK(s.p_w_ci.low == report.survival_ci.low);
    CHECK(s.p_w_ci.high == report.survival_ci.high);
    std::size_t positive = 0;
    for (double w : s.w_at_horizon)
        if (w > 0.0) ++positive;
    CHECK(static_cast<double>(positive) ==
          report.survival_at_horizon * static_cast<double>(report.replications));
}

TEST_CASE("sampled w means track the martingale level", "[martingale]") {
    auto model = fixtures::thinned_supercritical();
    auto nz = build_normalizer(model, 30);
    auto report = monte_carlo(model, 30, 3000, 11);
    auto s = w_statistics(report, nz);
    // E[W_n] = 1 exactly in the constant-ratio regime; allow sampling noise
    for (std::size_t n = 0; n < s.mean_w_by_gen.size(); ++n)
        CHECK_THAT(s.mean_w_by_gen[n], WithinAbs(1.0, 5.0 * s.se_w_by_gen[n] + 1e-9));
}

TEST_CASE("exact mean of w is constant in the martingale case", "[martingale]") {
    auto rep = supermartingale_check(fixtures::thinned_supercritical(), 12, 1e-14, {1, 4});
    REQUIRE(rep.mean_w.size() == 13);
    for (const auto& iv : rep.mean_w) {
        CHECK_THAT(iv.low, WithinAbs(1.0, 1e-10));
        CHECK(iv.low <= 1.0 + 1e-12);
        CHECK(iv.high >= 1.0 - 1e-12);
    }
    CHECK(rep.non_increasing);
    CHECK_THAT(rep.terminal.low, WithinAbs(1.0, 1e-10));

    REQUIRE(rep.by_initial.size() == 2);
    CHECK(rep.by_initial[0].initial == 1);
    CHECK(rep.by_initial[1].initial == 4);
    CHECK_THAT(rep.by_initial[1].terminal_w.low, WithinAbs(4.0, 1e-9));
    // binomial thinning acts on individuals independently, so extinction
    // mass from four founders is the single-founder mass to the fourth power
    const double q1 = rep.by_initial[0].extinct_mass.low;
    const double q4 = rep.by_initial[1].extinct_mass.low;
    CHECK_THAT(q4, WithinAbs(q1 * q1 * q1 * q1, 1e-8));
    CHECK(q1 > 0.5);

    auto gw = supermartingale_check(fixtures::gw_supercritical(), 12, 1e-14, {1});
    for (const auto& iv : gw.mean_w) CHECK_THAT(iv.low, WithinAbs(1.0, 1e-10));
    CHECK(gw.non_increasing);
}

TEST_CASE("exact mean of w drops at a defective state and then levels off", "[martingale]") {
    auto rep = supermartingale_check(defect_at_one(), 8, 1e-12, {1, 4});
    REQUIRE(rep.mean_w.size() == 9);
    CHECK_THAT(rep.mean_w[0].low, WithinAbs(1.0, 1e-12));
    // one visit to k = 1 halves the expected level; the path never returns
    for (std::size_t n = 1; n < rep.mean_w.size(); ++n)
        CHECK_THAT(rep.mean_w[n].low, WithinAbs(0.5, 1e-10));
    CHECK(rep.non_increasing);
    CHECK_THAT(rep.terminal.low, WithinAbs(0.5, 1e-10));

    // founders above the defective state never feel it
    CHECK_THAT(rep.by_initial[1].terminal_w.low, WithinAbs(4.0, 1e-10));
    CHECK(rep.by_initial[1].extinct_mass.high <= 1e-12);
    CHECK_THAT(rep.by_initial[0].extinct_mass.low, WithinAbs(0.5, 1e-10));
}

TEST_CASE("supermartingale check rejects decreasing ratios", "[martingale]") {
    std::vector<integer_law> head;
    head.push_back(integer_law::deterministic(0));
    head.push_back(integer_law::tabulated({{2, 1.0}}));
    auto control = control_family::tabulated_per_k(std::move(head), control_family::identity());
    model_spec model(offspring_schedule::constant(integer_law::deterministic(2)),
                     std::move(control), 1);
    CHECK_FALSE(model.control.ratio_nondecreasing());
    CHECK_THROWS_AS(supermartingale_check(model, 5, 1e-12, {1}), validation_error);
    CHECK_THROWS_AS(supermartingale_check(fixtures::capped_supercritical(), 5, 1e-12, {1}),
                    validation_error);
}

TEST_CASE("second moment recursion matches the direct values", "[martingale]") {
    auto model = fixtures::thinned_supercritical();
    auto coarse = second_moment_recursion(model, 12, 1e-12);
    CHECK(coarse.max_relative_gap <= 1e-8);
    CHECK(coarse.recursion_within_intervals);

    // the gap tracks the trim budget: two orders tighter at a finer eps
    auto rep = second_moment_recursion(model, 12, 1e-14);
    REQUIRE(rep.rows.size() == 13);
    CHECK_FALSE(rep.rows[0].recursive.has_value());
    for (std::size_t n = 1; n < rep.rows.size(); ++n) REQUIRE(rep.rows[n].recursive.has_value());
    CHECK(rep.max_relative_gap <= 1e-10);
    CHECK(rep.recursion_within_intervals);
    CHECK(rep.non_decreasing);
    CHECK(rep.bounded);

    // closed form for this model: with c the thinning rate, tau m = c m and
    // E[Z_j] = r_j, each step adds (c(1-c)/c^2 + sigma^2 c / (c m)^2) / r_j
    const double c = 0.5;
    const double m = model.offspring.mean(0);
    const double sigma2 = model.offspring.variance(0);
    const double growth = c * m;
    long double expect = 1.0L;
    for (int j = 0; j < 12; ++j) {
        const long double rj = std::pow(static_cast<long double>(growth), j);
        expect += (c * (1.0 - c) / (c * c) + sigma2 * c / (growth * growth)) / rj;
    }
    CHECK_THAT(rep.rows.back().direct.low, WithinRel(static_cast<double>(expect), 1e-6));
    CHECK(rep.max_value < 1.05 * static_cast<double>(expect));
}

TEST_CASE("second moment recursion is exact for deterministic growth", "[martingale]") {
    auto rep = second_moment_recursion(doubling(), 10, 1e-12);
    for (const auto& row : rep.rows) {
        CHECK_THAT(row.direct.low, WithinAbs(1.0, 1e-12));
        if (row.recursive) CHECK_THAT(*row.recursive, WithinAbs(1.0, 1e-12));
    }
    CHECK(rep.max_relative_gap <= 1e-12);
    CHECK(rep.non_decreasing);
    CHECK(rep.bounded);
    CHECK_THAT(rep.max_value, WithinAbs(1.0, 1e-12));
}

TEST_CASE("normalized limit checker on the fixture menu", "[martingale]") {
    auto th = check_normalized_limit(fixtures::thinned_supercritical());
    CHECK(th.criterion == "normalized-limit");
    REQUIRE(th.hypotheses.size() == 7);
    CHECK(th.all_hold());
    CHECK(th.conclusion == cpve::conclusion_kind::no_conclusion);
    CHECK_THAT(*th.hypotheses[0].evidence.value, WithinRel(1.25, 1e-12));  // eta
    CHECK_THAT(*th.hypotheses[1].evidence.value, WithinRel(0.5, 1e-12));   // tau
    CHECK(*th.hypotheses[2].evidence.value == 0.0);                        // dominant from n=0
    CHECK(th.hypotheses[3].result == verdict::holds);
    CHECK(*th.hypotheses[4].evidence.value == 0.0);  // defect sum
    // binomial dispersion: tau^2(k) = k c (1-c), so the tail sum is c(1-c) zeta(2)
    CHECK_THAT(*th.hypotheses[5].evidence.value, WithinRel(0.25 * 1.6449340668482264, 1e-12));
    // offspring variance series: (sigma^2/m^2) * eta/(eta-1) = 0.168 * 5
    CHECK_THAT(*th.hypotheses[6].evidence.value, WithinRel(0.84, 1e-12));
    REQUIRE_FALSE(th.notes.empty());
    CHECK(th.notes.front().find("mean square") != std::string::npos);

    auto gw = check_normalized_limit(fixtures::gw_supercritical());
    CHECK(gw.all_hold());
    CHECK(*gw.hypotheses[5].evidence.value == 0.0);  // identity control: no dispersion
    CHECK_THAT(*gw.hypotheses[6].evidence.value, WithinRel(2.2, 1e-12));

    auto sub = check_normalized_limit(fixtures::subcritical_geometric());
    CHECK_FALSE(sub.all_hold());
    CHECK(sub.hypotheses[0].result == verdict::fails);
    CHECK(sub.hypotheses[1].result == verdict::holds);  // tau = 1
    CHECK(sub.hypotheses[2].result == verdict::inconclusive);
    CHECK(sub.hypotheses[3].result == verdict::holds);
    CHECK(sub.hypotheses[6].result == verdict::inconclusive);
    CHECK(sub.conclusion == cpve::conclusion_kind::no_conclusion);

    auto capped = check_normalized_limit(fixtures::capped_supercritical());
    CHECK(capped.hypotheses[0].result == verdict::fails);
    CHECK(capped.hypotheses[1].result == verdict::fails);  // tau = 0
}

TEST_CASE("normalized limit checker flags a dispersion bump and a negative defect",
          "[martingale]") {
    std::vector<integer_law> head;
    head.push_back(integer_law::deterministic(0));
    head.push_back(integer_law::deterministic(1));
    auto control = control_family::tabulated_per_k(std::move(head), control_family::binomial(0.5));
    model_spec model(offspring_schedule::constant(integer_law::deterministic(3)),
                     std::move(control), 1);

    auto rep = check_normalized_limit(model);
    REQUIRE(rep.hypotheses.size() == 7);
    CHECK(rep.hypotheses[0].result == verdict::holds);  // eta = 3 * 0.5
    CHECK_THAT(*rep.hypotheses[0].evidence.value, WithinRel(1.5, 1e-12));
    CHECK(rep.hypotheses[3].result == verdict::fails);  // ratio 1 then 1/2
    CHECK(rep.hypotheses[4].result == verdict::holds);  // still a finite sum
    CHECK_THAT(*rep.hypotheses[4].evidence.value, WithinRel(-0.5, 1e-12));
    CHECK(rep.hypotheses[4].note.find("negative") != std::string::npos);
    // tau^2(k)/k^2 is 0 at the head entry and positive on the tail: it bumps up
    CHECK(rep.hypotheses[5].result == verdict::fails);
    CHECK_FALSE(rep.all_hold());
}

TEST_CASE("normalized limit checker marks drifting schedules as sampled", "[martingale]") {
    model_spec model(
        offspring_schedule::geometric_seq(real_seq::geometric_approach(0.6, -0.2, 0.999)),
        control_family::identity(), 1);
    auto rep = check_normalized_limit(model);
    REQUIRE(rep.hypotheses.size() == 7);
    CHECK(rep.hypotheses[0].result == verdict::holds);
    CHECK(rep.hypotheses[2].result == verdict::inconclusive);  // never attained in finite time
    CHECK_FALSE(rep.hypotheses[2].evidence.conclusive);
    CHECK(rep.hypotheses[6].result == verdict::holds);
    CHECK(rep.hypotheses[6].evidence.method == cpve::evidence_method::tail_sampled);
    CHECK(*rep.hypotheses[6].evidence.value > 0.0);
    CHECK(std::isfinite(*rep.hypotheses[6].evidence.value));

    // head mean below the limit: dominance kicks in one generation late
    std::vector<integer_law> head = {integer_law::tabulated({{1, 1.0}})};
    model_spec late(offspring_schedule::explicit_with_tail(std::move(head),
                                                           integer_law::deterministic(2)),
                    control_family::identity(), 1);
    auto late_rep = check_normalized_limit(late);
    CHECK(late_rep.hypotheses[2].result == verdict::holds);
    CHECK(*late_rep.hypotheses[2].evidence.value == 1.0);
    CHECK(late_rep.hypotheses[2].note.find("generation 1") != std::string::npos);
}

TEST_CASE("w histograms at doubled horizons agree", "[martingale]") {
    auto model = fixtures::thinned_supercritical();
    mc_options opt;
    opt.population_cap = 1'000'000'000'000'000ull;

    auto run = [&](std::uint64_t horizon) {
        auto nz = build_normalizer(model, horizon);
        auto report = monte_carlo(model, horizon, 4000, derive_seed(20260821, horizon), opt);
        auto s = w_statistics(report, nz);
        CHECK(s.p_w_positive == report.survival_at_horizon);
        std::vector<double> surviving;
        for (double w : s.w_at_horizon)
            if (w > 0.0) surviving.push_back(w);
        return surviving;
    };

    auto w60 = run(60);
    auto w120 = run(120);
    REQUIRE(w60.size() > 500);
    REQUIRE(w120.size() > 500);
    const double p = oracle::ks_two_sample_pvalue(w60, w120);
    CHECK(p >= 1e-3);
}

TEST_CASE("two-sample ks oracle sanity", "[martingale]") {
    std::vector<double> a, b, shifted;
    for (int i = 0; i < 1000; ++i) {
        a.push_back(static_cast<double>(i) / 1000.0);
        b.push_back(static_cast<double>(i) / 1000.0 + 0.0004);
        shifted.push_back(static_cast<double>(i) / 1000.0 + 0.5);
    }
    CHECK(oracle::ks_two_sample_pvalue(a, a) == 1.0);
    CHECK(oracle::ks_two_sample_pvalue(a, b) > 0.5);
    CHECK(oracle::ks_two_sample_pvalue(a, shifted) < 1e-12);
}
