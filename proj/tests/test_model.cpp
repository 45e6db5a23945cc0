#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cpve/model.hpp"

using cpve::control_family;
using cpve::control_kind;
using cpve::integer_law;
using cpve::model_spec;
using cpve::offspring_schedule;
using cpve::real_seq;
using cpve::validation_error;
using Catch::Matchers::WithinAbs;

TEST_CASE("replication streams are deterministic and distinct", "[rng]") {
    auto a = cpve::replication_stream(123, 7);
    auto b = cpve::replication_stream(123, 7);
    auto c = cpve::replication_stream(123, 8);
    bool all_equal = true;
    bool any_diff_c = false;
    for (int i = 0; i < 64; ++i) {
        auto va = a(), vb = b(), vc = c();
        all_equal = all_equal && (va == vb);
        any_diff_c = any_diff_c || (va != vc);
    }
    CHECK(all_equal);
    CHECK(any_diff_c);
}

TEST_CASE("real sequences: evaluation and envelopes", "[sequences]") {
    auto c = real_seq::constant(2.0);
    CHECK(c.at(0) == 2.0);
    CHECK(c.at(1000) == 2.0);
    CHECK(c.is_constant());

    auto s = real_seq::geometric_approach(1.0, 0.5, 0.8);
    CHECK_THAT(s.at(0), WithinAbs(1.5, 1e-15));
    CHECK_THAT(s.at(1), WithinAbs(1.4, 1e-15));
    CHECK_THAT(s.limit(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.lo(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.hi(), WithinAbs(1.5, 1e-15));
    CHECK_THAT(s.hi_from(2), WithinAbs(1.32, 1e-12));

    auto down = real_seq::geometric_approach(1.0, -0.5, 0.5);
    CHECK_THAT(down.lo(), WithinAbs(0.5, 1e-15));
    CHECK_THAT(down.hi(), WithinAbs(1.0, 1e-15));

    CHECK_THROWS_AS(real_seq::geometric_approach(1.0, 0.5, 1.0), validation_error);
    CHECK_THROWS_AS(real_seq::geometric_approach(1.0, 0.5, -0.1), validation_error);
}

TEST_CASE("offspring schedules: laws, limits, envelopes", "[schedule]") {
    SECTION("constant schedule") {
        auto s = offspring_schedule::constant(integer_law::geometric(0.4));
        CHECK(s.law(0) == s.law(100));
        CHECK_THAT(s.mean(7), WithinAbs(2.0 / 3.0, 1e-15));
        CHECK_THAT(s.mean_limit(), WithinAbs(2.0 / 3.0, 1e-15));
        CHECK(s.eventually_constant());
        CHECK(s.head_length() == 0);
        auto mb = s.mean_bounds_from(0);
        CHECK(mb.lo == mb.hi);
    }
    SECTION("explicit head with constant tail") {
        auto s = offspring_schedule::explicit_with_tail(
            {integer_law::poisson(2.0), integer_law::binomial(4, 0.5)},
            integer_law::deterministic(1));
        CHECK(s.law(0).kind() == cpve::law_kind::poisson);
        CHECK(s.law(1).kind() == cpve::law_kind::binomial);
        CHECK(s.law(2).kind() == cpve::law_kind::deterministic);
        CHECK(s.law(50).kind() == cpve::law_kind::deterministic);
        CHECK_THAT(s.mean(0), WithinAbs(2.0, 1e-15));
        CHECK_THAT(s.mean(1), WithinAbs(2.0, 1e-15));
        CHECK_THAT(s.mean(2), WithinAbs(1.0, 1e-15));
        CHECK_THAT(s.mean_limit(), WithinAbs(1.0, 1e-15));
        CHECK_THAT(s.pmf0(0), WithinAbs(std::exp(-2.0), 1e-15));
        CHECK_THAT(s.pmf0(1), WithinAbs(0.0625, 1e-15));
        CHECK(s.pmf0(2) == 0.0);
        auto mb = s.mean_bounds_from(0);
        CHECK_THAT(mb.lo, WithinAbs(1.0, 1e-15));
        CHECK_THAT(mb.hi, WithinAbs(2.0, 1e-15));
        auto mb2 = s.mean_bounds_from(2);
        CHECK(mb2.lo == 1.0);
        CHECK(mb2.hi == 1.0);
        auto vm = s.var_over_mean2_bounds_from(0);
        CHECK_THAT(vm.lo, WithinAbs(0.0, 1e-15));   // deterministic tail
        CHECK_THAT(vm.hi, WithinAbs(0.5, 1e-15));   // poisson head: 2/4
    }
    SECTION("geometric parameter drift") {
        auto s = offspring_schedule::geometric_seq(real_seq::geometric_approach(0.5, 0.2, 0.9));
        CHECK(s.law(0).kind() == cpve::law_kind::geometric);
        CHECK_THAT(s.law(0).geometric_alpha(), WithinAbs(0.7, 1e-15));
        CHECK_THAT(s.mean(0), WithinAbs(0.7 / 0.3, 1e-12));
        CHECK_THAT(s.mean_limit(), WithinAbs(1.0, 1e-15));
        CHECK_FALSE(s.eventually_constant());
        auto mb = s.mean_bounds_from(0);
        CHECK_THAT(mb.lo, WithinAbs(1.0, 1e-15));
        CHECK_THAT(mb.hi, WithinAbs(7.0 / 3.0, 1e-12));
        auto vm = s.var_over_mean2_bounds_from(0);
        CHECK_THAT(vm.lo, WithinAbs(1.0 / 0.7, 1e-12)); // 1/alpha
        CHECK_THAT(vm.hi, WithinAbs(2.0, 1e-12));
        CHECK_THROWS_AS(
            offspring_schedule::geometric_seq(real_seq::geometric_approach(0.5, 0.5, 0.9)),
            validation_error);
    }
}

TEST_CASE("control families: closed-form queries per kind", "[control]") {
    SECTION("identity") {
        auto f = control_family::identity();
        CHECK(f.mean_at(7) == 7.0);
        CHECK(f.var_at(7) == 0.0);
        CHECK(f.ratio_inf() == 1.0);
        CHECK(f.ratio_sup() == 1.0);
        CHECK(f.ratio_limit() == 1.0);
        CHECK(f.ratio_nondecreasing());
        CHECK(f.var_over_k_sup() == 0.0);
        CHECK(f.d2_over_k2_sup() == 1.0);
        CHECK(f.gk_inf(0.9) == 0.0);
        CHECK(f.gk_inf(1.0) == 1.0);
        CHECK(f.multiplicative());
        CHECK(f.mult_ratio() == 1.0);
        CHECK(f.mult_var_slope() == 0.0);
        CHECK(f.zero_absorbing());
        REQUIRE(f.delta_zero_from().has_value());
        CHECK(*f.delta_zero_from() == 1);
    }
    SECTION("binomial thinning") {
        auto f = control_family::binomial(0.5);
        CHECK(f.mean_at(10) == 5.0);
        CHECK_THAT(f.var_at(10), WithinAbs(2.5, 1e-15));
        CHECK(f.ratio_inf() == 0.5);
        CHECK(f.ratio_sup() == 0.5);
        CHECK(f.ratio_nondecreasing());
        CHECK_THAT(f.var_over_k_sup(), WithinAbs(0.25, 1e-15));
        CHECK_THAT(f.d2_over_k2_sup(), WithinAbs(0.5, 1e-15));
        CHECK(f.gk_inf(0.99) == 0.0);
        CHECK(f.multiplicative());
        CHECK_THAT(f.mult_var_slope(), WithinAbs(0.25, 1e-15));
        CHECK_THROWS_AS(control_family::binomial(1.5), validation_error);
    }
    SECTION("poisson scaling") {
        auto f = control_family::poisson_scaled(1.2);
        CHECK_THAT(f.mean_at(5), WithinAbs(6.0, 1e-15));
        CHECK_THAT(f.var_at(5), WithinAbs(6.0, 1e-15));
        CHECK(f.ratio_sup() == 1.2);
        CHECK_THAT(f.var_over_k_sup(), WithinAbs(1.2, 1e-15));
        CHECK_THAT(f.d2_over_k2_sup(), WithinAbs(1.2 * 1.2 + 1.2, 1e-15));
        CHECK(f.multiplicative());
        CHECK_FALSE(control_family::poisson_scaled(0.0).gk_inf(0.5) == 0.0);
        CHECK_THROWS_AS(control_family::poisson_scaled(-1.0), validation_error);
    }
    SECTION("capped") {
        auto f = control_family::capped(5);
        CHECK(f.mean_at(3) == 3.0);
        CHECK(f.mean_at(9) == 5.0);
        CHECK(f.var_at(9) == 0.0);
        CHECK(f.ratio_limit() == 0.0);
        CHECK(f.ratio_inf() == 0.0);
        CHECK(f.ratio_sup() == 1.0);
        CHECK_FALSE(f.ratio_nondecreasing());
        CHECK_THAT(f.gk_inf(0.5), WithinAbs(std::pow(0.5, 5.0), 1e-15));
        CHECK_FALSE(f.multiplicative());
        CHECK_FALSE(f.delta_zero_from().has_value());
        REQUIRE(f.var_linear_from().has_value());
        CHECK(f.var_linear_from()->second == 0.0);
        CHECK_THROWS_AS(control_family::capped(0), validation_error);
    }
    SECTION("tabulated head over a parametric tail") {
        auto f = control_family::tabulated_per_k(
            {integer_law::deterministic(0), integer_law::tabulated({{0, 0.5}, {2, 0.5}})},
            control_family::binomial(0.5));
        CHECK(f.mean_at(0) == 0.0);
        CHECK(f.mean_at(1) == 1.0);   // tabulated head law at k=1
        CHECK(f.var_at(1) == 1.0);
        CHECK(f.mean_at(5) == 2.5);   // binomial tail beyond the head
        CHECK(f.ratio_limit() == 0.5);
        CHECK(f.ratio_inf() == 0.5);
        CHECK(f.ratio_sup() == 1.0);
        CHECK_FALSE(f.ratio_nondecreasing()); // head ratio 1 then tail at 0.5
        CHECK_THAT(f.var_over_k_sup(), WithinAbs(1.0, 1e-15));
        CHECK(f.zero_absorbing());
        REQUIRE(f.delta_zero_from().has_value());
        CHECK(*f.delta_zero_from() == 2);
        REQUIRE(f.var_linear_from().has_value());
        CHECK(f.var_linear_from()->first == 2);
        CHECK_THAT(f.var_linear_from()->second, WithinAbs(0.25, 1e-15));
        CHECK_FALSE(f.multiplicative());

        auto g = control_family::tabulated_per_k({integer_law::tabulated({{1, 1.0}})},
                                                 control_family::identity());
        CHECK_FALSE(g.zero_absorbing()); // phi(0) = 1 resurrects the population

        CHECK_THROWS_AS(control_family::tabulated_per_k({}, control_family::identity()),
                        validation_error);
        CHECK_THROWS_AS(
            control_family::tabulated_per_k(
                {integer_law::deterministic(0)},
                control_family::tabulated_per_k({integer_law::deterministic(0)},
                                                control_family::identity())),
            validation_error);
    }
    SECTION("pgf dispatch matches law pgf") {
        auto f = control_family::binomial(0.3);
        for (double s : {0.0, 0.4, 1.0})
            CHECK_THAT(f.pgf_at(6, s), WithinAbs(integer_law::binomial(6, 0.3).pgf(s), 1e-12));
        auto p = control_family::poisson_scaled(0.7);
        for (double s : {0.0, 0.4, 1.0})
            CHECK_THAT(p.pgf_at(4, s), WithinAbs(integer_law::poisson(2.8).pgf(s), 1e-12));
    }
    SECTION("sampling dispatch") {
        auto g = cpve::replication_stream(9, 0);
        CHECK(control_family::identity().sample_at(13, g) == 13);
        CHECK(control_family::capped(5).sample_at(13, g) == 5);
        CHECK(control_family::binomial(0.0).sample_at(13, g) == 0);
        CHECK(control_family::binomial(1.0).sample_at(13, g) == 13);
    }
}

TEST_CASE("model validation", "[model]") {
    CHECK_THROWS_AS(model_spec(offspring_schedule::constant(integer_law::geometric(0.5)),
                               control_family::identity(), 0),
                    validation_error);
    auto m = model_spec(offspring_schedule::constant(integer_law::geometric(0.5)),
                        control_family::identity(), 3);
    CHECK(m.initial == 3);
    CHECK(m == m);
}
