#include <catch2/catch_amalgamated.hpp>

#include "cpve/model_io.hpp"

#include "fixtures.hpp"

using cpve::control_family;
using cpve::integer_law;
using cpve::model_spec;
using cpve::offspring_schedule;
using cpve::parse_model_text;
using cpve::real_seq;
using cpve::serialize_model;
using cpve::validation_error;

namespace {

void check_round_trip(const model_spec& m) {
    const std::string text = serialize_model(m);
    const model_spec back = parse_model_text(text);
    CHECK(back == m);
    // canonical form is a fixed point
    CHECK(serialize_model(back) == text);
}

}  // namespace

TEST_CASE("model text round-trips through the canonical form", "[model_io]") {
    check_round_trip(fixtures::gw_supercritical());
    check_round_trip(fixtures::thinned_supercritical());
    check_round_trip(fixtures::subcritical_geometric());
    check_round_trip(fixtures::capped_supercritical());

    // per-k control with a tabulated head and a parametric tail
    check_round_trip(model_spec(
        offspring_schedule::constant(integer_law::tabulated({{0, 0.25}, {2, 0.75}})),
        control_family::tabulated_per_k(
            {integer_law::deterministic(0), integer_law::tabulated({{0, 0.5}, {1, 0.5}})},
            control_family::binomial(0.5)),
        3));

    // drifting offspring parameter
    check_round_trip(model_spec(
        offspring_schedule::geometric_seq(real_seq::geometric_approach(0.6, -0.2, 0.5)),
        control_family::identity(), 1));

    // per-generation offspring head before a constant tail
    check_round_trip(model_spec(
        offspring_schedule::explicit_with_tail(
            {integer_law::poisson(2.0), integer_law::binomial(4, 0.25)},
            integer_law::geometric(0.4)),
        control_family::poisson_scaled(1.5), 2));

    check_round_trip(model_spec(offspring_schedule::constant(integer_law::deterministic(2)),
                                control_family::capped(7), 1));
}

TEST_CASE("hand-written model files parse", "[model_io]") {
    const std::string text = R"(# supercritical reference model
initial 1
offspring {
  law tabulated {
    0 0.25
    1 0.25
    2 0.5
  }
}
control identity
)";
    CHECK(parse_model_text(text) == fixtures::gw_supercritical());

    // stanza order is free, whitespace is free, comments may trail tokens
    const std::string scrambled =
        "control binomial 0.5 # thinning\n"
        "offspring{law tabulated{0 0.1 1 0.1 3 0.8}}\n"
        "\t initial   1\n";
    CHECK(parse_model_text(scrambled) == fixtures::thinned_supercritical());
}

TEST_CASE("parse errors carry line numbers and field names", "[model_io]") {
    auto message = [](const std::string& text) -> std::string {
        try {
            parse_model_text(text);
        } catch (const validation_error& e) {
            return e.what();
        }
        return "(no error)";
    };

    SECTION("a pmf that does not sum to one names the law and the line") {
        const std::string msg = message(
            "initial 1\n"
            "control identity\n"
            "offspring {\n"
            "  law tabulated {\n"
            "    0 0.4\n"
            "    1 0.5\n"
            "  }\n"
            "}\n");
        CHECK(msg.find("line 4") != std::string::npos);
        CHECK(msg.find("tabulated law") != std::string::npos);
        CHECK(msg.find("pmf sums to") != std::string::npos);
    }

    SECTION("an out-of-range geometric parameter is rejected where it is typed") {
        const std::string msg = message(
            "initial 1\ncontrol identity\noffspring { law geometric 1.2 }\n");
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("alpha must lie in (0,1)") != std::string::npos);
    }

    SECTION("an out-of-range schedule ratio is rejected") {
        const std::string msg = message(
            "initial 1\ncontrol identity\noffspring { alpha 0.5 0.1 1.5 }\n");
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("ratio must lie in [0,1)") != std::string::npos);
    }

    SECTION("unknown stanzas, laws and control rules are named") {
        CHECK(message("offsprings { law deterministic 2 }\n").find("unknown stanza 'offsprings'") !=
              std::string::npos);
        CHECK(message("initial 1\ncontrol identity\noffspring { law zeta 2 }\n")
                  .find("unknown law kind 'zeta'") != std::string::npos);
        CHECK(message("initial 1\noffspring { law deterministic 2 }\ncontrol affine 2\n")
                  .find("unknown control rule 'affine'") != std::string::npos);
    }

    SECTION("missing and duplicate stanzas") {
        CHECK(message("initial 1\noffspring { law deterministic 2 }\n")
                  .find("missing control stanza") != std::string::npos);
        CHECK(message("initial 1\ncontrol identity\n").find("missing offspring stanza") !=
              std::string::npos);
        CHECK(message("offspring { law deterministic 2 }\ncontrol identity\n")
                  .find("missing initial stanza") != std::string::npos);
        CHECK(message("initial 1\ninitial 2\n").find("duplicate initial stanza") !=
              std::string::npos);
    }

    SECTION("truncated input reports what was expected") {
        const std::string msg = message("initial 1\noffspring {\n  law tabulated {\n    0 1.0\n");
        CHECK(msg.find("unexpected end of file") != std::string::npos);
    }

    SECTION("malformed numbers name the field") {
        CHECK(message("initial one\n").find("expected a non-negative integer, got 'one'") !=
              std::string::npos);
        CHECK(message("initial 1\ncontrol binomial half\n")
                  .find("control binomial c: expected a number, got 'half'") != std::string::npos);
    }

    SECTION("a zero-mass initial population is rejected") {
        const std::string msg =
            message("initial 0\noffspring { law deterministic 2 }\ncontrol identity\n");
        CHECK(msg != "(no error)");
    }
}

TEST_CASE("reading a missing model file fails cleanly", "[model_io]") {
    CHECK_THROWS_AS(cpve::parse_model_file("/nonexistent/path.model"), validation_error);
}

TEST_CASE("shipped fixture files match the in-code builders", "[model_io]") {
    const std::string dir = std::string(CPVE_REPO_ROOT) + "/fixtures/";
    CHECK(cpve::parse_model_file(dir + "gw_supercritical.model") == fixtures::gw_supercritical());
    CHECK(cpve::parse_model_file(dir + "thinned_supercritical.model") ==
          fixtures::thinned_supercritical());
    CHECK(cpve::parse_model_file(dir + "subcritical_geometric.model") ==
          fixtures::subcritical_geometric());
    CHECK(cpve::parse_model_file(dir + "capped_supercritical.model") ==
          fixtures::capped_supercritical());
}
