#pragma once

// Model files: a small whitespace-and-braces text format, designed to be
// hand-written and diffed. Three stanzas in any order, each exactly once:
//
//   initial 1
//
//   offspring {
//     law tabulated {
//       0 0.25
//       1 0.25
//       2 0.5
//     }
//   }
//
//   control identity
//
// The offspring stanza holds either a single `law ...` (one law for every
// generation), a `head { law ... }` / `tail { law ... }` pair (per-generation
// laws, then a law from generation len(head) on; head may be omitted), or
// `alpha <limit> <coeff> <ratio>` for the geometric family with parameter
// alpha_n = limit + coeff * ratio^n. Control rules: identity, binomial <c>,
// poisson <lambda>, capped <M>, or `per-k { head { law ... } tail <rule> }`
// where the head laws cover progenitor counts k = 0, 1, ... in order.
// Laws: deterministic <v>, geometric <alpha>, poisson <lambda>,
// binomial <t> <p>, tabulated { <value> <prob> ... }.
// `#` starts a comment; braces delimit themselves, whitespace is free.
//
// parse_model_text(serialize_model(m)) compares equal to m.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/model.hpp"

namespace cpve {

namespace detail {

struct token {
    std::string text;
    std::size_t line = 0;
};

inline std::vector<token> tokenize_model(const std::string& text) {
    std::vector<token> out;
    std::size_t line = 1;
    std::string word;
    bool in_comment = false;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back({word, line});
            word.clear();
        }
    };
    for (char c : text) {
        if (c == '\n') {
            flush();
            in_comment = false;
            ++line;
            continue;
        }
        if (in_comment) continue;
        if (c == '#') {
            flush();
            in_comment = true;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            flush();
            continue;
        }
        if (c == '{' || c == '}') {
            flush();
            out.push_back({std::string(1, c), line});
            continue;
        }
        word.push_back(c);
    }
    flush();
    return out;
}

class model_parser {
public:
    explicit model_parser(const std::string& text) : tokens_(tokenize_model(text)) {}

    model_spec parse() {
        bool have_initial = false, have_offspring = false, have_control = false;
        std::uint64_t initial = 0;
        std::optional<offspring_schedule> offspring;
        std::optional<control_family> control;
        while (!at_end()) {
            const token& t = next("a stanza: initial, offspring or control");
            if (t.text == "initial") {
                if (have_initial) fail(t.line, "duplicate initial stanza");
                initial = parse_uint("initial population");
                have_initial = true;
            } else if (t.text == "offspring") {
                if (have_offspring) fail(t.line, "duplicate offspring stanza");
                offspring = parse_offspring();
                have_offspring = true;
            } else if (t.text == "control") {
                if (have_control) fail(t.line, "duplicate control stanza");
                control = parse_control();
                have_control = true;
            } else {
                fail(t.line, "unknown stanza '" + t.text +
                                 "', expected initial, offspring or control");
            }
        }
        if (!have_offspring) fail(last_line(), "missing offspring stanza");
        if (!have_control) fail(last_line(), "missing control stanza");
        if (!have_initial) fail(last_line(), "missing initial stanza");
        return model_spec(std::move(*offspring), std::move(*control), initial);
    }

private:
    std::vector<token> tokens_;
    std::size_t pos_ = 0;

    bool at_end() const { return pos_ >= tokens_.size(); }
    std::size_t last_line() const { return tokens_.empty() ? 1 : tokens_.back().line; }

    [[noreturn]] void fail(std::size_t line, const std::string& what) const {
        throw validation_error("model file line " + std::to_string(line) + ": " + what);
    }

    const token& peek(const std::string& expected) const {
        if (at_end())
            throw validation_error("model file line " + std::to_string(last_line()) +
                                   ": unexpected end of file, expected " + expected);
        return tokens_[pos_];
    }

    const token& next(const std::string& expected) {
        const token& t = peek(expected);
        ++pos_;
        return t;
    }

    void expect(const std::string& literal, const std::string& where) {
        const token& t = next("'" + literal + "' " + where);
        if (t.text != literal)
            fail(t.line, "expected '" + literal + "' " + where + ", got '" + t.text + "'");
    }

    std::uint64_t parse_uint(const std::string& field) {
        const token& t = next(field);
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size())
            fail(t.line, field + ": expected a non-negative integer, got '" + t.text + "'");
        return v;
    }

    double parse_real(const std::string& field) {
        const token& t = next(field);
        try {
            std::size_t used = 0;
            double v = std::stod(t.text, &used);
            if (used != t.text.size()) throw std::invalid_argument(t.text);
            return v;
        } catch (const std::exception&) {
            fail(t.line, field + ": expected a number, got '" + t.text + "'");
        }
    }

    // rethrows factory validation with the line where the construct started
    template <typename F>
    auto with_context(std::size_t line, const std::string& what, F&& make)
        -> decltype(make()) {
        try {
            return make();
        } catch (const validation_error& e) {
            fail(line, what + ": " + e.what());
        }
    }

    integer_law parse_law() {
        expect("law", "before a law kind");
        const token& kind = next("a law kind");
        const std::size_t line = kind.line;
        if (kind.text == "deterministic") {
            std::uint64_t v = parse_uint("deterministic value");
            return with_context(line, "deterministic law",
                                [&] { return integer_law::deterministic(v); });
        }
        if (kind.text == "geometric") {
            double a = parse_real("geometric alpha");
            return with_context(line, "geometric law", [&] { return integer_law::geometric(a); });
        }
        if (kind.text == "poisson") {
            double l = parse_real("poisson lambda");
            return with_context(line, "poisson law", [&] { return integer_law::poisson(l); });
        }
        if (kind.text == "binomial") {
            std::uint64_t t = parse_uint("binomial trials");
            double p = parse_real("binomial p");
            return with_context(line, "binomial law", [&] { return integer_law::binomial(t, p); });
        }
        if (kind.text == "tabulated") {
            expect("{", "after tabulated");
            std::vector<std::pair<std::uint64_t, double>> entries;
            while (peek("a value/probability pair or '}'").text != "}") {
                std::uint64_t v = parse_uint("tabulated value");
                double p = parse_real("tabulated probability");
                entries.emplace_back(v, p);
            }
            expect("}", "closing the tabulated law");
            return with_context(line, "tabulated law",
                                [&] { return integer_law::tabulated(std::move(entries)); });
        }
        fail(line, "unknown law kind '" + kind.text + "'");
    }

    std::vector<integer_law> parse_law_block(const std::string& what) {
        expect("{", "opening " + what);
        std::vector<integer_law> laws;
        while (peek("'law' or '}' in " + what).text != "}") laws.push_back(parse_law());
        expect("}", "closing " + what);
        return laws;
    }

    offspring_schedule parse_offspring() {
        expect("{", "opening the offspring stanza");
        const token& first = peek("law, head, tail or alpha");
        const std::size_t line = first.line;
        offspring_schedule out = [&] {
            if (first.text == "law") {
                integer_law law = parse_law();
                return with_context(line, "offspring schedule", [&] {
                    return offspring_schedule::constant(std::move(law));
                });
            }
            if (first.text == "head" || first.text == "tail") {
                std::vector<integer_law> head;
                if (first.text == "head") {
                    ++pos_;
                    head = parse_law_block("the offspring head");
                }
                expect("tail", "after the offspring head");
                std::vector<integer_law> tail = parse_law_block("the offspring tail");
                if (tail.size() != 1)
                    fail(line, "offspring tail: expected exactly one law, got " +
                                   std::to_string(tail.size()));
                return with_context(line, "offspring schedule", [&] {
                    return offspring_schedule::explicit_with_tail(std::move(head),
                                                                  std::move(tail.front()));
                });
            }
            if (first.text == "alpha") {
                ++pos_;
                double limit = parse_real("alpha limit");
                double coeff = parse_real("alpha coeff");
                double ratio = parse_real("alpha ratio");
                return with_context(line, "offspring alpha sequence", [&] {
                    return offspring_schedule::geometric_seq(
                        real_seq::geometric_approach(limit, coeff, ratio));
                });
            }
            fail(first.line, "expected law, head, tail or alpha in the offspring stanza, got '" +
                                 first.text + "'");
        }();
        expect("}", "closing the offspring stanza");
        return out;
    }

    control_family parse_parametric_control(const std::string& where) {
        const token& kind = next("a control rule " + where);
        const std::size_t line = kind.line;
        if (kind.text == "identity") return control_family::identity();
        if (kind.text == "binomial") {
            double c = parse_real("control binomial c");
            return with_context(line, "binomial control", [&] { return control_family::binomial(c); });
        }
        if (kind.text == "poisson") {
            double l = parse_real("control poisson lambda");
            return with_context(line, "poisson control",
                                [&] { return control_family::poisson_scaled(l); });
        }
        if (kind.text == "capped") {
            std::uint64_t m = parse_uint("control cap");
            return with_context(line, "capped control", [&] { return control_family::capped(m); });
        }
        fail(line, "unknown control rule '" + kind.text + "' " + where);
    }

    control_family parse_control() {
        const token& kind = peek("a control rule");
        if (kind.text != "per-k") return parse_parametric_control("in the control stanza");
        const std::size_t line = kind.line;
        ++pos_;
        expect("{", "opening the per-k control");
        expect("head", "in the per-k control");
        std::vector<integer_law> head = parse_law_block("the per-k head");
        expect("tail", "after the per-k head");
        control_family tail = parse_parametric_control("as the per-k tail");
        expect("}", "closing the per-k control");
        return with_context(line, "per-k control", [&] {
            return control_family::tabulated_per_k(std::move(head), std::move(tail));
        });
    }
};

inline std::string real_token(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw internal_error("real_token: to_chars failed");
    return std::string(buf, p);
}

inline void serialize_law(std::ostringstream& os, const integer_law& law,
                          const std::string& indent) {
    os << indent << "law ";
    switch (law.kind()) {
        case law_kind::deterministic:
            os << "deterministic " << law.deterministic_value() << "\n";
            return;
        case law_kind::geometric:
            os << "geometric " << real_token(law.geometric_alpha()) << "\n";
            return;
        case law_kind::poisson:
            os << "poisson " << real_token(law.poisson_lambda()) << "\n";
            return;
        case law_kind::binomial:
            os << "binomial " << law.binomial_trials() << " " << real_token(law.binomial_p())
               << "\n";
            return;
        case law_kind::tabulated: {
            os << "tabulated {\n";
            const auto& values = law.tabulated_values();
            const auto& probs = law.tabulated_probs();
            for (std::size_t i = 0; i < values.size(); ++i)
                os << indent << "  " << values[i] << " " << real_token(probs[i]) << "\n";
            os << indent << "}\n";
            return;
        }
    }
    throw internal_error("serialize_law: bad kind");
}

inline void serialize_parametric_control(std::ostringstream& os, const control_family& c) {
    switch (c.kind()) {
        case control_kind::identity:
            os << "identity";
            return;
        case control_kind::binomial:
            os << "binomial " << real_token(c.binomial_c());
            return;
        case control_kind::poisson_scaled:
            os << "poisson " << real_token(c.poisson_lambda());
            return;
        case control_kind::capped:
            os << "capped " << c.cap_value();
            return;
        case control_kind::tabulated_per_k:
            throw internal_error("serialize_parametric_control: per-k is not parametric");
    }
    throw internal_error("serialize_parametric_control: bad kind");
}

}  // namespace detail

inline model_spec parse_model_text(const std::string& text) {
    return detail::model_parser(text).parse();
}

inline model_spec parse_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_text(buf.str());
}

// Canonical form; parses back to an equal model.
inline std::string serialize_model(const model_spec& model) {
    std::ostringstream os;
    os << "initial " << model.initial << "\n\n";

    os << "offspring {\n";
    const auto& sched = model.offspring;
    if (sched.eventually_constant()) {
        if (sched.head_laws().empty()) {
            detail::serialize_law(os, sched.tail_law(), "  ");
        } else {
            os << "  head {\n";
            for (const auto& law : sched.head_laws()) detail::serialize_law(os, law, "    ");
            os << "  }\n  tail {\n";
            detail::serialize_law(os, sched.tail_law(), "    ");
            os << "  }\n";
        }
    } else {
        const real_seq& alpha = sched.alpha_seq();
        os << "  alpha " << detail::real_token(alpha.limit()) << " "
           << detail::real_token(alpha.coeff()) << " " << detail::real_token(alpha.ratio())
           << "\n";
    }
    os << "}\n\n";

    os << "control ";
    if (model.control.kind() == control_kind::tabulated_per_k) {
        os << "per-k {\n  head {\n";
        for (const auto& law : model.control.head_laws())
            detail::serialize_law(os, law, "    ");
        os << "  }\n  tail ";
        detail::serialize_parametric_control(os, model.control.tail_rule());
        os << "\n}\n";
    } else {
        detail::serialize_parametric_control(os, model.control);
        os << "\n";
    }
    return os.str();
}

}  // namespace cpve
