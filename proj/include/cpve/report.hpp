#pragma once

// Output documents: CSV tables and JSON reports built from module results.
// Everything here is a pure function of its inputs, so two runs with the
// same model, config and seed produce byte-identical bytes whatever the
// worker count. Rules that keep that true: ordered JSON objects, doubles
// printed in shortest round-trip form, no timestamps or host data, and the
// worker count never echoed into any document.
//
// Non-finite numbers: JSON encodes an unbounded interval end as null, CSV
// prints "inf". Both are documented in the shipped schema.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpve/criteria.hpp"
#include "cpve/exact.hpp"
#include "cpve/martingale.hpp"
#include "cpve/model.hpp"
#include "cpve/model_io.hpp"
#include "cpve/simulate.hpp"
#include "cpve/version.hpp"

namespace cpve {

using ordered_json = nlohmann::ordered_json;

// Everything a combined run needs beyond the model itself. workers is an
// execution detail: it changes scheduling, never bytes.
struct run_config {
    std::uint64_t horizon = 200;            // Monte Carlo generations
    std::uint64_t replications = 100'000;
    std::uint64_t seed = 1;
    std::uint64_t band = 20;                // duality mid-band upper edge
    double eps = 1e-12;                     // exact-engine trim budget
    std::uint64_t state_cap = 1'000'000;
    std::uint64_t exact_horizon = 60;       // exact-engine generations
    std::uint64_t martingale_horizon = 12;  // exact W moments up to here
    std::uint64_t population_cap = 1'000'000'000'000ull;
    std::uint64_t chunk_size = 4096;
    unsigned workers = 0;
    std::uint64_t probe_k_max = 10'000;     // criteria probe overrides
    std::uint64_t probe_n_max = 1'000;
    std::uint64_t matrix_n = 20;            // growth-rate matrix extent
    std::uint64_t matrix_k = 20;

    void validate() const {
        if (horizon < 1) throw validation_error("horizon must be >= 1");
        if (replications < 1) throw validation_error("replications must be >= 1");
        if (band < 1) throw validation_error("band must be >= 1");
        if (!(eps > 0.0) || eps >= 1.0)
            throw validation_error("eps must lie in (0,1)");
        if (state_cap < 2) throw validation_error("state cap must be >= 2");
        if (exact_horizon < 1) throw validation_error("exact horizon must be >= 1");
        if (martingale_horizon < 1) throw validation_error("martingale horizon must be >= 1");
        if (population_cap < 2) throw validation_error("population cap must be >= 2");
        if (chunk_size < 1) throw validation_error("chunk size must be >= 1");
        if (probe_k_max < 1 || probe_n_max < 1)
            throw validation_error("probe extents must be >= 1");
        if (matrix_n < 1 || matrix_k < 1)
            throw validation_error("growth matrix extents must be >= 1");
    }

    probe_options probe() const {
        probe_options p;
        p.k_max = probe_k_max;
        p.n_max = probe_n_max;
        return p;
    }

    mc_options mc() const {
        mc_options o;
        o.band = band;
        o.population_cap = population_cap;
        o.chunk_size = chunk_size;
        o.workers = workers;
        return o;
    }

    propagate_options exact() const {
        propagate_options o;
        o.eps = eps;
        o.state_cap = state_cap;
        return o;
    }
};

namespace detail {

inline ordered_json jnum(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline ordered_json jnum(const std::optional<double>& v) {
    return v ? jnum(*v) : ordered_json(nullptr);
}

inline ordered_json jinterval(double low, double high) {
    return ordered_json{jnum(low), jnum(high)};
}

inline ordered_json jinterval(const value_interval& v) { return jinterval(v.low, v.high); }
inline ordered_json jinterval(const wilson_interval& v) { return jinterval(v.low, v.high); }

inline ordered_json jnum_array(const std::vector<double>& xs) {
    ordered_json a = ordered_json::array();
    for (double x : xs) a.push_back(jnum(x));
    return a;
}

inline ordered_json jinterval_array(const std::vector<value_interval>& xs) {
    ordered_json a = ordered_json::array();
    for (const auto& x : xs) a.push_back(jinterval(x));
    return a;
}

}  // namespace detail

// ---- criteria -------------------------------------------------------------

inline ordered_json condition_report_json(const condition_report& r) {
    ordered_json hyps = ordered_json::array();
    for (const auto& h : r.hypotheses) {
        ordered_json e;
        e["value"] = detail::jnum(h.evidence.value);
        e["method"] = to_string(h.evidence.method);
        e["probe_range"] = h.evidence.probe_range;
        e["conclusive"] = h.evidence.conclusive;
        ordered_json j;
        j["name"] = h.name;
        j["result"] = to_string(h.result);
        j["evidence"] = std::move(e);
        j["note"] = h.note;
        hyps.push_back(std::move(j));
    }
    ordered_json j;
    j["criterion"] = r.criterion;
    j["hypotheses"] = std::move(hyps);
    j["conclusion"] = to_string(r.conclusion);
    j["survival_lower_bound"] = detail::jnum(r.survival_lower_bound);
    j["minimal_viable_initial"] =
        r.minimal_viable_initial ? ordered_json(*r.minimal_viable_initial) : ordered_json(nullptr);
    j["bound_at_minimal_initial"] = detail::jnum(r.bound_at_minimal_initial);
    j["notes"] = r.notes;
    return j;
}

// The five closed-form criteria, keyed by criterion name; the report command
// adds the normalized-limit check on top.
inline ordered_json criteria_bundle_json(const model_spec& model, const probe_options& probe,
                                         bool include_normalized_limit) {
    ordered_json out;
    for (const condition_report& r :
         {check_duality(model), check_subcritical_ratio(model),
          check_control_pgf_floor(model, probe), check_second_moment_survival(model),
          check_sustained_growth(model, probe)})
        out[r.criterion] = condition_report_json(r);
    if (include_normalized_limit) {
        condition_report r = check_normalized_limit(model, probe);
        out[r.criterion] = condition_report_json(r);
    }
    return out;
}

inline std::string growth_matrix_csv(const std::vector<std::vector<double>>& matrix) {
    if (matrix.empty()) throw validation_error("growth matrix is empty");
    std::string out = "n";
    for (std::size_t k = 1; k <= matrix.front().size(); ++k)
        out += ",mu_k" + std::to_string(k);
    out += "\n";
    for (std::size_t n = 0; n < matrix.size(); ++n) {
        out += std::to_string(n);
        for (double v : matrix[n]) {
            out += ',';
            out += detail::real_token(v);
        }
        out += "\n";
    }
    return out;
}

// ---- Monte Carlo ----------------------------------------------------------

// Aggregate view of a run; per-path arrays stay in memory.
inline ordered_json simulate_json(const mc_report& r) {
    ordered_json j;
    j["replications"] = r.replications;
    j["horizon"] = r.horizon;
    j["band"] = r.band;
    j["survival_at_horizon"] = detail::jnum(r.survival_at_horizon);
    j["survival_ci"] = detail::jinterval(r.survival_ci);
    j["mid_band_freq"] = detail::jnum(r.mid_band_freq);
    j["exploded_paths"] = r.exploded_paths;
    j["extinct_by_gen"] = detail::jnum_array(r.extinct_by_gen);
    j["mean_z"] = detail::jnum_array(r.mean_z);
    j["second_moment_z"] = detail::jnum_array(r.second_moment_z);
    j["mid_band_by_gen"] = detail::jnum_array(r.mid_band_by_gen);
    return j;
}

inline std::string simulate_csv(const mc_report& r) {
    std::string out = "n,extinct_freq,mean_z,mid_band_freq\n";
    for (std::size_t n = 0; n < r.extinct_by_gen.size(); ++n) {
        out += std::to_string(n);
        out += ',';
        out += detail::real_token(r.extinct_by_gen[n]);
        out += ',';
        out += detail::real_token(r.mean_z[n]);
        out += ',';
        out += detail::real_token(r.mid_band_by_gen[n]);
        out += "\n";
    }
    return out;
}

// ---- exact ----------------------------------------------------------------

inline std::string exact_csv(const propagation_result& result) {
    const std::vector<extinction_bracket> q = extinction_bounds(result);
    const std::vector<moment_intervals> moments = exact_moments(result);
    std::string out = "n,q_low,q_high,mean_low,mean_high\n";
    for (std::size_t n = 0; n < q.size(); ++n) {
        out += std::to_string(n);
        out += ',';
        out += detail::real_token(q[n].low);
        out += ',';
        out += detail::real_token(q[n].high);
        out += ',';
        out += detail::real_token(moments[n].mean.low);
        out += ',';
        out += detail::real_token(moments[n].mean.high);
        out += "\n";
    }
    return out;
}

inline ordered_json exact_pmf_json(const propagation_result& result) {
    ordered_json gens = ordered_json::array();
    for (const auto& pmf : result.pmfs) {
        ordered_json g;
        g["n"] = pmf.generation;
        g["leaked"] = detail::jnum(pmf.leaked);
        g["escaped"] = detail::jnum(pmf.escaped);
        g["mass"] = detail::jnum_array(pmf.mass);
        gens.push_back(std::move(g));
    }
    ordered_json j;
    j["eps"] = detail::jnum(result.options.eps);
    j["state_cap"] = result.options.state_cap;
    j["generations"] = std::move(gens);
    return j;
}

inline ordered_json exact_section_json(const propagation_result& result) {
    const std::vector<moment_intervals> moments = exact_moments(result);
    ordered_json j;
    j["horizon"] = result.pmfs.empty() ? 0 : result.pmfs.size() - 1;
    j["eps"] = detail::jnum(result.options.eps);
    j["state_cap"] = result.options.state_cap;
    ordered_json qs = ordered_json::array();
    for (const auto& b : extinction_bounds(result)) qs.push_back(detail::jinterval(b.low, b.high));
    j["q_by_gen"] = std::move(qs);
    const extinction_bracket limit = extinction_limit_bracket(result);
    j["q_limit"] = detail::jinterval(limit.low, limit.high);
    ordered_json means = ordered_json::array(), seconds = ordered_json::array();
    for (const auto& m : moments) {
        means.push_back(detail::jinterval(m.mean));
        seconds.push_back(detail::jinterval(m.second));
    }
    j["mean_by_gen"] = std::move(means);
    j["second_moment_by_gen"] = std::move(seconds);
    j["terminal_leaked"] = detail::jnum(result.pmfs.back().leaked);
    j["terminal_escaped"] = detail::jnum(result.pmfs.back().escaped);
    return j;
}

// ---- martingale -----------------------------------------------------------

// Equal-width histogram of W at the horizon. Paths at exactly zero are
// counted apart so the bins describe the surviving mass; the top edge is
// closed so the maximum sample lands in the last bin.
inline ordered_json w_histogram_json(const std::vector<double>& w, std::uint64_t bins = 40) {
    if (bins < 1) throw validation_error("histogram needs bins >= 1");
    std::uint64_t zeros = 0;
    double wmax = 0.0;
    for (double v : w) {
        if (v <= 0.0) {
            ++zeros;
        } else if (v > wmax) {
            wmax = v;
        }
    }
    ordered_json j;
    j["samples"] = w.size();
    j["zero_paths"] = zeros;
    j["positive_paths"] = w.size() - zeros;
    if (wmax <= 0.0) {
        j["bin_edges"] = ordered_json::array();
        j["counts"] = ordered_json::array();
        return j;
    }
    const double width = wmax / static_cast<double>(bins);
    std::vector<std::uint64_t> counts(bins, 0);
    for (double v : w) {
        if (v <= 0.0) continue;
        auto idx = static_cast<std::uint64_t>(v / width);
        if (idx >= bins) idx = bins - 1;
        ++counts[idx];
    }
    ordered_json edges = ordered_json::array();
    for (std::uint64_t b = 0; b <= bins; ++b)
        edges.push_back(detail::jnum(width * static_cast<double>(b)));
    j["bin_edges"] = std::move(edges);
    j["counts"] = counts;
    return j;
}

// One row per generation up to the exact-feasible horizon: interval moments
// from the truncated propagation, survival frequency from the Monte Carlo
// run (W_n > 0 exactly when Z_n > 0).
inline std::string martingale_csv(const supermartingale_report& exact,
                                  const second_moment_report& second,
                                  const std::vector<double>& extinct_by_gen) {
    std::string out = "n,ew_low,ew_high,ew2_low,ew2_high,p_w_positive\n";
    const std::size_t rows = std::min(exact.mean_w.size(), second.rows.size());
    for (std::size_t n = 0; n < rows; ++n) {
        out += std::to_string(n);
        out += ',';
        out += detail::real_token(exact.mean_w[n].low);
        out += ',';
        out += detail::real_token(exact.mean_w[n].high);
        out += ',';
        out += detail::real_token(second.rows[n].direct.low);
        out += ',';
        out += detail::real_token(second.rows[n].direct.high);
        out += ',';
        out += n < extinct_by_gen.size() ? detail::real_token(1.0 - extinct_by_gen[n]) : "nan";
        out += "\n";
    }
    return out;
}

inline ordered_json normalizer_json(const normalizer& nz) {
    ordered_json j;
    j["tau"] = detail::jnum(nz.tau);
    j["monotone_ratio"] = nz.monotone_ratio_ok;
    j["eta"] = detail::jnum(nz.eta);
    j["growth_dominant_from"] = nz.growth_dominant_from
                                    ? ordered_json(*nz.growth_dominant_from)
                                    : ordered_json(nullptr);
    j["log_r"] = detail::jnum_array(nz.log_r);
    return j;
}

inline ordered_json delta_json(const delta_seq& d) {
    ordered_json j;
    j["tau"] = detail::jnum(d.tau);
    j["head"] = detail::jnum_array(d.head);
    j["zero_beyond_window"] = d.zero_beyond_window;
    j["summability"] = to_string(d.summability);
    j["weighted_sum"] = detail::jnum(d.weighted_sum);
    j["nonnegative"] = d.nonnegative;
    j["nonincreasing"] = d.nonincreasing;
    return j;
}

inline ordered_json supermartingale_json(const supermartingale_report& r) {
    ordered_json j;
    j["mean_w_by_gen"] = detail::jinterval_array(r.mean_w);
    j["non_increasing"] = r.non_increasing;
    j["terminal"] = detail::jinterval(r.terminal);
    ordered_json probes = ordered_json::array();
    for (const auto& p : r.by_initial) {
        ordered_json e;
        e["initial"] = p.initial;
        e["terminal_w"] = detail::jinterval(p.terminal_w);
        e["extinct_mass"] = detail::jinterval(p.extinct_mass);
        probes.push_back(std::move(e));
    }
    j["by_initial"] = std::move(probes);
    return j;
}

inline ordered_json second_moment_json(const second_moment_report& r) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json e;
        e["n"] = row.n;
        e["direct"] = detail::jinterval(row.direct);
        e["recursive"] = detail::jnum(row.recursive);
        e["relative_gap"] = detail::jnum(row.relative_gap);
        rows.push_back(std::move(e));
    }
    ordered_json j;
    j["rows"] = std::move(rows);
    j["recursion_within_intervals"] = r.recursion_within_intervals;
    j["max_relative_gap"] = detail::jnum(r.max_relative_gap);
    j["non_decreasing"] = r.non_decreasing;
    j["bounded"] = r.bounded;
    j["max_value"] = detail::jnum(r.max_value);
    return j;
}

inline ordered_json w_summary_json(const w_summary& s, std::uint64_t histogram_bins = 40) {
    ordered_json j;
    j["p_w_positive"] = detail::jnum(s.p_w_positive);
    j["p_w_ci"] = detail::jinterval(s.p_w_ci);
    j["mean_w_by_gen"] = detail::jnum_array(s.mean_w_by_gen);
    j["se_w_by_gen"] = detail::jnum_array(s.se_w_by_gen);
    j["histogram"] = w_histogram_json(s.w_at_horizon, histogram_bins);
    return j;
}

// ---- combined document ----------------------------------------------------

inline ordered_json config_json(const model_spec& model, const run_config& cfg) {
    ordered_json j;
    j["model"] = serialize_model(model);
    j["horizon"] = cfg.horizon;
    j["replications"] = cfg.replications;
    j["seed"] = cfg.seed;
    j["band"] = cfg.band;
    j["eps"] = detail::jnum(cfg.eps);
    j["state_cap"] = cfg.state_cap;
    j["exact_horizon"] = cfg.exact_horizon;
    j["martingale_horizon"] = cfg.martingale_horizon;
    j["population_cap"] = cfg.population_cap;
    j["chunk_size"] = cfg.chunk_size;
    j["probe_k_max"] = cfg.probe_k_max;
    j["probe_n_max"] = cfg.probe_n_max;
    j["matrix_n"] = cfg.matrix_n;
    j["matrix_k"] = cfg.matrix_k;
    return j;
}

// Numeric martingale statistics need a usable normalizer; models without one
// (zero limiting ratio, decreasing ratio) get a skip note instead of a hard
// failure, so the rest of the document still lands.
inline ordered_json martingale_section_json(const model_spec& model, const run_config& cfg,
                                            mc_report& mc) {
    const std::uint64_t mh = std::min(cfg.martingale_horizon, cfg.horizon);
    try {
        const normalizer nz = build_normalizer(model, cfg.horizon);
        const w_summary ws = attach_w_samples(mc, nz);
        const supermartingale_report sm =
            supermartingale_check(model, mh, cfg.eps, {1, 2, 4, 8, 16, 32, 64, 128, 256},
                                  cfg.state_cap);
        const second_moment_report sec =
            second_moment_recursion(model, mh, cfg.eps, cfg.state_cap);
        const delta_seq delta = build_delta(model);
        ordered_json j;
        j["normalizer"] = normalizer_json(nz);
        j["delta"] = delta_json(delta);
        j["exact"] = supermartingale_json(sm);
        j["second_moment"] = second_moment_json(sec);
        j["monte_carlo_w"] = w_summary_json(ws);
        return j;
    } catch (const validation_error& e) {
        ordered_json j;
        j["skipped"] = e.what();
        return j;
    }
}

inline ordered_json exact_section_or_skip(const propagation_result& result) {
    try {
        return exact_section_json(result);
    } catch (const validation_error& e) {
        ordered_json j;
        j["skipped"] = e.what();
        return j;
    }
}

inline ordered_json run_report_json(const model_spec& model, const run_config& cfg) {
    cfg.validate();
    ordered_json doc;
    doc["version"] = tool_version;
    doc["config"] = config_json(model, cfg);
    doc["criteria"] = criteria_bundle_json(model, cfg.probe(), true);
    ordered_json matrix;
    matrix["n_rows"] = cfg.matrix_n;
    matrix["k_cols"] = cfg.matrix_k;
    ordered_json mu = ordered_json::array();
    for (const auto& row : growth_rate_matrix(model, cfg.matrix_n, cfg.matrix_k))
        mu.push_back(detail::jnum_array(row));
    matrix["mu"] = std::move(mu);
    doc["growth_rate_matrix"] = std::move(matrix);
    const propagation_result prop = propagate(model, cfg.exact_horizon, cfg.exact());
    doc["exact"] = exact_section_or_skip(prop);
    mc_report mc = monte_carlo(model, cfg.horizon, cfg.replications, cfg.seed, cfg.mc());
    doc["monte_carlo"] = simulate_json(mc);
    doc["martingale"] = martingale_section_json(model, cfg, mc);
    return doc;
}

// Serialization used for every JSON file the tool writes: two-space indent
// and a trailing newline, so documents diff cleanly.
inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace cpve
