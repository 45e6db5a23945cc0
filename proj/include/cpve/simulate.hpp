#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "cpve/errors.hpp"
#include "cpve/model.hpp"
#include "cpve/rng.hpp"

namespace cpve {

struct mc_options {
    std::uint64_t band = 20;                            // mid-band upper edge B
    std::uint64_t population_cap = 1'000'000'000'000ull; // paths beyond this freeze
    std::uint64_t direct_sum_threshold = 32;             // below: literal sum of draws
    std::uint64_t chunk_size = 4096;                     // replications per work unit
    unsigned workers = 0;                                // 0: hardware concurrency
};

// Exact draw of the sum of t i.i.d. copies of the law. Below the threshold the
// draws are summed literally; above it the closed-form convolution is sampled
// in one go (Poisson and binomial families are closed under convolution, a sum
// of geometrics is negative binomial, and a tabulated law splits multinomially
// over its support). Never a normal approximation: every path stays an exact
// draw from the model. When the sum passes cap the capped flag is set and the
// returned value is the partial or clamped count; callers freeze such paths.
inline std::uint64_t sample_iid_sum(const integer_law& law, std::uint64_t t, rng_stream& g,
                                    std::uint64_t threshold, std::uint64_t cap, bool& capped) {
    capped = false;
    if (t == 0) return 0;
    if (law.kind() == law_kind::deterministic) {
        std::uint64_t v = law.deterministic_value();
        if (v == 0) return 0;
        if (t > std::numeric_limits<std::uint64_t>::max() / v) {
            capped = true;
            return cap;
        }
        std::uint64_t s = t * v;
        if (s > cap) capped = true;
        return s;
    }
    if (t < threshold) {
        std::uint64_t s = 0;
        for (std::uint64_t i = 0; i < t; ++i) {
            s += law.sample(g);
            if (s > cap) {
                capped = true;
                return s;
            }
        }
        return s;
    }
    switch (law.kind()) {
        case law_kind::poisson: {
            double mean = law.poisson_lambda() * static_cast<double>(t);
            if (mean == 0.0) return 0;
            std::uint64_t s = std::poisson_distribution<std::uint64_t>(mean)(g);
            if (s > cap) capped = true;
            return s;
        }
        case law_kind::binomial: {
            std::uint64_t trials = law.binomial_trials();
            double p = law.binomial_p();
            if (trials == 0 || p == 0.0) return 0;
            if (t > std::numeric_limits<std::uint64_t>::max() / std::max<std::uint64_t>(trials, 1)) {
                capped = true;
                return cap;
            }
            std::uint64_t pooled = t * trials;
            if (p == 1.0) {
                if (pooled > cap) capped = true;
                return pooled;
            }
            std::uint64_t s = std::binomial_distribution<std::uint64_t>(pooled, p)(g);
            if (s > cap) capped = true;
            return s;
        }
        case law_kind::geometric: {
            double alpha = law.geometric_alpha();
            std::uint64_t s =
                std::negative_binomial_distribution<std::uint64_t>(t, 1.0 - alpha)(g);
            if (s > cap) capped = true;
            return s;
        }
        case law_kind::tabulated: {
            const auto& values = law.tabulated_values();
            const auto& probs = law.tabulated_probs();
            unsigned __int128 acc = 0;
            std::uint64_t remaining = t;
            double rem_p = 1.0;
            for (std::size_t i = 0; i + 1 < values.size() && remaining > 0; ++i) {
                double cond = rem_p > 0.0 ? probs[i] / rem_p : 0.0;
                cond = std::min(std::max(cond, 0.0), 1.0);
                std::uint64_t ni = 0;
                if (cond >= 1.0)
                    ni = remaining;
                else if (cond > 0.0)
                    ni = std::binomial_distribution<std::uint64_t>(remaining, cond)(g);
                acc += static_cast<unsigned __int128>(ni) * values[i];
                remaining -= ni;
                rem_p -= probs[i];
            }
            acc += static_cast<unsigned __int128>(remaining) * values.back();
            if (acc > static_cast<unsigned __int128>(cap)) {
                capped = true;
                if (acc > static_cast<unsigned __int128>(std::numeric_limits<std::uint64_t>::max()))
                    return std::numeric_limits<std::uint64_t>::max();
            }
            return static_cast<std::uint64_t>(acc);
        }
        case law_kind::deterministic: break; // handled above
    }
    throw internal_error("sample_iid_sum: unhandled law kind");
}

struct step_result {
    std::uint64_t progenitors = 0;
    std::uint64_t next = 0;
    bool capped = false;
};

// One transition: draw phi_n(z), then the offspring sum.
inline step_result simulate_step(const model_spec& model, std::uint64_t n, std::uint64_t z,
                                 rng_stream& g, const mc_options& opt = {}) {
    step_result out;
    out.progenitors = model.control.sample_at(z, g);
    out.next = sample_iid_sum(model.offspring.law(n), out.progenitors, g,
                              opt.direct_sum_threshold, opt.population_cap, out.capped);
    return out;
}

// Z_0..Z_H plus the progenitor draws T_0..T_{H-1}. A path whose population
// passes the cap is frozen: its z stays at the last value and no further
// randomness is consumed (exploded_at is the first frozen index).
struct trajectory {
    std::vector<std::uint64_t> z;
    std::vector<std::uint64_t> t;
    bool exploded = false;
    std::uint64_t exploded_at = 0;
};

inline trajectory simulate_path(const model_spec& model, std::uint64_t horizon, rng_stream& g,
                                const mc_options& opt = {}) {
    trajectory out;
    out.z.reserve(horizon + 1);
    out.t.reserve(horizon);
    std::uint64_t z = model.initial;
    out.z.push_back(z);
    const bool absorbing = model.control.zero_absorbing();
    for (std::uint64_t n = 0; n < horizon; ++n) {
        if (out.exploded || (z == 0 && absorbing)) {
            out.t.push_back(0);
            out.z.push_back(z);
            continue;
        }
        auto s = simulate_step(model, n, z, g, opt);
        out.t.push_back(s.progenitors);
        z = s.next;
        out.z.push_back(z);
        if (s.capped && !out.exploded) {
            out.exploded = true;
            out.exploded_at = n + 1;
        }
    }
    return out;
}

struct wilson_interval {
    double low = 0.0;
    double high = 0.0;
};

// 95% Wilson score interval; stays sane at the 0 and 1 extremes.
inline wilson_interval wilson_95(std::uint64_t successes, std::uint64_t n) {
    if (n == 0) return {0.0, 1.0};
    const double zq = 1.959963984540054;
    double nn = static_cast<double>(n);
    double p = static_cast<double>(successes) / nn;
    double z2 = zq * zq;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = zq * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    double lo = center - half, hi = center + half;
    return {lo < 0.0 ? 0.0 : lo, hi > 1.0 ? 1.0 : hi};
}

struct mc_report {
    std::uint64_t replications = 0;
    std::uint64_t horizon = 0;
    std::uint64_t band = 0;
    std::vector<double> extinct_by_gen;     // P-hat(Z_n = 0)
    std::vector<double> mean_z;             // sample mean of Z_n (frozen paths at cap value)
    std::vector<double> second_moment_z;    // sample mean of Z_n^2
    std::vector<double> mid_band_by_gen;    // P-hat(0 < Z_n <= band)
    double mid_band_freq = 0.0;             // the same at the horizon
    double survival_at_horizon = 0.0;
    wilson_interval survival_ci;
    std::uint64_t exploded_paths = 0;
    std::vector<std::uint64_t> z_at_horizon; // every replication, index order
    std::vector<double> w_samples_at_horizon; // filled by the normalizer machinery
};

// Replication r uses the stream derived from (master_seed, r), so the report
// is a pure function of (model, horizon, replications, master_seed, options)
// and is byte-identical for any worker count or scheduling order. Partial
// sums are accumulated per fixed-size chunk and merged in chunk order.
inline mc_report monte_carlo(const model_spec& model, std::uint64_t horizon,
                             std::uint64_t replications, std::uint64_t master_seed,
                             const mc_options& opt = {}) {
    if (replications == 0) throw validation_error("monte_carlo needs replications >= 1");
    const std::uint64_t chunk = std::max<std::uint64_t>(opt.chunk_size, 1);
    const std::uint64_t nchunks = (replications + chunk - 1) / chunk;

    std::vector<integer_law> gen_laws;
    gen_laws.reserve(horizon);
    for (std::uint64_t n = 0; n < horizon; ++n) gen_laws.push_back(model.offspring.law(n));
    const bool absorbing = model.control.zero_absorbing();

    struct chunk_stats {
        std::vector<std::uint64_t> extinct, band;
        std::vector<long double> sum_z, sum_z2;
        std::vector<std::uint64_t> z_h;
        std::uint64_t exploded = 0;
    };
    std::vector<chunk_stats> chunks(nchunks);

    auto run_chunk = [&](std::uint64_t ci) {
        chunk_stats& cs = chunks[ci];
        cs.extinct.assign(horizon + 1, 0);
        cs.band.assign(horizon + 1, 0);
        cs.sum_z.assign(horizon + 1, 0.0L);
        cs.sum_z2.assign(horizon + 1, 0.0L);
        std::uint64_t lo = ci * chunk;
        std::uint64_t hi = std::min(replications, lo + chunk);
        cs.z_h.reserve(hi - lo);
        for (std::uint64_t rep = lo; rep < hi; ++rep) {
            auto g = replication_stream(master_seed, rep);
            std::uint64_t z = model.initial;
            bool exploded = false;
            for (std::uint64_t n = 0;; ++n) {
                if (z == 0) ++cs.extinct[n];
                if (z > 0 && z <= opt.band) ++cs.band[n];
                long double zd = static_cast<long double>(z);
                cs.sum_z[n] += zd;
                cs.sum_z2[n] += zd * zd;
                if (n == horizon) break;
                if (exploded || (z == 0 && absorbing)) continue;
                std::uint64_t t = model.control.sample_at(z, g);
                bool capped = false;
                z = sample_iid_sum(gen_laws[n], t, g, opt.direct_sum_threshold,
                                   opt.population_cap, capped);
                if (capped) exploded = true;
            }
            cs.z_h.push_back(z);
            if (exploded) ++cs.exploded;
        }
    };

    unsigned workers = opt.workers != 0
                           ? opt.workers
                           : std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1 || nchunks <= 1) {
        for (std::uint64_t ci = 0; ci < nchunks; ++ci) run_chunk(ci);
    } else {
        std::atomic<std::uint64_t> counter{0};
        auto worker = [&]() {
            for (;;) {
                std::uint64_t ci = counter.fetch_add(1);
                if (ci >= nchunks) return;
                run_chunk(ci);
            }
        };
        std::vector<std::thread> pool;
        unsigned spawn = static_cast<unsigned>(
            std::min<std::uint64_t>(workers, nchunks));
        pool.reserve(spawn);
        for (unsigned i = 0; i < spawn; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    mc_report report;
    report.replications = replications;
    report.horizon = horizon;
    report.band = opt.band;
    report.extinct_by_gen.resize(horizon + 1);
    report.mean_z.resize(horizon + 1);
    report.second_moment_z.resize(horizon + 1);
    report.mid_band_by_gen.resize(horizon + 1);
    report.z_at_horizon.reserve(replications);
    const double r = static_cast<double>(replications);
    for (std::uint64_t n = 0; n <= horizon; ++n) {
        std::uint64_t extinct = 0, band = 0;
        long double sz = 0.0L, sz2 = 0.0L;
        for (const auto& cs : chunks) {
            extinct += cs.extinct[n];
            band += cs.band[n];
            sz += cs.sum_z[n];
            sz2 += cs.sum_z2[n];
        }
        report.extinct_by_gen[n] = static_cast<double>(extinct) / r;
        report.mid_band_by_gen[n] = static_cast<double>(band) / r;
        report.mean_z[n] = static_cast<double>(sz / replications);
        report.second_moment_z[n] = static_cast<double>(sz2 / replications);
    }
    for (const auto& cs : chunks) {
        report.exploded_paths += cs.exploded;
        report.z_at_horizon.insert(report.z_at_horizon.end(), cs.z_h.begin(), cs.z_h.end());
    }
    report.mid_band_freq = report.mid_band_by_gen[horizon];
    std::uint64_t survivors = 0;
    for (std::uint64_t zh : report.z_at_horizon)
        if (zh > 0) ++survivors;
    report.survival_at_horizon = static_cast<double>(survivors) / r;
    report.survival_ci = wilson_95(survivors, replications);
    return report;
}

} // namespace cpve
