// Command line front end. Subcommands map one-to-one onto the library
// modules; every output lands as a file in --out-dir so runs are diffable.
// Exit codes: 0 success, 2 invalid input, 3 budget exceeded, 4 internal
// invariant violation. All randomness flows from --seed; repeating a run
// with the same model, flags and seed reproduces every output byte for
// byte, whatever --workers says.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cpve/report.hpp"

namespace fs = std::filesystem;

namespace {

struct cli_state {
    std::string model_path;
    std::string out_dir = ".";
    cpve::run_config cfg;
    bool dump_pmfs = false;
    std::uint64_t histogram_bins = 40;
};

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cpve::validation_error("cannot open for writing: " + path.string());
    out << bytes;
    if (!out) throw cpve::validation_error("write failed: " + path.string());
    std::cout << "wrote " << path.string() << "\n";
}

fs::path prepare_out_dir(const cli_state& st) {
    fs::path dir(st.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw cpve::validation_error("cannot create output directory " + dir.string() +
                                         ": " + ec.message());
    return dir;
}

// flags shared by the stochastic subcommands
void add_mc_flags(CLI::App* sub, cli_state& st) {
    sub->add_option("--horizon", st.cfg.horizon, "generations to simulate")
        ->capture_default_str();
    sub->add_option("--replications", st.cfg.replications, "Monte Carlo paths")
        ->capture_default_str();
    sub->add_option("--seed", st.cfg.seed, "master seed; drives all randomness")->required();
    sub->add_option("--population-cap", st.cfg.population_cap,
                    "freeze paths that reach this size")
        ->capture_default_str();
    sub->add_option("--chunk-size", st.cfg.chunk_size,
                    "replications per work unit (part of the output contract)")
        ->capture_default_str();
    sub->add_option("--workers", st.cfg.workers,
                    "worker threads, 0 = hardware (never changes output bytes)")
        ->capture_default_str();
}

void add_exact_flags(CLI::App* sub, cli_state& st, bool own_horizon) {
    if (own_horizon)
        sub->add_option("--horizon", st.cfg.exact_horizon, "generations to propagate")
            ->capture_default_str();
    else
        sub->add_option("--exact-horizon", st.cfg.exact_horizon,
                        "generations for the exact engine")
            ->capture_default_str();
    sub->add_option("--eps", st.cfg.eps, "per-step trimmed-mass budget")->capture_default_str();
    sub->add_option("--state-cap", st.cfg.state_cap, "largest tracked population state")
        ->capture_default_str();
}

void add_probe_flags(CLI::App* sub, cli_state& st) {
    sub->add_option("--k-max", st.cfg.probe_k_max, "largest probed population size")
        ->capture_default_str();
    sub->add_option("--n-max", st.cfg.probe_n_max, "largest probed generation")
        ->capture_default_str();
    sub->add_option("--matrix-n", st.cfg.matrix_n, "growth matrix generations")
        ->capture_default_str();
    sub->add_option("--matrix-k", st.cfg.matrix_k, "growth matrix population sizes")
        ->capture_default_str();
}

void add_common(CLI::App* sub, cli_state& st) {
    sub->add_option("model", st.model_path, "model file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", st.out_dir, "directory the output files land in")
        ->envname("CPVE_OUTPUT_DIR")
        ->capture_default_str();
}

int run_simulate(const cli_state& st) {
    const cpve::model_spec model = cpve::parse_model_file(st.model_path);
    st.cfg.validate();
    const fs::path dir = prepare_out_dir(st);
    const cpve::mc_report mc = cpve::monte_carlo(model, st.cfg.horizon, st.cfg.replications,
                                                 st.cfg.seed, st.cfg.mc());
    write_file(dir / "mc_report.json", cpve::dump_json(cpve::simulate_json(mc)));
    write_file(dir / "simulate.csv", cpve::simulate_csv(mc));
    return 0;
}

int run_exact(const cli_state& st) {
    const cpve::model_spec model = cpve::parse_model_file(st.model_path);
    st.cfg.validate();
    const fs::path dir = prepare_out_dir(st);
    const cpve::propagation_result prop =
        cpve::propagate(model, st.cfg.exact_horizon, st.cfg.exact());
    write_file(dir / "exact.csv", cpve::exact_csv(prop));
    if (st.dump_pmfs)
        write_file(dir / "pmfs.json", cpve::dump_json(cpve::exact_pmf_json(prop)));
    return 0;
}

int run_criteria(const cli_state& st) {
    const cpve::model_spec model = cpve::parse_model_file(st.model_path);
    st.cfg.validate();
    const fs::path dir = prepare_out_dir(st);
    write_file(dir / "criteria.json",
               cpve::dump_json(cpve::criteria_bundle_json(model, st.cfg.probe(), false)));
    write_file(dir / "growth_matrix.csv",
               cpve::growth_matrix_csv(
                   cpve::growth_rate_matrix(model, st.cfg.matrix_n, st.cfg.matrix_k)));
    return 0;
}

int run_martingale(const cli_state& st) {
    const cpve::model_spec model = cpve::parse_model_file(st.model_path);
    st.cfg.validate();
    const fs::path dir = prepare_out_dir(st);
    const cpve::normalizer nz = cpve::build_normalizer(model, st.cfg.horizon);
    cpve::mc_report mc = cpve::monte_carlo(model, st.cfg.horizon, st.cfg.replications,
                                           st.cfg.seed, st.cfg.mc());
    const cpve::w_summary ws = cpve::attach_w_samples(mc, nz);
    const std::uint64_t mh = std::min(st.cfg.martingale_horizon, st.cfg.horizon);
    const cpve::supermartingale_report sm = cpve::supermartingale_check(
        model, mh, st.cfg.eps, {1, 2, 4, 8, 16, 32, 64, 128, 256}, st.cfg.state_cap);
    const cpve::second_moment_report sec =
        cpve::second_moment_recursion(model, mh, st.cfg.eps, st.cfg.state_cap);
    write_file(dir / "martingale.csv", cpve::martingale_csv(sm, sec, mc.extinct_by_gen));
    write_file(dir / "w_histogram.json",
               cpve::dump_json(cpve::w_histogram_json(ws.w_at_horizon, st.histogram_bins)));
    return 0;
}

int run_report(const cli_state& st) {
    const cpve::model_spec model = cpve::parse_model_file(st.model_path);
    const fs::path dir = prepare_out_dir(st);
    write_file(dir / "report.json", cpve::dump_json(cpve::run_report_json(model, st.cfg)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"controlled branching processes in varying environments: simulation, exact "
                 "propagation, survival criteria and martingale diagnostics"};
    app.set_version_flag("--version", cpve::tool_version);
    app.require_subcommand(1);

    cli_state st;

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo run: population paths, "
                                                        "extinction and mid-band frequencies");
    add_common(simulate, st);
    add_mc_flags(simulate, st);
    simulate->add_option("--band", st.cfg.band, "mid-band upper edge B")->capture_default_str();

    CLI::App* exact = app.add_subcommand("exact", "propagate the exact truncated law and bracket "
                                                  "extinction probabilities");
    add_common(exact, st);
    add_exact_flags(exact, st, true);
    exact->add_flag("--dump-pmfs", st.dump_pmfs, "also write every generation's pmf as JSON");

    CLI::App* criteria = app.add_subcommand("criteria", "evaluate the closed-form extinction and "
                                                        "survival criteria");
    add_common(criteria, st);
    add_probe_flags(criteria, st);

    CLI::App* martingale = app.add_subcommand("martingale", "normalized-population statistics: "
                                                            "exact W moments and sampled W laws");
    add_common(martingale, st);
    add_mc_flags(martingale, st);
    add_exact_flags(martingale, st, false);
    martingale->add_option("--martingale-horizon", st.cfg.martingale_horizon,
                           "generations with exact W moments")
        ->capture_default_str();
    martingale->add_option("--bins", st.histogram_bins, "histogram bins for W at the horizon")
        ->capture_default_str();

    CLI::App* report = app.add_subcommand("report", "one combined JSON document with criteria "
                                                    "verdicts, exact bounds, Monte Carlo "
                                                    "estimates and martingale statistics");
    add_common(report, st);
    add_mc_flags(report, st);
    add_exact_flags(report, st, false);
    report->add_option("--band", st.cfg.band, "mid-band upper edge B")->capture_default_str();
    report->add_option("--martingale-horizon", st.cfg.martingale_horizon,
                       "generations with exact W moments")
        ->capture_default_str();
    add_probe_flags(report, st);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) return run_simulate(st);
        if (exact->parsed()) return run_exact(st);
        if (criteria->parsed()) return run_criteria(st);
        if (martingale->parsed()) return run_martingale(st);
        return run_report(st);
    } catch (const cpve::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cpve::budget_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
