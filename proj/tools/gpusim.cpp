#include <CLI11.hpp>

#include "gpusim/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven GPU cluster scheduling simulator"};
    app.require_subcommand(1);

    gpusim::cli::RunOptions opts;
    std::optional<std::uint64_t> seed;
    std::string out_dir;

    std::string config_path;
    auto* run = app.add_subcommand("run", "Simulate one run configuration");
    run->add_option("config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the seed");
    run->add_option("--out", out_dir, "Override the output directory");
    run->add_flag("--debug-invariants", opts.debug_invariants, "Check conservation after every event");

    std::string matrix_path;
    auto* sweep = app.add_subcommand("sweep", "Run a scheduler x placement matrix and compare");
    sweep->add_option("config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--matrix", matrix_path, "Matrix JSON (defaults to the config's \"sweep\" entry)");
    sweep->add_option("--seed", seed, "Override the seed");
    sweep->add_option("--out", out_dir, "Override the output directory");
    sweep->add_option("--jobs,-j", opts.jobs, "Cells to run in parallel")->check(CLI::PositiveNumber);
    sweep->add_flag("--debug-invariants", opts.debug_invariants, "Check conservation after every event");

    std::string params_path, trace_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic trace");
    synth->add_option("params", params_path, "Synthetic workload parameters JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("out", trace_out, "Output trace CSV")->required();
    synth->add_option("--seed", seed, "Override the seed");

    std::string trace_path;
    auto* validate = app.add_subcommand("validate-trace", "Parse and validate a trace CSV");
    validate->add_option("trace", trace_path, "Trace CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : gpusim::cli::config_error;
    }

    opts.seed = seed;
    if (!out_dir.empty()) opts.output_dir = out_dir;

    if (*run) return gpusim::cli::cmd_run(config_path, opts);
    if (*sweep)
        return gpusim::cli::cmd_sweep(config_path,
                                      matrix_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(matrix_path),
                                      opts);
    if (*synth) return gpusim::cli::cmd_synth(params_path, trace_out, seed);
    return gpusim::cli::cmd_validate_trace(trace_path);
}
