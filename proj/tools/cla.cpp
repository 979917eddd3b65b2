#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "cla/cli.hpp"
#include "cla/common.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    CLI::App app{"Cell-line drug response modeling: model selection (mas) and leave-one-out drug recommendation (drs)"};
    app.set_version_flag("--version", std::string(cla::kToolVersion));
    app.require_subcommand(1);

    std::string config, out = "results", results, mas_best;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    double epsilon = 0.025;
    int top_n = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Base seed; overrides the config value (default 0)");
        cmd->add_option("--workers", workers, "Worker threads; 0 uses every core. Outputs do not depend on it")
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--out", out, "Output directory")->capture_default_str();
    };

    CLI::App* synth = app.add_subcommand(
        "synth", "Generate a synthetic world with planted ground truth, plus config.json and config.example");
    synth->add_option("--config", config,
                      "JSON with optional 'synthetic' (generator spec) and 'run' (merged into config.json) objects");
    add_common(synth);

    CLI::App* mas = app.add_subcommand(
        "mas", "Per-drug search over algorithms, gene set combos and hyperparameters under repeated double splits");
    mas->add_option("--config", config, "Run config (see config.example for every key and default)")->required();
    add_common(mas);

    CLI::App* drs = app.add_subcommand("drs", "Leave-one-out drug recommendation from the MAS best configurations");
    drs->add_option("--config", config, "Run config (see config.example for every key and default)")->required();
    drs->add_option("--mas-best", mas_best, "mas_best.json produced by 'mas'; overrides inputs.mas_best");
    CLI::Option* eps_opt = drs->add_option("--epsilon", epsilon,
                                           "Use the epsilon policy: every drug within epsilon of the best prediction")
                               ->check(CLI::NonNegativeNumber);
    CLI::Option* top_opt = drs->add_option("--top-n", top_n, "Use the top-N policy")->check(CLI::PositiveNumber);
    eps_opt->excludes(top_opt);
    add_common(drs);

    CLI::App* report = app.add_subcommand("report", "Regenerate plot-data tables from a results directory");
    report->add_option("--results", results, "Directory holding mas and/or drs outputs")->required();
    report->add_option("--out", out, "Output directory (default: the results directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cla::cli::kInputError;
    }

    cla::cli::Overrides overrides;
    auto collect = [&](CLI::App* cmd) {
        if (cmd->count("--seed")) overrides.seed = seed;
        if (cmd->count("--workers"))
            overrides.workers = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
    };

    if (*synth) {
        collect(synth);
        return cla::cli::cmd_synth(config.empty() ? std::nullopt : std::optional<fs::path>(config), out, overrides);
    }
    if (*mas) {
        collect(mas);
        return cla::cli::cmd_mas(config, out, overrides);
    }
    if (*drs) {
        collect(drs);
        if (*eps_opt) overrides.epsilon = epsilon;
        if (*top_opt) overrides.top_n = top_n;
        if (!mas_best.empty()) overrides.mas_best = fs::path(mas_best);
        return cla::cli::cmd_drs(config, out, overrides);
    }
    return cla::cli::cmd_report(results, report->count("--out") ? fs::path(out) : fs::path(results));
}
