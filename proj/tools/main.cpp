#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mtp/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Shift-policy effect estimation for repeated cross-sectional panels"};
    app.require_subcommand(1);

    mtp::CommandOptions opt;
    std::uint64_t seed_val = 0;
    int jobs_val = 0;
    std::string outdir_val;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "Path to the JSON run config")
            ->required();
        sub->add_option("--seed", seed_val, "Override the config seed");
        sub->add_option("--jobs", jobs_val,
                        "Worker threads (0 = available parallelism)");
        sub->add_option("--output-dir", outdir_val, "Override the configured output directory");
        sub->add_flag("--validate-only", opt.validate_only,
                      "Validate the config and inputs, then exit without computing");
        return sub;
    };

    add_common(app.add_subcommand("analyze", "Run the weekly shift-policy analysis grid"));
    add_common(app.add_subcommand("simulate", "Run a synthetic replication study"));
    add_common(app.add_subcommand("diagnose-shift",
                                  "Select per-index shift intensities by density-ratio support"));
    add_common(app.add_subcommand("screen", "Report screened confounders per index"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are config errors
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) opt.seed_override = seed_val;
    if (sub->count("--jobs")) opt.jobs_override = jobs_val;
    if (sub->count("--output-dir")) opt.output_dir_override = outdir_val;

    mtp::Command cmd = mtp::Command::Analyze;
    if (sub->get_name() == "simulate") cmd = mtp::Command::Simulate;
    else if (sub->get_name() == "diagnose-shift") cmd = mtp::Command::DiagnoseShift;
    else if (sub->get_name() == "screen") cmd = mtp::Command::Screen;

    return mtp::run_command_exit_code(cmd, opt, std::cerr);
}
