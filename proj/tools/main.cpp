#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "podnet/common.hpp"
#include "podnet/experiment.hpp"
#include "podnet/io.hpp"
#include "podnet/net.hpp"

namespace {

int cmd_run(const std::string& config_path, int experiment_override, bool dry_run, int workers,
            const std::string& out_override) {
    podnet::ExperimentConfig cfg = podnet::load_config(config_path);
    if (experiment_override > 0) cfg.experiment = experiment_override;
    podnet::RunOptions opts;
    opts.dry_run = dry_run;
    opts.workers = workers;
    opts.out_override = out_override;
    const podnet::ErrorReport report = podnet::run_experiment(cfg, opts);
    if (dry_run) {
        for (const std::string& note : report.notes) std::cout << note << '\n';
        std::cout << '\n' << podnet::config_to_json(report.config);
        return 0;
    }
    std::cout << podnet::read_text_file(report.config.output + "/report.txt");
    std::cout << "report written to " << report.config.output << '\n';
    return 0;
}

int cmd_inspect(const std::string& bundle_path) {
    const podnet::Network net = podnet::read_network_bundle(bundle_path);
    std::cout << "bundle: " << bundle_path << '\n';
    std::cout << "dims:";
    for (int d : net.dims) std::cout << ' ' << d;
    std::cout << '\n';
    std::cout << "hidden layers: " << net.n_layers() - 1 << '\n';
    std::cout << "parameters: " << podnet::n_parameters(net) << '\n';
    std::cout << "hidden slope: " << net.hidden_slope << '\n';
    std::cout << "leaky output: " << (net.leaky_output ? "yes" : "no") << '\n';
    std::cout << "normalization: " << (net.has_stats() ? "stored" : "none") << '\n';
    std::cout << "init seed: " << net.seed << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"channelized-diffusion surrogate experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    int experiment_override = 0;
    bool dry_run = false;
    int workers = 1;
    std::string out_override;
    CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--experiment", experiment_override, "override the experiment id (1-4)");
    run->add_flag("--dry-run", dry_run, "print the plan and config echo, no computation");
    run->add_option("--workers", workers, "parallel training jobs")->check(CLI::PositiveNumber);
    run->add_option("--out", out_override, "override the output directory");

    std::string bundle_path;
    CLI::App* inspect = app.add_subcommand("inspect", "summarize a trained network bundle");
    inspect->add_option("--bundle", bundle_path, "network bundle file")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config_path, experiment_override, dry_run, workers,
                                          out_override);
        return cmd_inspect(bundle_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
