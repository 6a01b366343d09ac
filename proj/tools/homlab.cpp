// Experiment driver: validates configs, runs the pipelines and aggregates
// finished runs. Exit codes: 0 pass, 1 failed checks, 2 configuration error.

#include <CLI11.hpp>
#include <iostream>

#include "homlab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"homlab: cell limits, homogenized Lagrangians and two-scale energy diagnostics"};
    app.require_subcommand(1);

    std::string config_path;
    std::string run_dir;

    CLI::App* run = app.add_subcommand("run", "execute the experiment described by a config file");
    run->add_option("config", config_path, "JSON experiment configuration")->required();

    CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
    report->add_option("dir", run_dir, "output directory of a previous run")->required();

    CLI::App* validate = app.add_subcommand("validate", "check a config file without running");
    validate->add_option("config", config_path, "JSON experiment configuration")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const homlab::ExperimentConfig cfg = homlab::load_config(config_path);
            const homlab::RunResult res = homlab::run_experiment(cfg);
            return homlab::report_run(cfg.output_dir, std::cout) == 0 && res.exit_code == 0 ? 0 : 1;
        }
        if (report->parsed()) {
            return homlab::report_run(run_dir, std::cout);
        }
        const homlab::ExperimentConfig cfg = homlab::load_config(config_path);
        std::cout << "config ok: " << config_path << "\n";
        return 0;
    } catch (const homlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
