#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coevolve/orchestrator.hpp"

namespace {

int do_run(const std::string& config_path, const std::string& mode_name,
           const std::string& out_dir, bool seed_set, std::uint64_t seed,
           const std::string& backend, coevolve::RemoteEndpoint endpoint) {
    coevolve::RunConfig cfg = coevolve::load_config(config_path);
    if (seed_set) cfg.seed = seed;
    coevolve::RunMode mode = coevolve::run_mode_from_string(mode_name);

    coevolve::RunOptions options;
    if (backend == "remote") {
        if (endpoint.url.empty()) {
            throw std::domain_error("--backend remote requires --endpoint");
        }
        options.backend = coevolve::RunOptions::Backend::remote;
        options.endpoint = std::move(endpoint);
    }

    coevolve::RunReport report = coevolve::run(cfg, mode, out_dir, options);
    coevolve::emit_report(std::filesystem::path(out_dir) / "run.log");
    std::cout << "mode " << coevolve::to_string(mode) << ": final success "
              << report.final_success << " over " << report.eval_series.size()
              << " evals, " << report.evolution_phases << " evolution phases ("
              << report.verdicts_accepted << " accepted, " << report.verdicts_retained
              << " retained, " << report.verdicts_rejected << " rejected)\n"
              << "artifacts written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop trainer: policy optimization over an evolving task pool"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string mode_name = "coevolve";
    std::string backend = "scripted";
    std::uint64_t seed = 0;
    coevolve::RemoteEndpoint endpoint;

    CLI::App* run_cmd = app.add_subcommand("run", "Execute a training run");
    run_cmd->add_option("--config", config_path, "Key-value config file")
        ->required()
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_dir, "Output directory for run artifacts")->required();
    run_cmd->add_option("--mode", mode_name, "coevolve | grpo-static | random-explore")
        ->check(CLI::IsMember({"coevolve", "grpo-static", "grpo_static", "random-explore",
                               "random_explore"}));
    CLI::Option* seed_opt =
        run_cmd->add_option("--seed", seed, "Override the config file's seed");
    run_cmd->add_option("--backend", backend, "scripted | remote")
        ->check(CLI::IsMember({"scripted", "remote"}));
    run_cmd->add_option("--endpoint", endpoint.url,
                        "Chat completion URL for --backend remote");
    run_cmd->add_option("--model", endpoint.model, "Model name sent to the endpoint");
    run_cmd->add_option("--api-key-env", endpoint.api_key_env,
                        "Environment variable holding the bearer token");

    std::string log_path;
    std::string report_out;
    CLI::App* report_cmd =
        app.add_subcommand("report", "Build the plot-ready report bundle from a run log");
    report_cmd->add_option("--log", log_path, "run.log produced by `run`")
        ->required()
        ->check(CLI::ExistingFile);
    report_cmd->add_option("--out", report_out,
                           "Report path (default: report.json beside the log)");

    std::string check_path;
    CLI::App* check_cmd =
        app.add_subcommand("validate-config", "Parse and range-check a config file");
    check_cmd->add_option("--config", check_path, "Key-value config file")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            return do_run(config_path, mode_name, out_dir, seed_opt->count() > 0, seed,
                          backend, std::move(endpoint));
        }
        if (report_cmd->parsed()) {
            coevolve::json report = coevolve::emit_report(
                log_path, report_out.empty() ? std::filesystem::path()
                                             : std::filesystem::path(report_out));
            for (const auto& w : report["warnings"]) {
                std::cerr << "warning: " << w.get<std::string>() << "\n";
            }
            std::cout << "report written ("
                      << report["success_series"].size() << " eval points, "
                      << report["pass_rate_series"].size() << " evolution phases)\n";
            return 0;
        }
        if (check_cmd->parsed()) {
            coevolve::RunConfig cfg = coevolve::load_config(check_path);
            std::cout << coevolve::json(cfg).dump(2) << "\n";
            return 0;
        }
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
