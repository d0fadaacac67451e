#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autocal/error.hpp"
#include "autocal/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Surrogate-based calibration of simulator parameters"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string output;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "Run configuration (YAML)");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--threads", threads, "Worker cap (0 = all cores)");
    app.add_option("--output", output, "Output directory");
    app.add_option("--set", overrides, "Override a configuration key, e.g. --set mcmc.n_chains=16");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"sample", "Draw the Latin hypercube design (and the toy ensemble)"},
        {"fit", "Fit the PCA basis and the cross-validated surrogate"},
        {"calibrate", "Maximize the likelihood or posterior"},
        {"mcmc", "Sample the posterior"},
        {"diagnose", "Write diagnostics for the surrogate and the runs"},
        {"all", "Run every stage in order"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    autocal::RunConfig config;
    try {
        std::vector<std::pair<std::string, std::string>> kv;
        for (const auto& o : overrides) kv.push_back(autocal::parse_override(o));
        if (seed) kv.emplace_back("seed", std::to_string(*seed));
        if (threads) kv.emplace_back("threads", std::to_string(*threads));
        config = config_path.empty() ? autocal::RunConfig::parse("", {}, kv) : autocal::RunConfig::load(config_path, kv);
        if (!output.empty()) config.output = output;
    } catch (const autocal::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return autocal::run_command(command, config, std::cout, std::cerr);
}
