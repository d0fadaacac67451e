#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autocal/calibration_loss.hpp"
#include "autocal/mcmc.hpp"
#include "autocal/optimizer.hpp"
#include "autocal/pce_surrogate.hpp"
#include "autocal/toy_model.hpp"

namespace autocal {

/// Settings for one pipeline run, read from a YAML file. Every key is
/// optional; without a dataset the run uses the built-in toy model.
///
///   seed: 7
///   output: run
///   data: {dataset: path/to/dataset, parameters: params.json}
///   toy: {noise_sd: 0.01, hard_mode: false, n_modes: 4, theta_star: [...]}
///   sample: {n: 250}
///   pca: {k: 16}
///   surrogate: {orders: [1, 2, 3], truncations: [total-order], fit_types: [linear],
///               penalties: {min: 1e-8, max: 1e4, count: 20}, folds: 5}
///   calibration: {modes: [MAP, MLE], prior: {alpha: 3, beta: 0.5},
///                 fixed_scales: {...}, targets: {RESTOM/global: 0.70},
///                 scalar_sigma_sq: {...}, references: {control: [...]},
///                 optimizer: {memory: 10, max_iters: 500, grad_tol: 1e-6, n_starts: 50}}
///   mcmc: {n_chains: 200, n_samples_per_chain: 8000, burn_in: 5000, thin: 10}
///   diagnose: {runs: {name: path/to/stacked/stem}}
///
/// Stage seeds not given explicitly are derived from the master seed.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::filesystem::path output = "autocal-run";

    std::optional<std::filesystem::path> dataset;
    std::optional<std::filesystem::path> parameters;
    ToyModelConfig toy;

    std::size_t sample_size = 250;
    std::uint64_t sample_seed = 0;
    std::size_t k = 16;
    HyperGrid grid = HyperGrid::defaults();
    std::uint64_t surrogate_seed = 0;

    std::vector<Estimator> modes{Estimator::MAP};
    PriorConfig prior;
    std::map<std::string, double> fixed_scales;
    std::map<std::string, double> targets;
    std::map<std::string, double> scalar_sigma_sq;
    std::vector<std::pair<std::string, Eigen::VectorXd>> references;
    OptimizerConfig optimizer;
    McmcConfig mcmc;
    std::map<std::string, std::filesystem::path> comparison_runs;

    bool uses_toy() const { return !dataset.has_value(); }
    ParameterSpace space() const;

    /// Parses YAML text; relative paths resolve against base_dir. Each
    /// override is a dotted key and a YAML scalar or flow value
    /// ("mcmc.n_chains", "16"). Unknown keys and missing files throw InputError.
    static RunConfig parse(const std::string& yaml_text, const std::filesystem::path& base_dir = {},
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});
    static RunConfig load(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

    /// Resolved settings with every seed filled in; the output directory is
    /// left out so that runs in different places serialize identically.
    nlohmann::json to_json() const;
};

/// Parses "a.b=value" into ("a.b", "value").
std::pair<std::string, std::string> parse_override(const std::string& text);

}  // namespace autocal
