#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "autocal/error.hpp"
#include "autocal/random.hpp"
#include "autocal/run_config.hpp"

using namespace autocal;

TEST_CASE("empty configuration: toy defaults, derived seeds and the control reference") {
    const auto c = RunConfig::parse("");
    CHECK(c.uses_toy());
    CHECK(c.k == 16);
    CHECK(c.sample_size == 250);
    CHECK(c.modes == std::vector<Estimator>{Estimator::MAP});
    CHECK(c.prior.alpha == 3.0);
    CHECK(c.sample_seed == derive_seed(0, "sample"));
    CHECK(c.mcmc.seed == derive_seed(0, "mcmc"));
    CHECK(c.optimizer.seed == derive_seed(0, "optimizer"));
    CHECK(c.surrogate_seed == derive_seed(0, "surrogate"));
    CHECK(c.toy.seed == derive_seed(0, "toy"));
    REQUIRE(c.references.size() == 1);
    CHECK(c.references[0].first == "control");
    CHECK(c.references[0].second[0] == 500.0);
    CHECK(c.references[0].second[3] == 3600.0);
    CHECK(c.grid.orders.size() == 12);
}

TEST_CASE("master seed changes every stage seed; explicit seeds win") {
    const auto a = RunConfig::parse("seed: 1");
    const auto b = RunConfig::parse("seed: 2");
    CHECK(a.sample_seed != b.sample_seed);
    CHECK(a.mcmc.seed != b.mcmc.seed);
    const auto c = RunConfig::parse("seed: 1\nmcmc: {seed: 77}\nsample: {seed: 5}");
    CHECK(c.mcmc.seed == 77);
    CHECK(c.sample_seed == 5);
    CHECK(c.optimizer.seed == a.optimizer.seed);
}

TEST_CASE("full configuration") {
    const auto c = RunConfig::parse(R"(
seed: 4
threads: 2
output: out
toy: {noise_sd: 0, hard_mode: true}
sample: {n: 100}
pca: {k: 8}
surrogate:
  max_order: 4
  truncations: [total-order, hyperbolic(0.5)]
  fit_types: [linear, lasso]
  penalties: {min: 1e-4, max: 1, count: 5}
  folds: 4
calibration:
  modes: [MAP, MLE]
  prior: {alpha: 2, beta: 0.25}
  targets: {RESTOM/global: 0.7}
  scalar_sigma_sq: {RESTOM: 0.5}
  references: {control: [500, 2.4, 0.12, 3600, -0.0007], other: [600, 2, 0.1, 4000, -0.001]}
  optimizer: {n_starts: 7, grad_tol: 1e-7}
mcmc: {n_chains: 3, n_samples_per_chain: 100, burn_in: 50, thin: 2}
)");
    CHECK(c.threads == 2);
    CHECK(c.output == "out");
    CHECK(c.toy.noise_sd == 0.0);
    CHECK(c.toy.hard_mode);
    CHECK(c.sample_size == 100);
    CHECK(c.k == 8);
    CHECK(c.grid.orders == std::vector<unsigned>{1, 2, 3, 4});
    CHECK(c.grid.truncations.size() == 2);
    CHECK(c.grid.fit_types == std::vector<FitType>{FitType::Linear, FitType::Lasso});
    CHECK(c.grid.penalties.size() == 5);
    CHECK(c.grid.folds == 4);
    CHECK(c.modes.size() == 2);
    CHECK(c.prior.beta == 0.25);
    CHECK(c.targets.at("RESTOM/global") == 0.7);
    CHECK(c.scalar_sigma_sq.at("RESTOM") == 0.5);
    CHECK(c.references.size() == 2);
    CHECK(c.optimizer.n_starts == 7);
    CHECK(c.mcmc.retained_per_chain() == 25);
}

TEST_CASE("overrides use dotted keys") {
    const auto c = RunConfig::parse("mcmc: {n_chains: 3}", {},
                                    {{"mcmc.n_chains", "9"}, {"pca.k", "4"}, {"calibration.modes", "[MLE]"}});
    CHECK(c.mcmc.n_chains == 9);
    CHECK(c.k == 4);
    CHECK(c.modes == std::vector<Estimator>{Estimator::MLE});
    CHECK(parse_override("a.b=1") == std::pair<std::string, std::string>{"a.b", "1"});
    CHECK_THROWS_AS(parse_override("novalue"), InputError);
}

TEST_CASE("bad configurations are input errors") {
    CHECK_THROWS_AS(RunConfig::parse("unknown: 1"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("mcmc: {chains: 1}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("pca: {k: 0}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("pca: {k: many}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("seed: [1"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("calibration: {modes: [best]}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("calibration: {prior: {alpha: 0}}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("calibration: {references: {x: [1, 2]}}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("calibration: {references: {x: [5000, 2.4, 0.12, 3600, -0.0007]}}"), DomainError);
    CHECK_THROWS_AS(RunConfig::parse("data: {dataset: /no/such/dir}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("diagnose: {runs: {a: /no/such/run}}"), InputError);
    CHECK_THROWS_AS(RunConfig::parse("mcmc: {burn_in: 9000}"), InputError);
    CHECK_THROWS_AS(RunConfig::load("/no/such/config.yaml"), InputError);
}

TEST_CASE("relative paths resolve against the config file") {
    const auto dir = std::filesystem::temp_directory_path() / "autocal_config_test";
    std::filesystem::create_directories(dir / "data");
    {
        std::ofstream(dir / "params.json") << R"({"parameters": [{"name": "a", "low": 0, "high": 1}, {"name": "b", "low": 0, "high": 2}]})";
        std::ofstream(dir / "run.yaml") << "data: {parameters: params.json}\n";
    }
    const auto c = RunConfig::load(dir / "run.yaml");
    CHECK(c.space().dim() == 2);
    CHECK(c.references.empty());
    CHECK(c.toy.space.dim() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("serialized settings omit the output directory") {
    auto a = RunConfig::parse("seed: 3\noutput: here");
    auto b = RunConfig::parse("seed: 3\noutput: there");
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_json()["mcmc"]["seed"] == a.mcmc.seed);
    CHECK_FALSE(a.to_json().contains("output"));
}
