#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "autocal/error.hpp"
#include "autocal/pipeline.hpp"
#include "autocal/run_config.hpp"
#include "svg_check.hpp"

using namespace autocal;
namespace fs = std::filesystem;

namespace {

const char* small_config = R"(
seed: 5
toy: {nlat: 8, nlon: 16, nlev: 5}
sample: {n: 60}
pca: {k: 4}
surrogate: {max_order: 2, fit_types: [linear], penalties: [1e-6]}
calibration: {modes: [MAP, MLE], optimizer: {n_starts: 3}}
mcmc: {n_chains: 2, n_samples_per_chain: 400, burn_in: 200, thin: 2}
)";

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("autocal_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig config_in(const fs::path& dir, std::vector<std::pair<std::string, std::string>> overrides = {}) {
    overrides.emplace_back("output", dir.string());
    return RunConfig::parse(small_config, {}, overrides);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("full pipeline writes every artifact and is reproducible") {
    const auto a = scratch("a"), b = scratch("b");
    std::ostringstream log, err;
    REQUIRE(run_command("all", config_in(a), log, err) == 0);
    REQUIRE(run_command("all", config_in(b), log, err) == 0);

    for (const char* f : {"config.json", "design.csv", "surrogate/selection.csv", "surrogate/cv_scores.csv",
                          "surrogate/summary.json", "calibration/MAP.json", "calibration/MLE.json",
                          "calibration/MAP_parameters.csv", "calibration/MAP_scales.csv", "mcmc/summary.csv",
                          "mcmc/pairs_sampled.svg", "mcmc/pairs_bounds.svg", "diagnostics/taylor_stats.csv",
                          "diagnostics/taylor_ANN.svg", "diagnostics/r2.csv", "diagnostics/pc_scatter.csv",
                          "diagnostics/rmse_change_MAP_vs_control.csv", "runs/MAP_surrogate.f64", "runs/control.f64"})
        CHECK_MESSAGE(fs::exists(a / f), f);

    const auto ta = tree(a), tb = tree(b);
    REQUIRE(ta.size() == tb.size());
    for (const auto& [name, bytes] : ta) CHECK_MESSAGE(tb.at(name) == bytes, name);

    for (const auto& [name, bytes] : ta)
        if (name.size() > 4 && name.substr(name.size() - 4) == ".svg") CHECK_MESSAGE(testing::well_formed_svg(bytes), name);

    const auto design = read_csv(a / "design.csv");
    const auto space = ParameterSpace::e3sm_atmosphere();
    REQUIRE(design.size() == 61);
    CHECK(design[0] == space.names());
    for (std::size_t j = 0; j < space.dim(); ++j) {
        std::vector<int> hits(60, 0);
        for (std::size_t i = 1; i < design.size(); ++i) {
            const double u = (std::stod(design[i][j]) - space.lower()(j)) / (space.upper()(j) - space.lower()(j));
            ++hits[std::min<int>(59, static_cast<int>(u * 60))];
        }
        for (int h : hits) CHECK(h == 1);
    }

    const auto selection = read_csv(a / "surrogate/selection.csv");
    CHECK(selection.size() == 5);
    for (std::size_t i = 1; i < selection.size(); ++i) CHECK(selection[i].size() == selection[0].size());
    const auto summary = read_csv(a / "mcmc/summary.csv");
    CHECK(summary.size() == 1 + space.dim() + 5);
    CHECK(summary[0].back() == "rhat");
    const auto params = read_csv(a / "calibration/MAP_parameters.csv");
    CHECK(params[0] == std::vector<std::string>{"Parameter", "control", "MAP", "Min", "Max", "Bound"});
    CHECK(params.size() == 1 + space.dim());
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("stages run separately and in order") {
    const auto dir = scratch("stages");
    const auto c = config_in(dir);
    std::ostringstream log, err;
    CHECK(run_command("fit", c, log, err) == 2);
    CHECK(err.str().find("sample") != std::string::npos);
    REQUIRE(run_command("sample", c, log, err) == 0);
    REQUIRE(run_command("fit", c, log, err) == 0);
    REQUIRE(run_command("diagnose", c, log, err) == 0);
    CHECK(fs::exists(dir / "diagnostics/r2.csv"));
    CHECK_FALSE(fs::exists(dir / "diagnostics/taylor_stats.csv"));
    REQUIRE(run_command("calibrate", c, log, err) == 0);
    REQUIRE(run_command("mcmc", c, log, err) == 0);
    REQUIRE(run_command("diagnose", c, log, err) == 0);
    CHECK(fs::exists(dir / "diagnostics/taylor_stats.csv"));
    fs::remove_all(dir);
}

TEST_CASE("input problems exit with code 2") {
    const auto dir = scratch("errors");
    std::ostringstream log, err;
    CHECK(run_command("bogus", config_in(dir), log, err) == 2);
    CHECK(run_command("calibrate", config_in(dir), log, err) == 2);
    REQUIRE(run_command("sample", config_in(dir), log, err) == 0);
    REQUIRE(run_command("fit", config_in(dir), log, err) == 0);
    const auto partial = config_in(dir, {{"calibration.fixed_scales", "{SWCF/ANN: 1.0}"}});
    CHECK(run_command("calibrate", partial, log, err) == 2);
    const auto bad_target = config_in(dir, {{"calibration.targets", "{SWCF/ANN: 1.0}"}});
    CHECK(run_command("calibrate", bad_target, log, err) == 2);
    fs::remove_all(dir);
}
