#include "autocal/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "autocal/error.hpp"
#include "autocal/random.hpp"

namespace autocal {

namespace fs = std::filesystem;

namespace {

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
    if (!node) return;
    if (!node.IsMap()) throw InputError(fmt::format("config: '{}' must be a mapping", where));
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            throw InputError(fmt::format("config: unknown key '{}{}'", where.empty() ? "" : where + ".", key));
    }
}

template <typename T>
T get(const YAML::Node& node, const std::string& where) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw InputError(fmt::format("config: bad value for '{}'", where));
    }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
    if (const auto n = parent[key]) out = get<T>(n, where + "." + key);
}

std::map<std::string, double> read_map(const YAML::Node& node, const std::string& where) {
    std::map<std::string, double> out;
    if (!node) return out;
    if (!node.IsMap()) throw InputError(fmt::format("config: '{}' must be a mapping", where));
    for (const auto& kv : node) out[kv.first.as<std::string>()] = get<double>(kv.second, where);
    return out;
}

Eigen::VectorXd read_vector(const YAML::Node& node, const std::string& where) {
    const auto v = get<std::vector<double>>(node, where);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const YAML::Node& value) {
    if (i + 1 == parts.size()) {
        node[parts[i]] = value;
        return;
    }
    YAML::Node child = node[parts[i]];
    if (child && !child.IsMap()) throw InputError(fmt::format("override: '{}' is not a section", parts[i]));
    set_path(child, parts, i + 1, value);
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::pair<std::string, std::string> parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError(fmt::format("override '{}' must look like key=value", text));
    return {text.substr(0, eq), text.substr(eq + 1)};
}

ParameterSpace RunConfig::space() const { return parameters ? ParameterSpace::load(*parameters) : toy.space; }

RunConfig RunConfig::parse(const std::string& yaml_text, const fs::path& base_dir,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw InputError(fmt::format("config: {}", e.what()));
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw InputError("config: top level must be a mapping");
    for (const auto& [key, value] : overrides) {
        std::vector<std::string> parts;
        std::stringstream ss(key);
        for (std::string part; std::getline(ss, part, '.');) {
            if (part.empty()) throw InputError(fmt::format("override: bad key '{}'", key));
            parts.push_back(part);
        }
        YAML::Node v;
        try {
            v = YAML::Load(value);
        } catch (const YAML::Exception& e) {
            throw InputError(fmt::format("override {}: {}", key, e.what()));
        }
        set_path(root, parts, 0, v);
    }

    check_keys(root, {"seed", "threads", "output", "data", "toy", "sample", "pca", "surrogate", "calibration", "mcmc",
                      "diagnose"},
               "");
    RunConfig c;
    read(root, "seed", c.seed, "");
    read(root, "threads", c.threads, "");
    if (const auto n = root["output"]) c.output = get<std::string>(n, "output");

    if (const auto data = root["data"]) {
        check_keys(data, {"dataset", "parameters"}, "data");
        if (const auto n = data["dataset"]) c.dataset = resolve(base_dir, get<std::string>(n, "data.dataset"));
        if (const auto n = data["parameters"]) c.parameters = resolve(base_dir, get<std::string>(n, "data.parameters"));
    }
    if (c.dataset && !fs::is_directory(*c.dataset))
        throw InputError(fmt::format("dataset directory '{}' does not exist", c.dataset->string()));
    if (c.parameters && !fs::is_regular_file(*c.parameters))
        throw InputError(fmt::format("parameter file '{}' does not exist", c.parameters->string()));

    std::optional<std::uint64_t> toy_seed, sample_seed, surrogate_seed, optimizer_seed, mcmc_seed;
    if (c.parameters) c.toy.space = ParameterSpace::load(*c.parameters);
    if (const auto toy = root["toy"]) {
        check_keys(toy, {"noise_sd", "hard_mode", "n_modes", "theta_star", "seed", "nlat", "nlon", "nlev"}, "toy");
        read(toy, "noise_sd", c.toy.noise_sd, "toy");
        read(toy, "hard_mode", c.toy.hard_mode, "toy");
        read(toy, "n_modes", c.toy.n_modes, "toy");
        read(toy, "nlat", c.toy.nlat, "toy");
        read(toy, "nlon", c.toy.nlon, "toy");
        read(toy, "nlev", c.toy.nlev, "toy");
        if (const auto n = toy["theta_star"]) c.toy.theta_star = read_vector(n, "toy.theta_star");
        if (const auto n = toy["seed"]) toy_seed = get<std::uint64_t>(n, "toy.seed");
    }
    if (const auto s = root["sample"]) {
        check_keys(s, {"n", "seed"}, "sample");
        read(s, "n", c.sample_size, "sample");
        if (const auto n = s["seed"]) sample_seed = get<std::uint64_t>(n, "sample.seed");
    }
    if (const auto p = root["pca"]) {
        check_keys(p, {"k"}, "pca");
        read(p, "k", c.k, "pca");
    }
    if (const auto s = root["surrogate"]) {
        check_keys(s, {"orders", "max_order", "truncations", "fit_types", "penalties", "folds", "l1_ratio", "tolerance",
                       "max_sweeps", "seed"},
                   "surrogate");
        if (const auto n = s["orders"]) c.grid.orders = get<std::vector<unsigned>>(n, "surrogate.orders");
        if (const auto n = s["max_order"]) {
            const auto top = get<unsigned>(n, "surrogate.max_order");
            c.grid.orders.clear();
            for (unsigned o = 1; o <= top; ++o) c.grid.orders.push_back(o);
        }
        if (const auto n = s["truncations"]) {
            c.grid.truncations.clear();
            for (const auto& t : get<std::vector<std::string>>(n, "surrogate.truncations"))
                c.grid.truncations.push_back(Truncation::from_string(t));
        }
        if (const auto n = s["fit_types"]) {
            c.grid.fit_types.clear();
            for (const auto& t : get<std::vector<std::string>>(n, "surrogate.fit_types"))
                c.grid.fit_types.push_back(fit_type_from_string(t));
        }
        if (const auto n = s["penalties"]) {
            if (n.IsSequence()) {
                c.grid.penalties = get<std::vector<double>>(n, "surrogate.penalties");
            } else {
                check_keys(n, {"min", "max", "count"}, "surrogate.penalties");
                double lo = 1e-8, hi = 1e4;
                std::size_t count = 20;
                read(n, "min", lo, "surrogate.penalties");
                read(n, "max", hi, "surrogate.penalties");
                read(n, "count", count, "surrogate.penalties");
                c.grid.penalties = log_spaced(lo, hi, count);
            }
        }
        read(s, "folds", c.grid.folds, "surrogate");
        read(s, "l1_ratio", c.grid.solver.l1_ratio, "surrogate");
        read(s, "tolerance", c.grid.solver.tolerance, "surrogate");
        read(s, "max_sweeps", c.grid.solver.max_sweeps, "surrogate");
        if (const auto n = s["seed"]) surrogate_seed = get<std::uint64_t>(n, "surrogate.seed");
    }
    if (const auto cal = root["calibration"]) {
        check_keys(cal, {"modes", "prior", "fixed_scales", "targets", "scalar_sigma_sq", "references", "optimizer"},
                   "calibration");
        if (const auto n = cal["modes"]) {
            c.modes.clear();
            for (const auto& m : get<std::vector<std::string>>(n, "calibration.modes"))
                c.modes.push_back(estimator_from_string(m));
            if (c.modes.empty()) throw InputError("config: calibration.modes is empty");
        }
        if (const auto n = cal["prior"]) {
            check_keys(n, {"alpha", "beta"}, "calibration.prior");
            read(n, "alpha", c.prior.alpha, "calibration.prior");
            read(n, "beta", c.prior.beta, "calibration.prior");
        }
        c.fixed_scales = read_map(cal["fixed_scales"], "calibration.fixed_scales");
        c.targets = read_map(cal["targets"], "calibration.targets");
        c.scalar_sigma_sq = read_map(cal["scalar_sigma_sq"], "calibration.scalar_sigma_sq");
        if (const auto n = cal["references"]) {
            if (!n.IsMap()) throw InputError("config: calibration.references must be a mapping");
            for (const auto& kv : n)
                c.references.emplace_back(kv.first.as<std::string>(),
                                          read_vector(kv.second, "calibration.references." + kv.first.as<std::string>()));
        }
        if (const auto o = cal["optimizer"]) {
            check_keys(o, {"memory", "max_iters", "grad_tol", "n_starts", "seed"}, "calibration.optimizer");
            read(o, "memory", c.optimizer.memory, "calibration.optimizer");
            read(o, "max_iters", c.optimizer.max_iters, "calibration.optimizer");
            read(o, "grad_tol", c.optimizer.grad_tol, "calibration.optimizer");
            read(o, "n_starts", c.optimizer.n_starts, "calibration.optimizer");
            if (const auto n = o["seed"]) optimizer_seed = get<std::uint64_t>(n, "calibration.optimizer.seed");
        }
    }
    if (const auto m = root["mcmc"]) {
        check_keys(m, {"n_chains", "n_samples_per_chain", "burn_in", "thin", "init_split", "target_acceptance", "seed"},
                   "mcmc");
        read(m, "n_chains", c.mcmc.n_chains, "mcmc");
        read(m, "n_samples_per_chain", c.mcmc.n_samples_per_chain, "mcmc");
        read(m, "burn_in", c.mcmc.burn_in, "mcmc");
        read(m, "thin", c.mcmc.thin, "mcmc");
        read(m, "init_split", c.mcmc.init_split, "mcmc");
        read(m, "target_acceptance", c.mcmc.target_acceptance, "mcmc");
        if (const auto n = m["seed"]) mcmc_seed = get<std::uint64_t>(n, "mcmc.seed");
    }
    if (const auto d = root["diagnose"]) {
        check_keys(d, {"runs"}, "diagnose");
        if (const auto runs = d["runs"]) {
            if (!runs.IsMap()) throw InputError("config: diagnose.runs must be a mapping");
            for (const auto& kv : runs) {
                const auto name = kv.first.as<std::string>();
                const fs::path stem = resolve(base_dir, get<std::string>(kv.second, "diagnose.runs." + name));
                if (!fs::is_regular_file(fs::path(stem.string() + ".f64")))
                    throw InputError(fmt::format("comparison run '{}' not found at {}", name, stem.string()));
                c.comparison_runs[name] = stem;
            }
        }
    }

    c.toy.seed = toy_seed.value_or(derive_seed(c.seed, "toy"));
    c.sample_seed = sample_seed.value_or(derive_seed(c.seed, "sample"));
    c.surrogate_seed = surrogate_seed.value_or(derive_seed(c.seed, "surrogate"));
    c.optimizer.seed = optimizer_seed.value_or(derive_seed(c.seed, "optimizer"));
    c.mcmc.seed = mcmc_seed.value_or(derive_seed(c.seed, "mcmc"));

    if (c.references.empty() && c.space() == ParameterSpace::e3sm_atmosphere()) {
        Eigen::VectorXd control(5);
        control << 500.0, 2.4, 0.12, 3600.0, -0.0007;
        c.references.emplace_back("control", control);
    }
    const auto space = c.space();
    for (const auto& [name, v] : c.references) {
        if (static_cast<std::size_t>(v.size()) != space.dim())
            throw InputError(fmt::format("reference '{}' has {} values for {} parameters", name, v.size(), space.dim()));
        if (!space.contains(v)) throw DomainError(fmt::format("reference '{}' lies outside the parameter bounds", name));
    }

    if (c.k < 1) throw InputError("config: pca.k must be at least 1");
    if (c.sample_size < 2) throw InputError("config: sample.n must be at least 2");
    c.grid.validate();
    c.prior.validate();
    c.optimizer.validate();
    c.mcmc.validate();
    if (c.uses_toy()) c.toy.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot read config file {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.parent_path(), overrides);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    if (dataset) j["data"]["dataset"] = dataset->string();
    if (parameters) j["data"]["parameters"] = parameters->string();
    if (uses_toy()) j["toy"] = toy.to_json();
    j["sample"] = {{"n", sample_size}, {"seed", sample_seed}};
    j["pca"] = {{"k", k}};
    std::vector<std::string> truncs, types;
    for (const auto& t : grid.truncations) truncs.push_back(t.to_string());
    for (auto t : grid.fit_types) types.push_back(autocal::to_string(t));
    j["surrogate"] = {{"orders", grid.orders},       {"truncations", truncs},
                      {"fit_types", types},          {"penalties", grid.penalties},
                      {"folds", grid.folds},         {"l1_ratio", grid.solver.l1_ratio},
                      {"tolerance", grid.solver.tolerance}, {"max_sweeps", grid.solver.max_sweeps},
                      {"seed", surrogate_seed}};
    std::vector<std::string> mode_names;
    for (auto m : modes) mode_names.push_back(autocal::to_string(m));
    auto& cal = j["calibration"];
    cal["modes"] = mode_names;
    cal["prior"] = {{"alpha", prior.alpha}, {"beta", prior.beta}};
    cal["fixed_scales"] = fixed_scales;
    cal["targets"] = targets;
    cal["scalar_sigma_sq"] = scalar_sigma_sq;
    cal["references"] = nlohmann::json::object();
    for (const auto& [name, v] : references) cal["references"][name] = to_vec(v);
    cal["optimizer"] = {{"memory", optimizer.memory},     {"max_iters", optimizer.max_iters},
                        {"grad_tol", optimizer.grad_tol}, {"n_starts", optimizer.n_starts},
                        {"seed", optimizer.seed}};
    j["mcmc"] = {{"n_chains", mcmc.n_chains},
                 {"n_samples_per_chain", mcmc.n_samples_per_chain},
                 {"burn_in", mcmc.burn_in},
                 {"thin", mcmc.thin},
                 {"init_split", mcmc.init_split},
                 {"target_acceptance", mcmc.target_acceptance},
                 {"seed", mcmc.seed}};
    j["diagnose"]["runs"] = nlohmann::json::object();
    for (const auto& [name, p] : comparison_runs) j["diagnose"]["runs"][name] = p.string();
    return j;
}

}  // namespace autocal
