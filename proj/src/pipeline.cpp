#include "autocal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "autocal/csv.hpp"
#include "autocal/diagnostics.hpp"
#include "autocal/matrix_io.hpp"
#include "autocal/parallel.hpp"
#include "autocal/reduction.hpp"

namespace autocal {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
    out << text;
}

std::string file_key(const std::string& key) {
    std::string s = key;
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

void write_config(const RunConfig& config) {
    fs::create_directories(config.output);
    write_json(config.output / "config.json", config.to_json());
}

BuiltData load_data(const RunConfig& config) {
    if (config.dataset) return load_dataset(*config.dataset);
    const auto dir = config.output / "data";
    if (!fs::exists(dir / "schema.json"))
        throw InputError(fmt::format("no toy data in {}; run 'sample' first", dir.string()));
    return load_dataset(dir);
}

std::shared_ptr<const SurrogateModel> load_surrogate(const RunConfig& config) {
    const auto dir = config.output / "surrogate" / "model";
    if (!fs::exists(dir / "surrogate.json"))
        throw InputError(fmt::format("no fitted surrogate in {}; run 'fit' first", dir.string()));
    return std::make_shared<const SurrogateModel>(SurrogateModel::load(dir));
}

// Observations with scalar normalizers and target values from the config.
StackedVector calibration_obs(const RunConfig& config, const StackedVector& obs) {
    FieldSchema schema = *obs.schema();
    for (const auto& [field, sigma_sq] : config.scalar_sigma_sq) {
        if (!(sigma_sq > 0.0)) throw DomainError(fmt::format("scalar_sigma_sq for {} must be positive", field));
        schema = set_scalar_sigma(schema, field, sigma_sq);
    }
    Eigen::VectorXd values = obs.values();
    for (const auto& [field, target] : config.targets) {
        const auto p = schema.index_of(field);
        if (schema.field(p).grid.kind != GridKind::Scalar)
            throw InputError(fmt::format("target given for {}, which is not a scalar field", field));
        values[static_cast<Eigen::Index>(schema.offset(p))] = target;
    }
    return StackedVector(std::make_shared<const FieldSchema>(std::move(schema)), std::move(values));
}

std::optional<Eigen::VectorXd> fixed_scales(const RunConfig& config, const FieldSchema& schema) {
    if (config.fixed_scales.empty()) return std::nullopt;
    Eigen::VectorXd s_sq(static_cast<Eigen::Index>(schema.num_fields()));
    std::vector<bool> seen(schema.num_fields(), false);
    for (const auto& [field, value] : config.fixed_scales) {
        const auto p = schema.index_of(field);
        if (!(value > 0.0)) throw DomainError(fmt::format("fixed scale for {} must be positive", field));
        s_sq[static_cast<Eigen::Index>(p)] = value;
        seen[p] = true;
    }
    for (std::size_t p = 0; p < seen.size(); ++p)
        if (!seen[p])
            throw InputError(fmt::format("fixed_scales must cover every field; {} is missing", schema.field(p).key()));
    return s_sq;
}

nlohmann::json starts_json(const std::vector<StartRecord>& starts) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : starts) {
        out.push_back({{"theta_start", std::vector<double>(s.theta_start.data(), s.theta_start.data() + s.theta_start.size())},
                       {"theta_end", std::vector<double>(s.theta_end.data(), s.theta_end.data() + s.theta_end.size())},
                       {"objective", s.objective},
                       {"projected_gradient", s.projected_gradient},
                       {"iterations", s.iterations},
                       {"n_evals", s.n_evals},
                       {"stop_reason", s.stop_reason},
                       {"trace", s.trace}});
    }
    return out;
}

std::vector<std::pair<std::string, StackedVector>> collect_runs(const RunConfig& config, const SchemaPtr& schema) {
    std::map<std::string, fs::path> stems;
    const auto dir = config.output / "runs";
    if (fs::is_directory(dir))
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".f64") stems[entry.path().stem().string()] = entry.path().parent_path() / entry.path().stem();
    for (const auto& [name, stem] : config.comparison_runs) stems[name] = stem;
    std::vector<std::pair<std::string, StackedVector>> runs;
    for (const auto& [name, stem] : stems) runs.emplace_back(name, load_stacked(stem, schema));
    return runs;
}

bool is_estimate(const std::string& name, const RunConfig& config) {
    for (auto m : config.modes)
        if (name == to_string(m) || name == to_string(m) + "_surrogate") return true;
    return false;
}

}  // namespace

void cmd_sample(const RunConfig& config, std::ostream& log) {
    write_config(config);
    const auto space = config.space();
    const auto design = lhs_sample(space, config.sample_size, config.sample_seed);
    design.write_csv(config.output / "design.csv");
    fmt::print(log, "sample: {} x {} design written to {}\n", design.rows(), space.dim(),
               (config.output / "design.csv").string());
    if (!config.uses_toy()) return;
    const ToyModel model(config.toy);
    const auto campaign = toy_generate_campaign(model, design);
    save_dataset(config.output / "data", campaign.data.ensemble, campaign.data.obs);
    save_stacked(config.output / "data" / "truth", campaign.truth);
    fmt::print(log, "sample: toy ensemble of {} members, {} outputs each\n", campaign.data.ensemble.size(),
               campaign.data.schema->total_size());
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
    write_config(config);
    const Stopwatch clock;
    const auto data = load_data(config);
    const auto basis = fit_pca(data.ensemble, config.k);
    const auto fit = fit_surrogate(data.ensemble, basis, config.grid, config.surrogate_seed);
    const auto dir = config.output / "surrogate";
    fit.model.save(dir / "model");
    csv::write(dir / "selection.csv", selection_report(fit.selections));

    csv::Table scores{{"PC", "fit_type", "order", "truncation", "penalty", "cv_rmse", "ok", "failure"}};
    for (std::size_t j = 0; j < fit.selections.size(); ++j)
        for (const auto& s : fit.selections[j].scores)
            scores.push_back({std::to_string(j + 1), to_string(s.cell.fit_type), std::to_string(s.cell.order),
                              s.cell.truncation.to_string(), csv::format_double(s.cell.penalty),
                              csv::format_double(s.cv_rmse), s.ok ? "true" : "false", s.failure});
    csv::write(dir / "cv_scores.csv", scores);
    write_text(dir / "variance_curve.csv", variance_curve_csv(basis));

    const auto r2 = surrogate_r2(fit.model, data.ensemble);
    write_json(dir / "summary.json", {{"k", basis.rank()},
                                      {"explained_fraction", basis.explained_fraction[basis.explained_fraction.size() - 1]},
                                      {"r2", r2.overall}});
    fmt::print(log, "fit: k = {}, explained fraction {:.4f}, overall R^2 {:.6f} ({:.1f} s)\n", basis.rank(),
               basis.explained_fraction[basis.explained_fraction.size() - 1], r2.overall, clock.seconds());
}

void cmd_calibrate(const RunConfig& config, std::ostream& log) {
    write_config(config);
    const auto data = load_data(config);
    const auto model = load_surrogate(config);
    const auto obs = calibration_obs(config, data.obs);
    const auto fixed = fixed_scales(config, *obs.schema());
    const auto dir = config.output / "calibration";
    fs::create_directories(dir);
    const auto runs = config.output / "runs";
    fs::create_directories(runs);

    std::optional<ToyModel> toy;
    if (config.uses_toy()) {
        toy.emplace(config.toy);
        for (const auto& [name, theta] : config.references) save_stacked(runs / name, toy->evaluate(theta));
    }
    for (auto mode : config.modes) {
        const Stopwatch clock;
        const auto name = to_string(mode);
        const LossState state(model, obs, config.prior, fixed);
        CalibrationResult result;
        try {
            result = maximize(state, mode, config.optimizer);
        } catch (const OptimizationFailed& e) {
            write_json(dir / (name + "_failed.json"), {{"mode", name}, {"error", e.what()}, {"starts", starts_json(e.starts())}});
            throw;
        }
        result.save(dir / (name + ".json"));
        write_text(dir / (name + "_parameters.csv"), compare_parameter_table(result, config.references).to_csv());
        const auto scales = scale_table(result.s_sq_hat, *obs.schema());
        write_text(dir / (name + "_scales.csv"), scales.to_csv(false));
        write_text(dir / (name + "_scales_sq.csv"), scales.to_csv(true));
        save_stacked(runs / (name + "_surrogate"), model->predict(result.theta_hat));
        if (toy) save_stacked(runs / name, toy->evaluate(result.theta_hat));

        std::string theta;
        for (Eigen::Index i = 0; i < result.theta_hat.size(); ++i)
            theta += fmt::format("{}{} = {:.6g}", i ? ", " : "", result.space.names()[static_cast<std::size_t>(i)],
                                 result.theta_hat[i]);
        fmt::print(log, "calibrate {}: {} (objective {:.6f}, start {}, {} evaluations, {:.1f} s)\n", name, theta,
                   result.objective, result.start_index, result.n_evals, clock.seconds());
        if (!result.converged)
            fmt::print(log, "warning: {} best start stopped on '{}' with projected gradient {:.3g}\n", name,
                       result.starts[result.start_index].stop_reason, result.starts[result.start_index].projected_gradient);
    }
}

void cmd_mcmc(const RunConfig& config, std::ostream& log) {
    write_config(config);
    const Stopwatch clock;
    const auto data = load_data(config);
    const auto model = load_surrogate(config);
    const auto obs = calibration_obs(config, data.obs);
    const LossState state(model, obs, config.prior, fixed_scales(config, *obs.schema()));
    const auto samples = run_chains(state, data.ensemble.design(), config.mcmc);
    const auto dir = config.output / "mcmc";
    fs::create_directories(dir);
    samples.save(dir / "draws");
    write_text(dir / "summary.csv", posterior_summary_csv(samples));

    std::vector<std::pair<std::string, Eigen::VectorXd>> markers;
    const auto map_file = config.output / "calibration" / "MAP.json";
    if (fs::exists(map_file)) markers.emplace_back("MAP", CalibrationResult::load(map_file).theta_hat);
    for (const auto& r : config.references) markers.push_back(r);
    if (config.uses_toy()) markers.emplace_back("truth", config.toy.truth());
    const auto summary = pairwise_summaries(samples, model->space(), markers);
    const auto& names = model->space().names();
    write_text(dir / "pairs_sampled.svg", pair_plot_svg(summary, names, false));
    write_text(dir / "pairs_bounds.svg", pair_plot_svg(summary, names, true));

    const Eigen::VectorXd r = rhat(samples);
    double mean_acc = 0.0;
    for (double a : samples.acceptance_rates) mean_acc += a;
    mean_acc /= static_cast<double>(std::max<std::size_t>(1, samples.acceptance_rates.size()));
    fmt::print(log, "mcmc: {} draws from {} chains, mean acceptance {:.3f}, max split R-hat {:.4f} ({:.1f} s)\n",
               samples.size(), samples.n_chains, mean_acc, r.size() ? r.maxCoeff() : 1.0, clock.seconds());
    if (r.size() && r.maxCoeff() >= 1.1)
        fmt::print(log, "warning: split R-hat >= 1.1; some chains may sit in a minor mode (see mcmc/summary.csv)\n");
}

void cmd_diagnose(const RunConfig& config, std::ostream& log) {
    write_config(config);
    const auto data = load_data(config);
    const auto model = load_surrogate(config);
    const auto obs = calibration_obs(config, data.obs);
    const auto& schema = *data.schema;
    const auto dir = config.output / "diagnostics";
    fs::create_directories(dir);

    write_text(dir / "variance_curve.csv", variance_curve_csv(model->basis()));
    const auto scatter = pc_scatter_data(*model, data.ensemble);
    write_text(dir / "pc_scatter.csv", scatter.to_csv());
    write_text(dir / "pc_r2.csv", scatter.r2_csv());
    const auto r2 = surrogate_r2(*model, data.ensemble);
    csv::Table r2_rows{{"field", "r2"}};
    r2_rows.push_back({"overall", csv::format_double(r2.overall)});
    for (std::size_t p = 0; p < schema.num_fields(); ++p) {
        const auto& f = schema.field(p);
        if (!f.grid.is_map()) continue;
        write_text(dir / fmt::format("r2_{}.svg", file_key(f.key())),
                   r2_map_svg(r2.per_point, data.schema, p, fmt::format("R^2 {}", f.key())));
    }
    csv::write(dir / "r2.csv", r2_rows);

    const auto runs = collect_runs(config, data.schema);
    if (runs.empty()) {
        fmt::print(log, "diagnose: surrogate diagnostics only (no runs to compare), overall R^2 {:.6f}\n", r2.overall);
        return;
    }

    std::vector<TaylorStats> stats, background;
    for (const auto& [name, run] : runs) {
        auto s = taylor_stats_all(run, obs, true, name);
        stats.insert(stats.end(), s.begin(), s.end());
    }
    for (std::size_t i = 0; i < data.ensemble.size(); ++i) {
        auto s = taylor_stats_all(data.ensemble.member(i), obs, true, "ensemble");
        background.insert(background.end(), s.begin(), s.end());
    }
    write_text(dir / "taylor_stats.csv", taylor_stats_csv(stats));
    const auto seasons = variables_and_seasons(schema).second;
    for (const auto& season : seasons) {
        auto in_season = [&](const TaylorStats& t) { return schema.field(schema.index_of(t.field)).season == season; };
        std::vector<TaylorStats> sel, bg;
        std::copy_if(stats.begin(), stats.end(), std::back_inserter(sel), in_season);
        std::copy_if(background.begin(), background.end(), std::back_inserter(bg), in_season);
        if (sel.empty()) continue;
        write_text(dir / fmt::format("taylor_{}.svg", season), taylor_diagram_svg(sel, bg, season));
    }

    std::size_t tables = 0;
    for (const auto& [base, base_run] : runs) {
        if (is_estimate(base, config) || (base.size() > 10 && base.substr(base.size() - 10) == "_surrogate")) continue;
        for (const auto& [est, est_run] : runs) {
            if (!is_estimate(est, config)) continue;
            const auto table = rmse_change_table(base_run, est_run, obs);
            csv::write(dir / fmt::format("rmse_change_{}_vs_{}.csv", est, base), table.to_csv());
            fmt::print(log, "diagnose: RMSE change {} vs {}: {:+.2f}%\n", est, base, table.overall_average);
            ++tables;
        }
    }

    for (const auto& [name, run] : runs) {
        const StackedVector diff(obs.schema(), run.values() - obs.values());
        for (std::size_t p = 0; p < schema.num_fields(); ++p) {
            const auto& f = schema.field(p);
            if (!f.grid.is_map()) continue;
            const double bound = diff.field(p).cwiseAbs().maxCoeff();
            MapStyle style;
            style.scale = ColorScale::Diverging;
            style.lower = -bound;
            style.upper = bound;
            style.title = fmt::format("{} minus observations, {}", name, f.key());
            write_text(dir / fmt::format("difference_{}_{}.svg", name, file_key(f.key())), field_map_svg(diff, p, style));
        }
    }
    fmt::print(log, "diagnose: {} runs, {} Taylor records, {} RMSE tables\n", runs.size(), stats.size(), tables);
}

void cmd_all(const RunConfig& config, std::ostream& log) {
    cmd_sample(config, log);
    cmd_fit(config, log);
    cmd_calibrate(config, log);
    cmd_mcmc(config, log);
    cmd_diagnose(config, log);
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err) {
    static const std::map<std::string, void (*)(const RunConfig&, std::ostream&)> commands{
        {"sample", cmd_sample}, {"fit", cmd_fit},           {"calibrate", cmd_calibrate},
        {"mcmc", cmd_mcmc},     {"diagnose", cmd_diagnose}, {"all", cmd_all}};
    const auto it = commands.find(command);
    if (it == commands.end()) {
        fmt::print(err, "error: unknown command '{}'\n", command);
        return 2;
    }
    set_max_threads(config.threads);
    try {
        it->second(config, log);
        return 0;
    } catch (const InputError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        fmt::print(err, "error: malformed input: {}\n", e.what());
        return 2;
    } catch (const OptimizationFailed& e) {
        fmt::print(err, "error: {}\n", e.what());
        for (std::size_t i = 0; i < e.starts().size(); ++i) {
            const auto& s = e.starts()[i];
            fmt::print(err, "  start {}: objective {:.6g}, |proj grad| {:.3g}, {} iterations, {}\n", i, s.objective,
                       s.projected_gradient, s.iterations, s.stop_reason);
        }
        return 3;
    } catch (const NumericalError& e) {
        fmt::print(err, "error: numerical failure: {}\n", e.what());
        return 3;
    }
}

}  // namespace autocal
