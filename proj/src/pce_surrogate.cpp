#include "autocal/pce_surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>

#include <fmt/format.h>

#include "autocal/csv.hpp"
#include "autocal/error.hpp"
#include "autocal/matrix_io.hpp"
#include "autocal/parallel.hpp"
#include "autocal/random.hpp"

namespace autocal {

double PCEComponentModel::predict(const Eigen::VectorXd& z) const { return eval_basis(index_set, z).dot(coefficients); }

Eigen::VectorXd PCEComponentModel::gradient(const Eigen::VectorXd& z) const {
    return eval_basis_gradient(index_set, z).transpose() * coefficients;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0 && hi >= lo) || count == 0) throw InputError("log_spaced needs 0 < lo <= hi and count >= 1");
    std::vector<double> out(count);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        out[i] = std::pow(10.0, a + t * (b - a));
    }
    return out;
}

HyperGrid HyperGrid::defaults() {
    HyperGrid g;
    for (unsigned p = 1; p <= 12; ++p) g.orders.push_back(p);
    g.truncations = {Truncation::total_order(), Truncation::hyperbolic(0.5)};
    g.fit_types = {FitType::Linear, FitType::Lasso, FitType::ElasticNet};
    g.penalties = log_spaced(1e-8, 1e4, 20);
    g.folds = 5;
    return g;
}

void HyperGrid::validate() const {
    if (orders.empty() || truncations.empty() || fit_types.empty())
        throw InputError("hyperparameter grid axes must be nonempty");
    const bool penalized = std::any_of(fit_types.begin(), fit_types.end(), [](FitType t) { return t != FitType::Linear; });
    if (penalized && penalties.empty()) throw InputError("penalized fit types need at least one penalty");
    for (double p : penalties)
        if (!(p > 0.0) || !std::isfinite(p)) throw InputError("penalties must be positive");
    if (folds < 2) throw InputError("cross validation needs at least two folds");
    if (!(solver.l1_ratio > 0.0 && solver.l1_ratio <= 1.0)) throw InputError("l1 ratio must lie in (0, 1]");
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
    if (folds < 2 || n < folds) throw InputError(fmt::format("cannot split {} rows into {} folds", n, folds));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
        std::swap(order[i - 1], order[j]);
    }
    // First n % folds chunks get one extra row.
    std::vector<std::size_t> fold(n);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t len = n / folds + (f < n % folds ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) fold[order[pos++]] = f;
    }
    return fold;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), M.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
    return out;
}

std::vector<double> descending(const std::vector<double>& v) {
    auto out = v;
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

int fit_rank(FitType t) { return static_cast<int>(t); }

struct SetSpec {
    unsigned order;
    Truncation truncation;
};

/// Cells of one (order, truncation) block in grid order, with their
/// position inside the full cell list.
struct Layout {
    std::vector<GridCell> cells;
    std::vector<SetSpec> sets;
    std::vector<std::size_t> set_begin;  // first cell of each set
};

Layout make_layout(const HyperGrid& grid) {
    Layout l;
    for (unsigned p : grid.orders) {
        for (const auto& t : grid.truncations) {
            l.sets.push_back({p, t});
            l.set_begin.push_back(l.cells.size());
            for (FitType f : grid.fit_types) {
                if (f == FitType::Linear) {
                    l.cells.push_back({p, t, f, 0.0});
                } else {
                    for (double lam : grid.penalties) l.cells.push_back({p, t, f, lam});
                }
            }
        }
    }
    l.set_begin.push_back(l.cells.size());
    return l;
}

/// Fits one penalized cell along the descending penalty path and returns
/// the solution at `penalty`.
PenalizedFit path_fit(const StandardizedBasis& sb, const Eigen::VectorXd& y, FitType type, double penalty,
                      const std::vector<double>& grid_penalties, const CoordinateDescentOptions& options) {
    std::vector<double> path;
    for (double lam : descending(grid_penalties))
        if (lam >= penalty) path.push_back(lam);
    if (path.empty() || path.back() != penalty) path.push_back(penalty);
    auto fits = penalized_path(sb, y, type, path, options);
    return fits.back();
}

}  // namespace

PCEComponentModel fit_component(const Eigen::MatrixXd& Z, const Eigen::VectorXd& eta, FitType fit_type, double penalty,
                                const MultiIndexSet& index_set, const CoordinateDescentOptions& options) {
    if (Z.rows() < 1) throw InputError("fit_component needs at least one row");
    if (Z.rows() != eta.size()) throw InputError("fit_component: row count mismatch");
    const Eigen::MatrixXd Phi = basis_matrix(index_set, Z);
    if (!Phi.allFinite()) throw NumericalError("basis matrix has non-finite entries");

    PCEComponentModel model;
    model.index_set = index_set;
    model.fit_type = fit_type;
    model.penalty = fit_type == FitType::Linear ? 0.0 : penalty;
    if (fit_type == FitType::Linear) {
        model.coefficients = least_squares(Phi, eta).col(0);
        return model;
    }
    StandardizedBasis sb(Phi);
    const double lam = penalty;
    auto fits = penalized_path(sb, eta, fit_type, std::span<const double>(&lam, 1), options);
    if (fits.front().saturated)
        throw ConvergenceError(fmt::format("{} fit (penalty {}, {} terms) saturated its support on {} samples",
                                           to_string(fit_type), penalty, index_set.size(), Z.rows()));
    if (!fits.front().converged)
        throw ConvergenceError(fmt::format("{} fit (penalty {}, {} terms) did not converge within {} sweeps",
                                           to_string(fit_type), penalty, index_set.size(), fits.front().sweeps));
    model.coefficients = fits.front().coefficients;
    return model;
}

std::vector<ComponentSelection> cv_select_all(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& etas,
                                              const HyperGrid& grid, std::uint64_t seed) {
    grid.validate();
    const auto n = static_cast<std::size_t>(Z.rows());
    if (static_cast<std::size_t>(etas.rows()) != n) throw InputError("cv_select: row count mismatch");
    if (n < grid.folds) throw InputError(fmt::format("cv_select needs at least {} rows, got {}", grid.folds, n));
    const auto k = static_cast<std::size_t>(etas.cols());
    const std::size_t d = static_cast<std::size_t>(Z.cols());

    const Layout layout = make_layout(grid);
    const auto fold = fold_assignment(n, grid.folds, seed);
    std::vector<std::vector<Eigen::Index>> train(grid.folds), test(grid.folds);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < grid.folds; ++f) (fold[i] == f ? test : train)[f].push_back(static_cast<Eigen::Index>(i));

    std::vector<MultiIndexSet> sets;
    for (const auto& s : layout.sets) sets.push_back(build_index_set(d, s.order, s.truncation));
    const auto path_penalties = descending(grid.penalties);

    // fold_rmse[task][comp * ncells_in_set + local] for task = set * folds + fold
    const std::size_t tasks = sets.size() * grid.folds;
    std::vector<std::vector<double>> fold_rmse(tasks);
    std::vector<std::vector<std::string>> fold_error(tasks);

    parallel_for(tasks, [&](std::size_t task) {
        const std::size_t s = task / grid.folds;
        const std::size_t f = task % grid.folds;
        const std::size_t begin = layout.set_begin[s], end = layout.set_begin[s + 1];
        const std::size_t width = end - begin;
        auto& rmse = fold_rmse[task];
        auto& err = fold_error[task];
        rmse.assign(k * width, std::numeric_limits<double>::quiet_NaN());
        err.assign(k * width, "");

        const Eigen::MatrixXd phi_train = basis_matrix(sets[s], take_rows(Z, train[f]));
        const Eigen::MatrixXd phi_test = basis_matrix(sets[s], take_rows(Z, test[f]));
        const Eigen::MatrixXd y_train = take_rows(etas, train[f]);
        const Eigen::MatrixXd y_test = take_rows(etas, test[f]);
        const double inv_test = 1.0 / static_cast<double>(y_test.rows());

        auto score = [&](std::size_t comp, std::size_t local, const Eigen::VectorXd& coef) {
            const Eigen::VectorXd resid = phi_test * coef - y_test.col(static_cast<Eigen::Index>(comp));
            rmse[comp * width + local] = std::sqrt(resid.squaredNorm() * inv_test);
        };

        std::optional<StandardizedBasis> sb;
        for (std::size_t local = 0; local < width; ++local) {
            const GridCell& cell = layout.cells[begin + local];
            if (cell.fit_type != FitType::Linear) continue;
            try {
                const Eigen::MatrixXd coef = least_squares(phi_train, y_train);
                for (std::size_t c = 0; c < k; ++c) score(c, local, coef.col(static_cast<Eigen::Index>(c)));
            } catch (const Error& e) {
                for (std::size_t c = 0; c < k; ++c) err[c * width + local] = e.what();
            }
        }
        for (FitType type : {FitType::Lasso, FitType::ElasticNet}) {
            if (std::find(grid.fit_types.begin(), grid.fit_types.end(), type) == grid.fit_types.end()) continue;
            if (!sb) sb.emplace(phi_train);
            for (std::size_t c = 0; c < k; ++c) {
                std::vector<PenalizedFit> fits;
                std::string failure;
                try {
                    fits = penalized_path(*sb, y_train.col(static_cast<Eigen::Index>(c)), type, path_penalties,
                                          grid.solver);
                } catch (const Error& e) {
                    failure = e.what();
                }
                for (std::size_t local = 0; local < width; ++local) {
                    const GridCell& cell = layout.cells[begin + local];
                    if (cell.fit_type != type) continue;
                    if (!failure.empty()) {
                        err[c * width + local] = failure;
                        continue;
                    }
                    const auto it = std::find_if(fits.begin(), fits.end(),
                                                 [&](const PenalizedFit& pf) { return pf.penalty == cell.penalty; });
                    if (!it->converged) {
                        err[c * width + local] =
                            it->sweeps == 0  ? std::string("skipped after non-convergence at a larger penalty")
                            : it->saturated ? fmt::format("support saturated after {} sweeps", it->sweeps)
                                            : fmt::format("no convergence within {} sweeps", it->sweeps);
                        continue;
                    }
                    score(c, local, it->coefficients);
                }
            }
        }
    });

    std::vector<ComponentSelection> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        const Eigen::VectorXd eta = etas.col(static_cast<Eigen::Index>(c));
        const double sd = std::sqrt((eta.array() - eta.mean()).square().mean());
        auto& sel = out[c];
        sel.scores.resize(layout.cells.size());
        for (std::size_t s = 0; s < sets.size(); ++s) {
            const std::size_t begin = layout.set_begin[s], width = layout.set_begin[s + 1] - begin;
            for (std::size_t local = 0; local < width; ++local) {
                CellScore cs;
                cs.cell = layout.cells[begin + local];
                double sum = 0.0;
                for (std::size_t f = 0; f < grid.folds; ++f) {
                    const std::size_t task = s * grid.folds + f;
                    const auto& e = fold_error[task][c * width + local];
                    if (!e.empty()) {
                        cs.ok = false;
                        cs.failure = fmt::format("fold {}: {}", f, e);
                        break;
                    }
                    sum += fold_rmse[task][c * width + local];
                }
                cs.cv_rmse = cs.ok ? sum / static_cast<double>(grid.folds) : std::numeric_limits<double>::quiet_NaN();
                if (cs.ok && !std::isfinite(cs.cv_rmse)) {
                    cs.ok = false;
                    cs.failure = "non-finite CV score";
                }
                sel.scores[begin + local] = cs;
            }
        }

        // Candidates ordered by the tie-break rule among near-equal scores.
        std::vector<std::size_t> ok;
        for (std::size_t i = 0; i < sel.scores.size(); ++i)
            if (sel.scores[i].ok) ok.push_back(i);
        if (ok.empty()) throw NumericalError(fmt::format("every grid cell failed for component {}", c + 1));
        const double tie = 1e-10 * (sd > 0.0 ? sd : 1.0);
        auto key = [&](std::size_t i) {
            const auto& cell = sel.scores[i].cell;
            return std::make_tuple(cell.order, -cell.penalty, fit_rank(cell.fit_type), i);
        };
        std::vector<std::size_t> ranked = ok;
        std::sort(ranked.begin(), ranked.end(),
                  [&](std::size_t a, std::size_t b) { return sel.scores[a].cv_rmse < sel.scores[b].cv_rmse; });

        // Refit candidates in preference order until one converges on all rows.
        std::vector<bool> tried(sel.scores.size(), false);
        bool fitted = false;
        while (!fitted) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i : ranked)
                if (!tried[i]) best = std::min(best, sel.scores[i].cv_rmse);
            if (!std::isfinite(best)) throw NumericalError(fmt::format("no grid cell could be refit for component {}", c + 1));
            std::optional<std::size_t> winner;
            for (std::size_t i : ranked) {
                if (tried[i] || sel.scores[i].cv_rmse > best + tie) continue;
                if (!winner || key(i) < key(*winner)) winner = i;
            }
            tried[*winner] = true;
            const auto& cell = sel.scores[*winner].cell;
            const auto s = static_cast<std::size_t>(
                std::upper_bound(layout.set_begin.begin(), layout.set_begin.end(), *winner) - layout.set_begin.begin() - 1);
            const Eigen::MatrixXd phi = basis_matrix(sets[s], Z);
            PCEComponentModel model;
            model.index_set = sets[s];
            model.fit_type = cell.fit_type;
            model.penalty = cell.penalty;
            model.cv_rmse = sel.scores[*winner].cv_rmse;
            try {
                if (cell.fit_type == FitType::Linear) {
                    model.coefficients = least_squares(phi, eta).col(0);
                } else {
                    StandardizedBasis sb(phi);
                    auto fit = path_fit(sb, eta, cell.fit_type, cell.penalty, grid.penalties, grid.solver);
                    if (!fit.converged) continue;
                    model.coefficients = fit.coefficients;
                }
            } catch (const Error&) {
                continue;
            }
            sel.model = std::move(model);
            fitted = true;
        }
    }
    return out;
}

ComponentSelection cv_select(const Eigen::MatrixXd& Z, const Eigen::VectorXd& eta, const HyperGrid& grid,
                             std::uint64_t seed) {
    return std::move(cv_select_all(Z, eta, grid, seed).front());
}

SurrogateModel::SurrogateModel(ParameterSpace space, ReducedBasis basis, std::vector<PCEComponentModel> components,
                               SchemaPtr schema)
    : space_(std::move(space)), basis_(std::move(basis)), components_(std::move(components)), schema_(std::move(schema)) {
    if (components_.size() != basis_.rank())
        throw InputError(fmt::format("surrogate has {} component models for {} principal components",
                                     components_.size(), basis_.rank()));
    for (const auto& c : components_) {
        if (c.index_set.dim() != space_.dim()) throw InputError("component model dimension does not match the space");
        if (static_cast<std::size_t>(c.coefficients.size()) != c.index_set.size())
            throw InputError("component coefficients do not match the index set");
    }
    if (schema_ && schema_->total_size() != basis_.output_size())
        throw InputError("surrogate schema does not match the basis length");
}

Eigen::VectorXd SurrogateModel::predict_scores_canonical(const Eigen::VectorXd& z) const {
    Eigen::VectorXd s(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t j = 0; j < components_.size(); ++j) s[static_cast<Eigen::Index>(j)] = components_[j].predict(z);
    return s;
}

Eigen::MatrixXd SurrogateModel::score_jacobian_canonical(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(components_.size()), static_cast<Eigen::Index>(space_.dim()));
    for (std::size_t j = 0; j < components_.size(); ++j)
        J.row(static_cast<Eigen::Index>(j)) = components_[j].gradient(z).transpose();
    return J;
}

Eigen::VectorXd SurrogateModel::predict_scores(const Eigen::VectorXd& theta) const {
    return predict_scores_canonical(space_.to_canonical(theta));
}

StackedVector SurrogateModel::predict(const Eigen::VectorXd& theta) const {
    return StackedVector(schema_, basis_.reconstruct(predict_scores(theta)));
}

Eigen::MatrixXd SurrogateModel::predict_gradient(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd z = space_.to_canonical(theta);
    const Eigen::MatrixXd J = score_jacobian_canonical(z) * space_.jacobian_diagonal().cwiseInverse().asDiagonal();
    return basis_.components.transpose() * J;
}

void SurrogateModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    basis_.save(dir / "basis");
    space_.save(dir / "parameters.json");
    if (schema_) write_json(dir / "schema.json", schema_->to_json());
    nlohmann::json comps = nlohmann::json::array();
    for (std::size_t j = 0; j < components_.size(); ++j) {
        const auto& c = components_[j];
        const auto stem = fmt::format("coefficients_{:02}", j + 1);
        write_f64(dir / stem, c.coefficients.transpose());
        comps.push_back({{"fit_type", to_string(c.fit_type)},
                         {"penalty", c.penalty},
                         {"cv_rmse", c.cv_rmse},
                         {"order", c.index_set.order()},
                         {"truncation", c.index_set.truncation().to_string()},
                         {"indices", c.index_set.indices()},
                         {"coefficients", stem}});
    }
    write_json(dir / "surrogate.json", {{"components", comps}, {"dim", space_.dim()}});
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "surrogate.json"))
        throw InputError(fmt::format("no fitted surrogate in {}", dir.string()));
    auto space = ParameterSpace::load(dir / "parameters.json");
    auto basis = ReducedBasis::load(dir / "basis");
    SchemaPtr schema;
    if (std::filesystem::exists(dir / "schema.json"))
        schema = std::make_shared<const FieldSchema>(FieldSchema::from_json(read_json(dir / "schema.json")));
    const auto j = read_json(dir / "surrogate.json");
    std::vector<PCEComponentModel> comps;
    try {
        for (const auto& e : j.at("components")) {
            PCEComponentModel c;
            c.fit_type = fit_type_from_string(e.at("fit_type").get<std::string>());
            c.penalty = e.at("penalty").get<double>();
            c.cv_rmse = e.at("cv_rmse").get<double>();
            c.index_set = MultiIndexSet(space.dim(), e.at("order").get<unsigned>(),
                                        Truncation::from_string(e.at("truncation").get<std::string>()),
                                        e.at("indices").get<std::vector<std::vector<unsigned>>>());
            c.coefficients = read_f64(dir / e.at("coefficients").get<std::string>()).row(0).transpose();
            comps.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("{}: {}", (dir / "surrogate.json").string(), e.what()));
    }
    return SurrogateModel(std::move(space), std::move(basis), std::move(comps), std::move(schema));
}

SurrogateFit fit_surrogate(const EnsembleOutput& ensemble, const ReducedBasis& basis, const HyperGrid& grid,
                           std::uint64_t seed) {
    if (basis.output_size() != ensemble.schema()->total_size() ||
        static_cast<std::size_t>(basis.scores.rows()) != ensemble.size())
        throw InputError("basis was not fitted from this ensemble");
    const Eigen::MatrixXd Z = ensemble.design().canonical();
    auto selections = cv_select_all(Z, basis.scores, grid, seed);
    std::vector<PCEComponentModel> comps;
    for (const auto& s : selections) comps.push_back(s.model);
    SurrogateModel model(ensemble.design().space(), basis, std::move(comps), ensemble.schema());
    return SurrogateFit{std::move(model), std::move(selections)};
}

std::vector<std::vector<std::string>> selection_report(const std::vector<ComponentSelection>& selections) {
    std::vector<std::vector<std::string>> rows{
        {"PC", "fit_type", "order", "truncation", "penalty", "cv_rmse", "terms", "nonzero_terms"}};
    for (std::size_t j = 0; j < selections.size(); ++j) {
        const auto& m = selections[j].model;
        const auto nonzero = (m.coefficients.array() != 0.0).count();
        rows.push_back({std::to_string(j + 1), to_string(m.fit_type), std::to_string(m.index_set.order()),
                        m.index_set.truncation().to_string(), csv::format_double(m.penalty),
                        csv::format_double(m.cv_rmse), std::to_string(m.index_set.size()), std::to_string(nonzero)});
    }
    return rows;
}

R2Result r2_from_predictions(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted) {
    if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
        throw InputError("R^2: truth and predictions differ in shape");
    R2Result r;
    r.per_point.resize(truth.cols());
    double num_total = 0.0, den_total = 0.0;
    for (Eigen::Index l = 0; l < truth.cols(); ++l) {
        const auto col = truth.col(l);
        const double mean = col.mean();
        const double num = (col - predicted.col(l)).squaredNorm();
        const double den = (col.array() - mean).square().sum();
        num_total += num;
        den_total += den;
        r.per_point[l] = den > 0.0 ? 1.0 - num / den : std::numeric_limits<double>::quiet_NaN();
    }
    r.overall = den_total > 0.0 ? 1.0 - num_total / den_total : std::numeric_limits<double>::quiet_NaN();
    return r;
}

R2Result surrogate_r2(const SurrogateModel& model, const EnsembleOutput& ensemble) {
    if (model.schema() && !model.schema()->same_layout(*ensemble.schema()))
        throw InputError("surrogate and ensemble schemas differ");
    Eigen::MatrixXd pred(ensemble.rows().rows(), ensemble.rows().cols());
    for (std::size_t i = 0; i < ensemble.size(); ++i)
        pred.row(static_cast<Eigen::Index>(i)) = model.predict(ensemble.design().row(i)).values().transpose();
    return r2_from_predictions(ensemble.rows(), pred);
}

}  // namespace autocal
