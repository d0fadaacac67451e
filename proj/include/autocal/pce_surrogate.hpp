#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autocal/field_data.hpp"
#include "autocal/multi_index.hpp"
#include "autocal/param_design.hpp"
#include "autocal/reduction.hpp"
#include "autocal/regression.hpp"

namespace autocal {

/// One Legendre expansion f_j(z) = sum_i phi_i L_i(z) over canonical inputs.
struct PCEComponentModel {
    MultiIndexSet index_set;
    Eigen::VectorXd coefficients;
    FitType fit_type = FitType::Linear;
    double penalty = 0.0;
    double cv_rmse = 0.0;

    double predict(const Eigen::VectorXd& z) const;
    /// d f_j / d z (length d).
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const;
};

/// Search space of the cross-validated hyperparameter selection.
struct HyperGrid {
    std::vector<unsigned> orders;
    std::vector<Truncation> truncations;
    std::vector<FitType> fit_types;
    std::vector<double> penalties;  // used by lasso and elastic net
    std::size_t folds = 5;
    CoordinateDescentOptions solver;

    /// Orders 1..12, total-order and hyperbolic(0.5), all three fit types,
    /// 20 penalties log-spaced over [1e-8, 1e4], five folds.
    static HyperGrid defaults();
    void validate() const;
};

/// 20 values (by default) evenly spaced in log10 between lo and hi.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

struct GridCell {
    unsigned order = 1;
    Truncation truncation;
    FitType fit_type = FitType::Linear;
    double penalty = 0.0;  // 0 for linear
};

struct CellScore {
    GridCell cell;
    double cv_rmse = 0.0;  // mean over folds of the held-out RMSE
    bool ok = true;
    std::string failure;
};

struct ComponentSelection {
    PCEComponentModel model;
    std::vector<CellScore> scores;  // every grid cell, in grid order
};

/// Fits one component with fixed hyperparameters. Penalized fits are
/// computed along the grid path down to `penalty` when `path` is given.
PCEComponentModel fit_component(const Eigen::MatrixXd& Z, const Eigen::VectorXd& eta, FitType fit_type, double penalty,
                                const MultiIndexSet& index_set, const CoordinateDescentOptions& options = {});

/// Brute-force k-fold grid search. Every cell sees the same seeded fold
/// partition; the lowest mean RMSE wins, ties (within 1e-10 of sd(eta))
/// going to lower order, then stronger penalty, then linear < lasso <
/// elastic-net, then grid position. The winner is refit on all rows.
ComponentSelection cv_select(const Eigen::MatrixXd& Z, const Eigen::VectorXd& eta, const HyperGrid& grid,
                             std::uint64_t seed);

/// Same as cv_select for every column of `etas`, sharing basis matrices and
/// factorizations between columns. Column j gives the same selection as
/// cv_select(Z, etas.col(j), grid, seed).
std::vector<ComponentSelection> cv_select_all(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& etas,
                                              const HyperGrid& grid, std::uint64_t seed);

/// Seeded shuffle split into `folds` contiguous chunks; fold of each row.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Composite surrogate mean + sum_j f_j(z(theta)) psi_j.
class SurrogateModel {
public:
    SurrogateModel(ParameterSpace space, ReducedBasis basis, std::vector<PCEComponentModel> components,
                   SchemaPtr schema);

    const ParameterSpace& space() const { return space_; }
    const ReducedBasis& basis() const { return basis_; }
    const std::vector<PCEComponentModel>& components() const { return components_; }
    const SchemaPtr& schema() const { return schema_; }

    /// Component predictions f_j at canonical z.
    Eigen::VectorXd predict_scores_canonical(const Eigen::VectorXd& z) const;
    /// k x d Jacobian of the component predictions with respect to canonical z.
    Eigen::MatrixXd score_jacobian_canonical(const Eigen::VectorXd& z) const;

    Eigen::VectorXd predict_scores(const Eigen::VectorXd& theta) const;
    StackedVector predict(const Eigen::VectorXd& theta) const;
    /// m x d Jacobian with respect to physical parameters.
    Eigen::MatrixXd predict_gradient(const Eigen::VectorXd& theta) const;

    void save(const std::filesystem::path& dir) const;
    static SurrogateModel load(const std::filesystem::path& dir);

private:
    ParameterSpace space_;
    ReducedBasis basis_;
    std::vector<PCEComponentModel> components_;
    SchemaPtr schema_;
};

struct SurrogateFit {
    SurrogateModel model;
    std::vector<ComponentSelection> selections;
};

/// Independent cross-validated selection for every retained component.
SurrogateFit fit_surrogate(const EnsembleOutput& ensemble, const ReducedBasis& basis, const HyperGrid& grid,
                           std::uint64_t seed);

/// Per-component selection table: PC, fit type, order, truncation, penalty, CV RMSE, terms.
std::vector<std::vector<std::string>> selection_report(const std::vector<ComponentSelection>& selections);

struct R2Result {
    double overall = 0.0;
    Eigen::VectorXd per_point;  // NaN where the ensemble has zero variance
};

/// R^2(l) = 1 - sum_i (f_il - fhat_il)^2 / sum_i (f_il - fbar_l)^2, and the
/// pooled ratio over all points.
R2Result surrogate_r2(const SurrogateModel& model, const EnsembleOutput& ensemble);
R2Result r2_from_predictions(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted);

}  // namespace autocal
