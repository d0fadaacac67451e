#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autocal/calibration_loss.hpp"
#include "autocal/error.hpp"
#include "autocal/param_design.hpp"

namespace autocal {

struct OptimizerConfig {
    std::size_t memory = 10;
    std::size_t max_iters = 500;
    double grad_tol = 1e-6;  // projected gradient, infinity norm, times max(1, |f|)
    std::size_t n_starts = 50;
    std::uint64_t seed = 0;
    void validate() const;
};

/// Objective to maximize; writes the gradient into `grad` when it is non-null.
using SmoothObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoundedRun {
    Eigen::VectorXd x;
    double value = 0.0;
    double projected_gradient = 0.0;
    bool converged = false;
    bool failed = false;  // no progress could be made from the start
    std::size_t iterations = 0;
    std::size_t n_evals = 0;
    std::string stop_reason;
    std::vector<double> trace;  // objective after each accepted iteration
};

/// Projected limited-memory BFGS for maximizing `f` over lower <= x <= upper
/// (infinite bounds allowed). Steps come from a two-loop recursion on the
/// free variables, projected onto the box; the line search backtracks on the
/// Armijo condition and, for unclipped steps, enforces the strong Wolfe
/// curvature condition (constants 1e-4 and 0.9, at most 40 trials). A run
/// also counts as converged when no step decreases the objective and the
/// last quasi-Newton step predicted a change below 1e-10 max(1, |f|).
BoundedRun maximize_bounded(const SmoothObjective& f, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                            const Eigen::VectorXd& x0, const OptimizerConfig& config);

struct StartRecord {
    Eigen::VectorXd theta_start;  // physical
    Eigen::VectorXd theta_end;
    Eigen::VectorXd s_sq_end;
    double objective = 0.0;
    double projected_gradient = 0.0;
    bool converged = false;
    bool failed = false;
    std::size_t iterations = 0;
    std::size_t n_evals = 0;
    std::string stop_reason;
    std::vector<double> trace;
};

struct CalibrationResult {
    ParameterSpace space;
    std::vector<std::string> fields;
    Estimator mode = Estimator::MAP;
    Eigen::VectorXd theta_hat;  // physical units
    Eigen::VectorXd s_sq_hat;
    bool fixed_scales = false;
    double objective = 0.0;
    bool converged = false;
    std::size_t n_evals = 0;
    std::size_t start_index = 0;
    std::vector<StartRecord> starts;

    /// -1 at the lower bound, +1 at the upper bound, 0 inside (1e-9 of the range).
    std::vector<int> boundary() const;

    nlohmann::json to_json() const;
    static CalibrationResult from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static CalibrationResult load(const std::filesystem::path& path);
};

/// Every start failed; carries the per-start records.
class OptimizationFailed : public ConvergenceError {
public:
    OptimizationFailed(const std::string& what, std::vector<StartRecord> starts)
        : ConvergenceError(what), starts_(std::move(starts)) {}
    const std::vector<StartRecord>& starts() const { return starts_; }

private:
    std::vector<StartRecord> starts_;
};

/// Multi-start maximization of the log-likelihood (MLE) or log-posterior
/// (MAP) jointly over canonical theta and u = log s^2. Starts are an LHS over
/// the box with s^2 at its profile value. With fixed scales only theta moves.
CalibrationResult maximize(const LossState& state, Estimator mode, const OptimizerConfig& config);

int boundary_flag(double value, double lower, double upper);

struct ParameterTable {
    std::vector<std::string> parameters;
    std::vector<std::string> reference_names;
    Eigen::MatrixXd references;  // d x R
    std::string estimate_name;
    Eigen::VectorXd estimate;
    Eigen::VectorXd minimum;
    Eigen::VectorXd maximum;
    std::vector<int> boundary;

    /// estimate - reference r.
    Eigen::VectorXd difference(std::size_t r) const;
    std::string to_csv() const;
    static ParameterTable from_csv(const std::string& text);
};

ParameterTable compare_parameter_table(const Eigen::VectorXd& estimate, const std::string& estimate_name,
                                       const std::vector<std::pair<std::string, Eigen::VectorXd>>& references,
                                       const ParameterSpace& space);
ParameterTable compare_parameter_table(const CalibrationResult& result,
                                       const std::vector<std::pair<std::string, Eigen::VectorXd>>& references);

}  // namespace autocal
