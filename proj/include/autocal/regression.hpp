#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autocal {

enum class FitType { Linear, Lasso, ElasticNet };

std::string to_string(FitType t);
FitType fit_type_from_string(const std::string& s);

struct CoordinateDescentOptions {
    double tolerance = 1e-8;         // max standardized coefficient change, relative to sd(y)
    std::size_t max_sweeps = 100000;
    double l1_ratio = 0.5;           // elastic net mixing; lasso uses 1
};

/// Minimum-norm least squares through an SVD; singular values below
/// rcond * max are treated as zero. Columns of `Y` are independent targets.
Eigen::MatrixXd least_squares(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& Y, double rcond = 1e-10);

/// Basis matrix whose first column is the constant term, with the remaining
/// columns centred and scaled to unit population variance. Constant columns
/// other than the first are frozen at zero.
class StandardizedBasis {
public:
    explicit StandardizedBasis(const Eigen::MatrixXd& Phi);

    std::size_t rows() const { return static_cast<std::size_t>(x_.rows()); }
    std::size_t terms() const { return static_cast<std::size_t>(x_.cols()) + 1; }
    const Eigen::MatrixXd& standardized() const { return x_; }

    /// Maps standardized slopes b (terms-1) and the target mean to
    /// coefficients of the original basis.
    Eigen::VectorXd unstandardize(const Eigen::VectorXd& b, double y_mean) const;

    const Eigen::VectorXd& means() const { return means_; }
    const Eigen::VectorXd& scales() const { return scales_; }
    const std::vector<bool>& usable() const { return usable_; }

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd means_;
    Eigen::VectorXd scales_;
    std::vector<bool> usable_;
};

struct PenalizedFit {
    Eigen::VectorXd coefficients;  // original basis, intercept first
    double penalty = 0.0;
    std::size_t sweeps = 0;
    bool converged = false;
    /// Set when the number of nonzero coefficients reached n - 1, the most a
    /// lasso solution can carry; the fit is then reported unconverged.
    bool saturated = false;
};

/// Coordinate descent for
///   (1/2n) |y - ybar - X b|^2 + lambda (r |b|_1 + (1 - r)/2 |b|^2)
/// over standardized columns (r = 1 for lasso, l1_ratio for elastic net).
/// The intercept is never penalized. Penalties are solved in the order given,
/// each warm-started from the previous solution; pass them in decreasing
/// order for a regularization path. Once one penalty fails to converge the
/// remaining ones are returned unconverged with zero sweeps.
std::vector<PenalizedFit> penalized_path(const StandardizedBasis& basis, const Eigen::VectorXd& y, FitType type,
                                         std::span<const double> penalties, const CoordinateDescentOptions& options);

}  // namespace autocal
