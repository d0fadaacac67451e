#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autocal/field_data.hpp"

namespace autocal {

/// Rank-k principal component (EOF) basis of an ensemble matrix.
///
/// Rows of `components` are orthonormal; `scores` holds the projection of
/// each centred ensemble member. Each component is oriented so that its
/// largest-magnitude entry is positive.
struct ReducedBasis {
    Eigen::VectorXd mean;               // m
    Eigen::MatrixXd components;         // k x m
    Eigen::MatrixXd scores;             // n x k
    Eigen::VectorXd singular_values;    // k, nonincreasing
    Eigen::VectorXd explained_fraction; // k, cumulative
    double total_variance = 0.0;        // squared Frobenius norm of the centred data

    std::size_t rank() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t output_size() const { return static_cast<std::size_t>(mean.size()); }

    /// mean + sum_j scores_j * psi_j
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& scores_row) const;
    /// (y - mean) * components^T
    Eigen::VectorXd project(const Eigen::VectorXd& y) const;

    void save(const std::filesystem::path& dir) const;
    static ReducedBasis load(const std::filesystem::path& dir);
};

/// Top-k right singular vectors of the column-centred matrix Y (no scaling).
/// Requires 1 <= k <= min(n - 1, m).
ReducedBasis fit_pca(const Eigen::MatrixXd& Y, std::size_t k);
ReducedBasis fit_pca(const EnsembleOutput& ensemble, std::size_t k);

/// (k', cumulative explained fraction) for k' = 1..k.
std::vector<std::pair<std::size_t, double>> variance_curve(const ReducedBasis& basis);

}  // namespace autocal
