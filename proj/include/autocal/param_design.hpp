#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace autocal {

/// Names and box bounds of the tunable inputs, in physical units.
///
/// Owns the affine map between physical units and the canonical cube
/// [-1, 1]^d on which the polynomial surrogate operates. Values at the public
/// surface of the library are always physical.
class ParameterSpace {
public:
    ParameterSpace() = default;
    ParameterSpace(std::vector<std::string> names, std::vector<double> lower, std::vector<double> upper);

    std::size_t dim() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }
    double range(std::size_t i) const { return upper_[i] - lower_[i]; }
    std::size_t index_of(const std::string& name) const;

    /// Affine map lower -> -1, upper -> +1. Inputs may exceed the box by
    /// 1e-12 of the range (the result is clamped); anything further throws
    /// DomainError naming the dimension.
    Eigen::VectorXd to_canonical(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd from_canonical(const Eigen::VectorXd& z) const;

    /// d(theta_i)/d(z_i) = range_i / 2.
    Eigen::VectorXd jacobian_diagonal() const;

    bool contains(const Eigen::VectorXd& theta) const;

    nlohmann::json to_json() const;
    static ParameterSpace from_json(const nlohmann::json& j);
    static ParameterSpace load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// The five E3SM atmosphere parameters and bounds used for the reference
    /// perturbed-parameter ensemble.
    static ParameterSpace e3sm_atmosphere();

    bool operator==(const ParameterSpace& other) const;

private:
    std::vector<std::string> names_;
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
};

/// n x d design in physical units; every entry lies inside its column bounds.
class DesignMatrix {
public:
    DesignMatrix(ParameterSpace space, Eigen::MatrixXd values);

    const ParameterSpace& space() const { return space_; }
    const Eigen::MatrixXd& values() const { return values_; }
    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    Eigen::VectorXd row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)).transpose(); }

    /// Rows mapped to the canonical cube.
    Eigen::MatrixXd canonical() const;

    void write_csv(const std::filesystem::path& path) const;
    /// Reads a CSV whose header row names the columns; columns are matched
    /// to `space` by name.
    static DesignMatrix read_csv(const std::filesystem::path& path, const ParameterSpace& space);

private:
    ParameterSpace space_;
    Eigen::MatrixXd values_;
};

/// Latin hypercube design: each column visits every one of the n equal-width
/// strata of its range exactly once, with a uniformly jittered position
/// inside the stratum. Deterministic for a given seed.
DesignMatrix lhs_sample(const ParameterSpace& space, std::size_t n, std::uint64_t seed);

/// Stratum index of every entry of `values` (n strata per column).
std::vector<std::vector<std::size_t>> lhs_strata(const DesignMatrix& design);

}  // namespace autocal
