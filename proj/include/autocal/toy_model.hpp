#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autocal/field_data.hpp"
#include "autocal/param_design.hpp"

namespace autocal {

/// Synthetic stand-in for the climate model: five fields (three lat-lon maps,
/// one latitude-pressure section and one global scalar) driven by smooth
/// functions of the parameters.
struct ToyModelConfig {
    ParameterSpace space = ParameterSpace::e3sm_atmosphere();
    std::size_t nlat = 24;
    std::size_t nlon = 48;
    std::size_t nlev = 37;
    std::size_t n_modes = 4;
    double noise_sd = 0.01;  // relative to the sd of each field
    std::uint64_t seed = 0;
    Eigen::VectorXd theta_star;  // empty: default interior point
    /// Adds a bounded non-polynomial term to every driver.
    bool hard_mode = false;

    /// theta_star, or the default point when unset.
    Eigen::VectorXd truth() const;
    void validate() const;
    nlohmann::json to_json() const;
    static ToyModelConfig from_json(const nlohmann::json& j);
};

class ToyModel {
public:
    explicit ToyModel(ToyModelConfig config);

    const ToyModelConfig& config() const { return config_; }
    /// Layout of the toy output; normalizers are the spatial variances of the
    /// noiseless truth (1 for the scalar).
    const SchemaPtr& schema() const { return schema_; }

    /// Stacked output at physical theta. Throws DomainError outside the box.
    StackedVector evaluate(const Eigen::VectorXd& theta) const;
    /// Mode amplitudes g_{p,r}(z), one row per field and one column per mode.
    Eigen::MatrixXd drivers(const Eigen::VectorXd& z) const;
    /// Largest polynomial degree of the drivers.
    static constexpr unsigned degree = 3;

private:
    Eigen::VectorXd evaluate_canonical(const Eigen::VectorXd& z) const;

    ToyModelConfig config_;
    SchemaPtr schema_;
    std::vector<Grid> grids_;
    std::vector<Eigen::VectorXd> climatology_;           // per field, native grid
    std::vector<Eigen::MatrixXd> modes_;                 // per field, native x n_modes
    std::vector<Eigen::MatrixXd> coefficients_;          // per field, n_modes x monomials
    std::vector<std::vector<unsigned>> monomials_;       // exponent tuples, flattened d at a time
    Eigen::VectorXd scalar_weights_;                     // mixes field 0 drivers into the scalar
    double scalar_offset_ = 0.0;
    Eigen::VectorXd hard_direction_;
};

StackedVector toy_evaluate(const ToyModel& model, const Eigen::VectorXd& theta);

struct ToyCampaign {
    BuiltData data;       // LHS ensemble and noisy observations
    StackedVector truth;  // noiseless output at theta_star, on the campaign schema
};

/// n-member LHS ensemble plus observations at theta_star with Gaussian noise
/// of sd noise_sd times the field sd (spatial sd of the truth for maps,
/// ensemble sd for the scalar).
ToyCampaign toy_generate_campaign(const ToyModel& model, std::size_t n);
/// Same, for a given design.
ToyCampaign toy_generate_campaign(const ToyModel& model, const DesignMatrix& design);

}  // namespace autocal
