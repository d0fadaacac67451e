#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "autocal/field_data.hpp"
#include "autocal/pce_surrogate.hpp"

namespace autocal {

/// Inverse-gamma prior on each per-field scale s_p^2; uniform prior on the
/// parameter box.
struct PriorConfig {
    double alpha = 3.0;
    double beta = 0.5;
    void validate() const;
};

enum class Estimator { MLE, MAP };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

/// Gaussian likelihood of the normalized observations around the surrogate
/// prediction, with per-field scales s_p^2 and area weights:
///
///   Y_pl / sigma_p ~ N(fhat_pl / sigma_p, s_p^2 / w_pl)   independently.
///
/// Up to additive constants the joint log-likelihood is
///   sum_p  -e_p / (2 s_p^2) - (m_p / 2) log s_p^2
/// with e_p the weighted, normalized mean-squared error of field p.
///
/// Field errors are evaluated from per-field quadratic forms in the k
/// component scores, so a call costs O(k^2 P) after construction instead of a
/// full reconstruction of the m-vector.
class LossState {
public:
    LossState(std::shared_ptr<const SurrogateModel> surrogate, StackedVector obs, PriorConfig prior = {},
              std::optional<Eigen::VectorXd> fixed_scales = std::nullopt);

    const SurrogateModel& surrogate() const { return *surrogate_; }
    const StackedVector& obs() const { return obs_; }
    const PriorConfig& prior() const { return prior_; }
    const std::optional<Eigen::VectorXd>& fixed_scales() const { return fixed_; }
    std::size_t num_fields() const { return fields_.size(); }
    std::size_t dim() const { return surrogate_->space().dim(); }
    /// m_p for every field.
    Eigen::VectorXd field_sizes() const;

    /// e_p(theta) = sum_l w_pl (fhat_pl - Y_pl)^2 / sigma_p^2.
    Eigen::VectorXd field_error(const Eigen::VectorXd& theta) const;
    /// Same quantity computed from the full surrogate prediction.
    Eigen::VectorXd field_error_direct(const Eigen::VectorXd& theta) const;

    double log_likelihood(const Eigen::VectorXd& theta, const Eigen::VectorXd& s_sq) const;
    double log_prior_s(const Eigen::VectorXd& s_sq) const;
    /// log-likelihood + log prior; -inf outside the parameter box.
    double log_posterior(const Eigen::VectorXd& theta, const Eigen::VectorXd& s_sq) const;
    /// MAP: (e_p/2 + beta) / (m_p/2 + alpha + 1). MLE: e_p / m_p.
    Eigen::VectorXd profile_s(const Eigen::VectorXd& theta, Estimator estimator = Estimator::MAP) const;

    struct Gradient {
        Eigen::VectorXd theta;  // d, physical units
        Eigen::VectorXd s_sq;   // P
    };
    /// Gradient of the log-posterior (MAP) or log-likelihood (MLE).
    Gradient gradient_log_posterior(const Eigen::VectorXd& theta, const Eigen::VectorXd& s_sq,
                                    Estimator estimator = Estimator::MAP) const;

    // Canonical-coordinate variants used by the optimizer and the sampler.
    Eigen::VectorXd field_error_canonical(const Eigen::VectorXd& z) const;
    /// e_p and its P x d Jacobian with respect to z.
    std::pair<Eigen::VectorXd, Eigen::MatrixXd> field_error_and_jacobian_canonical(const Eigen::VectorXd& z) const;
    double objective_from_errors(const Eigen::VectorXd& e, const Eigen::VectorXd& s_sq, Estimator estimator) const;

private:
    struct FieldForm {
        double sigma_sq = 1.0;
        double size = 1.0;
        double c0 = 0.0;      // sum w (mean - obs)^2
        Eigen::VectorXd b;    // Psi W (mean - obs)
        Eigen::MatrixXd G;    // Psi W Psi^T
    };
    Eigen::VectorXd errors_from_scores(const Eigen::VectorXd& a) const;
    void check_scales(const Eigen::VectorXd& s_sq) const;

    std::shared_ptr<const SurrogateModel> surrogate_;
    StackedVector obs_;
    PriorConfig prior_;
    std::optional<Eigen::VectorXd> fixed_;
    std::vector<FieldForm> fields_;
};

/// Sum over fields of (-alpha - 1) log s_p^2 - beta / s_p^2.
double log_prior_s(const PriorConfig& prior, const Eigen::VectorXd& s_sq);

}  // namespace autocal
