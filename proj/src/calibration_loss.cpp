#include "autocal/calibration_loss.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "autocal/error.hpp"

namespace autocal {

void PriorConfig::validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw InputError(fmt::format("prior needs alpha > 0 and beta > 0 (got {}, {})", alpha, beta));
}

std::string to_string(Estimator e) { return e == Estimator::MLE ? "MLE" : "MAP"; }

Estimator estimator_from_string(const std::string& s) {
    if (s == "MLE" || s == "mle") return Estimator::MLE;
    if (s == "MAP" || s == "map") return Estimator::MAP;
    throw InputError(fmt::format("unknown estimator '{}'", s));
}

double log_prior_s(const PriorConfig& prior, const Eigen::VectorXd& s_sq) {
    double total = 0.0;
    for (Eigen::Index p = 0; p < s_sq.size(); ++p) {
        if (!(s_sq[p] > 0.0)) throw DomainError(fmt::format("scale s^2[{}] = {} must be positive", p, s_sq[p]));
        total += (-prior.alpha - 1.0) * std::log(s_sq[p]) - prior.beta / s_sq[p];
    }
    return total;
}

LossState::LossState(std::shared_ptr<const SurrogateModel> surrogate, StackedVector obs, PriorConfig prior,
                     std::optional<Eigen::VectorXd> fixed_scales)
    : surrogate_(std::move(surrogate)), obs_(std::move(obs)), prior_(prior), fixed_(std::move(fixed_scales)) {
    if (!surrogate_) throw InputError("loss needs a surrogate");
    prior_.validate();
    const auto& schema = *obs_.schema();
    if (surrogate_->schema() && !surrogate_->schema()->same_layout(schema))
        throw InputError("surrogate and observation schemas differ");
    if (fixed_) {
        if (static_cast<std::size_t>(fixed_->size()) != schema.num_fields())
            throw InputError(fmt::format("{} fixed scales given for {} fields", fixed_->size(), schema.num_fields()));
        check_scales(*fixed_);
    }

    const auto& basis = surrogate_->basis();
    const Eigen::VectorXd offset = basis.mean - obs_.values();
    for (std::size_t p = 0; p < schema.num_fields(); ++p) {
        const auto& f = schema.field(p);
        const auto off = static_cast<Eigen::Index>(schema.offset(p));
        const auto mp = static_cast<Eigen::Index>(f.size());
        const Eigen::MatrixXd psi = basis.components.middleCols(off, mp);
        const Eigen::VectorXd r0 = offset.segment(off, mp);
        FieldForm form;
        form.sigma_sq = f.sigma_sq;
        form.size = static_cast<double>(mp);
        form.c0 = (f.weights.array() * r0.array().square()).sum();
        form.b = psi * (f.weights.array() * r0.array()).matrix();
        form.G = psi * f.weights.asDiagonal() * psi.transpose();
        fields_.push_back(std::move(form));
    }
}

Eigen::VectorXd LossState::field_sizes() const {
    Eigen::VectorXd m(static_cast<Eigen::Index>(fields_.size()));
    for (std::size_t p = 0; p < fields_.size(); ++p) m[static_cast<Eigen::Index>(p)] = fields_[p].size;
    return m;
}

void LossState::check_scales(const Eigen::VectorXd& s_sq) const {
    if (static_cast<std::size_t>(s_sq.size()) != obs_.schema()->num_fields())
        throw InputError(fmt::format("expected {} scales, got {}", obs_.schema()->num_fields(), s_sq.size()));
    for (Eigen::Index p = 0; p < s_sq.size(); ++p)
        if (!(s_sq[p] > 0.0) || !std::isfinite(s_sq[p]))
            throw DomainError(fmt::format("scale s^2[{}] = {} must be positive", p, s_sq[p]));
}

Eigen::VectorXd LossState::errors_from_scores(const Eigen::VectorXd& a) const {
    Eigen::VectorXd e(static_cast<Eigen::Index>(fields_.size()));
    for (std::size_t p = 0; p < fields_.size(); ++p) {
        const auto& f = fields_[p];
        const double q = f.c0 + 2.0 * f.b.dot(a) + a.dot(f.G * a);
        e[static_cast<Eigen::Index>(p)] = std::max(0.0, q) / f.sigma_sq;
    }
    return e;
}

Eigen::VectorXd LossState::field_error_canonical(const Eigen::VectorXd& z) const {
    return errors_from_scores(surrogate_->predict_scores_canonical(z));
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> LossState::field_error_and_jacobian_canonical(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd a = surrogate_->predict_scores_canonical(z);
    const Eigen::MatrixXd J = surrogate_->score_jacobian_canonical(z);
    Eigen::VectorXd e(static_cast<Eigen::Index>(fields_.size()));
    Eigen::MatrixXd de(static_cast<Eigen::Index>(fields_.size()), J.cols());
    for (std::size_t p = 0; p < fields_.size(); ++p) {
        const auto& f = fields_[p];
        const Eigen::VectorXd Ga = f.G * a;
        const double q = f.c0 + 2.0 * f.b.dot(a) + a.dot(Ga);
        const auto row = static_cast<Eigen::Index>(p);
        e[row] = std::max(0.0, q) / f.sigma_sq;
        de.row(row) = (2.0 / f.sigma_sq) * ((f.b + Ga).transpose() * J);
    }
    return {e, de};
}

Eigen::VectorXd LossState::field_error(const Eigen::VectorXd& theta) const {
    return field_error_canonical(surrogate_->space().to_canonical(theta));
}

Eigen::VectorXd LossState::field_error_direct(const Eigen::VectorXd& theta) const {
    const auto pred = surrogate_->predict(theta);
    const auto& schema = *obs_.schema();
    Eigen::VectorXd e(static_cast<Eigen::Index>(schema.num_fields()));
    for (std::size_t p = 0; p < schema.num_fields(); ++p) {
        const auto& f = schema.field(p);
        const Eigen::VectorXd r = schema.segment(pred.values(), p) - obs_.field(p);
        e[static_cast<Eigen::Index>(p)] = (f.weights.array() * r.array().square()).sum() / f.sigma_sq;
    }
    return e;
}

double LossState::objective_from_errors(const Eigen::VectorXd& e, const Eigen::VectorXd& s_sq,
                                        Estimator estimator) const {
    double total = 0.0;
    for (std::size_t p = 0; p < fields_.size(); ++p) {
        const auto k = static_cast<Eigen::Index>(p);
        total += -e[k] / (2.0 * s_sq[k]) - 0.5 * fields_[p].size * std::log(s_sq[k]);
    }
    if (estimator == Estimator::MAP) total += autocal::log_prior_s(prior_, s_sq);
    return total;
}

double LossState::log_likelihood(const Eigen::VectorXd& theta, const Eigen::VectorXd& s_sq) const {
    check_scales(s_sq);
    return objective_from_errors(field_error(theta), s_sq, Estimator::MLE);
}

double LossState::log_prior_s(const Eigen::VectorXd& s_sq) const {
    check_scales(s_sq);
    return autocal::log_prior_s(prior_, s_sq);
}

double LossState::log_posterior(const Eigen::VectorXd& theta, const Eigen::VectorXd& s_sq) const {
    check_scales(s_sq);
    if (!surrogate_->space().contains(theta)) return -std::numeric_limits<double>::infinity();
    return objective_from_errors(field_error(theta), s_sq, Estimator::MAP);
}

Eigen::VectorXd LossState::profile_s(const Eigen::VectorXd& theta, Estimator estimator) const {
    const Eigen::VectorXd e = field_error(theta);
    Eigen::VectorXd s(e.size());
    for (Eigen::Index p = 0; p < e.size(); ++p) {
        const double m = fields_[static_cast<std::size_t>(p)].size;
        s[p] = estimator == Estimator::MAP ? (0.5 * e[p] + prior_.beta) / (0.5 * m + prior_.alpha + 1.0) : e[p] / m;
    }
    return s;
}

LossState::Gradient LossState::gradient_log_posterior(const Eigen::VectorXd& theta, const Eigen::VectorXd& s_sq,
                                                      Estimator estimator) const {
    check_scales(s_sq);
    const auto& space = surrogate_->space();
    const auto [e, de] = field_error_and_jacobian_canonical(space.to_canonical(theta));
    Gradient g;
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
    g.s_sq.resize(s_sq.size());
    for (std::size_t p = 0; p < fields_.size(); ++p) {
        const auto k = static_cast<Eigen::Index>(p);
        const double v = s_sq[k];
        dz -= de.row(k).transpose() / (2.0 * v);
        double ds = e[k] / (2.0 * v * v) - 0.5 * fields_[p].size / v;
        if (estimator == Estimator::MAP) ds += -(prior_.alpha + 1.0) / v + prior_.beta / (v * v);
        g.s_sq[k] = ds;
    }
    g.theta = dz.cwiseQuotient(space.jacobian_diagonal());
    return g;
}

}  // namespace autocal
