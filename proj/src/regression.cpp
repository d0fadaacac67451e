#include "autocal/regression.hpp"

#include <cmath>

#include <fmt/format.h>

#include "autocal/error.hpp"

namespace autocal {

std::string to_string(FitType t) {
    switch (t) {
        case FitType::Linear: return "linear";
        case FitType::Lasso: return "lasso";
        case FitType::ElasticNet: return "elastic-net";
    }
    return "linear";
}

FitType fit_type_from_string(const std::string& s) {
    if (s == "linear") return FitType::Linear;
    if (s == "lasso") return FitType::Lasso;
    if (s == "elastic-net" || s == "elastic_net" || s == "elasticnet") return FitType::ElasticNet;
    throw InputError(fmt::format("unknown fit type '{}'", s));
}

Eigen::MatrixXd least_squares(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& Y, double rcond) {
    if (Phi.rows() != Y.rows()) throw InputError("least squares: row count mismatch");
    if (!Phi.allFinite() || !Y.allFinite()) throw NumericalError("least squares: non-finite input");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cutoff = s.size() ? rcond * s[0] : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > cutoff) inv[i] = 1.0 / s[i];
    return svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * Y));
}

StandardizedBasis::StandardizedBasis(const Eigen::MatrixXd& Phi) {
    if (Phi.cols() < 1) throw InputError("basis matrix needs at least the constant column");
    const Eigen::Index n = Phi.rows();
    const Eigen::Index p = Phi.cols() - 1;
    x_.resize(n, p);
    means_.resize(p);
    scales_.resize(p);
    usable_.assign(static_cast<std::size_t>(p), true);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = Phi.col(j + 1);
        const double mu = col.mean();
        const double sd = std::sqrt((col.array() - mu).square().mean());
        means_[j] = mu;
        if (sd > 1e-12 * std::max(1.0, std::abs(mu))) {
            scales_[j] = sd;
            x_.col(j) = (col.array() - mu) / sd;
        } else {
            scales_[j] = 1.0;
            x_.col(j).setZero();
            usable_[static_cast<std::size_t>(j)] = false;
        }
    }
}

Eigen::VectorXd StandardizedBasis::unstandardize(const Eigen::VectorXd& b, double y_mean) const {
    Eigen::VectorXd phi(b.size() + 1);
    double intercept = y_mean;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        phi[j + 1] = b[j] / scales_[j];
        intercept -= phi[j + 1] * means_[j];
    }
    phi[0] = intercept;
    return phi;
}

namespace {

inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

}  // namespace

std::vector<PenalizedFit> penalized_path(const StandardizedBasis& basis, const Eigen::VectorXd& y, FitType type,
                                         std::span<const double> penalties, const CoordinateDescentOptions& options) {
    if (type == FitType::Linear) throw InputError("penalized_path needs lasso or elastic-net");
    if (static_cast<std::size_t>(y.size()) != basis.rows()) throw InputError("penalized_path: row count mismatch");
    const double ratio = type == FitType::Lasso ? 1.0 : options.l1_ratio;

    const auto& X = basis.standardized();
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double y_mean = y.mean();
    Eigen::VectorXd r = y.array() - y_mean;
    const double y_scale = std::sqrt(r.squaredNorm() * inv_n);
    const double tol = options.tolerance * (y_scale > 0.0 ? y_scale : 1.0);

    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    std::vector<Eigen::Index> active;
    std::vector<char> in_active(static_cast<std::size_t>(p), 0);
    const auto& usable = basis.usable();

    std::vector<PenalizedFit> out;
    out.reserve(penalties.size());
    bool stalled = false;
    for (double lambda : penalties) {
        if (!(lambda >= 0.0)) throw InputError("penalties must be nonnegative");
        if (stalled) {
            out.push_back(PenalizedFit{basis.unstandardize(b, y_mean), lambda, 0, false, false});
            continue;
        }
        const double l1 = lambda * ratio;
        const double shrink = 1.0 / (1.0 + lambda * (1.0 - ratio));

        auto update = [&](Eigen::Index j) {
            const double old = b[j];
            const double z = X.col(j).dot(r) * inv_n + old;
            const double next = soft_threshold(z, l1) * shrink;
            const double delta = next - old;
            if (delta != 0.0) {
                r.noalias() -= delta * X.col(j);
                b[j] = next;
            }
            return std::abs(delta);
        };

        // Exact minimizer on the current support with the current signs,
        // followed up to the first sign change.
        auto subspace_step = [&] {
            std::vector<Eigen::Index> support;
            for (Eigen::Index j : active)
                if (b[j] != 0.0) support.push_back(j);
            const auto q = static_cast<Eigen::Index>(support.size());
            if (q == 0 || q >= n) return;
            Eigen::MatrixXd XA(n, q);
            Eigen::VectorXd bA(q), sA(q);
            for (Eigen::Index i = 0; i < q; ++i) {
                XA.col(i) = X.col(support[static_cast<std::size_t>(i)]);
                bA[i] = b[support[static_cast<std::size_t>(i)]];
                sA[i] = bA[i] > 0.0 ? 1.0 : -1.0;
            }
            Eigen::MatrixXd H = XA.transpose() * XA * inv_n;
            H.diagonal().array() += lambda * (1.0 - ratio);
            const Eigen::VectorXd rhs = XA.transpose() * (r + XA * bA) * inv_n - l1 * sA;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
            if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-10)) return;
            const Eigen::VectorXd target = ldlt.solve(rhs);
            if (!target.allFinite()) return;
            double t = 1.0;
            Eigen::Index crossing = -1;
            for (Eigen::Index i = 0; i < q; ++i) {
                if (target[i] * sA[i] > 0.0) continue;
                const double ti = bA[i] / (bA[i] - target[i]);
                if (ti < t) {
                    t = ti;
                    crossing = i;
                }
            }
            Eigen::VectorXd next = bA + t * (target - bA);
            if (crossing >= 0) next[crossing] = 0.0;
            for (Eigen::Index i = 0; i < q; ++i)
                if (next[i] * sA[i] < 0.0) next[i] = 0.0;
            r.noalias() -= XA * (next - bA);
            for (Eigen::Index i = 0; i < q; ++i) b[support[static_cast<std::size_t>(i)]] = next[i];
        };

        auto support_size = [&] {
            Eigen::Index q = 0;
            for (Eigen::Index j : active) q += b[j] != 0.0;
            return q;
        };

        std::size_t sweeps = 0;
        bool converged = false, saturated = false;
        while (sweeps < options.max_sweeps) {
            // Full sweep: visits every column, grows the active set.
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!usable[static_cast<std::size_t>(j)]) continue;
                max_change = std::max(max_change, update(j));
                if (b[j] != 0.0 && !in_active[static_cast<std::size_t>(j)]) {
                    in_active[static_cast<std::size_t>(j)] = 1;
                    active.push_back(j);
                }
            }
            ++sweeps;
            if (max_change < tol) {
                converged = true;
                break;
            }
            // Iterate on the active set until it settles, then re-check everything.
            std::size_t inner = 0;
            while (sweeps < options.max_sweeps) {
                double change = 0.0;
                for (Eigen::Index j : active) change = std::max(change, update(j));
                ++sweeps;
                if (change < tol) break;
                if (++inner % 50 == 0) subspace_step();
                if (support_size() >= n - 1 && n > 2) {
                    saturated = true;
                    break;
                }
            }
            if (saturated) break;
        }
        if (!r.allFinite()) throw NumericalError("coordinate descent diverged");
        stalled = !converged;
        out.push_back(PenalizedFit{basis.unstandardize(b, y_mean), lambda, sweeps, converged, saturated});
    }
    return out;
}

}  // namespace autocal
