#include <doctest.h>

#include <cmath>
#include <vector>

#include "autocal/multi_index.hpp"
#include "autocal/random.hpp"
#include "autocal/regression.hpp"

using namespace autocal;

namespace {

Eigen::MatrixXd random_design(Eigen::Index n, Eigen::Index d, Rng& rng) {
    Eigen::MatrixXd Z(n, d);
    for (auto& v : Z.reshaped()) v = 2.0 * uniform01(rng) - 1.0;
    return Z;
}

}  // namespace

TEST_CASE("least squares recovers an exact degree-2 expansion") {
    Rng rng(31);
    const auto set = build_index_set(3, 2, Truncation::total_order());
    const Eigen::MatrixXd Z = random_design(40, 3, rng);
    const Eigen::MatrixXd Phi = basis_matrix(set, Z);
    Eigen::VectorXd c(static_cast<Eigen::Index>(set.size()));
    for (auto& v : c) v = uniform01(rng) - 0.5;
    const Eigen::VectorXd y = Phi * c;
    const Eigen::MatrixXd got = least_squares(Phi, y);
    CHECK((got.col(0) - c).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("least squares agrees with the normal equations") {
    Rng rng(32);
    const Eigen::MatrixXd X = random_design(50, 6, rng);
    Eigen::VectorXd y(50);
    for (auto& v : y) v = uniform01(rng);
    const Eigen::VectorXd normal = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((least_squares(X, y).col(0) - normal).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("huge lasso penalty zeroes every slope; tiny penalty is OLS") {
    Rng rng(33);
    const auto set = build_index_set(2, 2, Truncation::total_order());
    const Eigen::MatrixXd Z = random_design(60, 2, rng);
    const Eigen::MatrixXd Phi = basis_matrix(set, Z);
    Eigen::VectorXd y(60);
    std::normal_distribution<double> g(0.0, 0.1);
    for (Eigen::Index i = 0; i < 60; ++i) y[i] = 1.0 + 2.0 * Z(i, 0) - Z(i, 1) * Z(i, 0) + g(rng);
    const StandardizedBasis basis(Phi);
    const std::vector<double> penalties{1e4, 1e-8};
    const auto path = penalized_path(basis, y, FitType::Lasso, penalties, {});
    REQUIRE(path.size() == 2);
    CHECK(path[0].converged);
    CHECK(path[0].coefficients.tail(path[0].coefficients.size() - 1).isZero());
    CHECK(path[0].coefficients[0] == doctest::Approx(y.mean()));
    CHECK(path[1].converged);
    const Eigen::VectorXd ols = (Phi.transpose() * Phi).ldlt().solve(Phi.transpose() * y);
    CHECK((path[1].coefficients - ols).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("orthogonal design: lasso soft-thresholds and elastic net shrinks") {
    // Columns of +-1 with zero mean and unit population variance, mutually orthogonal.
    const Eigen::Index n = 8;
    Eigen::MatrixXd Phi(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        Phi(i, 0) = 1.0;
        Phi(i, 1) = (i & 1) ? 1.0 : -1.0;
        Phi(i, 2) = (i & 2) ? 1.0 : -1.0;
        Phi(i, 3) = (i & 4) ? 1.0 : -1.0;
    }
    Rng rng(34);
    Eigen::VectorXd y(n);
    for (auto& v : y) v = 3.0 * uniform01(rng);
    const StandardizedBasis basis(Phi);
    const Eigen::VectorXd ols = Phi.transpose() * (y.array() - y.mean()).matrix() / static_cast<double>(n);
    for (double lambda : {0.05, 0.2, 0.5, 2.0}) {
        const std::vector<double> pen{lambda};
        const auto lasso = penalized_path(basis, y, FitType::Lasso, pen, {1e-12, 100000, 0.5});
        const auto enet = penalized_path(basis, y, FitType::ElasticNet, pen, {1e-12, 100000, 0.5});
        for (Eigen::Index j = 1; j < 4; ++j) {
            const double z = ols[j];
            const double soft = std::copysign(std::max(0.0, std::abs(z) - lambda), z);
            CHECK(lasso[0].coefficients[j] == doctest::Approx(soft).epsilon(1e-9).scale(1.0));
            const double en = std::copysign(std::max(0.0, std::abs(z) - 0.5 * lambda), z) / (1.0 + 0.5 * lambda);
            CHECK(enet[0].coefficients[j] == doctest::Approx(en).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("lasso solutions satisfy the optimality conditions") {
    Rng rng(35);
    const auto set = build_index_set(3, 3, Truncation::total_order());
    const Eigen::MatrixXd Z = random_design(80, 3, rng);
    const Eigen::MatrixXd Phi = basis_matrix(set, Z);
    Eigen::VectorXd y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y[i] = std::sin(2.0 * Z(i, 0)) + Z(i, 1) * Z(i, 2) + 0.05 * uniform01(rng);
    const StandardizedBasis basis(Phi);
    const auto& X = basis.standardized();
    const auto penalties = std::vector<double>{0.3, 0.1, 0.03, 0.01};
    const auto path = penalized_path(basis, y, FitType::Lasso, penalties, {1e-12, 200000, 0.5});
    std::size_t prev_nonzero = 0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        REQUIRE(path[k].converged);
        // Recover standardized slopes from the original coefficients.
        Eigen::VectorXd b(X.cols());
        for (Eigen::Index j = 0; j < X.cols(); ++j) b[j] = path[k].coefficients[j + 1] * basis.scales()[j];
        const Eigen::VectorXd r = (y.array() - y.mean()).matrix() - X * b;
        const Eigen::VectorXd grad = X.transpose() * r / 80.0;
        const double lambda = penalties[k];
        std::size_t nonzero = 0;
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            if (b[j] != 0.0) {
                ++nonzero;
                CHECK(grad[j] == doctest::Approx(lambda * (b[j] > 0 ? 1.0 : -1.0)).epsilon(1e-5).scale(1.0));
            } else {
                CHECK(std::abs(grad[j]) <= lambda * (1.0 + 1e-5));
            }
        }
        CHECK(nonzero >= prev_nonzero);
        prev_nonzero = nonzero;
    }
}

TEST_CASE("standardized basis bookkeeping") {
    Eigen::MatrixXd Phi(4, 3);
    Phi << 1, 2, 5, 1, 4, 5, 1, 6, 5, 1, 8, 5;
    const StandardizedBasis basis(Phi);
    CHECK(basis.terms() == 3);
    CHECK(basis.usable()[0]);
    CHECK_FALSE(basis.usable()[1]);
    CHECK(basis.standardized().col(0).mean() == doctest::Approx(0.0).scale(1.0));
    CHECK((basis.standardized().col(0).array().square().mean()) == doctest::Approx(1.0));
    Eigen::VectorXd b(2);
    b << 0.7, 0.0;
    const auto c = basis.unstandardize(b, 3.0);
    const Eigen::VectorXd fitted = Phi * c;
    const Eigen::VectorXd expected = (3.0 + (basis.standardized() * b).array()).matrix();
    CHECK((fitted - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit type names round trip") {
    for (auto t : {FitType::Linear, FitType::Lasso, FitType::ElasticNet}) CHECK(fit_type_from_string(to_string(t)) == t);
}
