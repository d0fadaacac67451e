#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "autocal/error.hpp"
#include "autocal/pce_surrogate.hpp"
#include "synthetic.hpp"

using namespace autocal;
using autocal::testing::PolynomialGenerator;

namespace {

HyperGrid small_grid(std::vector<unsigned> orders) {
    HyperGrid grid = HyperGrid::defaults();
    grid.orders = std::move(orders);
    grid.truncations = {Truncation::total_order()};
    grid.fit_types = {FitType::Linear, FitType::Lasso};
    grid.penalties = log_spaced(1e-6, 1e1, 8);
    return grid;
}

}  // namespace

TEST_CASE("default grid matches the documented search space") {
    const auto grid = HyperGrid::defaults();
    CHECK(grid.orders.size() == 12);
    CHECK(grid.orders.front() == 1);
    CHECK(grid.orders.back() == 12);
    CHECK(grid.truncations.size() == 2);
    CHECK(grid.fit_types.size() == 3);
    CHECK(grid.penalties.size() == 20);
    CHECK(grid.penalties.front() == doctest::Approx(1e-8));
    CHECK(grid.penalties.back() == doctest::Approx(1e4));
    CHECK(grid.folds == 5);
    const auto ls = log_spaced(1e-2, 1e2, 5);
    CHECK(ls.size() == 5);
    for (double v : {1e-2, 1e-1, 1.0, 1e1, 1e2}) CHECK(std::any_of(ls.begin(), ls.end(), [&](double x) { return std::abs(x - v) < 1e-12 * v; }));
}

TEST_CASE("fold assignment partitions the rows evenly and deterministically") {
    for (std::size_t n : {10, 23, 250}) {
        const auto folds = fold_assignment(n, 5, 99);
        CHECK(folds.size() == n);
        std::vector<std::size_t> counts(5, 0);
        for (auto f : folds) ++counts.at(f);
        CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
        CHECK(fold_assignment(n, 5, 99) == folds);
    }
    CHECK(fold_assignment(50, 5, 1) != fold_assignment(50, 5, 2));
}

TEST_CASE("noiseless cubic target selects order at least three") {
    const auto space = testing::box(3);
    const auto design = lhs_sample(space, 80, 4);
    const Eigen::MatrixXd Z = design.canonical();
    Eigen::VectorXd eta(80);
    for (Eigen::Index i = 0; i < 80; ++i)
        eta[i] = 0.5 + Z(i, 0) - 2.0 * Z(i, 1) * Z(i, 1) * Z(i, 2) + 0.7 * std::pow(Z(i, 0), 3);
    const auto sel = cv_select(Z, eta, small_grid({1, 2, 3, 4}), 7);
    CHECK(sel.model.index_set.order() >= 3);
    double ss = 0.0, st = 0.0;
    for (Eigen::Index i = 0; i < 80; ++i) {
        ss += std::pow(sel.model.predict(Z.row(i).transpose()) - eta[i], 2);
        st += std::pow(eta[i] - eta.mean(), 2);
    }
    CHECK(1.0 - ss / st > 0.999);
    CHECK(sel.scores.size() == 4 * (1 + 8));
    const auto again = cv_select(Z, eta, small_grid({1, 2, 3, 4}), 7);
    CHECK(again.model.coefficients == sel.model.coefficients);
    CHECK(again.model.index_set.order() == sel.model.index_set.order());
}

TEST_CASE("pure noise is predicted no better than its standard deviation") {
    const auto space = testing::box(2);
    const auto design = lhs_sample(space, 100, 5);
    Rng rng(6);
    std::normal_distribution<double> g;
    Eigen::VectorXd eta(100);
    for (auto& v : eta) v = g(rng);
    const auto sel = cv_select(design.canonical(), eta, small_grid({1, 2, 3}), 8);
    const double sd = std::sqrt((eta.array() - eta.mean()).square().mean());
    CHECK(sel.model.cv_rmse == doctest::Approx(sd).epsilon(0.2));
}

TEST_CASE("batched selection equals per-column selection") {
    const auto space = testing::box(2);
    const auto design = lhs_sample(space, 60, 9);
    const Eigen::MatrixXd Z = design.canonical();
    Eigen::MatrixXd etas(60, 2);
    for (Eigen::Index i = 0; i < 60; ++i) {
        etas(i, 0) = Z(i, 0) * Z(i, 1);
        etas(i, 1) = std::exp(Z(i, 0));
    }
    const auto grid = small_grid({1, 2, 3});
    const auto all = cv_select_all(Z, etas, grid, 3);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const auto one = cv_select(Z, etas.col(j), grid, 3);
        CHECK(one.model.coefficients == all[static_cast<std::size_t>(j)].model.coefficients);
        CHECK(one.model.fit_type == all[static_cast<std::size_t>(j)].model.fit_type);
    }
}

TEST_CASE("two-mode generator is reproduced by the composite surrogate") {
    const auto schema = testing::line_schema({30, 20}, true);
    const PolynomialGenerator gen(testing::box(3), schema, 2, 2, 41);
    const auto ens = gen.ensemble(60, 42);
    const auto basis = fit_pca(ens, 2);
    const auto fit = fit_surrogate(ens, basis, small_grid({1, 2, 3}), 43);
    REQUIRE(fit.model.components().size() == 2);
    for (const auto& c : fit.model.components()) CHECK(c.index_set.order() >= 2);
    const auto r2 = surrogate_r2(fit.model, ens);
    CHECK(r2.overall > 1.0 - 1e-10);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK((fit.model.predict(ens.design().row(i)).values() - ens.rows().row(static_cast<Eigen::Index>(i)).transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-6);
    Rng rng(44);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd z(3);
        for (auto& v : z) v = 1.8 * uniform01(rng) - 0.9;
        const auto theta = gen.space.from_canonical(z);
        CHECK((fit.model.predict(theta).values() - gen.evaluate(theta)).cwiseAbs().maxCoeff() < 1e-6);
        Eigen::VectorXd nudged = theta;
        nudged[0] += 1e-8;
        CHECK((fit.model.predict(theta).values() - fit.model.predict(nudged).values()).cwiseAbs().maxCoeff() < 1e-5);
    }
    const auto report = selection_report(fit.selections);
    CHECK(report.size() == 3);
    CHECK(report[0][1] == "fit_type");
    CHECK(report[0][2] == "order");
}

TEST_CASE("predict_gradient matches central differences") {
    const auto schema = testing::line_schema({25}, true);
    const PolynomialGenerator gen(testing::box(4), schema, 3, 3, 51);
    const auto ens = gen.ensemble(120, 52);
    const auto basis = fit_pca(ens, 3);
    const auto fit = fit_surrogate(ens, basis, small_grid({2, 3}), 53);
    Rng rng(54);
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd z(4);
        for (auto& v : z) v = 1.8 * uniform01(rng) - 0.9;
        const auto theta = gen.space.from_canonical(z);
        const Eigen::MatrixXd J = fit.model.predict_gradient(theta);
        for (Eigen::Index k = 0; k < 4; ++k) {
            const double h = 1e-5 * gen.space.range(static_cast<std::size_t>(k));
            Eigen::VectorXd tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            const Eigen::VectorXd fd = (fit.model.predict(tp).values() - fit.model.predict(tm).values()) / (2 * h);
            CHECK((J.col(k) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
        }
    }
}

TEST_CASE("linear surrogate has a constant gradient; constant ensemble gives a constant surrogate") {
    const auto schema = testing::line_schema({10}, false);
    const PolynomialGenerator gen(testing::box(2), schema, 1, 1, 61);
    const auto ens = gen.ensemble(30, 62);
    const auto fit = fit_surrogate(ens, fit_pca(ens, 1), small_grid({1}), 63);
    const auto g1 = fit.model.predict_gradient(gen.space.lower());
    const auto g2 = fit.model.predict_gradient(gen.space.upper());
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::MatrixXd rows = Eigen::MatrixXd::Ones(30, 10);
    const EnsembleOutput flat(schema, rows, ens.design());
    const auto flat_fit = fit_surrogate(flat, fit_pca(flat, 1), small_grid({1, 2}), 64);
    CHECK((flat_fit.model.predict(gen.space.lower()).values().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(flat_fit.model.predict_gradient(gen.space.upper()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("R^2 by formula") {
    Eigen::MatrixXd truth(3, 1), pred(3, 1);
    truth << 1, 2, 3;
    pred << 3, 2, 1;
    CHECK(r2_from_predictions(truth, pred).per_point[0] == doctest::Approx(-3.0));
    CHECK(r2_from_predictions(truth, truth).per_point[0] == 1.0);
    pred.setConstant(2.0);
    CHECK(r2_from_predictions(truth, pred).per_point[0] == doctest::Approx(0.0).scale(1.0));
    Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(3, 1);
    CHECK(std::isnan(r2_from_predictions(flat, flat).per_point[0]));
}

TEST_CASE("surrogate save and load round trip") {
    const auto schema = testing::line_schema({12}, true);
    const PolynomialGenerator gen(testing::box(2), schema, 2, 2, 71);
    const auto ens = gen.ensemble(40, 72);
    const auto fit = fit_surrogate(ens, fit_pca(ens, 2), small_grid({1, 2}), 73);
    const auto dir = std::filesystem::temp_directory_path() / "autocal_surrogate_test";
    fit.model.save(dir);
    const auto back = SurrogateModel::load(dir);
    const Eigen::VectorXd theta = (gen.space.lower() + gen.space.upper()) / 2;
    CHECK(back.predict(theta).values() == fit.model.predict(theta).values());
    CHECK(back.space() == fit.model.space());
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(SurrogateModel::load(dir), InputError);
}
