#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>

#include "autocal/csv.hpp"
#include "autocal/diagnostics.hpp"
#include "autocal/error.hpp"
#include "svg_check.hpp"
#include "synthetic.hpp"

using namespace autocal;
using autocal::testing::svg_elements;

namespace {

SchemaPtr grid_schema(std::size_t nlat, std::size_t nlon, std::vector<bool> mask = {}) {
    FieldSpec f;
    f.name = "SWCF";
    f.season = "ANN";
    f.grid = Grid::lat_lon(nlat, nlon);
    f.mask = mask.empty() ? std::vector<bool>(nlat * nlon, true) : mask;
    const auto kept = static_cast<Eigen::Index>(std::count(f.mask.begin(), f.mask.end(), true));
    f.weights = Eigen::VectorXd::Constant(kept, 1.0 / static_cast<double>(kept));
    f.latitudes = Eigen::VectorXd::Zero(kept);
    return std::make_shared<const FieldSchema>(std::vector<FieldSpec>{f});
}

double taylor_identity_gap(const TaylorStats& s) {
    return std::abs(s.normalized_crmse * s.normalized_crmse -
                    (1 + s.sigma_ratio * s.sigma_ratio - 2 * s.sigma_ratio * s.correlation));
}

}  // namespace

TEST_CASE("Taylor statistics of identical and scaled fields") {
    const auto schema = grid_schema(2, 3);
    Eigen::VectorXd y(6);
    y << 1, 4, 2, 8, 5, 7;
    const StackedVector obs(schema, y);
    const auto same = taylor_stats(obs, obs, 0);
    CHECK(same.sigma_ratio == 1.0);
    CHECK(same.correlation == 1.0);
    CHECK(same.normalized_crmse == 0.0);
    CHECK(same.bias == 0.0);

    const Eigen::VectorXd doubled = (2.0 * (y.array() - y.mean()) + y.mean()).matrix();
    const auto s = taylor_stats(StackedVector(schema, doubled), obs, 0);
    CHECK(s.sigma_ratio == doctest::Approx(2.0));
    CHECK(s.correlation == doctest::Approx(1.0));
    CHECK(s.normalized_crmse == doctest::Approx(1.0));
}

TEST_CASE("Taylor statistics against elementwise formulas") {
    const auto schema = grid_schema(2, 3);
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd f(6), y(6);
        for (auto& v : f) v = uniform01(rng);
        for (auto& v : y) v = uniform01(rng);
        const auto s = taylor_stats(StackedVector(schema, f), StackedVector(schema, y), 0, false, "run");
        double fm = 0, ym = 0;
        for (int i = 0; i < 6; ++i) {
            fm += f[i] / 6;
            ym += y[i] / 6;
        }
        double sf = 0, sy = 0, c = 0, e = 0;
        for (int i = 0; i < 6; ++i) {
            sf += (f[i] - fm) * (f[i] - fm) / 6;
            sy += (y[i] - ym) * (y[i] - ym) / 6;
            c += (f[i] - fm) * (y[i] - ym) / 6;
            e += std::pow((f[i] - fm) - (y[i] - ym), 2) / 6;
        }
        CHECK(s.sigma_ratio == doctest::Approx(std::sqrt(sf / sy)).epsilon(1e-12));
        CHECK(s.correlation == doctest::Approx(c / std::sqrt(sf * sy)).epsilon(1e-12));
        CHECK(s.normalized_crmse == doctest::Approx(std::sqrt(e / sy)).epsilon(1e-12));
        CHECK(s.bias == doctest::Approx(fm - ym).epsilon(1e-12));
        CHECK(taylor_identity_gap(s) < 1e-10);
        CHECK(s.run == "run");
        CHECK(s.field == "SWCF/ANN");
    }
}

TEST_CASE("degenerate fields are flagged, not divided by zero") {
    const auto schema = grid_schema(1, 4);
    Eigen::VectorXd flat = Eigen::VectorXd::Constant(4, 2.0), y(4);
    y << 1, 2, 3, 4;
    const auto s = taylor_stats(StackedVector(schema, flat), StackedVector(schema, y), 0);
    CHECK(s.degenerate);
    CHECK(s.sigma_ratio == 0.0);
    CHECK(std::isnan(s.correlation));
    CHECK(s.normalized_crmse == doctest::Approx(1.0));
    const auto t = taylor_stats(StackedVector(schema, y), StackedVector(schema, flat), 0);
    CHECK(t.degenerate);
    CHECK(std::isnan(t.sigma_ratio));
}

TEST_CASE("Taylor CSV round trip") {
    const auto schema = grid_schema(2, 2);
    Eigen::VectorXd a(4), b(4);
    a << 1, 3, 2, 5;
    b << 2, 2, 4, 1;
    std::vector<TaylorStats> stats{taylor_stats(StackedVector(schema, a), StackedVector(schema, b), 0, true, "x"),
                                   taylor_stats(StackedVector(schema, b), StackedVector(schema, b), 0, false, "y")};
    const auto back = parse_taylor_stats_csv(taylor_stats_csv(stats));
    REQUIRE(back.size() == 2);
    CHECK(back[0].sigma_ratio == stats[0].sigma_ratio);
    CHECK(back[0].correlation == stats[0].correlation);
    CHECK(back[1].run == "y");
    CHECK_FALSE(back[1].weighted);
}

TEST_CASE("Taylor diagram: well-formed, reference marker and point placement") {
    TaylorStats ref;
    ref.sigma_ratio = 1.0;
    ref.correlation = 1.0;
    ref.run = "ref";
    ref.field = "A/ANN";
    const auto svg_ref = taylor_diagram_svg({ref});
    const auto reference = svg_elements(svg_ref, "circle", "reference");
    const auto points = svg_elements(svg_ref, "circle", "point");
    REQUIRE(reference.size() == 1);
    REQUIRE(points.size() == 1);
    CHECK(std::stod(points[0].at("cx")) == doctest::Approx(std::stod(reference[0].at("cx"))).epsilon(1e-9));
    CHECK(std::stod(points[0].at("cy")) == doctest::Approx(std::stod(reference[0].at("cy"))).epsilon(1e-9));

    std::vector<TaylorStats> stats;
    Rng rng(10);
    for (int i = 0; i < 12; ++i) {
        TaylorStats s;
        s.run = "r" + std::to_string(i % 3);
        s.field = "F/" + std::to_string(i);
        s.sigma_ratio = 0.2 + 1.6 * uniform01(rng);
        s.correlation = 2.0 * uniform01(rng) - 1.0;
        stats.push_back(s);
    }
    const auto text = taylor_diagram_svg(stats, {}, "test <title>");
    CHECK(testing::well_formed_svg(text));
    const auto frame = taylor_frame(stats);
    CHECK(frame.negative_correlations);
    const auto drawn = svg_elements(text, "circle", "point");
    REQUIRE(drawn.size() == stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const double theta = std::acos(stats[i].correlation);
        const double x = frame.origin_x + frame.pixels_per_unit * stats[i].sigma_ratio * std::cos(theta);
        const double y = frame.origin_y - frame.pixels_per_unit * stats[i].sigma_ratio * std::sin(theta);
        CHECK(std::abs(std::stod(drawn[i].at("cx")) - x) <= 0.5);
        CHECK(std::abs(std::stod(drawn[i].at("cy")) - y) <= 0.5);
        CHECK(drawn[i].at("data-field") == stats[i].field);
    }
}

TEST_CASE("field maps: constant, checkerboard and masked cells") {
    const auto schema = grid_schema(3, 4);
    const auto constant = field_map_svg(StackedVector(schema, Eigen::VectorXd::Constant(12, 3.0)), 0);
    std::set<std::string> fills;
    for (const auto& c : svg_elements(constant, "rect", "cell")) fills.insert(c.at("fill"));
    CHECK(fills.size() == 1);

    Eigen::VectorXd checker(12);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) checker[i * 4 + j] = (i + j) % 2;
    const auto cells = svg_elements(field_map_svg(StackedVector(schema, checker), 0), "rect", "cell");
    REQUIRE(cells.size() == 12);
    std::map<std::pair<double, double>, std::string> by_pos;
    for (const auto& c : cells) by_pos[{std::stod(c.at("x")), std::stod(c.at("y"))}] = c.at("fill");
    std::set<std::string> distinct;
    for (const auto& [pos, fill] : by_pos) distinct.insert(fill);
    CHECK(distinct.size() == 2);
    for (const auto& [pos, fill] : by_pos) {
        const auto right = by_pos.find({pos.first + 10.0, pos.second});
        if (right != by_pos.end()) CHECK(right->second != fill);
        const auto below = by_pos.find({pos.first, pos.second + 10.0});
        if (below != by_pos.end()) CHECK(below->second != fill);
    }

    std::vector<bool> mask(12, true);
    mask[1] = mask[5] = mask[10] = false;
    const auto masked_schema = grid_schema(3, 4, mask);
    Eigen::VectorXd v(9);
    v.setLinSpaced(9, 0, 1);
    const auto text = field_map_svg(StackedVector(masked_schema, v), 0);
    CHECK(svg_elements(text, "rect", "masked").size() == 3);
    CHECK(svg_elements(text, "rect", "cell").size() == 9);
    for (const auto& m : svg_elements(text, "rect", "masked")) CHECK(m.at("fill") == "none");

    const auto scalar = testing::line_schema({}, true);
    CHECK_THROWS_AS(field_map_svg(StackedVector(scalar, Eigen::VectorXd::Ones(1)), 0), InputError);
}

TEST_CASE("R^2 map marks undefined points") {
    const auto schema = grid_schema(2, 2);
    Eigen::VectorXd r2(4);
    r2 << 1.0, 0.5, std::nan(""), 0.0;
    const auto text = r2_map_svg(r2, schema, 0, "r2");
    CHECK(testing::well_formed_svg(text));
    CHECK(svg_elements(text, "rect", "undefined").size() == 1);
    CHECK(svg_elements(text, "rect", "cell").size() == 3);
}

TEST_CASE("scale tables") {
    std::vector<FieldSpec> specs;
    for (const auto* key : {"SWCF/DJF", "SWCF/ANN", "LWCF/ANN"}) {
        FieldSpec f;
        const std::string k = key;
        f.name = k.substr(0, k.find('/'));
        f.season = k.substr(k.find('/') + 1);
        f.grid = Grid::lat_lon(1, 2);
        f.mask = {true, true};
        f.weights = Eigen::VectorXd::Constant(2, 0.5);
        f.latitudes = Eigen::VectorXd::Zero(2);
        specs.push_back(f);
    }
    FieldSpec r;
    r.name = "RESTOM";
    r.season = "global";
    r.grid = Grid::scalar();
    r.mask = {true};
    r.weights = Eigen::VectorXd::Ones(1);
    specs.push_back(r);
    const FieldSchema schema(specs);
    Eigen::VectorXd s_sq(4);
    s_sq << 0.01, 0.04, 0.09, 0.0004;
    const auto t = scale_table(s_sq, schema);
    CHECK(t.variables == std::vector<std::string>{"SWCF", "LWCF", "RESTOM"});
    CHECK(t.seasons == std::vector<std::string>{"DJF", "ANN", "global"});
    CHECK(t.s(2, 2) == doctest::Approx(0.02));
    CHECK(t.s(0, 1) == doctest::Approx(0.2));
    CHECK(std::isnan(t.s(1, 0)));
    const auto back = ScaleTable::from_csv(t.to_csv(false), t.to_csv(true));
    CHECK(back.variables == t.variables);
    CHECK(back.seasons == t.seasons);
    for (Eigen::Index i = 0; i < t.s.size(); ++i) {
        if (std::isnan(t.s.reshaped()[i])) CHECK(std::isnan(back.s.reshaped()[i]));
        else CHECK(back.s.reshaped()[i] == t.s.reshaped()[i]);
    }
    const auto ones = scale_table(Eigen::VectorXd::Ones(4), schema);
    for (Eigen::Index i = 0; i < ones.s.size(); ++i)
        if (!std::isnan(ones.s.reshaped()[i])) CHECK(ones.s.reshaped()[i] == 1.0);
}

TEST_CASE("PC scatter of an exact surrogate lies on the diagonal") {
    const auto schema = testing::line_schema({20}, false);
    const testing::PolynomialGenerator gen(testing::box(2), schema, 2, 2, 400);
    const auto ens = gen.ensemble(40, 401);
    HyperGrid grid = HyperGrid::defaults();
    grid.orders = {2};
    grid.truncations = {Truncation::total_order()};
    grid.fit_types = {FitType::Linear};
    const auto basis = fit_pca(ens, 2);
    const auto fit = fit_surrogate(ens, basis, grid, 402);
    const auto sc = pc_scatter_data(fit.model, ens);
    CHECK((sc.truth - sc.predicted).cwiseAbs().maxCoeff() < 1e-6);
    for (Eigen::Index j = 0; j < sc.r2.size(); ++j) {
        CHECK(sc.r2[j] <= 1.0);
        CHECK(sc.r2[j] > 1.0 - 1e-9);
    }
    const auto rows = csv::parse(sc.to_csv());
    CHECK(rows.size() == 1 + 40 * 2);
    CHECK(rows[0] == std::vector<std::string>{"member", "pc", "true", "predicted"});
    const auto curve = csv::parse(variance_curve_csv(basis));
    CHECK(curve.size() == 3);
}

TEST_CASE("map colours") {
    CHECK(map_color(ColorScale::Sequential, 0.0) != map_color(ColorScale::Sequential, 1.0));
    CHECK(map_color(ColorScale::Diverging, 0.0) != map_color(ColorScale::Diverging, 1.0));
    CHECK(map_color(ColorScale::Diverging, 0.5).size() == 7);
}
