#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "autocal/csv.hpp"
#include "autocal/error.hpp"
#include "autocal/field_data.hpp"
#include "autocal/random.hpp"

using namespace autocal;

namespace {

DesignMatrix small_design(std::size_t n) {
    ParameterSpace space({"a", "b"}, {0.0, 0.0}, {1.0, 1.0});
    return lhs_sample(space, n, 17);
}

RawField random_map(const std::string& name, const std::string& season, std::size_t nlat, std::size_t nlon,
                    std::size_t n, Rng& rng) {
    RawField f;
    f.name = name;
    f.season = season;
    f.grid = Grid::lat_lon(nlat, nlon);
    f.latitudes = cell_centre_latitudes(nlat);
    f.members.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nlat * nlon));
    for (auto& v : f.members.reshaped()) v = uniform01(rng);
    f.obs.resize(static_cast<Eigen::Index>(nlat * nlon));
    for (auto& v : f.obs) v = uniform01(rng);
    return f;
}

RawField scalar_field(const std::string& name, std::size_t n, Rng& rng) {
    RawField f;
    f.name = name;
    f.season = "global";
    f.grid = Grid::scalar();
    f.members.resize(static_cast<Eigen::Index>(n), 1);
    for (auto& v : f.members.reshaped()) v = uniform01(rng);
    f.obs = Eigen::VectorXd::Constant(1, 0.7);
    return f;
}

// Hand-built schema with explicit weights, bypassing build_schema.
SchemaPtr manual_schema(const std::vector<std::pair<std::string, Eigen::VectorXd>>& fields) {
    std::vector<FieldSpec> specs;
    for (const auto& [key, w] : fields) {
        FieldSpec f;
        const auto slash = key.find('/');
        f.name = key.substr(0, slash);
        f.season = key.substr(slash + 1);
        f.grid = w.size() == 1 ? Grid::scalar() : Grid::lat_lon(1, static_cast<std::size_t>(w.size()));
        f.mask.assign(static_cast<std::size_t>(w.size()), true);
        f.weights = w;
        if (w.size() > 1) f.latitudes = Eigen::VectorXd::Zero(w.size());
        specs.push_back(f);
    }
    return std::make_shared<const FieldSchema>(std::move(specs));
}

}  // namespace

TEST_CASE("24x48 map without gaps keeps 1152 points; scalars weigh one") {
    Rng rng(1);
    const auto design = small_design(6);
    const auto built = build_schema({random_map("SWCF", "ANN", 24, 48, 6, rng), scalar_field("RESTOM", 6, rng)}, design);
    CHECK(built.schema->field(0).size() == 1152);
    CHECK(built.schema->field(1).size() == 1);
    CHECK(built.schema->field(1).weights[0] == 1.0);
    CHECK(built.schema->field(1).sigma_sq == 1.0);
    CHECK(built.schema->total_size() == 1153);
    CHECK(built.ensemble.rows().rows() == 6);
}

TEST_CASE("weights are normalized cosines of latitude") {
    Rng rng(2);
    const auto design = small_design(4);
    const auto raw = random_map("T", "DJF", 6, 5, 4, rng);
    const auto built = build_schema({raw}, design);
    const auto& f = built.schema->field(0);
    CHECK(f.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    double total = 0.0;
    for (std::size_t i = 0; i < 6; ++i) total += 5.0 * std::cos(raw.latitudes[i] * std::numbers::pi / 180.0);
    for (Eigen::Index l = 0; l < f.weights.size(); ++l) {
        const double lat = raw.latitudes[l / 5];
        CHECK(f.weights[l] == doctest::Approx(std::cos(lat * std::numbers::pi / 180.0) / total).epsilon(1e-12));
    }
}

TEST_CASE("a gap in one member removes the point everywhere") {
    Rng rng(3);
    const auto design = small_design(5);
    auto raw = random_map("PRECT", "JJA", 4, 4, 5, rng);
    raw.members(2, 7) = std::numeric_limits<double>::quiet_NaN();
    raw.obs[11] = std::numeric_limits<double>::infinity();
    const auto built = build_schema({raw}, design);
    const auto& f = built.schema->field(0);
    CHECK(f.size() == 14);
    CHECK_FALSE(f.mask[7]);
    CHECK_FALSE(f.mask[11]);
    CHECK(f.weights.sum() == doctest::Approx(1.0));
    CHECK(built.ensemble.rows().allFinite());
    // Population variance of retained observations.
    Eigen::VectorXd kept(14);
    Eigen::Index k = 0;
    for (Eigen::Index l = 0; l < 16; ++l)
        if (l != 7 && l != 11) kept[k++] = raw.obs[l];
    const double var = (kept.array() - kept.mean()).square().sum() / 14.0;
    CHECK(f.sigma_sq == doctest::Approx(var).epsilon(1e-13));
    const auto native = built.schema->unstack(built.obs.values(), 0);
    CHECK(std::isnan(native[7]));
    CHECK(native[3] == raw.obs[3]);
}

TEST_CASE("degenerate inputs are rejected") {
    Rng rng(4);
    const auto design = small_design(3);
    auto raw = random_map("X", "ANN", 2, 2, 3, rng);
    raw.obs.setConstant(1.0);
    CHECK_THROWS_AS(build_schema({raw}, design), InputError);
    raw = random_map("X", "ANN", 2, 2, 3, rng);
    raw.obs.setConstant(std::nan(""));
    CHECK_THROWS_AS(build_schema({raw}, design), InputError);
}

TEST_CASE("scalar normalizer override") {
    Rng rng(5);
    const auto built = build_schema({random_map("SWCF", "ANN", 3, 3, 4, rng), scalar_field("RESTOM", 4, rng)},
                                    small_design(4));
    CHECK(built.schema->field(1).sigma_sq == 1.0);
    const auto changed = set_scalar_sigma(*built.schema, "RESTOM", 0.25);
    CHECK(changed.field(1).sigma_sq == 0.25);
    CHECK(changed.field(0).sigma_sq == built.schema->field(0).sigma_sq);
    CHECK_THROWS_AS(set_scalar_sigma(*built.schema, "RESTOM", 0.0), InputError);
    CHECK_THROWS_AS(set_scalar_sigma(*built.schema, "RESTOM", -1.0), InputError);
    CHECK_THROWS_AS(set_scalar_sigma(*built.schema, "SWCF", 1.0), InputError);
}

TEST_CASE("weighted RMSE by hand") {
    Eigen::VectorXd w(3);
    w << 0.2, 0.3, 0.5;
    const auto schema = manual_schema({{"X/ANN", w}});
    Eigen::VectorXd obs = Eigen::VectorXd::Zero(3), model(3);
    model << 1.0, 2.0, -1.0;
    CHECK(weighted_rmse(StackedVector(schema, model), StackedVector(schema, obs), 0) ==
          doctest::Approx(std::sqrt(1.9)).epsilon(1e-15));
    CHECK(weighted_rmse(StackedVector(schema, obs), StackedVector(schema, obs), 0) == 0.0);
    const Eigen::VectorXd shifted = obs.array() + 0.3;
    CHECK(weighted_rmse(StackedVector(schema, shifted), StackedVector(schema, obs), "X") == doctest::Approx(0.3));
}

TEST_CASE("RMSE change table") {
    Eigen::VectorXd w2(2);
    w2 << 0.5, 0.5;
    const auto schema =
        manual_schema({{"A/DJF", w2}, {"A/ANN", w2}, {"B/DJF", w2}, {"R/global", Eigen::VectorXd::Ones(1)}});
    Rng rng(6);
    Eigen::VectorXd obs(7), a(7), b(7);
    for (auto* v : {&obs, &a, &b})
        for (auto& x : *v) x = uniform01(rng);
    const StackedVector O(schema, obs), A(schema, a), B(schema, b);

    const auto same = rmse_change_table(A, A, O);
    CHECK(same.overall_average == 0.0);
    const auto perfect = rmse_change_table(A, O, O);
    for (Eigen::Index i = 0; i < perfect.percent.size(); ++i)
        if (std::isfinite(perfect.percent.reshaped()[i])) CHECK(perfect.percent.reshaped()[i] == doctest::Approx(-100.0));

    const auto t = rmse_change_table(A, B, O);
    CHECK(t.variables == std::vector<std::string>{"A", "B", "R"});
    CHECK(t.seasons == std::vector<std::string>{"DJF", "ANN", "global"});
    // Independent recomputation of each cell.
    auto rmse = [&](const Eigen::VectorXd& m, Eigen::Index off, Eigen::Index len) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < len; ++i) s += (len == 1 ? 1.0 : 0.5) * std::pow(m[off + i] - obs[off + i], 2);
        return std::sqrt(s);
    };
    auto change = [&](Eigen::Index off, Eigen::Index len) {
        return 100.0 * (rmse(b, off, len) - rmse(a, off, len)) / rmse(a, off, len);
    };
    const double a_djf = change(0, 2), a_ann = change(2, 2), b_djf = change(4, 2), r = change(6, 1);
    CHECK(t.percent(0, 0) == doctest::Approx(a_djf));
    CHECK(t.percent(0, 1) == doctest::Approx(a_ann));
    CHECK(t.percent(1, 0) == doctest::Approx(b_djf));
    CHECK(std::isnan(t.percent(1, 1)));
    CHECK(t.percent(2, 2) == doctest::Approx(r));
    CHECK(t.variable_average[0] == doctest::Approx((a_djf + a_ann) / 2));
    CHECK(t.season_average[0] == doctest::Approx((a_djf + b_djf) / 2));
    CHECK(t.overall_average == doctest::Approx((a_djf + a_ann + b_djf + r) / 4));
    const auto rows = t.to_csv();
    CHECK(rows.size() == 5);
    CHECK(rows[0].back() == "Avg.");
}

TEST_CASE("season ordering") {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
    const auto schema = manual_schema({{"A/ANN", w}, {"A/SON", w}, {"A/DJF", w}, {"B/JJA", w}});
    const auto [vars, seasons] = variables_and_seasons(*schema);
    CHECK(vars == std::vector<std::string>{"A", "B"});
    CHECK(seasons == std::vector<std::string>{"DJF", "JJA", "SON", "ANN"});
}

TEST_CASE("dataset round trip") {
    Rng rng(7);
    const auto design = small_design(5);
    auto raw = random_map("SWCF", "ANN", 3, 4, 5, rng);
    raw.members(1, 2) = std::nan("");
    const auto built = build_schema({raw, scalar_field("RESTOM", 5, rng)}, design);
    const auto dir = std::filesystem::temp_directory_path() / "autocal_dataset_test";
    save_dataset(dir, built.ensemble, built.obs);
    const auto back = load_dataset(dir);
    CHECK(back.ensemble.rows() == built.ensemble.rows());
    CHECK(back.obs.values() == built.obs.values());
    CHECK(back.schema->same_layout(*built.schema));
    CHECK(back.schema->field(0).sigma_sq == built.schema->field(0).sigma_sq);
    CHECK(back.schema->field(0).weights == built.schema->field(0).weights);
    CHECK(back.ensemble.design().values() == design.values());
    std::filesystem::remove(dir / "obs.f64");
    CHECK_THROWS_AS(load_dataset(dir), InputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("field lookup") {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
    const auto schema = manual_schema({{"A/ANN", w}, {"A/DJF", w}, {"B/ANN", w}});
    CHECK(schema->index_of("A/DJF") == 1);
    CHECK(schema->index_of("B") == 2);
    CHECK_THROWS_AS(schema->index_of("A"), InputError);
    CHECK_THROWS_AS(schema->index_of("C"), InputError);
}
