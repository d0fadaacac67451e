#include "autocal/toy_model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "autocal/error.hpp"
#include "autocal/parallel.hpp"
#include "autocal/random.hpp"

namespace autocal {

Eigen::VectorXd ToyModelConfig::truth() const {
    if (theta_star.size() > 0) return theta_star;
    Eigen::VectorXd z(static_cast<Eigen::Index>(space.dim()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = 0.5 * std::sin(1.7 * static_cast<double>(i + 1));
    return space.from_canonical(z);
}

void ToyModelConfig::validate() const {
    if (space.dim() == 0) throw InputError("toy model needs at least one parameter");
    if (nlat < 2 || nlon < 2 || nlev < 2) throw InputError("toy grids need at least 2 points per axis");
    if (n_modes == 0) throw InputError("toy model needs at least one mode per field");
    if (!(noise_sd >= 0.0)) throw InputError("noise_sd must be nonnegative");
    const Eigen::VectorXd t = truth();
    if (static_cast<std::size_t>(t.size()) != space.dim()) throw InputError("theta_star has the wrong dimension");
    if (!space.contains(t)) throw DomainError("theta_star lies outside the parameter bounds");
}

nlohmann::json ToyModelConfig::to_json() const {
    const Eigen::VectorXd t = truth();
    return {{"space", space.to_json()},
            {"nlat", nlat},
            {"nlon", nlon},
            {"nlev", nlev},
            {"n_modes", n_modes},
            {"noise_sd", noise_sd},
            {"seed", seed},
            {"theta_star", std::vector<double>(t.data(), t.data() + t.size())},
            {"hard_mode", hard_mode}};
}

ToyModelConfig ToyModelConfig::from_json(const nlohmann::json& j) {
    try {
        ToyModelConfig c;
        if (j.contains("space")) c.space = ParameterSpace::from_json(j.at("space"));
        c.nlat = j.value("nlat", c.nlat);
        c.nlon = j.value("nlon", c.nlon);
        c.nlev = j.value("nlev", c.nlev);
        c.n_modes = j.value("n_modes", c.n_modes);
        c.noise_sd = j.value("noise_sd", c.noise_sd);
        c.seed = j.value("seed", c.seed);
        c.hard_mode = j.value("hard_mode", c.hard_mode);
        if (j.contains("theta_star")) {
            const auto v = j.at("theta_star").get<std::vector<double>>();
            c.theta_star = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("malformed toy model config: {}", e.what()));
    }
}

namespace {

constexpr double kPi = std::numbers::pi;

struct FieldTemplate {
    const char* name;
    const char* season;
    GridKind kind;
    double amplitude;
};

constexpr FieldTemplate kFields[] = {
    {"SWCF", "ANN", GridKind::LatLon, 4.0},
    {"LWCF", "ANN", GridKind::LatLon, 3.0},
    {"PRECT", "ANN", GridKind::LatLon, 0.4},
    {"T", "ANN", GridKind::LatPlev, 2.0},
    {"RESTOM", "global", GridKind::Scalar, 0.5},
};
constexpr std::size_t kMapFields = 4;

void enumerate_monomials(std::size_t d, unsigned max_degree, std::vector<unsigned>& current,
                         std::vector<std::vector<unsigned>>& out, unsigned used) {
    if (current.size() == d) {
        out.push_back(current);
        return;
    }
    for (unsigned a = 0; a + used <= max_degree; ++a) {
        current.push_back(a);
        enumerate_monomials(d, max_degree, current, out, used + a);
        current.pop_back();
    }
}

double climatology(std::size_t field, double lat_deg, double lon_deg, double level) {
    const double phi = lat_deg * kPi / 180.0;
    const double lam = lon_deg * kPi / 180.0;
    switch (field) {
        case 0: return -50.0 + 25.0 * std::cos(2.0 * phi) + 5.0 * std::cos(lam);
        case 1: return 25.0 + 10.0 * std::cos(phi) - 3.0 * std::sin(2.0 * lam);
        case 2: return 3.0 + 2.0 * std::cos(3.0 * phi) + 0.5 * std::cos(lam + 1.0);
        default: return 210.0 + 60.0 * std::cos(phi) * (1.0 - 0.5 * level);
    }
}

}  // namespace

ToyModel::ToyModel(ToyModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::size_t d = config_.space.dim();
    const std::size_t R = config_.n_modes;
    Rng rng(derive_seed(config_.seed, "toy-model"));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * uniform01(rng); };
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1)); };

    std::vector<unsigned> cur;
    enumerate_monomials(d, degree, cur, monomials_, 0);
    const Eigen::VectorXd lats = cell_centre_latitudes(config_.nlat);

    for (std::size_t p = 0; p < std::size(kFields); ++p) {
        const auto& tmpl = kFields[p];
        Grid grid{tmpl.kind, tmpl.kind == GridKind::Scalar ? 1 : config_.nlat,
                  tmpl.kind == GridKind::LatLon ? config_.nlon : tmpl.kind == GridKind::LatPlev ? config_.nlev : 1};
        grids_.push_back(grid);
        if (tmpl.kind == GridKind::Scalar) continue;

        Eigen::VectorXd clim(static_cast<Eigen::Index>(grid.size()));
        Eigen::MatrixXd modes(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(R));
        for (std::size_t r = 0; r < R; ++r) {
            const int l1 = pick(1, 3), k1 = pick(0, 3), l2 = pick(1, 4), k2 = pick(1, 3);
            const double a1 = uniform(0, 2 * kPi), b1 = uniform(0, 2 * kPi);
            const double a2 = uniform(0, 2 * kPi), b2 = uniform(0, 2 * kPi);
            for (std::size_t i = 0; i < grid.nlat; ++i) {
                const double phi = lats[static_cast<Eigen::Index>(i)] * kPi / 180.0;
                for (std::size_t j = 0; j < grid.ncol; ++j) {
                    double value;
                    if (tmpl.kind == GridKind::LatLon) {
                        const double lam = 2.0 * kPi * (static_cast<double>(j) + 0.5) / static_cast<double>(grid.ncol);
                        value = std::cos(l1 * phi + a1) * std::cos(k1 * lam + b1) +
                                0.5 * std::cos(l2 * phi + a2) * std::sin(k2 * lam + b2);
                    } else {
                        const double t = static_cast<double>(j) / static_cast<double>(grid.ncol - 1);
                        value = std::cos(l1 * phi + a1) * std::cos(kPi * (k1 + 1) * t + b1) +
                                0.5 * std::cos(l2 * phi + a2) * std::sin(kPi * k2 * t + b2);
                    }
                    modes(static_cast<Eigen::Index>(i * grid.ncol + j), static_cast<Eigen::Index>(r)) = value;
                }
            }
        }
        for (std::size_t i = 0; i < grid.nlat; ++i)
            for (std::size_t j = 0; j < grid.ncol; ++j) {
                const double lon = 360.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(grid.ncol);
                const double level = static_cast<double>(j) / static_cast<double>(grid.ncol - 1);
                clim[static_cast<Eigen::Index>(i * grid.ncol + j)] =
                    climatology(p, lats[static_cast<Eigen::Index>(i)], lon, level);
            }
        climatology_.push_back(std::move(clim));
        modes_.push_back(std::move(modes));
    }

    const double degree_scale[] = {0.0, 1.0, 0.4, 0.25};
    for (std::size_t p = 0; p < kMapFields; ++p) {
        Eigen::MatrixXd c(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(monomials_.size()));
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t t = 0; t < monomials_.size(); ++t) {
                unsigned deg = 0;
                for (unsigned a : monomials_[t]) deg += a;
                c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = normal(rng) * degree_scale[deg];
            }
        coefficients_.push_back(std::move(c));
    }
    scalar_weights_.resize(static_cast<Eigen::Index>(R));
    for (std::size_t r = 0; r < R; ++r) scalar_weights_[static_cast<Eigen::Index>(r)] = normal(rng) / std::sqrt(double(R));
    scalar_offset_ = 0.7;
    hard_direction_.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) hard_direction_[static_cast<Eigen::Index>(i)] = normal(rng);
    hard_direction_ *= 1.5 / hard_direction_.norm();

    // Normalizers from the noiseless truth, through the regular stacking path.
    const Eigen::VectorXd truth = evaluate_canonical(config_.space.to_canonical(config_.truth()));
    std::vector<RawField> raw;
    std::size_t offset = 0;
    for (std::size_t p = 0; p < std::size(kFields); ++p) {
        RawField f{kFields[p].name, kFields[p].season, grids_[p], lats, {}, {}};
        const auto size = static_cast<Eigen::Index>(grids_[p].size());
        f.obs = truth.segment(static_cast<Eigen::Index>(offset), size);
        f.members = f.obs.transpose();
        offset += grids_[p].size();
        raw.push_back(std::move(f));
    }
    Eigen::MatrixXd one = config_.truth().transpose();
    schema_ = build_schema(raw, DesignMatrix(config_.space, one)).schema;
}

Eigen::MatrixXd ToyModel::drivers(const Eigen::VectorXd& z) const {
    const auto R = static_cast<Eigen::Index>(config_.n_modes);
    Eigen::VectorXd mono(static_cast<Eigen::Index>(monomials_.size()));
    for (std::size_t t = 0; t < monomials_.size(); ++t) {
        double v = 1.0;
        for (std::size_t i = 0; i < monomials_[t].size(); ++i)
            for (unsigned a = 0; a < monomials_[t][i]; ++a) v *= z[static_cast<Eigen::Index>(i)];
        mono[static_cast<Eigen::Index>(t)] = v;
    }
    Eigen::MatrixXd g(static_cast<Eigen::Index>(kMapFields), R);
    for (std::size_t p = 0; p < kMapFields; ++p) g.row(static_cast<Eigen::Index>(p)) = (coefficients_[p] * mono).transpose();
    if (config_.hard_mode) {
        const double h = 0.2 * std::sin(kPi * hard_direction_.dot(z));
        g.array() += h;
    }
    return g;
}

Eigen::VectorXd ToyModel::evaluate_canonical(const Eigen::VectorXd& z) const {
    const Eigen::MatrixXd g = drivers(z);
    std::size_t total = 0;
    for (const auto& grid : grids_) total += grid.size();
    Eigen::VectorXd out(static_cast<Eigen::Index>(total));
    Eigen::Index offset = 0;
    for (std::size_t p = 0; p < kMapFields; ++p) {
        const auto size = static_cast<Eigen::Index>(grids_[p].size());
        out.segment(offset, size) =
            climatology_[p] + kFields[p].amplitude * modes_[p] * g.row(static_cast<Eigen::Index>(p)).transpose();
        offset += size;
    }
    out[offset] = scalar_offset_ + kFields[kMapFields].amplitude * g.row(0).dot(scalar_weights_);
    return out;
}

StackedVector ToyModel::evaluate(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != config_.space.dim())
        throw InputError(fmt::format("toy model expects {} parameters, got {}", config_.space.dim(), theta.size()));
    if (!config_.space.contains(theta)) {
        for (std::size_t i = 0; i < config_.space.dim(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            if (!(theta[k] >= config_.space.lower()[k] && theta[k] <= config_.space.upper()[k]))
                throw DomainError(fmt::format("{} = {} is outside [{}, {}]", config_.space.names()[i], theta[k],
                                              config_.space.lower()[k], config_.space.upper()[k]));
        }
    }
    return StackedVector(schema_, evaluate_canonical(config_.space.to_canonical(theta)));
}

StackedVector toy_evaluate(const ToyModel& model, const Eigen::VectorXd& theta) { return model.evaluate(theta); }

ToyCampaign toy_generate_campaign(const ToyModel& model, std::size_t n) {
    if (n < 2) throw InputError("a toy campaign needs at least 2 members");
    return toy_generate_campaign(model, lhs_sample(model.config().space, n, derive_seed(model.config().seed, "toy-design")));
}

ToyCampaign toy_generate_campaign(const ToyModel& model, const DesignMatrix& design) {
    const std::size_t n = design.rows();
    if (n < 2) throw InputError("a toy campaign needs at least 2 members");
    const auto& config = model.config();
    if (!(design.space() == config.space)) throw InputError("design and toy model use different parameter spaces");
    const auto& schema = *model.schema();
    const auto m = static_cast<Eigen::Index>(schema.total_size());
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), m);
    parallel_for(n, [&](std::size_t i) {
        rows.row(static_cast<Eigen::Index>(i)) = model.evaluate(design.row(i)).values().transpose();
    });
    const Eigen::VectorXd truth = model.evaluate(config.truth()).values();

    Rng rng(derive_seed(config.seed, "toy-noise"));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<RawField> raw;
    const Eigen::VectorXd lats = cell_centre_latitudes(config.nlat);
    for (std::size_t p = 0; p < schema.num_fields(); ++p) {
        const auto& f = schema.field(p);
        const auto off = static_cast<Eigen::Index>(schema.offset(p));
        const auto size = static_cast<Eigen::Index>(f.size());
        RawField field{f.name, f.season, f.grid, lats, rows.middleCols(off, size), truth.segment(off, size)};
        double sd;
        if (f.grid.kind == GridKind::Scalar) {
            const auto col = field.members.col(0).array();
            sd = std::sqrt((col - col.mean()).square().mean());
        } else {
            sd = std::sqrt((field.obs.array() - field.obs.mean()).square().mean());
        }
        for (Eigen::Index l = 0; l < size; ++l) field.obs[l] += config.noise_sd * sd * normal(rng);
        raw.push_back(std::move(field));
    }
    BuiltData data = build_schema(raw, design);
    StackedVector truth_vec(data.schema, truth);
    return ToyCampaign{std::move(data), std::move(truth_vec)};
}

}  // namespace autocal
