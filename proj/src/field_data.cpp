#include "autocal/field_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "autocal/csv.hpp"
#include "autocal/error.hpp"
#include "autocal/matrix_io.hpp"

namespace autocal {

std::string to_string(GridKind kind) {
    switch (kind) {
        case GridKind::LatLon: return "lat-lon";
        case GridKind::LatPlev: return "lat-plev";
        case GridKind::Scalar: return "scalar";
    }
    return "scalar";
}

GridKind grid_kind_from_string(const std::string& s) {
    if (s == "lat-lon") return GridKind::LatLon;
    if (s == "lat-plev") return GridKind::LatPlev;
    if (s == "scalar") return GridKind::Scalar;
    throw InputError(fmt::format("unknown grid kind '{}'", s));
}

FieldSchema::FieldSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
    std::set<std::string> keys;
    for (const auto& f : fields_) {
        if (f.size() == 0) throw InputError(fmt::format("field {} has no retained points", f.key()));
        if (!(f.sigma_sq > 0.0) || !std::isfinite(f.sigma_sq))
            throw DomainError(fmt::format("field {} needs a positive normalizer", f.key()));
        if (f.mask.size() != f.grid.size())
            throw InputError(fmt::format("field {} mask does not match its grid", f.key()));
        if (static_cast<std::size_t>(std::count(f.mask.begin(), f.mask.end(), true)) != f.size())
            throw InputError(fmt::format("field {} mask count does not match its weights", f.key()));
        if (!keys.insert(f.key()).second) throw InputError(fmt::format("duplicate field {}", f.key()));
        offsets_.push_back(offsets_.back() + f.size());
    }
}

std::size_t FieldSchema::index_of(const std::string& identifier) const {
    for (std::size_t p = 0; p < fields_.size(); ++p)
        if (fields_[p].key() == identifier) return p;
    std::optional<std::size_t> hit;
    for (std::size_t p = 0; p < fields_.size(); ++p) {
        if (fields_[p].name != identifier) continue;
        if (hit) throw InputError(fmt::format("field name '{}' is ambiguous; use NAME/SEASON", identifier));
        hit = p;
    }
    if (!hit) throw InputError(fmt::format("unknown field '{}'", identifier));
    return *hit;
}

Eigen::VectorXd FieldSchema::segment(const Eigen::VectorXd& stacked, std::size_t p) const {
    if (static_cast<std::size_t>(stacked.size()) != total_size())
        throw InputError(fmt::format("stacked vector has length {}, schema expects {}", stacked.size(), total_size()));
    return stacked.segment(static_cast<Eigen::Index>(offsets_.at(p)), static_cast<Eigen::Index>(fields_.at(p).size()));
}

Eigen::VectorXd FieldSchema::unstack(const Eigen::VectorXd& stacked, std::size_t p) const {
    const Eigen::VectorXd seg = segment(stacked, p);
    const auto& f = fields_[p];
    Eigen::VectorXd native = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(f.grid.size()), std::nan(""));
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < f.mask.size(); ++i)
        if (f.mask[i]) native[static_cast<Eigen::Index>(i)] = seg[k++];
    return native;
}

bool FieldSchema::same_layout(const FieldSchema& other) const {
    if (fields_.size() != other.fields_.size()) return false;
    for (std::size_t p = 0; p < fields_.size(); ++p) {
        const auto& a = fields_[p];
        const auto& b = other.fields_[p];
        if (a.key() != b.key() || !(a.grid == b.grid) || a.mask != b.mask) return false;
    }
    return true;
}

FieldSchema FieldSchema::with_sigma_sq(std::size_t p, double sigma_sq) const {
    if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
        throw DomainError(fmt::format("normalizer for {} must be positive, got {}", fields_.at(p).key(), sigma_sq));
    auto fields = fields_;
    fields[p].sigma_sq = sigma_sq;
    return FieldSchema(std::move(fields));
}

namespace {

nlohmann::json encode_mask(const std::vector<bool>& mask) {
    std::vector<std::size_t> runs;
    bool current = true;
    std::size_t run = 0;
    for (bool b : mask) {
        if (b == current) {
            ++run;
        } else {
            runs.push_back(run);
            current = b;
            run = 1;
        }
    }
    runs.push_back(run);
    return {{"start", true}, {"runs", runs}};
}

std::vector<bool> decode_mask(const nlohmann::json& j) {
    std::vector<bool> mask;
    bool current = j.at("start").get<bool>();
    for (auto run : j.at("runs").get<std::vector<std::size_t>>()) {
        mask.insert(mask.end(), run, current);
        current = !current;
    }
    return mask;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json FieldSchema::to_json() const {
    nlohmann::json fields = nlohmann::json::array();
    for (const auto& f : fields_) {
        fields.push_back({{"name", f.name},
                          {"season", f.season},
                          {"grid", {{"kind", to_string(f.grid.kind)}, {"nlat", f.grid.nlat}, {"ncol", f.grid.ncol}}},
                          {"mask", encode_mask(f.mask)},
                          {"weights", to_std(f.weights)},
                          {"latitudes", to_std(f.latitudes)},
                          {"sigma_sq", f.sigma_sq}});
    }
    return {{"fields", fields}, {"total_size", total_size()}};
}

FieldSchema FieldSchema::from_json(const nlohmann::json& j) {
    std::vector<FieldSpec> fields;
    try {
        for (const auto& e : j.at("fields")) {
            FieldSpec f;
            f.name = e.at("name").get<std::string>();
            f.season = e.at("season").get<std::string>();
            const auto& g = e.at("grid");
            f.grid = Grid{grid_kind_from_string(g.at("kind").get<std::string>()), g.at("nlat").get<std::size_t>(),
                          g.at("ncol").get<std::size_t>()};
            f.mask = decode_mask(e.at("mask"));
            f.weights = from_std(e.at("weights").get<std::vector<double>>());
            f.latitudes = from_std(e.at("latitudes").get<std::vector<double>>());
            f.sigma_sq = e.at("sigma_sq").get<double>();
            fields.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("bad schema JSON: {}", e.what()));
    }
    return FieldSchema(std::move(fields));
}

StackedVector::StackedVector(SchemaPtr schema, Eigen::VectorXd values)
    : schema_(std::move(schema)), values_(std::move(values)) {
    if (!schema_) throw InputError("stacked vector needs a schema");
    if (static_cast<std::size_t>(values_.size()) != schema_->total_size())
        throw InputError(fmt::format("stacked vector has length {}, schema expects {}", values_.size(),
                                     schema_->total_size()));
    if (!values_.allFinite()) throw InputError("stacked vector contains non-finite values");
}

EnsembleOutput::EnsembleOutput(SchemaPtr schema, Eigen::MatrixXd rows, DesignMatrix design)
    : schema_(std::move(schema)), rows_(std::move(rows)), design_(std::move(design)) {
    if (!schema_) throw InputError("ensemble needs a schema");
    if (static_cast<std::size_t>(rows_.cols()) != schema_->total_size())
        throw InputError(fmt::format("ensemble has {} columns, schema expects {}", rows_.cols(), schema_->total_size()));
    if (static_cast<std::size_t>(rows_.rows()) != design_.rows())
        throw InputError(fmt::format("ensemble has {} members but the design has {} rows", rows_.rows(), design_.rows()));
    if (!rows_.allFinite()) throw InputError("ensemble contains non-finite values");
}

StackedVector EnsembleOutput::member(std::size_t i) const {
    return StackedVector(schema_, rows_.row(static_cast<Eigen::Index>(i)).transpose());
}

Eigen::VectorXd cell_centre_latitudes(std::size_t nlat) {
    Eigen::VectorXd lat(static_cast<Eigen::Index>(nlat));
    const double step = 180.0 / static_cast<double>(nlat);
    for (std::size_t i = 0; i < nlat; ++i) lat[static_cast<Eigen::Index>(i)] = -90.0 + (static_cast<double>(i) + 0.5) * step;
    return lat;
}

BuiltData build_schema(const std::vector<RawField>& raw, const DesignMatrix& design) {
    if (raw.empty()) throw InputError("no fields supplied");
    const auto n = static_cast<Eigen::Index>(design.rows());
    std::vector<FieldSpec> specs;
    std::vector<std::vector<Eigen::Index>> kept_points;
    for (const auto& r : raw) {
        const auto size = static_cast<Eigen::Index>(r.grid.size());
        if (r.members.rows() != n || r.members.cols() != size)
            throw InputError(fmt::format("field {}/{}: members must be {} x {}", r.name, r.season, n, size));
        if (r.obs.size() != size)
            throw InputError(fmt::format("field {}/{}: observations must have {} values", r.name, r.season, size));
        if (r.grid.is_map() && static_cast<std::size_t>(r.latitudes.size()) != r.grid.nlat)
            throw InputError(fmt::format("field {}/{}: expected {} latitudes", r.name, r.season, r.grid.nlat));

        FieldSpec f;
        f.name = r.name;
        f.season = r.season;
        f.grid = r.grid;
        f.mask.assign(static_cast<std::size_t>(size), true);
        std::vector<Eigen::Index> kept;
        for (Eigen::Index l = 0; l < size; ++l) {
            bool ok = std::isfinite(r.obs[l]);
            for (Eigen::Index i = 0; ok && i < n; ++i) ok = std::isfinite(r.members(i, l));
            f.mask[static_cast<std::size_t>(l)] = ok;
            if (ok) kept.push_back(l);
        }
        if (kept.empty()) throw InputError(fmt::format("empty field: {}/{} has no retained points", r.name, r.season));

        const auto mp = static_cast<Eigen::Index>(kept.size());
        f.weights.resize(mp);
        if (r.grid.is_map()) {
            f.latitudes.resize(mp);
            for (Eigen::Index k = 0; k < mp; ++k) {
                const auto lat_row = static_cast<Eigen::Index>(static_cast<std::size_t>(kept[static_cast<std::size_t>(k)]) / r.grid.ncol);
                f.latitudes[k] = r.latitudes[lat_row];
                f.weights[k] = std::max(0.0, std::cos(f.latitudes[k] * std::numbers::pi / 180.0));
            }
            const double total = f.weights.sum();
            if (!(total > 0.0)) throw InputError(fmt::format("field {}: all retained points have zero weight", f.key()));
            f.weights /= total;

            Eigen::VectorXd y(mp);
            for (Eigen::Index k = 0; k < mp; ++k) y[k] = r.obs[kept[static_cast<std::size_t>(k)]];
            const double var = (y.array() - y.mean()).square().mean();
            if (!(var > 0.0))
                throw InputError(fmt::format("degenerate normalizer: observations of {} have zero variance", f.key()));
            f.sigma_sq = var;
        } else {
            f.weights[0] = 1.0;
            f.sigma_sq = 1.0;
        }
        specs.push_back(std::move(f));
        kept_points.push_back(std::move(kept));
    }

    auto schema = std::make_shared<const FieldSchema>(std::move(specs));
    Eigen::MatrixXd rows(n, static_cast<Eigen::Index>(schema->total_size()));
    Eigen::VectorXd obs(static_cast<Eigen::Index>(schema->total_size()));
    for (std::size_t p = 0; p < raw.size(); ++p) {
        const auto off = static_cast<Eigen::Index>(schema->offset(p));
        const auto& kept = kept_points[p];
        for (std::size_t k = 0; k < kept.size(); ++k) {
            const auto col = off + static_cast<Eigen::Index>(k);
            rows.col(col) = raw[p].members.col(kept[k]);
            obs[col] = raw[p].obs[kept[k]];
        }
    }
    return BuiltData{schema, EnsembleOutput(schema, std::move(rows), design), StackedVector(schema, std::move(obs))};
}

FieldSchema set_scalar_sigma(const FieldSchema& schema, const std::string& field, double sigma_sq) {
    const auto p = schema.index_of(field);
    if (schema.field(p).grid.kind != GridKind::Scalar)
        throw InputError(fmt::format("field {} is not a scalar target", schema.field(p).key()));
    return schema.with_sigma_sq(p, sigma_sq);
}

namespace {
void require_same_layout(const StackedVector& a, const StackedVector& b) {
    if (a.schema() != b.schema() && !a.schema()->same_layout(*b.schema()))
        throw InputError("schema mismatch between stacked vectors");
}
}  // namespace

double weighted_rmse(const StackedVector& model, const StackedVector& obs, std::size_t p) {
    require_same_layout(model, obs);
    const auto& w = model.schema()->field(p).weights;
    const Eigen::VectorXd r = model.field(p) - obs.field(p);
    return std::sqrt((w.array() * r.array().square()).sum());
}

double weighted_rmse(const StackedVector& model, const StackedVector& obs, const std::string& field) {
    return weighted_rmse(model, obs, model.schema()->index_of(field));
}

std::pair<std::vector<std::string>, std::vector<std::string>> variables_and_seasons(const FieldSchema& schema) {
    static const std::vector<std::string> canonical_seasons{"DJF", "MAM", "JJA", "SON", "ANN"};
    std::vector<std::string> variables, seasons;
    for (const auto& f : schema.fields()) {
        if (std::find(variables.begin(), variables.end(), f.name) == variables.end()) variables.push_back(f.name);
        if (std::find(seasons.begin(), seasons.end(), f.season) == seasons.end()) seasons.push_back(f.season);
    }
    std::stable_sort(seasons.begin(), seasons.end(), [&](const std::string& a, const std::string& b) {
        auto rank = [&](const std::string& s) {
            auto it = std::find(canonical_seasons.begin(), canonical_seasons.end(), s);
            return static_cast<std::size_t>(it - canonical_seasons.begin());
        };
        return rank(a) < rank(b);
    });
    return {variables, seasons};
}

RmseChangeTable rmse_change_table(const StackedVector& run_a, const StackedVector& run_b, const StackedVector& obs) {
    require_same_layout(run_a, obs);
    require_same_layout(run_b, obs);
    const auto& schema = *obs.schema();
    RmseChangeTable t;
    std::tie(t.variables, t.seasons) = variables_and_seasons(schema);

    const auto nv = static_cast<Eigen::Index>(t.variables.size());
    const auto ns = static_cast<Eigen::Index>(t.seasons.size());
    t.percent = Eigen::MatrixXd::Constant(nv, ns, std::nan(""));
    for (std::size_t p = 0; p < schema.num_fields(); ++p) {
        const auto& f = schema.field(p);
        const auto r = std::find(t.variables.begin(), t.variables.end(), f.name) - t.variables.begin();
        const auto c = std::find(t.seasons.begin(), t.seasons.end(), f.season) - t.seasons.begin();
        const double a = weighted_rmse(run_a, obs, p);
        const double b = weighted_rmse(run_b, obs, p);
        if (a > 0.0) t.percent(r, c) = 100.0 * (b - a) / a;
    }

    auto mean_defined = [](const auto& values) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < values.size(); ++i)
            if (std::isfinite(values[i])) {
                sum += values[i];
                ++count;
            }
        return count ? sum / count : std::nan("");
    };
    t.variable_average.resize(nv);
    for (Eigen::Index r = 0; r < nv; ++r) t.variable_average[r] = mean_defined(t.percent.row(r));
    t.season_average.resize(ns);
    for (Eigen::Index c = 0; c < ns; ++c) t.season_average[c] = mean_defined(t.percent.col(c));
    t.overall_average = mean_defined(t.percent.reshaped());
    return t;
}

std::vector<std::vector<std::string>> RmseChangeTable::to_csv() const {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Variable"};
    header.insert(header.end(), seasons.begin(), seasons.end());
    header.push_back("Avg.");
    rows.push_back(header);
    for (std::size_t r = 0; r < variables.size(); ++r) {
        std::vector<std::string> row{variables[r]};
        for (std::size_t c = 0; c < seasons.size(); ++c)
            row.push_back(csv::format_double(percent(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
        row.push_back(csv::format_double(variable_average[static_cast<Eigen::Index>(r)]));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> avg{"Average"};
    for (Eigen::Index c = 0; c < season_average.size(); ++c) avg.push_back(csv::format_double(season_average[c]));
    avg.push_back(csv::format_double(overall_average));
    rows.push_back(std::move(avg));
    return rows;
}

void save_stacked(const std::filesystem::path& stem, const StackedVector& v) {
    write_f64(stem, v.values().transpose());
}

StackedVector load_stacked(const std::filesystem::path& stem, SchemaPtr schema) {
    const Eigen::MatrixXd m = read_f64(stem);
    if (m.rows() != 1) throw InputError(fmt::format("{}: expected a single row", stem.string()));
    return StackedVector(std::move(schema), m.row(0).transpose());
}

void save_dataset(const std::filesystem::path& dir, const EnsembleOutput& ensemble, const StackedVector& obs) {
    std::filesystem::create_directories(dir);
    write_json(dir / "schema.json", ensemble.schema()->to_json());
    ensemble.design().space().save(dir / "parameters.json");
    ensemble.design().write_csv(dir / "design.csv");
    write_f64(dir / "ensemble", ensemble.rows());
    save_stacked(dir / "obs", obs);
}

BuiltData load_dataset(const std::filesystem::path& dir) {
    for (const char* name : {"schema.json", "parameters.json", "design.csv", "ensemble.f64", "obs.f64"})
        if (!std::filesystem::exists(dir / name))
            throw InputError(fmt::format("missing input file {}", (dir / name).string()));
    auto schema = std::make_shared<const FieldSchema>(FieldSchema::from_json(read_json(dir / "schema.json")));
    auto space = ParameterSpace::load(dir / "parameters.json");
    auto design = DesignMatrix::read_csv(dir / "design.csv", space);
    EnsembleOutput ensemble(schema, read_f64(dir / "ensemble"), std::move(design));
    auto obs = load_stacked(dir / "obs", schema);
    return BuiltData{schema, std::move(ensemble), std::move(obs)};
}

}  // namespace autocal
