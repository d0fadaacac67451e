#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autocal/param_design.hpp"

namespace autocal {

enum class GridKind { LatLon, LatPlev, Scalar };

/// Native grid of one target field. Two-dimensional grids are stored
/// row-major with latitude as the slow index.
struct Grid {
    GridKind kind = GridKind::Scalar;
    std::size_t nlat = 0;
    std::size_t ncol = 0;  // longitudes or pressure levels

    static Grid lat_lon(std::size_t nlat, std::size_t nlon) { return {GridKind::LatLon, nlat, nlon}; }
    static Grid lat_plev(std::size_t nlat, std::size_t nplev) { return {GridKind::LatPlev, nlat, nplev}; }
    static Grid scalar() { return {GridKind::Scalar, 0, 0}; }

    std::size_t size() const { return kind == GridKind::Scalar ? 1 : nlat * ncol; }
    bool is_map() const { return kind != GridKind::Scalar; }
    bool operator==(const Grid&) const = default;
};

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& s);

/// One target field inside the stacked vector.
struct FieldSpec {
    std::string name;
    std::string season;
    Grid grid;
    std::vector<bool> mask;        // native grid, true = retained
    Eigen::VectorXd weights;       // retained points, sums to 1
    double sigma_sq = 1.0;         // observational normalizer
    Eigen::VectorXd latitudes;     // retained points, degrees; empty for scalars

    std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
    std::string key() const { return name + "/" + season; }
};

/// Ordered fields and their offsets into the stacked vector.
class FieldSchema {
public:
    FieldSchema() = default;
    explicit FieldSchema(std::vector<FieldSpec> fields);

    std::size_t num_fields() const { return fields_.size(); }
    std::size_t total_size() const { return offsets_.back(); }
    const FieldSpec& field(std::size_t p) const { return fields_.at(p); }
    const std::vector<FieldSpec>& fields() const { return fields_; }
    std::size_t offset(std::size_t p) const { return offsets_.at(p); }

    /// Accepts "NAME/SEASON", or "NAME" when only one field has that name.
    std::size_t index_of(const std::string& identifier) const;

    /// Retained values of field p inside a stacked vector.
    Eigen::VectorXd segment(const Eigen::VectorXd& stacked, std::size_t p) const;
    /// Field p on its native grid; masked points are NaN.
    Eigen::VectorXd unstack(const Eigen::VectorXd& stacked, std::size_t p) const;

    /// Same field layout (keys, grids, masks); normalizers and weights may differ.
    bool same_layout(const FieldSchema& other) const;

    FieldSchema with_sigma_sq(std::size_t p, double sigma_sq) const;

    nlohmann::json to_json() const;
    static FieldSchema from_json(const nlohmann::json& j);

private:
    std::vector<FieldSpec> fields_;
    std::vector<std::size_t> offsets_{0};
};

using SchemaPtr = std::shared_ptr<const FieldSchema>;

/// An m-vector laid out by a schema.
class StackedVector {
public:
    StackedVector(SchemaPtr schema, Eigen::VectorXd values);

    const Eigen::VectorXd& values() const { return values_; }
    const SchemaPtr& schema() const { return schema_; }
    Eigen::VectorXd field(std::size_t p) const { return schema_->segment(values_, p); }

private:
    SchemaPtr schema_;
    Eigen::VectorXd values_;
};

/// n ensemble members (rows) sharing one schema, with the design that produced them.
class EnsembleOutput {
public:
    EnsembleOutput(SchemaPtr schema, Eigen::MatrixXd rows, DesignMatrix design);

    const SchemaPtr& schema() const { return schema_; }
    const Eigen::MatrixXd& rows() const { return rows_; }
    const DesignMatrix& design() const { return design_; }
    std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
    StackedVector member(std::size_t i) const;

private:
    SchemaPtr schema_;
    Eigen::MatrixXd rows_;
    DesignMatrix design_;
};

/// One field as produced by a simulator, before masking.
struct RawField {
    std::string name;
    std::string season;
    Grid grid;
    Eigen::VectorXd latitudes;  // nlat entries, degrees; ignored for scalars
    Eigen::MatrixXd members;    // n x grid.size()
    Eigen::VectorXd obs;        // grid.size()
};

struct BuiltData {
    SchemaPtr schema;
    EnsembleOutput ensemble;
    StackedVector obs;
};

/// Masks, weights and stacks raw fields. A grid point is dropped when it is
/// non-finite in any member or in the observations. Weights are cos(latitude)
/// over retained points, normalized to sum to one; scalars get weight 1.
/// sigma_sq is the population variance of the retained observations (1.0 for
/// scalars; see set_scalar_sigma).
BuiltData build_schema(const std::vector<RawField>& raw, const DesignMatrix& design);

/// Equally spaced cell-centre latitudes from south to north.
Eigen::VectorXd cell_centre_latitudes(std::size_t nlat);

/// Overrides the normalizer of a scalar field.
FieldSchema set_scalar_sigma(const FieldSchema& schema, const std::string& field, double sigma_sq);

/// sqrt(sum_l w_l (model_l - obs_l)^2) over the retained points of one field.
double weighted_rmse(const StackedVector& model, const StackedVector& obs, const std::string& field);
double weighted_rmse(const StackedVector& model, const StackedVector& obs, std::size_t p);

/// Percent change in RMSE from run A to run B, laid out variable x season.
/// Cells are NaN when a field is absent or run A's RMSE is zero; averages
/// are simple means over the defined cells.
/// Distinct variable names in schema order, and distinct seasons with
/// DJF, MAM, JJA, SON, ANN first (others keep schema order after them).
std::pair<std::vector<std::string>, std::vector<std::string>> variables_and_seasons(const FieldSchema& schema);

struct RmseChangeTable {
    std::vector<std::string> variables;
    std::vector<std::string> seasons;
    Eigen::MatrixXd percent;          // variables x seasons
    Eigen::VectorXd variable_average; // per row
    Eigen::VectorXd season_average;   // per column
    double overall_average = 0.0;

    std::vector<std::vector<std::string>> to_csv() const;
};

RmseChangeTable rmse_change_table(const StackedVector& run_a, const StackedVector& run_b, const StackedVector& obs);

/// On-disk dataset: schema.json, parameters.json, design.csv, ensemble.{f64,json}, obs.{f64,json}.
void save_dataset(const std::filesystem::path& dir, const EnsembleOutput& ensemble, const StackedVector& obs);
BuiltData load_dataset(const std::filesystem::path& dir);

void save_stacked(const std::filesystem::path& stem, const StackedVector& v);
StackedVector load_stacked(const std::filesystem::path& stem, SchemaPtr schema);

}  // namespace autocal
