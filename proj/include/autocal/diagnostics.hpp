#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autocal/field_data.hpp"
#include "autocal/mcmc.hpp"
#include "autocal/pce_surrogate.hpp"
#include "autocal/reduction.hpp"

namespace autocal {

/// Summary statistics of a model field against observations, normalized by
/// the observed standard deviation.
struct TaylorStats {
    std::string run;
    std::string field;
    bool weighted = true;
    double sigma_ratio = 0.0;       // sigma_model / sigma_obs
    double correlation = 0.0;
    double normalized_crmse = 0.0;  // sqrt(centred MSE) / sigma_obs
    double bias = 0.0;              // mean model - mean obs
    /// Either field has zero variance; ratio, correlation and CRMSE are then
    /// NaN where undefined.
    bool degenerate = false;

    double radius() const { return sigma_ratio; }
    double angle() const;  // acos(correlation)
};

TaylorStats taylor_stats(const StackedVector& model, const StackedVector& obs, std::size_t field, bool weighted = true,
                         std::string run = {});
std::vector<TaylorStats> taylor_stats_all(const StackedVector& model, const StackedVector& obs, bool weighted = true,
                                          const std::string& run = {});

std::string taylor_stats_csv(const std::vector<TaylorStats>& stats);
std::vector<TaylorStats> parse_taylor_stats_csv(const std::string& text);

/// Pixel geometry of a Taylor diagram.
struct TaylorFrame {
    double width = 0.0, height = 0.0;
    double origin_x = 0.0, origin_y = 0.0;
    double pixels_per_unit = 0.0;
    double max_ratio = 0.0;
    bool negative_correlations = false;

    std::pair<double, double> point(double sigma_ratio, double correlation) const;
};

TaylorFrame taylor_frame(const std::vector<TaylorStats>& stats, const std::vector<TaylorStats>& background = {});

/// Polar diagram: radius sigma_ratio, angle acos(correlation), with the
/// reference at (1, 0), standard-deviation arcs, correlation rays and CRMSE
/// contours around the reference. Degenerate records are skipped.
std::string taylor_diagram_svg(const std::vector<TaylorStats>& stats, const std::vector<TaylorStats>& background = {},
                               const std::string& title = {});

enum class ColorScale { Sequential, Diverging };

struct MapStyle {
    ColorScale scale = ColorScale::Sequential;
    std::optional<double> lower, upper;  // colour range; from the data when unset
    std::string title;
};

/// "#rrggbb" for t in [0, 1] on the given scale.
std::string map_color(ColorScale scale, double t);

/// Heatmap of one gridded field, one cell per native grid point. Masked
/// points are drawn blank (class "masked"); non-finite values are grey
/// (class "undefined"). Throws InputError for scalar fields.
std::string field_map_svg(const StackedVector& values, std::size_t field, const MapStyle& style = {});
/// Per-point R^2 of one field on the sequential scale over [0, 1].
std::string r2_map_svg(const Eigen::VectorXd& per_point_r2, const SchemaPtr& schema, std::size_t field,
                       const std::string& title = {});

/// s_p = sqrt(s_p^2) arranged variable x season.
struct ScaleTable {
    std::vector<std::string> variables;
    std::vector<std::string> seasons;
    Eigen::MatrixXd s;     // NaN where a variable/season pair is absent
    Eigen::MatrixXd s_sq;

    std::string to_csv(bool squared = false) const;
    static ScaleTable from_csv(const std::string& s_text, const std::string& s_sq_text);
};

ScaleTable scale_table(const Eigen::VectorXd& s_sq_hat, const FieldSchema& schema);

struct PcScatter {
    Eigen::MatrixXd truth;      // n x k ensemble scores
    Eigen::MatrixXd predicted;  // n x k surrogate scores
    Eigen::VectorXd r2;         // per component

    std::string to_csv() const;
    std::string r2_csv() const;
};

PcScatter pc_scatter_data(const SurrogateModel& model, const EnsembleOutput& ensemble);

std::string variance_curve_csv(const ReducedBasis& basis);

/// Corner plot of the parameter columns: marginal histograms with the
/// 16/50/84% quantiles on the diagonal, pair histograms below it, reference
/// markers on both.
std::string pair_plot_svg(const PairwiseSummary& summary, const std::vector<std::string>& names, bool bounds_view);

}  // namespace autocal
