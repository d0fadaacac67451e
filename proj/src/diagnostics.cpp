#include "autocal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "autocal/csv.hpp"
#include "autocal/error.hpp"
#include "svg.hpp"

namespace autocal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;

}  // namespace

double TaylorStats::angle() const { return std::acos(std::clamp(correlation, -1.0, 1.0)); }

TaylorStats taylor_stats(const StackedVector& model, const StackedVector& obs, std::size_t field, bool weighted,
                         std::string run) {
    if (model.schema() != obs.schema() && !model.schema()->same_layout(*obs.schema()))
        throw InputError("taylor statistics need a shared schema");
    const auto& spec = obs.schema()->field(field);
    const Eigen::VectorXd f = model.field(field);
    const Eigen::VectorXd y = obs.field(field);
    const auto m = f.size();
    const Eigen::VectorXd w = weighted ? spec.weights : Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));

    TaylorStats s;
    s.run = std::move(run);
    s.field = spec.key();
    s.weighted = weighted;
    const double fbar = w.dot(f), ybar = w.dot(y);
    const Eigen::ArrayXd fc = f.array() - fbar, yc = y.array() - ybar;
    const double var_f = (w.array() * fc.square()).sum();
    const double var_y = (w.array() * yc.square()).sum();
    const double cov = (w.array() * fc * yc).sum();
    const double cmse = (w.array() * (fc - yc).square()).sum();
    s.bias = fbar - ybar;
    if (!(var_f > 0.0) || !(var_y > 0.0)) {
        s.degenerate = true;
        s.sigma_ratio = var_y > 0.0 ? std::sqrt(var_f / var_y) : kNaN;
        s.correlation = kNaN;
        s.normalized_crmse = var_y > 0.0 ? std::sqrt(cmse / var_y) : kNaN;
        return s;
    }
    s.sigma_ratio = std::sqrt(var_f / var_y);
    s.correlation = std::clamp(cov / std::sqrt(var_f * var_y), -1.0, 1.0);
    s.normalized_crmse = std::sqrt(cmse / var_y);
    return s;
}

std::vector<TaylorStats> taylor_stats_all(const StackedVector& model, const StackedVector& obs, bool weighted,
                                          const std::string& run) {
    std::vector<TaylorStats> out;
    for (std::size_t p = 0; p < obs.schema()->num_fields(); ++p) {
        if (obs.schema()->field(p).grid.kind == GridKind::Scalar) continue;
        out.push_back(taylor_stats(model, obs, p, weighted, run));
    }
    return out;
}

std::string taylor_stats_csv(const std::vector<TaylorStats>& stats) {
    csv::Table t{{"run", "field", "weighted", "sigma_ratio", "correlation", "normalized_crmse", "bias", "degenerate",
                  "angle"}};
    for (const auto& s : stats)
        t.push_back({s.run, s.field, s.weighted ? "1" : "0", csv::format_double(s.sigma_ratio),
                     csv::format_double(s.correlation), csv::format_double(s.normalized_crmse),
                     csv::format_double(s.bias), s.degenerate ? "1" : "0",
                     csv::format_double(s.degenerate ? kNaN : s.angle())});
    return csv::to_string(t);
}

std::vector<TaylorStats> parse_taylor_stats_csv(const std::string& text) {
    const auto t = csv::parse(text);
    if (t.empty() || t.front().size() != 9 || t.front()[0] != "run") throw InputError("taylor stats: bad header");
    std::vector<TaylorStats> out;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const auto& r = t[i];
        if (r.size() != 9) throw InputError("taylor stats: ragged row");
        TaylorStats s;
        s.run = r[0];
        s.field = r[1];
        s.weighted = r[2] == "1";
        s.sigma_ratio = csv::parse_double(r[3]);
        s.correlation = csv::parse_double(r[4]);
        s.normalized_crmse = csv::parse_double(r[5]);
        s.bias = csv::parse_double(r[6]);
        s.degenerate = r[7] == "1";
        out.push_back(std::move(s));
    }
    return out;
}

std::pair<double, double> TaylorFrame::point(double sigma_ratio, double correlation) const {
    const double c = std::clamp(correlation, -1.0, 1.0);
    const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {origin_x + pixels_per_unit * sigma_ratio * c, origin_y - pixels_per_unit * sigma_ratio * sn};
}

TaylorFrame taylor_frame(const std::vector<TaylorStats>& stats, const std::vector<TaylorStats>& background) {
    double rmax = 1.0;
    bool negative = false;
    for (const auto* list : {&stats, &background})
        for (const auto& s : *list) {
            if (s.degenerate) continue;
            rmax = std::max(rmax, s.sigma_ratio);
            negative = negative || s.correlation < 0.0;
        }
    TaylorFrame f;
    f.max_ratio = std::max(1.5, std::ceil(rmax * 1.1 * 4.0) / 4.0);
    const double radius_px = 400.0, margin = 60.0;
    f.negative_correlations = negative;
    f.pixels_per_unit = radius_px / f.max_ratio;
    f.width = negative ? 2.0 * (radius_px + margin) : radius_px + 2.0 * margin;
    f.height = radius_px + 2.0 * margin;
    f.origin_x = negative ? radius_px + margin : margin;
    f.origin_y = radius_px + margin;
    return f;
}

std::string taylor_diagram_svg(const std::vector<TaylorStats>& stats, const std::vector<TaylorStats>& background,
                               const std::string& title) {
    if (stats.empty()) throw InputError("taylor diagram needs at least one record");
    const TaylorFrame f = taylor_frame(stats, background);
    svg::Document doc(f.width, f.height);
    doc.rect(0, 0, f.width, f.height, "#ffffff");
    const double theta_max = f.negative_correlations ? kPi : kPi / 2.0;

    auto arc = [&](double cx, double cy, double r, double from, double to) {
        std::string d;
        const int steps = 90;
        for (int i = 0; i <= steps; ++i) {
            const double a = from + (to - from) * i / steps;
            d += fmt::format("{}{:.2f} {:.2f}", i == 0 ? "M" : " L", cx + r * std::cos(a), cy - r * std::sin(a));
        }
        return d;
    };

    // Standard-deviation arcs.
    for (double r = 0.5; r <= f.max_ratio + 1e-9; r += 0.5) {
        const bool unit = std::abs(r - 1.0) < 1e-9;
        doc.path(arc(f.origin_x, f.origin_y, r * f.pixels_per_unit, 0.0, theta_max), unit ? "#333333" : "#bbbbbb",
                 unit ? 1.5 : 0.8, unit ? "class=\"unit-circle\"" : "class=\"sd-arc\"");
    }
    // Correlation rays.
    for (double c : {0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, -0.2, -0.4, -0.6, -0.8, -0.9, -0.95, -0.99}) {
        if (c < 0.0 && !f.negative_correlations) continue;
        const auto [x, y] = f.point(f.max_ratio, c);
        doc.line(f.origin_x, f.origin_y, x, y, "#dddddd", 0.6, "class=\"corr-ray\"");
        const auto [lx, ly] = f.point(f.max_ratio * 1.04, c);
        doc.text(lx, ly, fmt::format("{:g}", c), 10.0, "middle");
    }
    // CRMSE contours around the reference, clipped to the plotted wedge.
    for (double c = 0.25; c <= f.max_ratio + 1e-9; c += 0.25) {
        std::string d;
        bool pen = false;
        for (int i = 0; i <= 180; ++i) {
            const double a = kPi * i / 180.0;
            const double px = 1.0 + c * std::cos(a), py = c * std::sin(a);
            const double r = std::hypot(px, py);
            const bool inside = r <= f.max_ratio && (f.negative_correlations || px >= 0.0);
            if (!inside) {
                pen = false;
                continue;
            }
            d += fmt::format("{}{:.2f} {:.2f}", pen ? " L" : (d.empty() ? "M" : " M"), f.origin_x + px * f.pixels_per_unit,
                             f.origin_y - py * f.pixels_per_unit);
            pen = true;
        }
        if (!d.empty()) doc.path(d, "#9ecae1", 0.8, "stroke-dasharray=\"4 3\" class=\"crmse\"");
    }
    // Axes.
    doc.line(f.negative_correlations ? f.origin_x - f.max_ratio * f.pixels_per_unit : f.origin_x, f.origin_y,
             f.origin_x + f.max_ratio * f.pixels_per_unit, f.origin_y, "#000000", 1.0);
    if (!f.negative_correlations)
        doc.line(f.origin_x, f.origin_y, f.origin_x, f.origin_y - f.max_ratio * f.pixels_per_unit, "#000000", 1.0);
    doc.text(f.origin_x + 0.5 * f.max_ratio * f.pixels_per_unit, f.origin_y + 35.0, "normalized standard deviation", 12.0,
             "middle");
    if (!title.empty()) doc.text(f.width / 2.0, 24.0, title, 14.0, "middle");

    for (const auto& s : background) {
        if (s.degenerate) continue;
        const auto [x, y] = f.point(s.sigma_ratio, s.correlation);
        doc.circle(x, y, 2.0, "#888888", "fill-opacity=\"0.35\" class=\"background\"");
    }
    const auto [rx, ry] = f.point(1.0, 1.0);
    doc.circle(rx, ry, 5.0, "none", "stroke=\"#000000\" stroke-width=\"1.5\" class=\"reference\"");

    static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    std::vector<std::string> runs;
    for (const auto& s : stats)
        if (std::find(runs.begin(), runs.end(), s.run) == runs.end()) runs.push_back(s.run);
    for (const auto& s : stats) {
        if (s.degenerate) continue;
        const auto [x, y] = f.point(s.sigma_ratio, s.correlation);
        const auto ri = static_cast<std::size_t>(std::find(runs.begin(), runs.end(), s.run) - runs.begin());
        doc.circle(x, y, 4.0, palette[ri % std::size(palette)],
                   fmt::format("class=\"point\" data-run=\"{}\" data-field=\"{}\"", svg::escape(s.run), svg::escape(s.field)));
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const double y = 50.0 + 16.0 * static_cast<double>(i);
        doc.circle(f.width - 150.0, y - 4.0, 4.0, palette[i % std::size(palette)]);
        doc.text(f.width - 140.0, y, runs[i].empty() ? "model" : runs[i], 11.0);
    }
    return doc.str();
}

std::string map_color(ColorScale scale, double t) {
    t = std::clamp(t, 0.0, 1.0);
    struct C {
        double r, g, b;
    };
    static const C seq[] = {{0.267, 0.005, 0.329}, {0.229, 0.322, 0.546}, {0.128, 0.567, 0.551}, {0.369, 0.789, 0.383},
                            {0.993, 0.906, 0.144}};
    static const C div[] = {{0.230, 0.299, 0.754}, {1.0, 1.0, 1.0}, {0.706, 0.016, 0.150}};
    const C* anchors = scale == ColorScale::Sequential ? seq : div;
    const std::size_t n = scale == ColorScale::Sequential ? std::size(seq) : std::size(div);
    const double pos = t * static_cast<double>(n - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), n - 2);
    const double u = pos - static_cast<double>(i);
    const C& a = anchors[i];
    const C& b = anchors[i + 1];
    return svg::rgb(a.r + u * (b.r - a.r), a.g + u * (b.g - a.g), a.b + u * (b.b - a.b));
}

namespace {

std::string render_map(const FieldSpec& spec, const Eigen::VectorXd& values, const MapStyle& style) {
    if (!spec.grid.is_map()) throw InputError(fmt::format("{} is a scalar field and has no map", spec.key()));
    const std::size_t nlat = spec.grid.nlat, ncol = spec.grid.ncol;
    // Native-grid values; masked points stay NaN.
    std::vector<double> native(nlat * ncol, kNaN);
    std::size_t k = 0;
    for (std::size_t l = 0; l < native.size(); ++l)
        if (spec.mask[l]) native[l] = values[static_cast<Eigen::Index>(k++)];

    double lo = style.lower.value_or(std::numeric_limits<double>::infinity());
    double hi = style.upper.value_or(-std::numeric_limits<double>::infinity());
    if (!style.lower || !style.upper) {
        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
        for (Eigen::Index i = 0; i < values.size(); ++i)
            if (std::isfinite(values[i])) {
                dmin = std::min(dmin, values[i]);
                dmax = std::max(dmax, values[i]);
            }
        if (!std::isfinite(dmin)) dmin = dmax = 0.0;
        if (style.scale == ColorScale::Diverging) {
            const double a = std::max(std::abs(dmin), std::abs(dmax));
            dmin = -a;
            dmax = a;
        }
        if (!style.lower) lo = dmin;
        if (!style.upper) hi = dmax;
    }

    const double cell = 10.0, left = 20.0, top = style.title.empty() ? 20.0 : 40.0;
    // Lat-lon: rows are latitudes with north on top. Lat-plev: columns are
    // latitudes, rows are levels in stored order.
    const bool latlon = spec.grid.kind == GridKind::LatLon;
    const std::size_t cols = latlon ? ncol : nlat, rows = latlon ? nlat : ncol;
    const double width = left * 2 + cell * static_cast<double>(cols);
    const double height = top + cell * static_cast<double>(rows) + 60.0;
    svg::Document doc(width, height);
    doc.rect(0, 0, width, height, "#ffffff");
    if (!style.title.empty()) doc.text(width / 2.0, 24.0, style.title, 14.0, "middle");
    for (std::size_t i = 0; i < nlat; ++i)
        for (std::size_t j = 0; j < ncol; ++j) {
            const std::size_t l = i * ncol + j;
            const std::size_t cx = latlon ? j : i;
            const std::size_t cy = latlon ? nlat - 1 - i : j;
            const double x = left + cell * static_cast<double>(cx), y = top + cell * static_cast<double>(cy);
            if (!spec.mask[l]) {
                doc.rect(x, y, cell, cell, "none", "class=\"masked\"");
                continue;
            }
            const double v = native[l];
            if (!std::isfinite(v)) {
                doc.rect(x, y, cell, cell, "#bdbdbd", "class=\"undefined\"");
                continue;
            }
            const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
            doc.rect(x, y, cell, cell, map_color(style.scale, t), "class=\"cell\"");
        }
    // Colour bar.
    const double bar_y = top + cell * static_cast<double>(rows) + 15.0;
    const double bar_w = std::min(width - 2 * left, 300.0);
    const int steps = 30;
    for (int s = 0; s < steps; ++s)
        doc.rect(left + bar_w * s / steps, bar_y, bar_w / steps + 0.01, 12.0,
                 map_color(style.scale, (s + 0.5) / steps), "class=\"colorbar\"");
    doc.text(left, bar_y + 28.0, fmt::format("{:.4g}", lo), 10.0);
    doc.text(left + bar_w, bar_y + 28.0, fmt::format("{:.4g}", hi), 10.0, "end");
    return doc.str();
}

}  // namespace

std::string field_map_svg(const StackedVector& values, std::size_t field, const MapStyle& style) {
    return render_map(values.schema()->field(field), values.field(field), style);
}

std::string r2_map_svg(const Eigen::VectorXd& per_point_r2, const SchemaPtr& schema, std::size_t field,
                       const std::string& title) {
    if (static_cast<std::size_t>(per_point_r2.size()) != schema->total_size())
        throw InputError("R^2 vector does not match the schema");
    MapStyle style;
    style.lower = 0.0;
    style.upper = 1.0;
    style.title = title;
    return render_map(schema->field(field), schema->segment(per_point_r2, field), style);
}

ScaleTable scale_table(const Eigen::VectorXd& s_sq_hat, const FieldSchema& schema) {
    if (static_cast<std::size_t>(s_sq_hat.size()) != schema.num_fields())
        throw InputError(fmt::format("expected {} scales, got {}", schema.num_fields(), s_sq_hat.size()));
    ScaleTable t;
    std::tie(t.variables, t.seasons) = variables_and_seasons(schema);
    const auto nv = static_cast<Eigen::Index>(t.variables.size()), ns = static_cast<Eigen::Index>(t.seasons.size());
    t.s = Eigen::MatrixXd::Constant(nv, ns, kNaN);
    t.s_sq = Eigen::MatrixXd::Constant(nv, ns, kNaN);
    for (std::size_t p = 0; p < schema.num_fields(); ++p) {
        const auto& f = schema.field(p);
        const auto r = std::find(t.variables.begin(), t.variables.end(), f.name) - t.variables.begin();
        const auto c = std::find(t.seasons.begin(), t.seasons.end(), f.season) - t.seasons.begin();
        t.s_sq(r, c) = s_sq_hat[static_cast<Eigen::Index>(p)];
        t.s(r, c) = std::sqrt(s_sq_hat[static_cast<Eigen::Index>(p)]);
    }
    return t;
}

std::string ScaleTable::to_csv(bool squared) const {
    csv::Table t;
    std::vector<std::string> header{"Variable"};
    header.insert(header.end(), seasons.begin(), seasons.end());
    t.push_back(header);
    const Eigen::MatrixXd& v = squared ? s_sq : s;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        std::vector<std::string> row{variables[i]};
        for (std::size_t j = 0; j < seasons.size(); ++j)
            row.push_back(csv::format_double(v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        t.push_back(std::move(row));
    }
    return csv::to_string(t);
}

ScaleTable ScaleTable::from_csv(const std::string& s_text, const std::string& s_sq_text) {
    auto read = [](const std::string& text, std::vector<std::string>& vars, std::vector<std::string>& seasons) {
        const auto t = csv::parse(text);
        if (t.empty() || t.front().empty() || t.front().front() != "Variable") throw InputError("scale table: bad header");
        seasons.assign(t.front().begin() + 1, t.front().end());
        vars.clear();
        Eigen::MatrixXd m(static_cast<Eigen::Index>(t.size() - 1), static_cast<Eigen::Index>(seasons.size()));
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (t[i].size() != seasons.size() + 1) throw InputError("scale table: ragged row");
            vars.push_back(t[i][0]);
            for (std::size_t j = 0; j < seasons.size(); ++j)
                m(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = csv::parse_double(t[i][j + 1]);
        }
        return m;
    };
    ScaleTable out;
    std::vector<std::string> v2, s2;
    out.s = read(s_text, out.variables, out.seasons);
    out.s_sq = read(s_sq_text, v2, s2);
    if (v2 != out.variables || s2 != out.seasons) throw InputError("scale tables disagree in layout");
    return out;
}

PcScatter pc_scatter_data(const SurrogateModel& model, const EnsembleOutput& ensemble) {
    const auto& basis = model.basis();
    if (static_cast<std::size_t>(ensemble.rows().cols()) != basis.output_size())
        throw InputError("ensemble and surrogate output sizes differ");
    const auto n = static_cast<Eigen::Index>(ensemble.size());
    const auto k = static_cast<Eigen::Index>(basis.rank());
    PcScatter s;
    s.truth.resize(n, k);
    s.predicted.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.truth.row(i) = basis.project(ensemble.rows().row(i).transpose()).transpose();
        s.predicted.row(i) = model.predict_scores(ensemble.design().row(static_cast<std::size_t>(i))).transpose();
    }
    s.r2.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double mean = s.truth.col(j).mean();
        const double ss_tot = (s.truth.col(j).array() - mean).square().sum();
        const double ss_res = (s.truth.col(j) - s.predicted.col(j)).squaredNorm();
        if (ss_tot > 0.0)
            s.r2[j] = 1.0 - ss_res / ss_tot;
        else
            s.r2[j] = ss_res == 0.0 ? 1.0 : kNaN;
    }
    return s;
}

std::string PcScatter::to_csv() const {
    csv::Table t{{"member", "pc", "true", "predicted"}};
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
        for (Eigen::Index i = 0; i < truth.rows(); ++i)
            t.push_back({std::to_string(i), std::to_string(j + 1), csv::format_double(truth(i, j)),
                         csv::format_double(predicted(i, j))});
    return csv::to_string(t);
}

std::string PcScatter::r2_csv() const {
    csv::Table t{{"pc", "r2"}};
    for (Eigen::Index j = 0; j < r2.size(); ++j) t.push_back({std::to_string(j + 1), csv::format_double(r2[j])});
    return csv::to_string(t);
}

std::string variance_curve_csv(const ReducedBasis& basis) {
    csv::Table t{{"components", "explained_fraction"}};
    for (const auto& [k, frac] : variance_curve(basis)) t.push_back({std::to_string(k), csv::format_double(frac)});
    return csv::to_string(t);
}

std::string pair_plot_svg(const PairwiseSummary& summary, const std::vector<std::string>& names, bool bounds_view) {
    const HistogramView& view = bounds_view ? summary.bounds : summary.sampled;
    const std::size_t d = names.size();
    if (d == 0 || view.marginals.size() < d) throw InputError("pair plot: names do not match the summary");
    const double panel = 120.0, gap = 8.0, left = 70.0, top = 30.0;
    const double size = left + static_cast<double>(d) * (panel + gap) + 20.0;
    svg::Document doc(size, size + 40.0);
    doc.rect(0, 0, size, size + 40.0, "#ffffff");
    static const char* marker_colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e"};

    auto px = [&](const Histogram1D& h, double v, double origin) {
        return origin + panel * (v - h.lower) / (h.upper - h.lower);
    };
    for (std::size_t i = 0; i < d; ++i) {
        const double ox = left + static_cast<double>(i) * (panel + gap);
        const double oy = top + static_cast<double>(i) * (panel + gap);
        const auto& h = view.marginals[i];
        doc.rect(ox, oy, panel, panel, "none", "stroke=\"#999999\" class=\"panel\"");
        const std::size_t bins = h.counts.size();
        const double peak = static_cast<double>(*std::max_element(h.counts.begin(), h.counts.end()));
        for (std::size_t b = 0; b < bins; ++b) {
            if (h.counts[b] == 0) continue;
            const double bh = panel * static_cast<double>(h.counts[b]) / peak;
            doc.rect(ox + panel * static_cast<double>(b) / static_cast<double>(bins), oy + panel - bh,
                     panel / static_cast<double>(bins), bh, "#6baed6", "class=\"bar\"");
        }
        for (Eigen::Index q = 0; q < summary.quantiles.rows(); ++q) {
            const double x = px(h, summary.quantiles(q, static_cast<Eigen::Index>(i)), ox);
            doc.line(x, oy, x, oy + panel, "#08306b", q == 1 ? 1.5 : 1.0, "stroke-dasharray=\"3 2\" class=\"quantile\"");
        }
        for (std::size_t mk = 0; mk < summary.markers.size(); ++mk) {
            const double x = px(h, summary.markers[mk].second[static_cast<Eigen::Index>(i)], ox);
            doc.line(x, oy, x, oy + panel, marker_colors[mk % std::size(marker_colors)], 1.5, "class=\"marker\"");
        }
        doc.text(ox + panel / 2.0, top + static_cast<double>(d) * (panel + gap) + 14.0, names[i], 10.0, "middle");
        doc.text(left - 6.0, oy + panel / 2.0, names[i], 10.0, "end");
    }
    for (const auto& pair : view.pairs) {
        if (pair.x >= d || pair.y >= d) continue;
        // Panel in row y, column x (below the diagonal).
        const double ox = left + static_cast<double>(pair.x) * (panel + gap);
        const double oy = top + static_cast<double>(pair.y) * (panel + gap);
        doc.rect(ox, oy, panel, panel, "none", "stroke=\"#999999\" class=\"panel\"");
        const auto bins = pair.counts.rows();
        const double peak = std::max(1, pair.counts.maxCoeff());
        const double cell = panel / static_cast<double>(bins);
        for (Eigen::Index a = 0; a < bins; ++a)
            for (Eigen::Index b = 0; b < bins; ++b) {
                const int c = pair.counts(a, b);
                if (c == 0) continue;
                const double shade = 1.0 - 0.85 * static_cast<double>(c) / peak;
                doc.rect(ox + cell * static_cast<double>(a), oy + panel - cell * static_cast<double>(b + 1), cell, cell,
                         svg::rgb(shade, shade, shade), "class=\"density\"");
            }
        for (std::size_t mk = 0; mk < summary.markers.size(); ++mk) {
            const auto& point = summary.markers[mk].second;
            const double x = px(pair.x_axis, point[static_cast<Eigen::Index>(pair.x)], ox);
            const double y = oy + panel - (px(pair.y_axis, point[static_cast<Eigen::Index>(pair.y)], 0.0));
            doc.circle(x, y, 3.0, marker_colors[mk % std::size(marker_colors)], "class=\"marker\"");
        }
    }
    for (std::size_t mk = 0; mk < summary.markers.size(); ++mk) {
        const double y = size + 10.0 + 14.0 * static_cast<double>(mk);
        doc.circle(left, y - 4.0, 4.0, marker_colors[mk % std::size(marker_colors)]);
        doc.text(left + 10.0, y, summary.markers[mk].first, 11.0);
    }
    return doc.str();
}

}  // namespace autocal
