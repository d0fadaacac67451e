#include "autocal/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

#include "autocal/csv.hpp"
#include "autocal/error.hpp"
#include "autocal/matrix_io.hpp"
#include "autocal/parallel.hpp"
#include "autocal/random.hpp"

namespace autocal {

void OptimizerConfig::validate() const {
    if (memory == 0 || max_iters == 0 || n_starts == 0 || !(grad_tol > 0.0))
        throw InputError("optimizer settings must all be positive");
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kCurvature = 0.9;
constexpr int kMaxTrials = 40;
constexpr double kRoundoffDecrease = 1e-10;

struct Pair {
    Eigen::VectorXd s, y;
    double rho;
};

}  // namespace

BoundedRun maximize_bounded(const SmoothObjective& f, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                            const Eigen::VectorXd& x0, const OptimizerConfig& config) {
    config.validate();
    const Eigen::Index n = x0.size();
    if (lower.size() != n || upper.size() != n) throw InputError("bound dimension mismatch");
    if ((lower.array() > upper.array()).any()) throw InputError("lower bound above upper bound");

    BoundedRun run;
    auto project = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.cwiseMax(lower).cwiseMin(upper); };
    // Works on g = -f internally.
    auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        Eigen::VectorXd grad(n);
        const double v = f(x, &grad);
        ++run.n_evals;
        g = -grad;
        return -v;
    };
    auto projected = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < n; ++i)
            if ((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)) pg[i] = 0.0;
        return pg;
    };

    Eigen::VectorXd x = project(x0);
    Eigen::VectorXd G(n);
    double gx = eval(x, G);
    run.x = x;
    if (!std::isfinite(gx) || !G.allFinite()) {
        run.value = -gx;
        run.failed = true;
        run.stop_reason = "non-finite objective at the start";
        return run;
    }
    run.trace.push_back(-gx);

    std::deque<Pair> memory;
    double predicted = std::numeric_limits<double>::infinity();
    bool at_roundoff = false;
    run.stop_reason = "iteration limit";
    for (run.iterations = 0; run.iterations < config.max_iters; ++run.iterations) {
        const Eigen::VectorXd pg = projected(x, G);
        if (pg.lpNorm<Eigen::Infinity>() <= config.grad_tol * std::max(1.0, std::abs(gx))) {
            run.stop_reason = "projected gradient below tolerance";
            break;
        }
        Eigen::Array<bool, Eigen::Dynamic, 1> fixed = (pg.array() == 0.0) && (G.array() != 0.0);
        auto mask = [&](Eigen::VectorXd v) {
            for (Eigen::Index i = 0; i < n; ++i)
                if (fixed[i]) v[i] = 0.0;
            return v;
        };

        Eigen::VectorXd d;
        double slope = 0.0;
        if (!memory.empty()) {
            Eigen::VectorXd q = mask(G);
            std::vector<double> a(memory.size());
            for (std::size_t i = memory.size(); i-- > 0;) {
                a[i] = memory[i].rho * memory[i].s.dot(q);
                q -= a[i] * memory[i].y;
            }
            const auto& last = memory.back();
            q *= last.s.dot(last.y) / last.y.squaredNorm();
            for (std::size_t i = 0; i < memory.size(); ++i) {
                const double b = memory[i].rho * memory[i].y.dot(q);
                q += (a[i] - b) * memory[i].s;
            }
            d = -mask(q);
            slope = G.dot(d);
            if (slope < 0.0) predicted = -slope;
        }
        if (memory.empty() || !(slope < 0.0)) {
            memory.clear();
            d = -pg / pg.lpNorm<Eigen::Infinity>();
            slope = G.dot(d);
        }

        double alpha = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        bool have_best = false;
        Eigen::VectorXd x_best, G_best;
        double g_best = 0.0;
        for (int trial = 0; trial < kMaxTrials; ++trial) {
            const Eigen::VectorXd raw = x + alpha * d;
            const Eigen::VectorXd xt = project(raw);
            if (xt == x) break;
            const bool clipped = xt != raw;
            Eigen::VectorXd Gt(n);
            const double gt = eval(xt, Gt);
            const bool decrease = std::isfinite(gt) && Gt.allFinite() && gt <= gx + kArmijo * G.dot(xt - x);
            if (!decrease) {
                hi = alpha;
                alpha = 0.5 * (lo + hi);
                continue;
            }
            if (!have_best || gt < g_best) {
                have_best = true;
                x_best = xt;
                G_best = Gt;
                g_best = gt;
            }
            const double dslope = Gt.dot(d);
            if (clipped || std::abs(dslope) <= kCurvature * std::abs(slope)) break;
            if (dslope < 0.0) {
                lo = alpha;
                alpha = std::isinf(hi) ? 2.0 * alpha : 0.5 * (lo + hi);
            } else {
                hi = alpha;
                alpha = 0.5 * (lo + hi);
            }
        }
        if (!have_best) {
            if (!memory.empty()) {
                memory.clear();
                continue;
            }
            at_roundoff = predicted <= kRoundoffDecrease * std::max(1.0, std::abs(gx));
            run.stop_reason = at_roundoff ? "no decrease above roundoff" : "line search failed";
            break;
        }

        Pair p{x_best - x, G_best - G, 0.0};
        const double sy = p.s.dot(p.y);
        if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
            p.rho = 1.0 / sy;
            memory.push_back(std::move(p));
            if (memory.size() > config.memory) memory.pop_front();
        }
        x = x_best;
        G = G_best;
        gx = g_best;
        predicted = std::numeric_limits<double>::infinity();
        run.trace.push_back(-gx);
    }

    run.x = x;
    run.value = -gx;
    run.projected_gradient = projected(x, G).lpNorm<Eigen::Infinity>();
    run.converged = at_roundoff || run.projected_gradient <= config.grad_tol * std::max(1.0, std::abs(gx));
    run.failed = !run.converged && run.trace.size() == 1;
    return run;
}

int boundary_flag(double value, double lower, double upper) {
    const double tol = 1e-9 * (upper - lower);
    if (value <= lower + tol) return -1;
    if (value >= upper - tol) return 1;
    return 0;
}

std::vector<int> CalibrationResult::boundary() const {
    std::vector<int> flags(space.dim());
    for (std::size_t i = 0; i < space.dim(); ++i)
        flags[i] = boundary_flag(theta_hat[static_cast<Eigen::Index>(i)], space.lower()[static_cast<Eigen::Index>(i)],
                                 space.upper()[static_cast<Eigen::Index>(i)]);
    return flags;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json CalibrationResult::to_json() const {
    nlohmann::json j;
    j["mode"] = autocal::to_string(mode);
    j["fixed_scales"] = fixed_scales;
    j["space"] = space.to_json();
    j["fields"] = fields;
    j["theta_hat"] = to_vec(theta_hat);
    j["s_sq_hat"] = to_vec(s_sq_hat);
    j["s_hat"] = to_vec(s_sq_hat.cwiseSqrt());
    j["objective"] = objective;
    j["converged"] = converged;
    j["n_evals"] = n_evals;
    j["start_index"] = start_index;
    j["boundary"] = boundary();
    auto& arr = j["starts"] = nlohmann::json::array();
    for (const auto& s : starts) {
        arr.push_back({{"theta_start", to_vec(s.theta_start)},
                       {"theta_end", to_vec(s.theta_end)},
                       {"s_sq_end", to_vec(s.s_sq_end)},
                       {"objective", s.objective},
                       {"projected_gradient", s.projected_gradient},
                       {"converged", s.converged},
                       {"failed", s.failed},
                       {"iterations", s.iterations},
                       {"n_evals", s.n_evals},
                       {"stop_reason", s.stop_reason},
                       {"trace", s.trace}});
    }
    return j;
}

CalibrationResult CalibrationResult::from_json(const nlohmann::json& j) {
    try {
        CalibrationResult r;
        r.mode = estimator_from_string(j.at("mode").get<std::string>());
        r.fixed_scales = j.at("fixed_scales").get<bool>();
        r.space = ParameterSpace::from_json(j.at("space"));
        r.fields = j.at("fields").get<std::vector<std::string>>();
        r.theta_hat = from_vec(j.at("theta_hat"));
        r.s_sq_hat = from_vec(j.at("s_sq_hat"));
        r.objective = j.at("objective").get<double>();
        r.converged = j.at("converged").get<bool>();
        r.n_evals = j.at("n_evals").get<std::size_t>();
        r.start_index = j.at("start_index").get<std::size_t>();
        for (const auto& s : j.at("starts")) {
            StartRecord rec;
            rec.theta_start = from_vec(s.at("theta_start"));
            rec.theta_end = from_vec(s.at("theta_end"));
            rec.s_sq_end = from_vec(s.at("s_sq_end"));
            rec.objective = s.at("objective").is_null() ? std::nan("") : s.at("objective").get<double>();
            rec.projected_gradient =
                s.at("projected_gradient").is_null() ? std::nan("") : s.at("projected_gradient").get<double>();
            rec.converged = s.at("converged").get<bool>();
            rec.failed = s.at("failed").get<bool>();
            rec.iterations = s.at("iterations").get<std::size_t>();
            rec.n_evals = s.at("n_evals").get<std::size_t>();
            rec.stop_reason = s.at("stop_reason").get<std::string>();
            rec.trace = s.at("trace").get<std::vector<double>>();
            r.starts.push_back(std::move(rec));
        }
        if (static_cast<std::size_t>(r.theta_hat.size()) != r.space.dim() ||
            static_cast<std::size_t>(r.s_sq_hat.size()) != r.fields.size())
            throw InputError("calibration result: inconsistent dimensions");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("malformed calibration result: {}", e.what()));
    }
}

void CalibrationResult::save(const std::filesystem::path& path) const { write_json(path, to_json()); }

CalibrationResult CalibrationResult::load(const std::filesystem::path& path) { return from_json(read_json(path)); }

CalibrationResult maximize(const LossState& state, Estimator mode, const OptimizerConfig& config) {
    config.validate();
    const auto& space = state.surrogate().space();
    const auto d = static_cast<Eigen::Index>(space.dim());
    const auto P = static_cast<Eigen::Index>(state.num_fields());
    const bool fixed = state.fixed_scales().has_value();
    const Eigen::Index n = fixed ? d : d + P;
    const Eigen::VectorXd m = state.field_sizes();
    const auto& prior = state.prior();

    Eigen::VectorXd lower(n), upper(n);
    lower.head(d).setConstant(-1.0);
    upper.head(d).setConstant(1.0);
    if (!fixed) {
        lower.tail(P).setConstant(-std::numeric_limits<double>::infinity());
        upper.tail(P).setConstant(std::numeric_limits<double>::infinity());
    }

    SmoothObjective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const Eigen::VectorXd z = x.head(d);
        const Eigen::VectorXd s_sq = fixed ? *state.fixed_scales() : Eigen::VectorXd(x.tail(P).array().exp());
        if (!grad) return state.objective_from_errors(state.field_error_canonical(z), s_sq, mode);
        const auto [e, de] = state.field_error_and_jacobian_canonical(z);
        grad->resize(n);
        Eigen::VectorXd gz = Eigen::VectorXd::Zero(d);
        for (Eigen::Index p = 0; p < P; ++p) {
            gz -= de.row(p).transpose() / (2.0 * s_sq[p]);
            if (fixed) continue;
            double gu = e[p] / (2.0 * s_sq[p]) - 0.5 * m[p];
            if (mode == Estimator::MAP) gu += -(prior.alpha + 1.0) + prior.beta / s_sq[p];
            (*grad)[d + p] = gu;
        }
        grad->head(d) = gz;
        return state.objective_from_errors(e, s_sq, mode);
    };

    const DesignMatrix starts = lhs_sample(space, config.n_starts, derive_seed(config.seed, "optimizer-starts"));
    std::vector<StartRecord> records(config.n_starts);
    parallel_for(config.n_starts, [&](std::size_t i) {
        StartRecord& rec = records[i];
        rec.theta_start = starts.row(i);
        const Eigen::VectorXd z0 = space.to_canonical(rec.theta_start);
        Eigen::VectorXd x0(n);
        x0.head(d) = z0;
        if (!fixed) {
            const Eigen::VectorXd prof = state.profile_s(rec.theta_start, mode);
            x0.tail(P) = prof.cwiseMax(1e-300).array().log();
        }
        const BoundedRun run = maximize_bounded(objective, lower, upper, x0, config);
        rec.theta_end = space.from_canonical(run.x.head(d));
        rec.s_sq_end = fixed ? *state.fixed_scales() : Eigen::VectorXd(run.x.tail(P).array().exp());
        rec.objective = run.value;
        rec.projected_gradient = run.projected_gradient;
        rec.converged = run.converged;
        rec.failed = run.failed || !std::isfinite(run.value);
        rec.iterations = run.iterations;
        rec.n_evals = run.n_evals;
        rec.stop_reason = run.stop_reason;
        rec.trace = run.trace;
    });

    CalibrationResult result;
    result.space = space;
    for (std::size_t p = 0; p < state.num_fields(); ++p) result.fields.push_back(state.obs().schema()->field(p).key());
    result.mode = mode;
    result.fixed_scales = fixed;
    bool found = false;
    for (std::size_t i = 0; i < records.size(); ++i) {
        result.n_evals += records[i].n_evals;
        if (records[i].failed) continue;
        if (!found || records[i].objective > result.objective) {
            found = true;
            result.objective = records[i].objective;
            result.start_index = i;
        }
    }
    if (!found)
        throw OptimizationFailed(fmt::format("optimization failed: all {} starts failed (first: {})", records.size(),
                                             records.front().stop_reason),
                                 std::move(records));
    const auto& best = records[result.start_index];
    result.theta_hat = best.theta_end;
    result.s_sq_hat = best.s_sq_end;
    result.converged = best.converged;
    result.starts = std::move(records);
    return result;
}

Eigen::VectorXd ParameterTable::difference(std::size_t r) const {
    return estimate - references.col(static_cast<Eigen::Index>(r));
}

namespace {

std::string bound_label(int flag) { return flag < 0 ? "lower" : flag > 0 ? "upper" : ""; }

int bound_from_label(const std::string& s) {
    if (s == "lower") return -1;
    if (s == "upper") return 1;
    if (s.empty()) return 0;
    throw InputError(fmt::format("unknown bound label '{}'", s));
}

}  // namespace

std::string ParameterTable::to_csv() const {
    csv::Table t;
    std::vector<std::string> header{"Parameter"};
    header.insert(header.end(), reference_names.begin(), reference_names.end());
    header.push_back(estimate_name);
    header.insert(header.end(), {"Min", "Max", "Bound"});
    t.push_back(header);
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        std::vector<std::string> row{parameters[i]};
        for (Eigen::Index r = 0; r < references.cols(); ++r) row.push_back(csv::format_double(references(k, r)));
        row.push_back(csv::format_double(estimate[k]));
        row.push_back(csv::format_double(minimum[k]));
        row.push_back(csv::format_double(maximum[k]));
        row.push_back(bound_label(boundary[i]));
        t.push_back(std::move(row));
    }
    return csv::to_string(t);
}

ParameterTable ParameterTable::from_csv(const std::string& text) {
    const csv::Table t = csv::parse(text);
    if (t.empty() || t.front().size() < 5 || t.front().front() != "Parameter")
        throw InputError("parameter table: bad header");
    const auto& h = t.front();
    const std::size_t R = h.size() - 5;
    ParameterTable out;
    out.reference_names.assign(h.begin() + 1, h.begin() + 1 + static_cast<std::ptrdiff_t>(R));
    out.estimate_name = h[R + 1];
    const auto rows = static_cast<Eigen::Index>(t.size() - 1);
    out.references.resize(rows, static_cast<Eigen::Index>(R));
    out.estimate.resize(rows);
    out.minimum.resize(rows);
    out.maximum.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = t[static_cast<std::size_t>(i) + 1];
        if (row.size() != h.size()) throw InputError("parameter table: ragged row");
        out.parameters.push_back(row[0]);
        for (std::size_t r = 0; r < R; ++r) out.references(i, static_cast<Eigen::Index>(r)) = csv::parse_double(row[1 + r]);
        out.estimate[i] = csv::parse_double(row[R + 1]);
        out.minimum[i] = csv::parse_double(row[R + 2]);
        out.maximum[i] = csv::parse_double(row[R + 3]);
        out.boundary.push_back(bound_from_label(row[R + 4]));
    }
    return out;
}

ParameterTable compare_parameter_table(const Eigen::VectorXd& estimate, const std::string& estimate_name,
                                       const std::vector<std::pair<std::string, Eigen::VectorXd>>& references,
                                       const ParameterSpace& space) {
    const auto d = static_cast<Eigen::Index>(space.dim());
    if (estimate.size() != d) throw InputError("parameter table: estimate has the wrong dimension");
    ParameterTable t;
    t.parameters = space.names();
    t.estimate_name = estimate_name;
    t.estimate = estimate;
    t.minimum = space.lower();
    t.maximum = space.upper();
    t.references.resize(d, static_cast<Eigen::Index>(references.size()));
    for (std::size_t r = 0; r < references.size(); ++r) {
        if (references[r].second.size() != d)
            throw InputError(fmt::format("reference '{}' has the wrong dimension", references[r].first));
        t.reference_names.push_back(references[r].first);
        t.references.col(static_cast<Eigen::Index>(r)) = references[r].second;
    }
    for (Eigen::Index i = 0; i < d; ++i) t.boundary.push_back(boundary_flag(estimate[i], space.lower()[i], space.upper()[i]));
    return t;
}

ParameterTable compare_parameter_table(const CalibrationResult& result,
                                       const std::vector<std::pair<std::string, Eigen::VectorXd>>& references) {
    return compare_parameter_table(result.theta_hat, autocal::to_string(result.mode), references, result.space);
}

}  // namespace autocal
