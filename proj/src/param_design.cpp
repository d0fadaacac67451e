#include "autocal/param_design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "autocal/error.hpp"
#include "autocal/random.hpp"
#include "autocal/csv.hpp"

namespace autocal {

namespace {
constexpr double kBoundsTolerance = 1e-12;
}

ParameterSpace::ParameterSpace(std::vector<std::string> names, std::vector<double> lower, std::vector<double> upper)
    : names_(std::move(names)) {
    if (names_.empty()) throw InputError("parameter space needs at least one parameter");
    if (lower.size() != names_.size() || upper.size() != names_.size())
        throw InputError("parameter names and bounds have different lengths");
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw InputError("parameter names must be nonempty");
        if (!seen.insert(n).second) throw InputError(fmt::format("duplicate parameter name '{}'", n));
    }
    lower_ = Eigen::Map<const Eigen::VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    upper_ = Eigen::Map<const Eigen::VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size()));
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
            throw InputError(fmt::format("parameter '{}' needs finite bounds with low < high", names_[i]));
    }
}

std::size_t ParameterSpace::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw InputError(fmt::format("unknown parameter '{}'", name));
    return static_cast<std::size_t>(it - names_.begin());
}

Eigen::VectorXd ParameterSpace::to_canonical(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != dim())
        throw InputError(fmt::format("expected {} parameters, got {}", dim(), theta.size()));
    Eigen::VectorXd z(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double r = upper_[i] - lower_[i];
        const double tol = kBoundsTolerance * r;
        if (!(theta[i] >= lower_[i] - tol && theta[i] <= upper_[i] + tol))
            throw DomainError(fmt::format("parameter '{}' = {} is outside [{}, {}]", names_[static_cast<std::size_t>(i)],
                                          theta[i], lower_[i], upper_[i]));
        z[i] = std::clamp(2.0 * (theta[i] - lower_[i]) / r - 1.0, -1.0, 1.0);
    }
    return z;
}

Eigen::VectorXd ParameterSpace::from_canonical(const Eigen::VectorXd& z) const {
    if (static_cast<std::size_t>(z.size()) != dim())
        throw InputError(fmt::format("expected {} coordinates, got {}", dim(), z.size()));
    Eigen::VectorXd theta(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (!(z[i] >= -1.0 - kBoundsTolerance && z[i] <= 1.0 + kBoundsTolerance))
            throw DomainError(fmt::format("canonical coordinate {} ('{}') = {} is outside [-1, 1]", i,
                                          names_[static_cast<std::size_t>(i)], z[i]));
        const double zi = std::clamp(z[i], -1.0, 1.0);
        theta[i] = lower_[i] + 0.5 * (zi + 1.0) * (upper_[i] - lower_[i]);
    }
    return theta;
}

Eigen::VectorXd ParameterSpace::jacobian_diagonal() const { return 0.5 * (upper_ - lower_); }

bool ParameterSpace::contains(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != dim()) return false;
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (!(theta[i] >= lower_[i] && theta[i] <= upper_[i])) return false;
    return true;
}

nlohmann::json ParameterSpace::to_json() const {
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < dim(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        params.push_back({{"name", names_[i]}, {"low", lower_[k]}, {"high", upper_[k]}});
    }
    return {{"parameters", params}};
}

ParameterSpace ParameterSpace::from_json(const nlohmann::json& j) {
    if (!j.contains("parameters") || !j["parameters"].is_array())
        throw InputError("parameter space JSON needs a 'parameters' array");
    std::vector<std::string> names;
    std::vector<double> lo, hi;
    for (const auto& p : j["parameters"]) {
        try {
            names.push_back(p.at("name").get<std::string>());
            lo.push_back(p.at("low").get<double>());
            hi.push_back(p.at("high").get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw InputError(fmt::format("bad parameter entry: {}", e.what()));
        }
    }
    return ParameterSpace(std::move(names), std::move(lo), std::move(hi));
}

ParameterSpace ParameterSpace::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open parameter file {}", path.string()));
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void ParameterSpace::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
    out << to_json().dump(2) << '\n';
}

ParameterSpace ParameterSpace::e3sm_atmosphere() {
    return ParameterSpace({"ice_sed_ai", "clubb_c1", "clubb_gamma_coef", "zmconv_tau", "zmconv_dmpdz"},
                          {350.0, 1.0, 0.10, 1800.0, -2.0e-3}, {1400.0, 5.0, 0.50, 14400.0, -0.1e-3});
}

bool ParameterSpace::operator==(const ParameterSpace& other) const {
    return names_ == other.names_ && lower_ == other.lower_ && upper_ == other.upper_;
}

DesignMatrix::DesignMatrix(ParameterSpace space, Eigen::MatrixXd values)
    : space_(std::move(space)), values_(std::move(values)) {
    if (values_.rows() < 1) throw InputError("design needs at least one row");
    if (static_cast<std::size_t>(values_.cols()) != space_.dim())
        throw InputError(fmt::format("design has {} columns but the space has {} parameters", values_.cols(),
                                     space_.dim()));
    for (Eigen::Index i = 0; i < values_.rows(); ++i)
        for (Eigen::Index c = 0; c < values_.cols(); ++c)
            if (!(values_(i, c) >= space_.lower()[c] && values_(i, c) <= space_.upper()[c]))
                throw DomainError(fmt::format("design row {} column '{}' = {} is outside its bounds", i,
                                              space_.names()[static_cast<std::size_t>(c)], values_(i, c)));
}

Eigen::MatrixXd DesignMatrix::canonical() const {
    Eigen::MatrixXd z(values_.rows(), values_.cols());
    for (Eigen::Index i = 0; i < values_.rows(); ++i)
        z.row(i) = space_.to_canonical(values_.row(i).transpose()).transpose();
    return z;
}

void DesignMatrix::write_csv(const std::filesystem::path& path) const {
    std::vector<std::vector<std::string>> rows;
    rows.push_back(space_.names());
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        std::vector<std::string> r;
        for (Eigen::Index c = 0; c < values_.cols(); ++c) r.push_back(csv::format_double(values_(i, c)));
        rows.push_back(std::move(r));
    }
    csv::write(path, rows);
}

DesignMatrix DesignMatrix::read_csv(const std::filesystem::path& path, const ParameterSpace& space) {
    const auto rows = csv::read(path);
    if (rows.size() < 2) throw InputError(fmt::format("{}: design CSV needs a header and at least one row", path.string()));
    const auto& header = rows.front();
    std::vector<std::size_t> column_of(space.dim());
    for (std::size_t p = 0; p < space.dim(); ++p) {
        auto it = std::find(header.begin(), header.end(), space.names()[p]);
        if (it == header.end())
            throw InputError(fmt::format("{}: missing column '{}'", path.string(), space.names()[p]));
        column_of[p] = static_cast<std::size_t>(it - header.begin());
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(space.dim()));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw InputError(fmt::format("{}: row {} has {} fields, header has {}", path.string(), r, rows[r].size(),
                                         header.size()));
        for (std::size_t p = 0; p < space.dim(); ++p)
            values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(p)) = csv::parse_double(rows[r][column_of[p]]);
    }
    return DesignMatrix(space, std::move(values));
}

DesignMatrix lhs_sample(const ParameterSpace& space, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InputError("invalid design: Latin hypercube needs n >= 1");
    Rng rng(seed);
    const auto d = static_cast<Eigen::Index>(space.dim());
    Eigen::MatrixXd values(static_cast<Eigen::Index>(n), d);
    std::vector<std::size_t> strata(n);
    for (Eigen::Index c = 0; c < d; ++c) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        // Fisher-Yates with our own uniform draw keeps the permutation stable across standard libraries.
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
            std::swap(strata[i - 1], strata[std::min(j, i - 1)]);
        }
        const double lo = space.lower()[c];
        const double width = space.range(static_cast<std::size_t>(c)) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = uniform01(rng);
            double v = std::min(lo + (static_cast<double>(strata[i]) + u) * width, space.upper()[c]);
            // Rounding can push a point across a stratum edge; nudge it back.
            auto stratum_of = [&](double x) {
                const double t = (x - lo) / space.range(static_cast<std::size_t>(c));
                return std::min(static_cast<std::size_t>(t * static_cast<double>(n)), n - 1);
            };
            while (stratum_of(v) < strata[i]) v = std::nextafter(v, space.upper()[c]);
            while (stratum_of(v) > strata[i]) v = std::nextafter(v, lo);
            values(static_cast<Eigen::Index>(i), c) = v;
        }
    }
    return DesignMatrix(space, std::move(values));
}

std::vector<std::vector<std::size_t>> lhs_strata(const DesignMatrix& design) {
    const auto& space = design.space();
    const std::size_t n = design.rows();
    std::vector<std::vector<std::size_t>> out(space.dim(), std::vector<std::size_t>(n));
    for (std::size_t c = 0; c < space.dim(); ++c) {
        const auto k = static_cast<Eigen::Index>(c);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = (design.values()(static_cast<Eigen::Index>(i), k) - space.lower()[k]) / space.range(c);
            out[c][i] = std::min(static_cast<std::size_t>(t * static_cast<double>(n)), n - 1);
        }
    }
    return out;
}

}  // namespace autocal
