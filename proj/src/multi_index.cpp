#include "autocal/multi_index.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "autocal/error.hpp"
#include "autocal/legendre.hpp"

namespace autocal {

std::string Truncation::to_string() const {
    if (kind == TruncationKind::TotalOrder) return "total-order";
    return fmt::format("hyperbolic({})", q);
}

Truncation Truncation::from_string(const std::string& s) {
    if (s == "total-order" || s == "total_order") return total_order();
    if (s == "hyperbolic") return hyperbolic();
    if (s.rfind("hyperbolic(", 0) == 0 && s.back() == ')') {
        const double q = std::stod(s.substr(11, s.size() - 12));
        if (!(q > 0.0 && q <= 1.0)) throw InputError(fmt::format("hyperbolic q must lie in (0, 1], got {}", q));
        return hyperbolic(q);
    }
    throw InputError(fmt::format("unknown truncation '{}'", s));
}

MultiIndexSet::MultiIndexSet(std::size_t dim, unsigned order, Truncation truncation,
                             std::vector<std::vector<unsigned>> indices)
    : dim_(dim), order_(order), truncation_(truncation), indices_(std::move(indices)) {
    for (const auto& a : indices_)
        if (a.size() != dim_) throw InputError("multi-index has the wrong dimension");
}

std::size_t total_order_size(std::size_t d, unsigned p) {
    // C(d+p, p) computed incrementally; exact for the sizes used here.
    std::size_t c = 1;
    for (unsigned i = 1; i <= p; ++i) c = c * (d + i) / i;
    return c;
}

MultiIndexSet build_index_set(std::size_t d, unsigned p, Truncation truncation) {
    if (d < 1) throw InputError("multi-index sets need d >= 1");
    if (truncation.kind == TruncationKind::Hyperbolic && !(truncation.q > 0.0 && truncation.q <= 1.0))
        throw InputError(fmt::format("hyperbolic q must lie in (0, 1], got {}", truncation.q));

    std::vector<std::vector<unsigned>> out;
    std::vector<unsigned> alpha(d, 0);
    std::function<void(std::size_t, unsigned)> rec = [&](std::size_t i, unsigned remaining) {
        if (i == d) {
            out.push_back(alpha);
            return;
        }
        for (unsigned a = 0; a <= remaining; ++a) {
            alpha[i] = a;
            rec(i + 1, remaining - a);
        }
        alpha[i] = 0;
    };
    rec(0, p);

    if (truncation.kind == TruncationKind::Hyperbolic) {
        const double q = truncation.q;
        const double bound = std::pow(static_cast<double>(p), q);
        std::erase_if(out, [&](const std::vector<unsigned>& a) {
            double s = 0.0;
            for (unsigned v : a) s += std::pow(static_cast<double>(v), q);
            return s > bound * (1.0 + 1e-12);
        });
    }

    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        const unsigned sa = std::accumulate(a.begin(), a.end(), 0u);
        const unsigned sb = std::accumulate(b.begin(), b.end(), 0u);
        if (sa != sb) return sa < sb;
        return a > b;
    });
    return MultiIndexSet(d, p, truncation, std::move(out));
}

namespace {

void check_point(const MultiIndexSet& set, const Eigen::VectorXd& z) {
    if (static_cast<std::size_t>(z.size()) != set.dim())
        throw InputError(fmt::format("expected a {}-dimensional point, got {}", set.dim(), z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (!(std::abs(z[i]) <= 1.0 + 1e-12))
            throw DomainError(fmt::format("canonical coordinate {} = {} is outside [-1, 1]", i, z[i]));
}

unsigned max_degree(const MultiIndexSet& set) {
    unsigned m = 0;
    for (const auto& a : set.indices())
        for (unsigned v : a) m = std::max(m, v);
    return m;
}

}  // namespace

Eigen::VectorXd eval_basis(const MultiIndexSet& set, const Eigen::VectorXd& z) {
    check_point(set, z);
    const std::size_t deg = max_degree(set) + 1;
    const std::size_t d = set.dim();
    std::vector<double> table(d * deg);
    for (std::size_t i = 0; i < d; ++i)
        legendre_values(z[static_cast<Eigen::Index>(i)], std::span(table).subspan(i * deg, deg));
    Eigen::VectorXd out(static_cast<Eigen::Index>(set.size()));
    for (std::size_t t = 0; t < set.size(); ++t) {
        double v = 1.0;
        const auto& a = set[t];
        for (std::size_t i = 0; i < d; ++i) v *= table[i * deg + a[i]];
        out[static_cast<Eigen::Index>(t)] = v;
    }
    return out;
}

Eigen::MatrixXd eval_basis_gradient(const MultiIndexSet& set, const Eigen::VectorXd& z) {
    check_point(set, z);
    const std::size_t deg = max_degree(set) + 1;
    const std::size_t d = set.dim();
    std::vector<double> val(d * deg), der(d * deg);
    for (std::size_t i = 0; i < d; ++i)
        legendre_values_and_derivatives(z[static_cast<Eigen::Index>(i)], std::span(val).subspan(i * deg, deg),
                                        std::span(der).subspan(i * deg, deg));
    Eigen::MatrixXd g(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < set.size(); ++t) {
        const auto& a = set[t];
        for (std::size_t j = 0; j < d; ++j) {
            double v = 1.0;
            for (std::size_t i = 0; i < d; ++i) v *= (i == j ? der[i * deg + a[i]] : val[i * deg + a[i]]);
            g(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return g;
}

Eigen::MatrixXd basis_matrix(const MultiIndexSet& set, const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd out(Z.rows(), static_cast<Eigen::Index>(set.size()));
    for (Eigen::Index r = 0; r < Z.rows(); ++r) out.row(r) = eval_basis(set, Z.row(r).transpose()).transpose();
    return out;
}

}  // namespace autocal
