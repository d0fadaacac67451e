#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "autocal/legendre.hpp"
#include "autocal/multi_index.hpp"
#include "autocal/random.hpp"

using namespace autocal;

namespace {

// Monomial coefficients of P_n from the explicit sum
// P_n(x) = 2^-n sum_k (-1)^k C(n,k) C(2n-2k,n) x^(n-2k).
double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double legendre_explicit(int n, double x) {
    double sum = 0.0;
    for (int k = 0; 2 * k <= n; ++k)
        sum += ((k % 2) ? -1.0 : 1.0) * binom(n, k) * binom(2 * n - 2 * k, n) * std::pow(x, n - 2 * k);
    return sum / std::pow(2.0, n);
}

// Every tuple in [0, p]^d, filtered by the truncation rule.
std::set<std::vector<unsigned>> brute_force(std::size_t d, unsigned p, double q, bool hyperbolic) {
    std::set<std::vector<unsigned>> out;
    std::vector<unsigned> a(d, 0);
    while (true) {
        double norm = 0.0;
        unsigned total = 0;
        for (auto v : a) {
            total += v;
            if (v) norm += std::pow(static_cast<double>(v), q);
        }
        const bool keep = hyperbolic ? std::pow(norm, 1.0 / q) <= p + 1e-12 : total <= p;
        if (keep) out.insert(a);
        std::size_t i = 0;
        while (i < d && a[i] == p) a[i++] = 0;
        if (i == d) break;
        ++a[i];
    }
    return out;
}

}  // namespace

TEST_CASE("closed forms of low-order Legendre polynomials") {
    CHECK(legendre(2, 0.5) == doctest::Approx(-0.125).epsilon(1e-15));
    CHECK(legendre(0, 0.3) == 1.0);
    CHECK(legendre(1, -0.7) == doctest::Approx(-0.7));
    for (int n = 0; n <= 12; ++n) {
        CHECK(legendre(n, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(legendre(n, -1.0) == doctest::Approx(n % 2 ? -1.0 : 1.0).epsilon(1e-14));
    }
}

TEST_CASE("recurrence matches the explicit monomial expansion") {
    Rng rng(11);
    std::vector<double> values(7);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = 2.0 * uniform01(rng) - 1.0;
        legendre_values(x, values);
        for (int n = 0; n <= 6; ++n) CHECK(values[n] == doctest::Approx(legendre_explicit(n, x)).epsilon(1e-12));
    }
}

TEST_CASE("Legendre polynomials are orthogonal under Gauss-Legendre quadrature") {
    // 12-point rule: nodes are roots of P_12 found by Newton from Chebyshev guesses.
    const int m = 12;
    std::vector<double> nodes, weights;
    std::vector<double> v(m + 1), dv(m + 1);
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
        for (int it = 0; it < 50; ++it) {
            legendre_values_and_derivatives(x, v, dv);
            x -= v[m] / dv[m];
        }
        legendre_values_and_derivatives(x, v, dv);
        nodes.push_back(x);
        weights.push_back(2.0 / ((1.0 - x * x) * dv[m] * dv[m]));
    }
    for (int a = 0; a <= 8; ++a)
        for (int b = 0; b <= 8; ++b) {
            double integral = 0.0;
            for (int i = 0; i < m; ++i) integral += weights[i] * legendre(a, nodes[i]) * legendre(b, nodes[i]);
            const double expected = a == b ? 2.0 / (2 * a + 1) : 0.0;
            CHECK(integral == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
        }
}

TEST_CASE("derivatives match central differences") {
    Rng rng(2);
    std::vector<double> v(9), dv(9), vp(9), vm(9);
    for (int trial = 0; trial < 100; ++trial) {
        const double x = 1.8 * uniform01(rng) - 0.9;
        legendre_values_and_derivatives(x, v, dv);
        legendre_values(x + 1e-6, vp);
        legendre_values(x - 1e-6, vm);
        for (int n = 0; n <= 8; ++n) CHECK(dv[n] == doctest::Approx((vp[n] - vm[n]) / 2e-6).epsilon(1e-6).scale(1.0));
    }
    legendre_values_and_derivatives(1.0, v, dv);
    for (int n = 0; n <= 8; ++n) CHECK(dv[n] == doctest::Approx(n * (n + 1) / 2.0).epsilon(1e-13));
}

TEST_CASE("total-order set size: 1287 for d=5, p=8") {
    CHECK(build_index_set(5, 8, Truncation::total_order()).size() == 1287);
    CHECK(build_index_set(5, 1, Truncation::total_order()).size() == 6);
    CHECK(total_order_size(5, 8) == 1287);
}

TEST_CASE("total-order sets match brute-force enumeration") {
    for (std::size_t d = 1; d <= 4; ++d)
        for (unsigned p = 0; p <= 6; ++p) {
            const auto set = build_index_set(d, p, Truncation::total_order());
            const auto oracle = brute_force(d, p, 1.0, false);
            std::set<std::vector<unsigned>> got(set.indices().begin(), set.indices().end());
            CHECK(got == oracle);
            CHECK(got.size() == set.size());
        }
}

TEST_CASE("hyperbolic truncation is the q-norm filter of the total-order set") {
    const auto hyp = build_index_set(2, 3, Truncation::hyperbolic(0.5));
    const auto total = build_index_set(2, 3, Truncation::total_order());
    CHECK(total.size() == 10);
    std::set<std::vector<unsigned>> got(hyp.indices().begin(), hyp.indices().end());
    CHECK(got == brute_force(2, 3, 0.5, true));
    CHECK(hyp.size() < total.size());
    for (const auto& a : hyp.indices()) CHECK(std::find(total.indices().begin(), total.indices().end(), a) != total.indices().end());
    for (std::size_t d = 1; d <= 4; ++d)
        for (unsigned p = 1; p <= 6; ++p)
            for (double q : {0.4, 0.5, 0.75, 1.0}) {
                const auto s = build_index_set(d, p, Truncation::hyperbolic(q));
                std::set<std::vector<unsigned>> g(s.indices().begin(), s.indices().end());
                CHECK(g == brute_force(d, p, q, true));
            }
}

TEST_CASE("index ordering: zero first, then by total degree") {
    const auto set = build_index_set(3, 4, Truncation::total_order());
    CHECK(set[0] == std::vector<unsigned>{0, 0, 0});
    unsigned prev = 0;
    for (const auto& a : set.indices()) {
        unsigned t = 0;
        for (auto v : a) t += v;
        CHECK(t >= prev);
        prev = t;
    }
}

TEST_CASE("tensor basis values and gradients") {
    const auto set = build_index_set(3, 3, Truncation::total_order());
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd z(3);
        for (auto& v : z) v = 1.8 * uniform01(rng) - 0.9;
        const auto phi = eval_basis(set, z);
        const auto grad = eval_basis_gradient(set, z);
        CHECK(phi[0] == 1.0);
        CHECK(grad.row(0).cwiseAbs().maxCoeff() == 0.0);
        for (std::size_t i = 0; i < set.size(); ++i) {
            double expected = 1.0;
            for (std::size_t k = 0; k < 3; ++k) expected *= legendre(static_cast<int>(set[i][k]), z[k]);
            CHECK(phi[i] == doctest::Approx(expected).epsilon(1e-14));
            for (Eigen::Index k = 0; k < 3; ++k) {
                Eigen::VectorXd zp = z, zm = z;
                zp[k] += 1e-6;
                zm[k] -= 1e-6;
                const double fd = (eval_basis(set, zp)[i] - eval_basis(set, zm)[i]) / 2e-6;
                CHECK(grad(i, k) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
            }
        }
        for (std::size_t i = 0; i < set.size(); ++i) {
            unsigned t = 0;
            std::size_t which = 0;
            for (std::size_t k = 0; k < 3; ++k) {
                t += set[i][k];
                if (set[i][k]) which = k;
            }
            if (t == 1) {
                CHECK(grad(i, which) == 1.0);
                CHECK(grad.row(i).cwiseAbs().sum() == 1.0);
            }
        }
    }
    Eigen::MatrixXd Z(2, 3);
    Z << 0.1, 0.2, 0.3, -0.5, 0.0, 0.9;
    const auto B = basis_matrix(set, Z);
    CHECK(B.row(1).transpose().isApprox(eval_basis(set, Z.row(1).transpose())));
}

TEST_CASE("truncation names round trip") {
    for (auto t : {Truncation::total_order(), Truncation::hyperbolic(0.5), Truncation::hyperbolic(0.75)})
        CHECK(Truncation::from_string(t.to_string()) == t);
}
