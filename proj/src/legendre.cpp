#include "autocal/legendre.hpp"

#include <cassert>
#include <vector>

namespace autocal {

void legendre_values(double x, std::span<double> out) {
    if (out.empty()) return;
    out[0] = 1.0;
    if (out.size() == 1) return;
    out[1] = x;
    for (std::size_t k = 1; k + 1 < out.size(); ++k) {
        const auto kd = static_cast<double>(k);
        out[k + 1] = ((2.0 * kd + 1.0) * x * out[k] - kd * out[k - 1]) / (kd + 1.0);
    }
}

void legendre_values_and_derivatives(double x, std::span<double> values, std::span<double> derivatives) {
    assert(values.size() == derivatives.size());
    legendre_values(x, values);
    if (derivatives.empty()) return;
    derivatives[0] = 0.0;
    if (derivatives.size() == 1) return;
    derivatives[1] = 1.0;
    for (std::size_t k = 1; k + 1 < derivatives.size(); ++k)
        derivatives[k + 1] = derivatives[k - 1] + (2.0 * static_cast<double>(k) + 1.0) * values[k];
}

double legendre(int degree, double x) {
    std::vector<double> v(static_cast<std::size_t>(degree) + 1);
    legendre_values(x, v);
    return v.back();
}

}  // namespace autocal
