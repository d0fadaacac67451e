#pragma once

#include <span>

namespace autocal {

/// P_0(x) .. P_{out.size()-1}(x) by the three-term recurrence
/// (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}, normalized so that P_n(1) = 1.
void legendre_values(double x, std::span<double> out);

/// Values and first derivatives; derivatives use
/// P'_{k+1} = P'_{k-1} + (2k+1) P_k, which is exact on the closed interval.
void legendre_values_and_derivatives(double x, std::span<double> values, std::span<double> derivatives);

double legendre(int degree, double x);

}  // namespace autocal
