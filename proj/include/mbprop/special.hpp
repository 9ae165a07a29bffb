#pragma once

#include <complex>

namespace mbprop {

/// Faddeeva function w(z) = exp(-z^2) erfc(-i z) for Im z >= 0, using
/// Weideman's rational expansion with 32 terms (relative error ~1e-13).
/// The lower half plane follows from w(z) = 2 exp(-z^2) - w(-z).
std::complex<double> faddeeva(std::complex<double> z);

/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

}  // namespace mbprop
