#include "mbprop/special.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace mbprop {

namespace {

constexpr int kTerms = 32;

struct WeidemanTable {
    double L;
    std::array<double, kTerms> a;  // highest power first, for Horner
};

// Coefficients from the trapezoidal (DFT) expansion of
// exp(-t^2) (L^2 + t^2) on t = L tan(theta / 2).
WeidemanTable make_table() {
    WeidemanTable tab{};
    constexpr int M = 2 * kTerms;
    constexpr int M2 = 2 * M;
    tab.L = std::sqrt(kTerms / std::numbers::sqrt2);

    // f sampled at k = -M+1..M-1 with f(-M) = 0, then a = Re(fft(fftshift(f))) / M2.
    std::array<double, M2> f{};
    for (int k = -M + 1; k <= M - 1; ++k) {
        const double theta = k * std::numbers::pi / M;
        const double t = tab.L * std::tan(theta / 2.0);
        f[static_cast<std::size_t>(k + M)] = std::exp(-t * t) * (tab.L * tab.L + t * t);
    }
    // fftshift: index m of shifted array is original (m + M) mod M2.
    std::array<double, kTerms + 1> coeff{};
    for (int n = 0; n <= kTerms; ++n) {
        double re = 0.0;
        for (int m = 0; m < M2; ++m) {
            const double val = f[static_cast<std::size_t>((m + M) % M2)];
            re += val * std::cos(2.0 * std::numbers::pi * n * m / M2);
        }
        coeff[static_cast<std::size_t>(n)] = re / M2;
    }
    // a = flipud(a(2:N+1))
    for (int n = 0; n < kTerms; ++n) tab.a[static_cast<std::size_t>(n)] = coeff[static_cast<std::size_t>(kTerms - n)];
    return tab;
}

const WeidemanTable& table() {
    static const WeidemanTable tab = make_table();
    return tab;
}

std::complex<double> faddeeva_upper(std::complex<double> z) {
    const auto& tab = table();
    const std::complex<double> i{0.0, 1.0};
    const std::complex<double> lmiz = tab.L - i * z;
    const std::complex<double> Z = (tab.L + i * z) / lmiz;
    std::complex<double> p = 0.0;
    for (double c : tab.a) p = p * Z + c;
    return 2.0 * p / (lmiz * lmiz) + (1.0 / std::sqrt(std::numbers::pi)) / lmiz;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
    if (z.imag() >= 0.0) return faddeeva_upper(z);
    return 2.0 * std::exp(-z * z) - faddeeva_upper(-z);
}

double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x < 0.5) return std::exp(x * x) * std::erfc(x);
    if (x > 5e7) return 1.0 / (x * std::sqrt(std::numbers::pi));
    return faddeeva_upper({0.0, x}).real();
}

}  // namespace mbprop
