#pragma once

#include <complex>
#include <vector>

namespace mbprop::detail {

// Unnormalised DFTs backed by FFTW. Forward uses exp(-2 pi i k n / N).
std::vector<std::complex<double>> fft_forward(std::vector<std::complex<double>> data);
std::vector<std::complex<double>> fft_backward(std::vector<std::complex<double>> data);

}  // namespace mbprop::detail
