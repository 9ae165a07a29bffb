#include "fft.hpp"

#include <mutex>

#include <fftw3.h>

namespace mbprop::detail {

namespace {

// FFTW planning is not thread-safe; execution of a private plan is.
std::mutex planner_mutex;

std::vector<std::complex<double>> transform(std::vector<std::complex<double>> data, int sign) {
    if (data.empty()) return data;
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex);
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), buf, buf, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    return data;
}

}  // namespace

std::vector<std::complex<double>> fft_forward(std::vector<std::complex<double>> data) {
    return transform(std::move(data), FFTW_FORWARD);
}

std::vector<std::complex<double>> fft_backward(std::vector<std::complex<double>> data) {
    return transform(std::move(data), FFTW_BACKWARD);
}

}  // namespace mbprop::detail
