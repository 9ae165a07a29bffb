#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace mbprop {

/// Uniform sampling axis: value(i) = start + i * step.
struct Axis {
    double start = 0.0;
    double step = 1.0;
    std::size_t size = 0;
    std::string unit = "s";

    double value(std::size_t i) const noexcept { return start + static_cast<double>(i) * step; }
    double back() const noexcept { return size == 0 ? start : value(size - 1); }
    std::vector<double> values() const;

    bool operator==(const Axis&) const = default;
};

/// Uniformly sampled signal. `TimeSeries` and `Spectrum` are the two real instances
/// used throughout; complex series carry slow field envelopes.
template <typename T>
struct Series {
    Axis axis;
    std::vector<T> values;

    std::size_t size() const noexcept { return values.size(); }
};

using TimeSeries = Series<double>;
using Spectrum = Series<double>;
using ComplexSeries = Series<std::complex<double>>;

/// Throws ValidationError unless step > 0, sizes agree and every value is finite.
void validate(const TimeSeries& series);
void validate(const ComplexSeries& series);

/// Linear interpolation; zero outside the axis.
double sample_linear(const TimeSeries& series, double x);

/// Full width at half maximum of the dominant peak, located with cubic
/// interpolation of the half-maximum crossings. Throws ValidationError if the
/// series never drops below half maximum on both sides of the peak.
double fwhm(const TimeSeries& series);

/// Position of the maximum, refined by a parabola through the three top samples.
double peak_position(const TimeSeries& series);

/// Trapezoidal integral.
double integrate(const TimeSeries& series);

double relative_l2_error(const std::vector<double>& actual, const std::vector<double>& expected);

/// Two-column CSV with a one-line `name [unit],name [unit]` header.
void write_csv(const std::filesystem::path& path, const TimeSeries& series, const std::string& axis_name,
               const std::string& value_name, const std::string& value_unit);

/// Reads the two-column CSV format. Requires a header, at least two rows, a
/// strictly increasing axis and uniform spacing within 1% jitter.
TimeSeries read_csv(const std::filesystem::path& path);

}  // namespace mbprop
