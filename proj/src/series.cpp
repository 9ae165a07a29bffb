#include "mbprop/series.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mbprop/error.hpp"

namespace mbprop {

std::vector<double> Axis::values() const {
    std::vector<double> out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = value(i);
    return out;
}

namespace {

template <typename T>
void validate_impl(const Series<T>& s) {
    if (!(s.axis.step > 0.0) || !std::isfinite(s.axis.step)) throw ValidationError("series step must be > 0");
    if (s.axis.size != s.values.size()) throw ValidationError("series axis size does not match values");
    for (const auto& v : s.values)
        if (!std::isfinite(std::abs(v))) throw ValidationError("series contains non-finite values");
}

// Cubic Lagrange interpolation through samples i-1..i+2 at fractional offset u in [0,1].
double cubic_at(const std::vector<double>& y, std::size_t i, double u) {
    const std::size_t n = y.size();
    const auto at = [&](long k) { return y[static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(n) - 1))]; };
    const long k = static_cast<long>(i);
    const double ym1 = at(k - 1), y0 = at(k), y1 = at(k + 1), y2 = at(k + 2);
    return -u * (u - 1.0) * (u - 2.0) / 6.0 * ym1 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * y0 -
           (u + 1.0) * u * (u - 2.0) / 2.0 * y1 + (u + 1.0) * u * (u - 1.0) / 6.0 * y2;
}

// Crossing of `level` between samples i and i+1, bisected on the cubic interpolant.
double crossing(const std::vector<double>& y, std::size_t i, double level) {
    double lo = 0.0, hi = 1.0;
    const double flo = cubic_at(y, i, lo) - level;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = cubic_at(y, i, mid) - level;
        if ((fm < 0.0) == (flo < 0.0))
            lo = mid;
        else
            hi = mid;
    }
    return static_cast<double>(i) + 0.5 * (lo + hi);
}

}  // namespace

void validate(const TimeSeries& series) { validate_impl(series); }
void validate(const ComplexSeries& series) { validate_impl(series); }

double sample_linear(const TimeSeries& s, double x) {
    if (s.values.empty()) return 0.0;
    const double pos = (x - s.axis.start) / s.axis.step;
    if (pos < 0.0 || pos > static_cast<double>(s.values.size() - 1)) return 0.0;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= s.values.size()) return s.values.back();
    const double u = pos - static_cast<double>(i);
    return (1.0 - u) * s.values[i] + u * s.values[i + 1];
}

double fwhm(const TimeSeries& s) {
    const auto& y = s.values;
    if (y.size() < 3) throw ValidationError("fwhm needs at least three samples");
    const auto peak_it = std::max_element(y.begin(), y.end());
    const auto peak = static_cast<std::size_t>(peak_it - y.begin());
    const double half = 0.5 * *peak_it;
    if (!(half > 0.0)) throw ValidationError("fwhm of a non-positive series");

    std::size_t left = peak;
    while (left > 0 && y[left - 1] > half) --left;
    std::size_t right = peak;
    while (right + 1 < y.size() && y[right + 1] > half) ++right;
    if (left == 0 || right + 1 == y.size()) throw ValidationError("peak is not bracketed by half-maximum crossings");

    const double x_left = crossing(y, left - 1, half);
    const double x_right = crossing(y, right, half);
    return (x_right - x_left) * s.axis.step;
}

double peak_position(const TimeSeries& s) {
    const auto& y = s.values;
    if (y.empty()) throw ValidationError("peak of an empty series");
    const auto i = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    double offset = 0.0;
    if (i > 0 && i + 1 < y.size()) {
        const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
        if (denom != 0.0) offset = 0.5 * (y[i - 1] - y[i + 1]) / denom;
    }
    return s.axis.value(i) + offset * s.axis.step;
}

double integrate(const TimeSeries& s) {
    if (s.values.size() < 2) return 0.0;
    double sum = 0.5 * (s.values.front() + s.values.back());
    for (std::size_t i = 1; i + 1 < s.values.size(); ++i) sum += s.values[i];
    return sum * s.axis.step;
}

double relative_l2_error(const std::vector<double>& actual, const std::vector<double>& expected) {
    if (actual.size() != expected.size()) throw ValidationError("relative_l2_error: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        num += (actual[i] - expected[i]) * (actual[i] - expected[i]);
        den += expected[i] * expected[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

void write_csv(const std::filesystem::path& path, const TimeSeries& s, const std::string& axis_name,
               const std::string& value_name, const std::string& value_unit) {
    auto out = fmt::output_file(path.string());
    out.print("{} [{}],{} [{}]\n", axis_name, s.axis.unit, value_name, value_unit);
    for (std::size_t i = 0; i < s.values.size(); ++i) out.print("{:.17g},{:.17g}\n", s.axis.value(i), s.values[i]);
}

TimeSeries read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw FormatError(path.string() + ": empty file");
    {
        std::string probe = header;
        std::replace(probe.begin(), probe.end(), ',', ' ');
        std::istringstream row(probe);
        double x = 0.0;
        if (row >> x) throw FormatError(path.string() + ": missing header line");
    }
    std::string unit = "s";
    if (const auto open = header.find('['), close = header.find(']');
        open != std::string::npos && close != std::string::npos && close > open)
        unit = header.substr(open + 1, close - open - 1);

    std::vector<double> xs, ys;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double x = 0.0, y = 0.0;
        if (!(row >> x >> y)) throw FormatError(fmt::format("{}:{}: expected two numeric columns", path.string(), line_no));
        std::string extra;
        if (row >> extra) throw FormatError(fmt::format("{}:{}: more than two columns", path.string(), line_no));
        xs.push_back(x);
        ys.push_back(y);
    }
    if (xs.size() < 2) throw FormatError(path.string() + ": need at least two data rows");

    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw FormatError(fmt::format("{}: axis not strictly increasing at row {}", path.string(), i + 1));
    const double mean_step = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (std::abs((xs[i] - xs[i - 1]) - mean_step) > 0.01 * mean_step)
            throw FormatError(fmt::format("{}: sampling not uniform within 1% at row {}", path.string(), i + 1));

    TimeSeries s;
    s.axis = Axis{xs.front(), mean_step, xs.size(), unit};
    s.values = std::move(ys);
    validate(s);
    return s;
}

}  // namespace mbprop
