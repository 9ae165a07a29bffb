#include "mbprop/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"
#include "lsq.hpp"
#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"
#include "mbprop/special.hpp"

namespace mbprop {

namespace {

using cd = std::complex<double>;
using constants::ln2;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * ln2)); }

void check_spectrum(const Spectrum& s) {
    validate(s);
    if (s.values.empty()) throw ValidationError("empty spectrum");
    for (double v : s.values)
        if (v < 0.0) throw ValidationError("spectrum has negative values");
}

}  // namespace

double temporal_fwhm_from_spectral(double spectral_fwhm) {
    return 2.0 * ln2 / (std::numbers::pi * spectral_fwhm);
}

double PulseSpec::temporal_fwhm() const { return temporal_fwhm_from_spectral(spectral_fwhm); }

void validate(const PulseSpec& spec) {
    if (!(spec.spectral_fwhm > 0.0)) throw ParameterError("spectral_fwhm must be > 0");
    if (!(spec.amplitude > 0.0)) throw ParameterError("pulse amplitude must be > 0");
    if (!(spec.emission_lifetime > 0.0)) throw ParameterError("emission lifetime must be > 0");
    if (!std::isfinite(spec.center_detuning) || !std::isfinite(spec.arrival_time))
        throw ParameterError("pulse detuning and arrival time must be finite");
}

ComplexSeries gaussian_envelope(const PulseSpec& spec, const Axis& axis) {
    validate(spec);
    const double width = spec.temporal_fwhm();
    const double lo = spec.arrival_time - 3.0 * width;
    const double hi = spec.arrival_time + 3.0 * width;
    if (axis.size < 2 || axis.start > lo || axis.back() < hi)
        throw RangeError("time axis must cover +-3 temporal FWHM around the pulse peak");

    ComplexSeries out;
    out.axis = axis;
    out.values.resize(axis.size);
    const double k = 2.0 * ln2 / (width * width);
    for (std::size_t i = 0; i < axis.size; ++i) {
        const double t = axis.value(i) - spec.arrival_time;
        out.values[i] = spec.amplitude * std::exp(-k * t * t);
    }
    return out;
}

TimeSeries spectrum_to_time(const Spectrum& spectrum) {
    check_spectrum(spectrum);
    const std::size_t n = spectrum.values.size();
    std::vector<cd> amp(n);
    for (std::size_t i = 0; i < n; ++i) amp[i] = std::sqrt(spectrum.values[i]);
    const auto field = detail::fft_backward(std::move(amp));

    // Centred conjugate axis t_m = (m - h) / (N dnu); |E(t_m)| = |ifft[(m - h) mod N]|.
    const std::size_t h = n / 2;
    TimeSeries out;
    out.axis = Axis{-static_cast<double>(h) / (static_cast<double>(n) * spectrum.axis.step),
                    1.0 / (static_cast<double>(n) * spectrum.axis.step), n, "s"};
    out.values.resize(n);
    double peak = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        out.values[m] = std::norm(field[(m + n - h) % n]);
        peak = std::max(peak, out.values[m]);
    }
    if (peak > 0.0)
        for (double& v : out.values) v /= peak;
    return out;
}

Spectrum time_to_spectrum(const TimeSeries& intensity) {
    validate(intensity);
    const std::size_t n = intensity.values.size();
    if (n == 0) throw ValidationError("empty time series");
    std::vector<cd> amp(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (intensity.values[i] < 0.0) throw ValidationError("intensity has negative values");
        amp[i] = std::sqrt(intensity.values[i]);
    }
    const auto spec = detail::fft_forward(std::move(amp));
    const std::size_t h = n / 2;
    Spectrum out;
    out.axis = Axis{-static_cast<double>(h) / (static_cast<double>(n) * intensity.axis.step),
                    1.0 / (static_cast<double>(n) * intensity.axis.step), n, "Hz"};
    out.values.resize(n);
    double peak = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = std::norm(spec[(k + n - h) % n]);
        peak = std::max(peak, out.values[k]);
    }
    if (peak > 0.0)
        for (double& v : out.values) v /= peak;
    return out;
}

double voigt_intensity(double nu, double lorentz_fwhm, double gauss_sigma, double center) {
    if (!(lorentz_fwhm > 0.0) || !(gauss_sigma > 0.0)) throw ParameterError("Voigt widths must be > 0");
    const double hwhm = 0.5 * lorentz_fwhm;
    const double scale = gauss_sigma * std::numbers::sqrt2;
    const cd z{(nu - center) / scale, hwhm / scale};
    return faddeeva(z).real() / (gauss_sigma * std::sqrt(2.0 * std::numbers::pi));
}

double voigt_mixture(double nu, const std::vector<VoigtComponent>& components) {
    double sum = 0.0;
    for (const auto& c : components) sum += c.weight * voigt_intensity(nu, c.lorentz_fwhm, c.gauss_sigma, c.center);
    return sum;
}

VoigtFit fit_voigt_mixture(const Spectrum& spectrum, const std::vector<VoigtComponent>& initial) {
    check_spectrum(spectrum);
    if (initial.empty()) throw FitError("Voigt fit needs at least one initial component");
    const double unit = 1e9;
    const double ymax = *std::max_element(spectrum.values.begin(), spectrum.values.end());
    if (!(ymax > 0.0)) throw FitError("Voigt fit of an all-zero spectrum");

    // Per component: log weight, log lorentz, log sigma, centre in GHz.
    Eigen::VectorXd x(4 * static_cast<Eigen::Index>(initial.size()));
    for (std::size_t c = 0; c < initial.size(); ++c) {
        const auto& v = initial[c];
        if (!(v.weight > 0.0)) throw FitError("initial Voigt weights must be > 0");
        x(4 * c + 0) = std::log(v.weight / ymax * unit);
        x(4 * c + 1) = std::log(v.lorentz_fwhm / unit);
        x(4 * c + 2) = std::log(v.gauss_sigma / unit);
        x(4 * c + 3) = v.center / unit;
    }
    const auto unpack = [&](const Eigen::VectorXd& p) {
        std::vector<VoigtComponent> comps(initial.size());
        for (std::size_t c = 0; c < comps.size(); ++c) {
            comps[c].weight = std::exp(p(4 * c + 0)) * ymax / unit;
            comps[c].lorentz_fwhm = std::exp(p(4 * c + 1)) * unit;
            comps[c].gauss_sigma = std::exp(p(4 * c + 2)) * unit;
            comps[c].center = p(4 * c + 3) * unit;
        }
        return comps;
    };
    const auto n = static_cast<int>(spectrum.values.size());
    const auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const auto comps = unpack(p);
        for (int i = 0; i < n; ++i)
            r(i) = (voigt_mixture(spectrum.axis.value(static_cast<std::size_t>(i)), comps) -
                    spectrum.values[static_cast<std::size_t>(i)]) / ymax;
    };
    const auto res = detail::least_squares(residual, x, n, 500);
    if (!res.converged) throw FitError("Voigt fit did not converge", {res.params.data(), res.params.data() + res.params.size()});

    VoigtFit fit;
    fit.components = unpack(res.params);
    Eigen::VectorXd r(n);
    residual(res.params, r);
    fit.rms_residual = ymax * std::sqrt(r.squaredNorm() / n);
    return fit;
}

GaussianFit fit_gaussian(const Spectrum& spectrum) {
    check_spectrum(spectrum);
    const double ymax = *std::max_element(spectrum.values.begin(), spectrum.values.end());
    if (!(ymax > 0.0)) throw FitError("Gaussian fit of an all-zero spectrum");
    const double c0 = peak_position(spectrum);
    double w0;
    try {
        w0 = fwhm(spectrum);
    } catch (const ValidationError&) {
        w0 = 0.25 * static_cast<double>(spectrum.size()) * spectrum.axis.step;
    }
    const double unit = w0;

    const auto n = static_cast<int>(spectrum.values.size());
    const auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const double c = p(0) * unit, w = std::exp(p(1)) * unit, a = std::exp(p(2));
        for (int i = 0; i < n; ++i) {
            const double d = spectrum.axis.value(static_cast<std::size_t>(i)) - c;
            r(i) = a * std::exp(-4.0 * ln2 * d * d / (w * w)) - spectrum.values[static_cast<std::size_t>(i)] / ymax;
        }
    };
    Eigen::VectorXd x(3);
    x << c0 / unit, 0.0, 0.0;
    const auto res = detail::least_squares(residual, x, n, 500);
    if (!res.converged) throw FitError("Gaussian fit did not converge", {res.params.data(), res.params.data() + 3});
    Eigen::VectorXd r(n);
    residual(res.params, r);
    return GaussianFit{res.params(0) * unit, std::exp(res.params(1)) * unit, std::exp(res.params(2)) * ymax,
                       ymax * std::sqrt(r.squaredNorm() / n)};
}

double emg(double t, double t0, double width_fwhm, double lifetime) {
    const double sigma = fwhm_to_sigma(width_fwhm);
    const double x = t - t0;
    if (lifetime <= 0.0) return std::exp(-x * x / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    const double b = (sigma / lifetime - x / sigma) / std::numbers::sqrt2;
    if (b > 0.0) {
        // exp(A) erfc(B) = exp(A - B^2) erfcx(B) with A - B^2 = -x^2 / (2 sigma^2)
        return std::exp(-x * x / (2.0 * sigma * sigma)) * erfcx(b) / (2.0 * lifetime);
    }
    const double a = -x / lifetime + sigma * sigma / (2.0 * lifetime * lifetime);
    return std::exp(a) * std::erfc(b) / (2.0 * lifetime);
}

std::vector<double> emission_kernel_weights(double step, double lifetime, std::size_t count) {
    std::vector<double> w(count, 0.0);
    if (count == 0) return w;
    if (lifetime <= 0.0) {
        w[0] = 1.0;
        return w;
    }
    const double h = step / lifetime;
    const double a = std::exp(-h);
    const double g = -std::expm1(-h) / h;  // (1 - a) / h
    w[0] = 1.0 - g;
    if (count > 1) w[1] = a * w[0] - a + g;
    for (std::size_t n = 2; n < count; ++n) w[n] = a * w[n - 1];
    return w;
}

TimeSeries convolve_emission(const TimeSeries& series, double lifetime) {
    validate(series);
    if (lifetime < 0.0) throw ParameterError("emission lifetime must be >= 0");
    TimeSeries out = series;
    if (lifetime == 0.0 || series.values.empty()) return out;

    // Exact propagation of y' = (x - y) / tau for x linear between samples.
    const double h = series.axis.step / lifetime;
    const double a = std::exp(-h);
    const double g = -std::expm1(-h) / h;
    const auto& x = series.values;
    auto& y = out.values;
    y[0] = x[0];
    for (std::size_t n = 0; n + 1 < x.size(); ++n)
        y[n + 1] = a * y[n] + x[n + 1] - a * x[n] - (x[n + 1] - x[n]) * g;
    return out;
}

TimeSeries deconvolve_emission(const TimeSeries& series, double lifetime, double regularization) {
    validate(series);
    if (!(regularization > 0.0) || regularization > 1.0) throw ParameterError("regularization must be in (0, 1]");
    if (!(lifetime > 0.0)) throw ParameterError("emission lifetime must be > 0");
    const std::size_t n = series.values.size();
    TimeSeries out = series;
    if (n == 0) return out;

    const std::size_t m = next_pow2(2 * n);
    const double base = series.values.front();
    std::vector<cd> data(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) data[i] = series.values[i] - base;

    const auto w = emission_kernel_weights(series.axis.step, lifetime, m);
    std::vector<cd> kernel(w.begin(), w.end());
    const auto kf = detail::fft_forward(std::move(kernel));
    auto df = detail::fft_forward(std::move(data));

    double kmax = 0.0;
    for (const auto& k : kf) kmax = std::max(kmax, std::abs(k));
    const double eps = regularization;
    for (std::size_t i = 0; i < m; ++i) df[i] /= (1.0 - eps) * kf[i] + eps * kmax;
    const auto xt = detail::fft_backward(std::move(df));
    for (std::size_t i = 0; i < n; ++i) out.values[i] = base + xt[i].real() / static_cast<double>(m);
    return out;
}

EmgFit fit_emg(const TimeSeries& series) {
    validate(series);
    const auto& y = series.values;
    if (y.size() < 5) throw FitError("EMG fit needs at least five samples");
    const double ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > 0.0)) throw FitError("EMG fit of an all-zero series");

    // Moment estimates over the region above 1% of peak: mean = t0 + tau,
    // variance = sigma^2 + tau^2, third central moment = 2 tau^3.
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.01 * ymax) continue;
        s0 += y[i];
        s1 += y[i] * series.axis.value(i);
    }
    const double mean = s1 / s0;
    double m2 = 0.0, m3 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.01 * ymax) continue;
        const double d = series.axis.value(i) - mean;
        m2 += y[i] * d * d;
        m3 += y[i] * d * d * d;
    }
    m2 /= s0;
    m3 /= s0;
    const double sd = std::sqrt(std::max(m2, series.axis.step * series.axis.step));
    const double tau0 = std::clamp(std::cbrt(std::max(m3, 0.0) / 2.0), 0.05 * sd, 0.9 * sd);
    const double sigma0 = std::sqrt(std::max(m2 - tau0 * tau0, 0.1 * m2));
    const double unit = sd;

    const auto n = static_cast<int>(y.size());
    std::vector<double> shape(y.size());
    // Residual with the optimal linear scale projected out.
    const auto model = [&](const Eigen::VectorXd& p, double& scale) {
        // Squared lifetime parameter so a pure Gaussian (tau = 0) is reachable.
        const double t0 = p(0) * unit, width = std::exp(p(1)) * unit, tau = p(2) * p(2) * unit;
        double gy = 0.0, gg = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            shape[i] = emg(series.axis.value(i), t0, width, tau);
            gy += shape[i] * y[i];
            gg += shape[i] * shape[i];
        }
        scale = gg > 0.0 ? gy / gg : 0.0;
    };
    const auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        double scale = 0.0;
        model(p, scale);
        for (int i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r(i) = (scale * shape[k] - y[k]) / ymax;
        }
    };

    Eigen::VectorXd x(3);
    x << (mean - tau0) / unit, std::log(2.0 * std::sqrt(2.0 * ln2) * sigma0 / unit), std::sqrt(tau0 / unit);
    const auto res = detail::least_squares(residual, x, n, 500);
    // A pure Gaussian drives tau to the boundary at zero, where LM only crawls.
    const double tau_end = res.params(2) * res.params(2) * unit;
    if (!res.converged && !(res.params.allFinite() && tau_end < 0.01 * std::exp(res.params(1)) * unit))
        throw FitError("EMG fit did not converge in 500 iterations",
                       {res.params(0) * unit, std::exp(res.params(1)) * unit, res.params(2) * res.params(2) * unit});

    EmgFit fit;
    fit.t0 = res.params(0) * unit;
    fit.width_fwhm = std::exp(res.params(1)) * unit;
    fit.lifetime = res.params(2) * res.params(2) * unit;
    model(res.params, fit.scale);
    Eigen::VectorXd r(n);
    residual(res.params, r);
    fit.rms_residual = ymax * std::sqrt(r.squaredNorm() / n);
    fit.iterations = res.iterations;
    return fit;
}

}  // namespace mbprop
