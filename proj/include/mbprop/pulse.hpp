#pragma once

#include <vector>

#include "mbprop/series.hpp"

namespace mbprop {

/// Input photon model: an effective transform-limited Gaussian plus the
/// emission-time lifetime that smears detection times.
struct PulseSpec {
    double spectral_fwhm = 5.69e9;         ///< Hz, intensity spectrum
    double amplitude = 1.0;                ///< V/m, peak slow envelope
    double center_detuning = 0.0;          ///< rad/s from |1>-|3>
    double emission_lifetime = 134e-12;    ///< s
    double arrival_time = 0.0;             ///< s, envelope peak in retarded time

    /// Intensity FWHM of the transform-limited envelope, 2 ln2 / (pi dnu).
    double temporal_fwhm() const;

    bool operator==(const PulseSpec&) const = default;
};

double temporal_fwhm_from_spectral(double spectral_fwhm);

/// Throws ParameterError for non-positive widths, amplitude or lifetime.
void validate(const PulseSpec& spec);

/// Complex slow envelope A exp(-2 ln2 (t - t_a)^2 / dt^2) on `axis`.
/// Throws RangeError unless the axis covers +-3 temporal FWHM around the peak.
ComplexSeries gaussian_envelope(const PulseSpec& spec, const Axis& axis);

/// Intensity of |FT^-1[sqrt(S)]|^2 on the conjugate (centred) time axis,
/// normalised to unit peak. Throws ValidationError on negative spectral values.
TimeSeries spectrum_to_time(const Spectrum& spectrum);

/// Transform-limited inverse: |FT[sqrt(I)]|^2 on the centred frequency axis, unit peak.
Spectrum time_to_spectrum(const TimeSeries& intensity);

/// Area-normalised Voigt line shape (per Hz) via the Faddeeva function.
double voigt_intensity(double nu, double lorentz_fwhm, double gauss_sigma, double center);

struct VoigtComponent {
    double weight = 1.0;
    double lorentz_fwhm = 1e9;
    double gauss_sigma = 1e9;
    double center = 0.0;
};

double voigt_mixture(double nu, const std::vector<VoigtComponent>& components);

struct VoigtFit {
    std::vector<VoigtComponent> components;
    double rms_residual = 0.0;
};

/// Least-squares fit of a Voigt mixture to a measured spectrum, starting from `initial`.
VoigtFit fit_voigt_mixture(const Spectrum& spectrum, const std::vector<VoigtComponent>& initial);

struct GaussianFit {
    double center = 0.0;
    double fwhm = 0.0;
    double peak = 0.0;
    double rms_residual = 0.0;
};

/// Single effective Gaussian fitted to a spectrum.
GaussianFit fit_gaussian(const Spectrum& spectrum);

/// Exponentially modified Gaussian, unit area: a Gaussian of intensity FWHM
/// `width_fwhm` centred at t0 convolved with (1/tau) exp(-t/tau) theta(t).
double emg(double t, double t0, double width_fwhm, double lifetime);

/// Causal convolution with the unit-area exponential kernel of `lifetime`,
/// exact for piecewise-linear input. The signal is held at its first value
/// before the window, so constants map to themselves.
TimeSeries convolve_emission(const TimeSeries& series, double lifetime);

/// Discrete impulse response of `convolve_emission` on a grid of `step`.
std::vector<double> emission_kernel_weights(double step, double lifetime, std::size_t count);

/// Regularised Fourier inverse of `convolve_emission`. The transfer function is
/// floored as (1 - eps) K + eps max|K|: eps -> 0 is plain division, eps = 1 a no-op.
/// Throws ParameterError unless 0 < eps <= 1.
TimeSeries deconvolve_emission(const TimeSeries& series, double lifetime, double regularization = 1e-3);

struct EmgFit {
    double t0 = 0.0;
    double width_fwhm = 0.0;
    double lifetime = 0.0;
    double scale = 0.0;  ///< area of the fitted curve
    double rms_residual = 0.0;
    int iterations = 0;
};

/// Nonlinear least squares of scale * emg(t; t0, width, lifetime), started from
/// moment estimates. Throws FitError on empty/zero input or when 500
/// iterations do not converge.
EmgFit fit_emg(const TimeSeries& series);

}  // namespace mbprop
