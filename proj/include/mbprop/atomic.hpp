#pragma once

#include <array>
#include <complex>
#include <cstddef>

#include <Eigen/Core>

namespace mbprop {

using complex = std::complex<double>;

/// Hyperfine levels of the 87Rb D1 line, each F manifold collapsed to one level.
enum class Level : int {
    G1 = 0,  ///< |1>, F = 1
    G2 = 1,  ///< |2>, F = 2
    E3 = 2,  ///< |3>, F' = 1
    E4 = 3,  ///< |4>, F' = 2
};

inline constexpr int kNumLevels = 4;

constexpr int index_of(Level level) noexcept { return static_cast<int>(level); }
constexpr bool is_ground(Level level) noexcept { return level == Level::G1 || level == Level::G2; }

/// Converts a 1-based level label (1..4) into a Level. Throws RangeError otherwise.
Level level_from_label(int label);

/// 4x4 complex density matrix over |1>..|4>.
using DensityMatrix = Eigen::Matrix4cd;

/// Hamiltonian or Liouvillian output of the same shape.
using OperatorMatrix = Eigen::Matrix4cd;

struct AtomicParams {
    double omega21 = 0.0;  ///< ground hyperfine splitting, rad/s
    double omega43 = 0.0;  ///< excited hyperfine splitting, rad/s
    double delta_p = 0.0;  ///< probe detuning from |1>-|3>, rad/s
    double d31 = 0.0, d32 = 0.0, d41 = 0.0, d42 = 0.0;  ///< C m
    double gamma31 = 0.0, gamma32 = 0.0, gamma41 = 0.0, gamma42 = 0.0;  ///< s^-1
    double gamma_deph = 0.0;  ///< extra ground-excited coherence decay, s^-1
    double omega_p = 0.0;     ///< photon carrier, rad/s

    /// Absolute |1>-|3> transition frequency implied by omega_p and delta_p.
    double omega31() const noexcept { return omega_p - delta_p; }
    double omega41() const noexcept { return omega31() + omega43; }

    bool operator==(const AtomicParams&) const = default;
};

/// Throws ParameterError when a dipole moment or a rate is negative or non-finite.
void validate(const AtomicParams& params);

/// 87Rb D1 parameters with the branching ratios (1/6, 5/6, 1/2, 1/2) of the
/// natural linewidth. `gamma_deph` is left at zero; the medium supplies it.
AtomicParams default_rb87_params(double detuning);

/// Rotating-frame Hamiltonian in joules for local slow envelope `field` (V/m).
OperatorMatrix hamiltonian(const AtomicParams& params, complex field);

/// d rho / dt of the Lindblad master equation with extra coherence dephasing.
/// Throws ValidationError if `rho` deviates from Hermitian by more than 1e-9.
OperatorMatrix lindblad_rhs(const AtomicParams& params, const DensityMatrix& rho, complex field);

/// Ground-state populations before the pulse arrives.
enum class GroundWeighting {
    Degeneracy,  ///< (2F+1)-weighted: 3/8 and 5/8
    Equal,       ///< 1/2 and 1/2
    LowerOnly,   ///< everything in |1>; used for two-level checks
};

DensityMatrix thermal_state(GroundWeighting weighting = GroundWeighting::Degeneracy);

double trace_error(const DensityMatrix& rho);
double hermiticity_error(const DensityMatrix& rho);
double min_eigenvalue(const DensityMatrix& rho);

/// Precomputed frequency-domain form of `lindblad_rhs` for the integrators.
/// Everything is in rad/s; the constructor validates the parameters once so
/// the hot loop performs no checks.
class LindbladKernel {
public:
    explicit LindbladKernel(const AtomicParams& params);

    /// Unchecked right-hand side. Result is Hermitian by construction.
    OperatorMatrix rhs(const DensityMatrix& rho, complex field) const;

    /// One classic RK4 step of length `dt`. Field values at the step's start
    /// and end; the midpoint uses their average.
    void rk4_step(DensityMatrix& rho, complex field_start, complex field_end, double dt) const;

    const AtomicParams& params() const noexcept { return params_; }

private:
    AtomicParams params_;
    std::array<double, kNumLevels> level_freq_{};  // diagonal of H / hbar
    double c31_, c32_, c41_, c42_;                 // d / hbar, m/(V s)
    double decay3_, decay4_;                       // total out of |3>, |4>
};

}  // namespace mbprop
