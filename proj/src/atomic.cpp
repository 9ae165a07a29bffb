#include "mbprop/atomic.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "mbprop/constants.hpp"
#include "mbprop/error.hpp"

namespace mbprop {

namespace {

constexpr complex I{0.0, 1.0};

// Coupling block of H / hbar, -i (c31 s31 + c41 s41 + c32 s32 + c42 s42) E + h.c.
OperatorMatrix coupled_generator(const std::array<double, kNumLevels>& level_freq, double c31, double c32,
                                 double c41, double c42, complex field) {
    OperatorMatrix h = OperatorMatrix::Zero();
    for (int i = 0; i < kNumLevels; ++i) h(i, i) = level_freq[i];
    const complex e = field;
    h(2, 0) = -I * c31 * e;
    h(2, 1) = -I * c32 * e;
    h(3, 0) = -I * c41 * e;
    h(3, 1) = -I * c42 * e;
    h(0, 2) = std::conj(h(2, 0));
    h(1, 2) = std::conj(h(2, 1));
    h(0, 3) = std::conj(h(3, 0));
    h(1, 3) = std::conj(h(3, 1));
    return h;
}

bool finite_nonnegative(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

Level level_from_label(int label) {
    if (label < 1 || label > kNumLevels)
        throw RangeError("level label must be in 1..4, got " + std::to_string(label));
    return static_cast<Level>(label - 1);
}

void validate(const AtomicParams& p) {
    for (double d : {p.d31, p.d32, p.d41, p.d42})
        if (!finite_nonnegative(d)) throw ParameterError("dipole moments must be finite and >= 0");
    for (double g : {p.gamma31, p.gamma32, p.gamma41, p.gamma42, p.gamma_deph})
        if (!finite_nonnegative(g)) throw ParameterError("decay and dephasing rates must be finite and >= 0");
    for (double w : {p.omega21, p.omega43, p.delta_p, p.omega_p})
        if (!std::isfinite(w)) throw ParameterError("frequencies must be finite");
}

AtomicParams default_rb87_params(double detuning) {
    namespace c = constants;
    const double gamma = c::rb87_natural_linewidth;
    const double d_fine = c::rb87_d1_dipole_fine;
    const double root3x2 = 2.0 * std::sqrt(3.0);

    AtomicParams p;
    p.omega21 = c::rb87_ground_splitting;
    p.omega43 = c::rb87_excited_splitting;
    p.delta_p = detuning;
    p.d31 = d_fine / root3x2;
    p.d32 = d_fine * std::sqrt(5.0) / root3x2;
    p.d41 = d_fine * std::sqrt(5.0) / root3x2;
    p.d42 = d_fine * std::sqrt(5.0) / root3x2;
    p.gamma31 = gamma / 6.0;
    p.gamma32 = gamma - p.gamma31;
    p.gamma41 = gamma / 2.0;
    p.gamma42 = gamma - p.gamma41;
    p.gamma_deph = 0.0;
    p.omega_p = c::rb87_f1_to_f1prime + detuning;
    return p;
}

OperatorMatrix hamiltonian(const AtomicParams& params, complex field) {
    const std::array<double, kNumLevels> freq{0.0, params.omega21, -params.delta_p,
                                              params.omega43 - params.delta_p};
    const double hb = constants::hbar;
    // Build in joules directly so H[3][1] is exactly -i d31 E.
    OperatorMatrix h = coupled_generator(freq, params.d31, params.d32, params.d41, params.d42, field);
    for (int i = 0; i < kNumLevels; ++i) h(i, i) *= hb;
    return h;
}

OperatorMatrix lindblad_rhs(const AtomicParams& params, const DensityMatrix& rho, complex field) {
    if (hermiticity_error(rho) > 1e-9) throw ValidationError("density matrix is not Hermitian");
    return LindbladKernel(params).rhs(rho, field);
}

DensityMatrix thermal_state(GroundWeighting weighting) {
    DensityMatrix rho = DensityMatrix::Zero();
    switch (weighting) {
        case GroundWeighting::Degeneracy:
            rho(0, 0) = 3.0 / 8.0;
            rho(1, 1) = 5.0 / 8.0;
            break;
        case GroundWeighting::Equal:
            rho(0, 0) = 0.5;
            rho(1, 1) = 0.5;
            break;
        case GroundWeighting::LowerOnly:
            rho(0, 0) = 1.0;
            break;
    }
    return rho;
}

double trace_error(const DensityMatrix& rho) { return std::abs(rho.trace() - 1.0); }

double hermiticity_error(const DensityMatrix& rho) { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

double min_eigenvalue(const DensityMatrix& rho) {
    const DensityMatrix sym = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

LindbladKernel::LindbladKernel(const AtomicParams& params) : params_(params) {
    validate(params);
    const double hb = constants::hbar;
    level_freq_ = {0.0, params.omega21, -params.delta_p, params.omega43 - params.delta_p};
    c31_ = params.d31 / hb;
    c32_ = params.d32 / hb;
    c41_ = params.d41 / hb;
    c42_ = params.d42 / hb;
    decay3_ = params.gamma31 + params.gamma32;
    decay4_ = params.gamma41 + params.gamma42;
}

OperatorMatrix LindbladKernel::rhs(const DensityMatrix& rho, complex field) const {
    const OperatorMatrix h = coupled_generator(level_freq_, c31_, c32_, c41_, c42_, field);
    // rho h = (h rho)^dagger, so -i[h, rho] = -i (M - M^dagger) is Hermitian exactly.
    const OperatorMatrix m = h * rho;
    OperatorMatrix out = -I * (m - m.adjoint());

    const std::array<double, kNumLevels> loss{0.0, 0.0, decay3_, decay4_};
    const double deph = params_.gamma_deph;
    for (int i = 0; i < kNumLevels; ++i) {
        for (int j = 0; j < kNumLevels; ++j) {
            double rate = 0.5 * (loss[i] + loss[j]);
            if ((i >= 2) != (j >= 2)) rate += deph;
            out(i, j) -= rate * rho(i, j);
        }
    }
    const double p3 = rho(2, 2).real();
    const double p4 = rho(3, 3).real();
    out(0, 0) += params_.gamma31 * p3 + params_.gamma41 * p4;
    out(1, 1) += params_.gamma32 * p3 + params_.gamma42 * p4;
    return out;
}

void LindbladKernel::rk4_step(DensityMatrix& rho, complex field_start, complex field_end, double dt) const {
    const complex field_mid = 0.5 * (field_start + field_end);
    const OperatorMatrix k1 = rhs(rho, field_start);
    const OperatorMatrix k2 = rhs(rho + (0.5 * dt) * k1, field_mid);
    const OperatorMatrix k3 = rhs(rho + (0.5 * dt) * k2, field_mid);
    const OperatorMatrix k4 = rhs(rho + dt * k3, field_end);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace mbprop
