#pragma once

#include <numbers>

namespace mbprop::constants {

// CODATA 2018, SI units.
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double epsilon0 = 8.8541878128e-12;     // F/m
inline constexpr double speed_of_light = 299792458.0;    // m/s
inline constexpr double boltzmann = 1.380649e-23;        // J/K
inline constexpr double torr = 101325.0 / 760.0;         // Pa
inline constexpr double celsius_offset = 273.15;         // K

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double ln2 = std::numbers::ln2;

// 87Rb D1 line.
inline constexpr double rb87_natural_linewidth = two_pi * 5.746e6;     // Gamma, s^-1
inline constexpr double rb87_d1_dipole_fine = 3.588e-29;               // C m
inline constexpr double rb87_ground_splitting = two_pi * 6.834e9;      // omega_21
inline constexpr double rb87_excited_splitting = two_pi * 814.5e6;     // omega_43
inline constexpr double rb87_f1_to_f1prime = two_pi * 377.111226e12;   // omega_31
inline constexpr double rb87_mass = 1.443160648e-25;                   // kg
inline constexpr double rb87_natural_abundance = 0.2783;

}  // namespace mbprop::constants
