#pragma once

#include <numbers>

namespace nvmri::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double twoPi = 2.0 * std::numbers::pi;

// CODATA 2018
inline constexpr double mu0 = 1.25663706212e-6;     // T m / A
inline constexpr double hbar = 1.054571817e-34;     // J s

// NV electron gyromagnetic ratio, 28.024951 GHz/T
inline constexpr double gammaNvHzPerT = 28.024951e9;
inline constexpr double gammaNv = twoPi * gammaNvHzPerT;  // rad / (s T)

// mu0 gamma^2 hbar / 4pi in rad/s nm^3
inline constexpr double J0 = mu0 * gammaNv * gammaNv * hbar / (4.0 * pi) * 1e27;

// detuning per field: MHz per mT
inline constexpr double gammaMHzPerMT = gammaNvHzPerT * 1e-9;

// rad/nm per (us * mT/um); Q = tau * grad * gamma
inline constexpr double windingFactor = gammaNv * 1e-12;

// diamond number density, nm^-3
inline constexpr double diamondAtomDensity = 176.0;

}  // namespace nvmri::constants
