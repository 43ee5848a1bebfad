#pragma once

#include <numbers>

namespace ctbath {

namespace constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduced Planck constant, J s (CODATA 2018, exact).
inline constexpr double kHbar = 1.054571817e-34;

/// mu_0 / 4 pi in T m / A.
inline constexpr double kMu0Over4Pi = 1.0e-7;

/// Free-electron gyromagnetic ratio magnitude, rad s^-1 T^-1.
/// CODATA 2018 gives 1.76085963023e11.
inline constexpr double kGammaElectron = 1.760859e11;

/// Couplings closer than this are outside the dipolar (J << A) regime.
inline constexpr double kMinDipolarDistance = 1.0e-9;

}  // namespace constants

// Unit conversions. Internally every frequency is an angular frequency in
// rad/s and every field is in tesla.
inline constexpr double gauss_to_tesla(double gauss) { return gauss * 1.0e-4; }
inline constexpr double tesla_to_gauss(double tesla) { return tesla * 1.0e4; }
inline constexpr double hz_to_angular(double hz) { return hz * constants::kTwoPi; }
inline constexpr double mhz_to_angular(double mhz) { return mhz * 1.0e6 * constants::kTwoPi; }
inline constexpr double angular_to_hz(double omega) { return omega / constants::kTwoPi; }

/// Dipolar prefactor alpha = (mu_0 / 4 pi) gamma_e^2 hbar, in rad s^-1 m^3.
inline constexpr double dipolar_prefactor(double gamma_e) {
    return constants::kMu0Over4Pi * gamma_e * gamma_e * constants::kHbar;
}

}  // namespace ctbath
