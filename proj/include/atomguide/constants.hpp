#pragma once

#include <numbers>

namespace atomguide {

/// SI constants. Everything in the library is SI; paper units only appear at the
/// config boundary (namespace units).
struct PhysicalConstants {
  double hbar = 1.054571817e-34;       // J s
  double kB = 1.380649e-23;            // J/K
  double grav = 9.80665;               // m/s^2
  double massRb87 = 1.44316e-25;       // kg (86.909 u)
  double scatteringLength = 5.29e-9;   // m, 87Rb s-wave

  /// Throws ContractError unless every constant is strictly positive.
  void validate() const;
};

/// D2-line parameters entering the light-shift depth.
struct TransitionParams {
  double linewidth = 0.0;            // Gamma, rad/s
  double detuning = 0.0;             // delta, rad/s, sign-carrying
  double saturationIntensity = 0.0;  // I_s, W/m^2

  void validate() const;
};

namespace units {

inline constexpr double mm = 1e-3;
inline constexpr double um = 1e-6;
inline constexpr double ms = 1e-3;
inline constexpr double us = 1e-6;
inline constexpr double deg = std::numbers::pi / 180.0;

inline double microkelvin(double value, const PhysicalConstants& c = {}) { return value * 1e-6 * c.kB; }
inline double to_microkelvin(double joules, const PhysicalConstants& c = {}) { return joules / (1e-6 * c.kB); }

}  // namespace units

}  // namespace atomguide
