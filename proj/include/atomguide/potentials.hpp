#pragma once

#include <optional>

#include "atomguide/constants.hpp"

namespace atomguide {

/// Crossed-guide geometry. Depths are positive magnitudes; the potential is
/// -U0 (vertical beam) - U1 (oblique beam).
struct GuideParams {
  double depthVertical = 0.0;   // U0, J
  double depthOblique = 0.0;    // U1, J
  double waistVertical = 0.0;   // w0, m
  double waistOblique = 0.0;    // w1, m
  double crossingHeight = 0.0;  // z0, m, <= 0
  double angle = 0.0;           // gamma, rad; negative values describe the mirrored device
  std::optional<double> intensityVertical;  // I0, W/m^2
  std::optional<double> intensityOblique;   // I1, W/m^2

  /// Depths from beam intensities via the light-shift relation.
  static GuideParams from_intensities(double I0, double I1, const TransitionParams& transition, double waistVertical,
                                      double waistOblique, double crossingHeight, double angle,
                                      const PhysicalConstants& c = {});

  /// Throws ContractError on waists <= 0, negative depths, |angle| >= pi/2 or z0 > 0.
  void validate() const;
};

/// Well depth of a red-detuned far-off-resonant beam: (hbar Gamma / 2) (Gamma / 4|delta|) (I / I_s).
double depth_from_intensity(double intensity, const TransitionParams& transition, const PhysicalConstants& c = {});

/// Two-beam guide potential in the (x, z) plane.
double guide_potential_2d(double x, double z, const GuideParams& p);

/// Vertical-beam well -U0 exp(-2x^2/w0^2).
double vertical_guide_potential(double x, const GuideParams& p);

/// Oblique-beam contribution alone at (x, z).
double oblique_guide_potential(double x, double z, const GuideParams& p);

/// Guide potential seen by an atom in free fall: z = -g t^2 / 2.
double effective_potential(double x, double t, const GuideParams& p, double grav = PhysicalConstants{}.grav);

/// Harmonic frequency of a Gaussian well: (2/w0) sqrt(U0/m).
double harmonic_frequency(double U0, double w0, double mass);

/// -U0 + m omega^2 r^2 / 2 with omega from harmonic_frequency.
double harmonic_potential(double r, double U0, double w0, double mass);

/// -g t^2 / 2.
double fall_height(double t, double grav = PhysicalConstants{}.grav);

/// sqrt(2|z0|/g): time at which a falling atom reaches the crossing height.
double crossing_time(double z0, double grav = PhysicalConstants{}.grav);

/// x coordinate of the oblique beam axis at height z: -(z - z0) tan(gamma).
double oblique_axis_x(double z, const GuideParams& p);

}  // namespace atomguide
