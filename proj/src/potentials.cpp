#include "atomguide/potentials.hpp"

#include <cmath>
#include <numbers>

#include "atomguide/errors.hpp"

namespace atomguide {

GuideParams GuideParams::from_intensities(double I0, double I1, const TransitionParams& transition,
                                          double waistVertical, double waistOblique, double crossingHeight,
                                          double angle, const PhysicalConstants& c) {
  GuideParams p;
  p.depthVertical = depth_from_intensity(I0, transition, c);
  p.depthOblique = depth_from_intensity(I1, transition, c);
  p.waistVertical = waistVertical;
  p.waistOblique = waistOblique;
  p.crossingHeight = crossingHeight;
  p.angle = angle;
  p.intensityVertical = I0;
  p.intensityOblique = I1;
  p.validate();
  return p;
}

void GuideParams::validate() const {
  if (!(waistVertical > 0.0) || !(waistOblique > 0.0)) throw ContractError("guide waists must be > 0");
  if (!(depthVertical >= 0.0) || !(depthOblique >= 0.0)) throw ContractError("guide depths must be >= 0");
  if (!(std::abs(angle) < std::numbers::pi / 2)) throw ContractError("guide angle must satisfy |gamma| < pi/2");
  if (!(crossingHeight <= 0.0)) throw ContractError("crossing height z0 must be <= 0");
  if (!std::isfinite(depthVertical) || !std::isfinite(depthOblique) || !std::isfinite(crossingHeight)) {
    throw ContractError("guide parameters must be finite");
  }
}

double depth_from_intensity(double intensity, const TransitionParams& t, const PhysicalConstants& c) {
  if (t.detuning == 0.0) throw ContractError("depth_from_intensity: zero detuning");
  if (!(intensity >= 0.0)) throw ContractError("depth_from_intensity: intensity must be >= 0");
  if (!(t.saturationIntensity > 0.0)) throw ContractError("depth_from_intensity: saturation intensity must be > 0");
  return 0.5 * c.hbar * t.linewidth * (t.linewidth / (4.0 * std::abs(t.detuning))) *
         (intensity / t.saturationIntensity);
}

double vertical_guide_potential(double x, const GuideParams& p) {
  const double w = p.waistVertical;
  return -p.depthVertical * std::exp(-2.0 * x * x / (w * w));
}

double oblique_guide_potential(double x, double z, const GuideParams& p) {
  const double xr = x * std::cos(p.angle) + (z - p.crossingHeight) * std::sin(p.angle);
  const double w = p.waistOblique;
  return -p.depthOblique * std::exp(-2.0 * xr * xr / (w * w));
}

double guide_potential_2d(double x, double z, const GuideParams& p) {
  return vertical_guide_potential(x, p) + oblique_guide_potential(x, z, p);
}

double effective_potential(double x, double t, const GuideParams& p, double grav) {
  if (!(t >= 0.0)) throw ContractError("effective_potential: t must be >= 0");
  return guide_potential_2d(x, fall_height(t, grav), p);
}

double harmonic_frequency(double U0, double w0, double mass) {
  if (!(U0 > 0.0) || !(w0 > 0.0) || !(mass > 0.0)) throw ContractError("harmonic_frequency: arguments must be > 0");
  return 2.0 / w0 * std::sqrt(U0 / mass);
}

double harmonic_potential(double r, double U0, double w0, double mass) {
  const double omega = harmonic_frequency(U0, w0, mass);
  return -U0 + 0.5 * mass * omega * omega * r * r;
}

double fall_height(double t, double grav) {
  if (!(t >= 0.0)) throw ContractError("fall_height: t must be >= 0");
  return -0.5 * grav * t * t;
}

double crossing_time(double z0, double grav) {
  if (!(z0 <= 0.0)) throw ContractError("crossing_time: z0 must be <= 0");
  return std::sqrt(2.0 * std::abs(z0) / grav);
}

double oblique_axis_x(double z, const GuideParams& p) { return -(z - p.crossingHeight) * std::tan(p.angle); }

}  // namespace atomguide
