#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "atomguide/constants.hpp"
#include "atomguide/grid.hpp"
#include "atomguide/potentials.hpp"
#include "atomguide/propagator.hpp"
#include "atomguide/wavefield.hpp"

namespace atomguide {

/// 2D coupling for a gas squeezed along y: 2 hbar a0 sqrt(2 pi hbar omega_y / m).
///
/// The variant 2 hbar^2 sqrt(2 pi omega_y / m) a0 is not an energy times an
/// area; this is the dimensionally consistent reduction.
double g2d_coefficient(double omegaY, const PhysicalConstants& c = {});

struct GpeParams {
  double atomNumber = 1.0;     // N
  double perpFrequency = 0.0;  // omega_y, rad/s
  double couplingG2D = 0.0;    // J m^2
  GuideParams guide;

  /// N g2D, the coefficient of |Phi|^2.
  double nonlinear() const noexcept { return atomNumber * couplingG2D; }
  /// Throws ContractError unless N >= 1, omega_y > 0 and g2D > 0.
  void validate() const;
};

/// Builds GpeParams with g2D from g2d_coefficient.
GpeParams make_gpe_params(double atomNumber, double omegaY, const GuideParams& guide,
                          const PhysicalConstants& c = {});

/// Isotropic Gaussian trap of the vertical beam parameters, -U0 exp(-2 (x^2 + z^2) / w0^2),
/// holding the condensate before release.
double isotropic_trap_potential(double x, double z, const GuideParams& p);

/// Harmonic frequency of the trap, (2/w0) sqrt(U0/m).
double trap_frequency(const GpeParams& gp, const PhysicalConstants& c = {});

/// -U0 + (2/w0) sqrt(g2D U0 N / pi).
double tf_chemical_potential(double atomNumber, const GpeParams& gp, const PhysicalConstants& c = {});

/// Radius where the Thomas-Fermi density of the harmonic trap vanishes.
double tf_radius(double atomNumber, const GpeParams& gp, const PhysicalConstants& c = {});

/// max(0, (mu - V_H(r)) / (N g2D)).
double tf_density(double r, double mu, const GpeParams& gp, const PhysicalConstants& c = {});

/// Length the ground state grid must cover on each axis: 4 max(harmonic width, TF radius).
double required_span(const GpeParams& gp, const PhysicalConstants& c = {});

/// Largest N whose required_span fits the smaller axis of the grid.
double max_admissible_atom_number(const Grid2D& grid, const GpeParams& gp, const PhysicalConstants& c = {});

struct GroundState {
  WaveField field;
  double mu = 0.0;           // <T + V + N g2D |Phi|^2>
  double decayEnergy = 0.0;  // relaxation eigenvalue
  double residual = 0.0;     // ||(H - mu) Phi||
  std::size_t steps = 0;
};

/// Relaxation schedule for gpe_ground_state. Steps are given in units of
/// hbar / E, E = max(hbar omega, mu_TF + U0); the residual target is relative to |mu + U0|.
struct GroundStateOptions {
  double relativeResidual = 1e-5;
  double tolerance = 1e-12;
  std::size_t maxSteps = 500000;
  double dtInitial = 0.1;
  double dtFinal = 0.005;
};

/// Imaginary-time ground state in the isotropic trap with interaction N g2D,
/// seeded by an isotropic Gaussian of the harmonic oscillator length. g2D = 0
/// is accepted and gives the linear ground state.
/// Throws SetupError when the grid is narrower than required_span, ConvergenceError
/// when the residual target is not reached.
GroundState gpe_ground_state(const Grid2D& grid, const GpeParams& gp, const PhysicalConstants& c = {},
                             const GroundStateOptions& options = {});

struct MuPoint {
  double atomNumber = 0.0;
  double muNumeric = 0.0;
  double muTF = 0.0;
};

struct MuCurve {
  std::vector<MuPoint> points;
};

/// Ground-state mu for each N (ascending), one relaxation job per N.
MuCurve mu_curve(std::span<const double> atomNumbers, const Grid2D& grid, const GpeParams& base,
                 std::size_t jobs = 1, const PhysicalConstants& c = {}, const GroundStateOptions& options = {});

/// n values from 1 to nMax, evenly spaced in log N.
std::vector<double> log_spaced_atom_numbers(double nMax, std::size_t count);

/// Density moments of a normalized 2D field.
struct ShapeMetrics {
  double meanX = 0.0;
  double meanZ = 0.0;
  double aspectRatio = 1.0;  // sqrt of the ratio of principal variances
  double longAxisAngle = 0.0;  // long principal axis, radians from +z toward -x, in (-pi/2, pi/2]
};

ShapeMetrics shape_metrics(const WaveField& field);

/// Fraction of |Phi|^2 within `halfWidth` (perpendicular distance) of the
/// oblique axis x = -(z - z0) tan(gamma).
double fraction_near_oblique_axis(const WaveField& field, const GuideParams& p, double halfWidth);

/// Angle in [0, pi/2] between the long axis and the oblique beam direction.
double angle_to_oblique_axis(const ShapeMetrics& shape, const GuideParams& p);

struct FallSample {
  double t = 0.0;
  double meanZ = 0.0;
  double fractionOnObliqueAxis = 0.0;
};

struct FallResult {
  PropagationResult propagation;
  std::vector<FallSample> samples;  // one per snapshot
  ShapeMetrics finalShape;
  double finalFractionOnObliqueAxis = 0.0;
};

/// Real-time GPE run under V_guide + m g z + N g2D |Phi|^2 with the snapshots
/// of spec; the oblique-axis fraction uses a half-width of 2 w1.
FallResult gpe_fall(const WaveField& phi0, const GpeParams& gp, const PropagationSpec& spec,
                    const PhysicalConstants& c = {});

}  // namespace atomguide
