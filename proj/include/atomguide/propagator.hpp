#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "atomguide/constants.hpp"
#include "atomguide/errors.hpp"
#include "atomguide/fft.hpp"
#include "atomguide/potentials.hpp"
#include "atomguide/wavefield.hpp"

namespace atomguide {

/// Negative imaginary potential -i W(d), W = strength cos^2(pi d / 2 width)
/// for nodes within `width` of a domain edge (d = distance to that edge).
struct Absorber {
  double width = 0.0;     // m
  double strength = 0.0;  // J
};

struct PropagationSpec {
  double dt = 0.0;      // s
  double tFinal = 0.0;  // s
  std::optional<double> switchOffVerticalAt;  // s; U0 -> 0 afterwards
  std::optional<Absorber> absorber;
  std::size_t snapshotEvery = 0;  // 0: no snapshots

  /// Throws ContractError if dt <= 0, tFinal < dt, the switch-off time is not
  /// inside (0, tFinal) or the absorber is wider than a quarter of any axis.
  void validate(const Mesh& mesh) const;
};

struct Snapshot {
  double t;
  WaveField field;
};

struct PropagationResult {
  WaveField finalField;
  std::vector<Snapshot> snapshots;
  std::vector<std::pair<double, double>> normHistory;  // (t, norm)
  double lostFraction = 0.0;
};

enum class PropagationMode { Tdse1D, Gpe2D };

/// Potential as a function of position and time; 1D callers ignore z.
using PotentialFunction = std::function<double(double x, double z, double t)>;

/// Second-order (Strang) split-operator stepper on one mesh.
///
/// Each real-time step applies exp(-i V dt / 2 hbar) exp(-i T dt / hbar)
/// exp(-i V dt / 2 hbar); T is diagonal in the FFT basis. V may include the
/// mean-field term g |psi|^2, re-evaluated from the current density in each
/// half step. An optional damping profile W enters as exp(-W dt / 2 hbar).
/// The stepper owns scratch state and is not shareable between threads.
class SplitStepPropagator {
 public:
  SplitStepPropagator(MeshPtr mesh, double mass, double hbar);

  const Mesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  double mass() const noexcept { return mass_; }
  double hbar() const noexcept { return hbar_; }

  /// Real-time step. Returns the norm after the step (NaN signals a numeric fault).
  double step(WaveField& psi, std::span<const double> potential, double dt, double nonlinear = 0.0,
              std::span<const double> damping = {});

  /// Half-step factor exp((-i V - W) dt / 2 hbar) for linear runs, shareable across states.
  ComplexBuffer half_step_factors(std::span<const double> potential, double dt,
                                  std::span<const double> damping = {}) const;

  /// Linear real-time step using precomputed half-step factors. Returns the norm after the step.
  double step_linear(WaveField& psi, std::span<const Complex> halfFactors, double dt);

  /// Imaginary-time step with dt -> -i dtau. Both half steps use the mean field of
  /// the incoming state, which must be unit-normalized, so the fixed point is
  /// second order in dtau. Returns the norm after the step.
  double imaginary_step(WaveField& psi, std::span<const double> potential, double dtau, double nonlinear = 0.0);

  /// <T> for a normalized field.
  double kinetic_energy(const WaveField& psi);
  /// (T + V + g|psi|^2) psi.
  WaveField apply_hamiltonian(const WaveField& psi, std::span<const double> potential, double nonlinear);

  /// Largest kinetic energy representable on the mesh.
  double max_kinetic_energy() const noexcept { return maxKinetic_; }

 private:
  const ComplexBuffer& kinetic_factors(double dt, bool imaginary);

  MeshPtr mesh_;
  FourierTransform fft_;
  double mass_;
  double hbar_;
  std::vector<double> kinetic_;  // hbar^2 |k|^2 / 2m per spectral node
  double maxKinetic_ = 0.0;
  ComplexBuffer kineticFactors_;
  std::vector<double> stepPotential_;  // V + g |psi|^2 of the incoming state, imaginary steps
  double cachedDt_ = -1.0;
  bool cachedImaginary_ = false;
};

/// Samples a potential function on every mesh node at time t.
std::vector<double> sample_potential(const Mesh& mesh, const PotentialFunction& v, double t);

/// Damping profile for an absorber (zeros when `absorber` is empty).
std::vector<double> absorber_profile(const Mesh& mesh, const std::optional<Absorber>& absorber);

/// One Strang step with the potential sampled at the step midpoint t + dt/2.
/// dt == 0 leaves the field untouched.
void strang_step(SplitStepPropagator& stepper, WaveField& psi, const PotentialFunction& potential, double t,
                 double dt, double nonlinear = 0.0);

/// Time-dependent potential of a propagation mode, including the vertical-beam switch-off.
PotentialFunction mode_potential(PropagationMode mode, const GuideParams& p, const PropagationSpec& spec,
                                 const PhysicalConstants& c);

/// Estimate of the largest kinetic energy reached during a run; feeds the resolution check.
double estimate_max_kinetic_energy(const WaveField& field0, const GuideParams& p, const PropagationSpec& spec,
                                   PropagationMode mode, double nonlinear, const PhysicalConstants& c);

/// Throws SetupError (with the required point count) unless every axis
/// represents at least 4x the estimated maximum kinetic energy.
void check_resolution(const Mesh& mesh, double estimatedMaxKinetic, const PhysicalConstants& c);

/// Numeric fault during a run; carries the last recorded snapshot when one exists.
class PropagationFault : public NumericFault {
 public:
  PropagationFault(const std::string& what, long step, std::shared_ptr<const Snapshot> lastValid)
      : NumericFault(what, step), lastValid_(std::move(lastValid)) {}
  const std::shared_ptr<const Snapshot>& last_valid_snapshot() const noexcept { return lastValid_; }

 private:
  std::shared_ptr<const Snapshot> lastValid_;
};

/// Full run from t = 0 to spec.tFinal. Tdse1D: the free-fall effective potential;
/// Gpe2D: guide potential + m g z + nonlinear * |psi|^2.
PropagationResult propagate(const WaveField& field0, const GuideParams& p, const PropagationSpec& spec,
                            PropagationMode mode, double nonlinear, const PhysicalConstants& c = {});

/// Linear Tdse1D propagation of many states under one shared potential history.
/// Each state undergoes bit-identical arithmetic to a solo run. Returns the final fields.
std::vector<WaveField> propagate_batch(std::vector<WaveField> fields, const GuideParams& p,
                                       const PropagationSpec& spec, const PhysicalConstants& c = {});

/// Step schedule: segments of equal steps; a switch-off time always falls on a step boundary.
struct StepSegment {
  double tStart;
  double dt;
  std::size_t steps;
};
std::vector<StepSegment> step_schedule(const PropagationSpec& spec);

struct RelaxOptions {
  double tolerance = 1e-10;         // relative energy change per step
  std::size_t maxSteps = 500000;
  double dtInitial = 0.0;           // 0: default rule
  double dtFinal = 0.0;             // 0: same as dtInitial
  double refineFactor = 4.0;
  double residualTolerance = 0.0;   // absolute, J; the final stage also ends when the residual stalls; 0 disables
  std::size_t residualEvery = 200;
};

struct RelaxResult {
  WaveField field;
  double energy = 0.0;       // <T + V + g|psi|^2>, the chemical potential for nonlinear runs
  double decayEnergy = 0.0;  // relaxation eigenvalue from the per-step norm decay
  double residual = 0.0;     // ||(H - energy) psi||
  std::vector<double> trace; // decay-rate energy per step
  std::size_t steps = 0;
};

/// Default step dt = 0.1 hbar / Emax, Emax = max(max|V|, max kinetic energy of the mesh).
double default_time_step(const SplitStepPropagator& stepper, std::span<const double> potential);

/// Imaginary-time relaxation to the lowest state of T + V + nonlinear |psi|^2.
/// Throws ConvergenceError (with the energy trace) when maxSteps is exhausted.
RelaxResult imaginary_time_relax(WaveField seed, std::span<const double> potential, double nonlinear,
                                 const RelaxOptions& options, SplitStepPropagator& stepper);

/// Kinetic + potential + nonlinear/2 * int |psi|^4: the conserved Gross-Pitaevskii energy.
double gp_energy(SplitStepPropagator& stepper, const WaveField& psi, std::span<const double> potential,
                 double nonlinear);

/// Kinetic + potential + nonlinear * int |psi|^4.
double chemical_potential(SplitStepPropagator& stepper, const WaveField& psi, std::span<const double> potential,
                          double nonlinear);

}  // namespace atomguide
