#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atomguide/constants.hpp"
#include "atomguide/eigen_ensemble.hpp"
#include "atomguide/potentials.hpp"
#include "atomguide/propagator.hpp"
#include "atomguide/wavefield.hpp"

namespace atomguide {

/// Populations of the two guides after a run.
struct GuideAssignment {
  double barrierPosition = 0.0;  // m
  double verticalMinimum = 0.0;  // m
  double obliqueMinimum = 0.0;   // m
  double pVertical = 0.0;
  double pOblique = 0.0;
  double pLost = 0.0;
};

/// Positions of the two wells of V_eff(., t) and the barrier between them.
struct WellGeometry {
  double verticalMinimum = 0.0;
  double obliqueMinimum = 0.0;
  double barrier = 0.0;
};

/// Half-width of each capture window: 4 max(w0, w1).
double capture_half_width(const GuideParams& p);

/// Minima of V_eff(., t) near x = 0 and near the oblique axis, and the
/// watershed (maximum of V_eff) between them. A well with zero depth sits at
/// its beam axis and the barrier falls midway. Throws GeometryError when both
/// beams are on but V_eff has a single minimum.
WellGeometry well_geometry(const GuideParams& p, double t, const PhysicalConstants& c = {});

/// Watershed partition: pVertical integrates |psi|^2 over nodes on the vertical
/// side of the barrier within W of the vertical minimum, pOblique likewise on
/// the oblique side (the barrier node counts as oblique), pLost = 1 - both.
/// pOblique is 0 when U1 = 0.
GuideAssignment assign_guides(const WaveField& field, const GuideParams& p, double t,
                              const PhysicalConstants& c = {});

/// Smallest t with the two minima at least 3 (w0 + w1) / 2 apart.
double default_final_time(const GuideParams& p, const PhysicalConstants& c = {});

/// Eigen grid spanning +-4 w0, resolving 4 U0 of kinetic energy.
Grid1D plan_eigen_grid(const GuideParams& p, const PhysicalConstants& c = {});

/// Propagation mesh refining the eigen grid by a power of two until the
/// resolution check passes, covering both wells plus 2 max(w0, w1) and the
/// absorber on each side, with nodes aligned to the eigen grid.
MeshPtr plan_propagation_mesh(const Grid1D& eigenGrid, const GuideParams& p, const PropagationSpec& spec,
                              const PhysicalConstants& c = {});

struct StateOutcome {
  std::size_t nu = 0;
  double weight = 0.0;
  GuideAssignment assignment;
};

struct EfficiencyResult {
  double efficiency = 0.0;
  double droppedMass = 0.0;
  bool cacheHit = false;
  std::vector<StateOutcome> states;
};

struct EnsembleRunOptions {
  MeshPtr propagationMesh;                    // required
  std::size_t jobs = 1;                       // worker threads
  std::optional<std::filesystem::path> cacheDir;
};

/// Sum over members of weight * pOblique at spec.tFinal. The spec must not switch the vertical beam off.
EfficiencyResult splitting_efficiency(const ThermalEnsemble& ensemble, const EigenSet& eigen, const GuideParams& p,
                                      const PropagationSpec& spec, const EnsembleRunOptions& options,
                                      const PhysicalConstants& c = {});

/// As splitting_efficiency with U0 switched off at crossing_time(z0), which
/// spec.switchOffVerticalAt must equal. Guides are assigned with the geometry
/// of both beams on.
EfficiencyResult deflection_efficiency(const ThermalEnsemble& ensemble, const EigenSet& eigen, const GuideParams& p,
                                       const PropagationSpec& spec, const EnsembleRunOptions& options,
                                       const PhysicalConstants& c = {});

/// SHA-256 hex digest.
std::string sha256_hex(const std::string& text);

enum class SweepKind { RatioU1U0, AngleGamma };

/// Everything a splitter or deflector point needs besides the swept value.
struct Scenario {
  GuideParams guide;
  double temperature = 0.0;             // K
  std::size_t maxStates = 1000;
  double dt = 0.0;                      // s
  std::optional<double> tFinal;         // s; default_final_time when empty
  bool deflector = false;
  bool absorber = true;                 // cos^2 absorber of width w1, strength U0 + U1
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> cacheDir;
};

struct CurvePoint {
  double value = 0.0;
  std::optional<double> efficiency;
  std::string failure;  // reason when efficiency is missing
};

struct EfficiencyCurve {
  std::string sweptName;  // "ratio" or "gamma_deg"
  std::vector<CurvePoint> points;
  std::size_t cacheHits = 0;
};

/// Guide parameters of one sweep point.
GuideParams sweep_point_params(SweepKind kind, double value, const GuideParams& base);

/// Propagation spec of a scenario for the given guide parameters.
PropagationSpec scenario_spec(const Scenario& s, const GuideParams& p, const PhysicalConstants& c = {});

/// One scenario evaluated end to end: eigenstates, ensemble, grid plan, efficiency.
EfficiencyResult run_scenario(const Scenario& s, const PhysicalConstants& c = {});

/// Efficiency at each value (ratio U1/U0, or gamma in degrees). Values must be
/// strictly ascending. Point failures become missing points with a reason.
EfficiencyCurve sweep(SweepKind kind, std::span<const double> values, const Scenario& base,
                      const PhysicalConstants& c = {});

}  // namespace atomguide
