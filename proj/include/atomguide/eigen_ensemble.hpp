#pragma once

#include <cstddef>
#include <vector>

#include "atomguide/constants.hpp"
#include "atomguide/grid.hpp"
#include "atomguide/potentials.hpp"
#include "atomguide/wavefield.hpp"

namespace atomguide {

/// Largest FGH matrix dimension accepted by fgh_bound_states.
inline constexpr std::size_t kMaxFghDimension = 8192;

/// Bound levels of the vertical guide, ascending in energy.
///
/// Every state is real, unit-normalized and carries the sign convention that
/// its first significant sample (scanning from xMin, |psi| > 1e-6 max|psi|) is positive.
struct EigenSet {
  MeshPtr grid;
  std::vector<double> energies;  // J, all in (-U0, 0)
  std::vector<WaveField> states;

  std::size_t size() const noexcept { return energies.size(); }
};

/// Lowest min(maxStates, #bound) eigenpairs of -hbar^2/2m d^2/dx^2 - U0 exp(-2x^2/w0^2)
/// from dense diagonalization of the periodic Fourier-grid Hamiltonian.
///
/// Throws SetupError if U0 = 0 or no level is bound, if the grid does not
/// span +-3 w0, if it cannot represent 4 U0 of kinetic energy, or if it has
/// more than kMaxFghDimension nodes.
EigenSet fgh_bound_states(const Grid1D& grid, const GuideParams& p, std::size_t maxStates,
                          const PhysicalConstants& c = {});

/// First row of the FGH kinetic matrix: T(j, k) = row[(j - k) mod n].
std::vector<double> fgh_kinetic_row(const Grid1D& grid, double mass, double hbar);

struct ThermalMember {
  std::size_t nu;
  double weight;
};

struct ThermalEnsemble {
  double temperature = 0.0;  // K
  std::vector<ThermalMember> members;
  double droppedMass = 0.0;  // normalized weight removed by the cutoff
};

/// Relative weight below which levels are dropped from an ensemble.
inline constexpr double kEnsembleWeightCutoff = 1e-6;

/// Maxwell-Boltzmann populations over the retained bound levels,
/// weight(nu) = exp(-E_nu / kB T) / Z. Levels whose normalized weight falls
/// below `cutoff` are dropped and the rest renormalized.
ThermalEnsemble boltzmann_weights(const EigenSet& eigen, double temperature, const PhysicalConstants& c = {},
                                  double cutoff = kEnsembleWeightCutoff);

}  // namespace atomguide
