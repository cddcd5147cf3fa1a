#include "atomguide/eigen_ensemble.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "atomguide/errors.hpp"
#include "atomguide/fft.hpp"

namespace atomguide {

std::vector<double> fgh_kinetic_row(const Grid1D& grid, double mass, double hbar) {
  const std::size_t n = grid.size();
  const auto k = grid.wavenumbers();
  ComplexBuffer row(n);
  const double c = hbar * hbar / (2.0 * mass) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) row[i] = Complex{c * k[i] * k[i], 0.0};
  const Mesh mesh(grid);
  FourierTransform(mesh).backward(row);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = row[i].real();
  return out;
}

EigenSet fgh_bound_states(const Grid1D& grid, const GuideParams& p, std::size_t maxStates,
                          const PhysicalConstants& c) {
  const double U0 = p.depthVertical;
  const double w0 = p.waistVertical;
  if (!(U0 > 0.0)) throw SetupError("fgh_bound_states: U0 = 0, the vertical guide has no bound states");
  if (!(w0 > 0.0)) throw ContractError("fgh_bound_states: waist must be > 0");
  if (grid.x_min() > -3.0 * w0 || grid.x_max() < 3.0 * w0) {
    throw SetupError("fgh_bound_states: grid must span at least +-3 w0");
  }
  const double k_required = 2.0 * std::sqrt(2.0 * c.massRb87 * U0) / c.hbar;
  if (grid.k_max() < k_required) {
    const auto n = next_power_of_two(static_cast<std::size_t>(std::ceil(grid.length() * k_required / std::numbers::pi)));
    throw SetupError("fgh_bound_states: grid too coarse for the well depth, need nPoints >= " + std::to_string(n), n);
  }
  const std::size_t n = grid.size();
  if (n > kMaxFghDimension) {
    throw SetupError("fgh_bound_states: FGH dimension " + std::to_string(n) + " exceeds cap " +
                     std::to_string(kMaxFghDimension));
  }
  if (maxStates == 0) throw ContractError("fgh_bound_states: maxStates must be >= 1");

  const auto row = fgh_kinetic_row(grid, c.massRb87, c.hbar);
  std::vector<double> h(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) h[j * n + k] = row[(j + n - k) % n];
    h[j * n + j] += vertical_guide_potential(grid.x(j), p);
  }

  // Index range 1..cap, widened until the highest returned level is unbound or
  // maxStates levels are in hand. Semiclassical level count seeds the cap.
  const auto ln = static_cast<lapack_int>(n);
  const double semiclassical = std::sqrt(2.0 * c.massRb87 * U0) * w0 / (std::sqrt(std::numbers::pi) * c.hbar);
  std::size_t cap = std::min({n, maxStates, static_cast<std::size_t>(1.25 * semiclassical) + 16});
  std::vector<double> w(n);
  std::vector<double> z_all;
  std::vector<lapack_int> support(2 * n);
  std::size_t bound = 0;
  while (true) {
    std::vector<double> a = h;
    z_all.assign(n * cap, 0.0);
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', ln, a.data(), ln, 0.0, 0.0, 1,
                                           static_cast<lapack_int>(cap), 0.0, &found, w.data(), z_all.data(), ln,
                                           support.data());
    if (info != 0) throw SetupError("fgh_bound_states: LAPACK dsyevr failed with info " + std::to_string(info));
    bound = 0;
    while (bound < static_cast<std::size_t>(found) && w[bound] < 0.0) ++bound;
    const bool exhausted = bound < static_cast<std::size_t>(found);
    if (exhausted || cap >= std::min(n, maxStates)) break;
    cap = std::min({n, maxStates, 2 * cap});
  }
  if (bound == 0) throw SetupError("fgh_bound_states: no bound states on this grid");
  const std::size_t keep = std::min(bound, maxStates);

  EigenSet out;
  out.grid = Mesh::line(grid);
  const double inv_sqrt_dx = 1.0 / std::sqrt(grid.dx());
  for (std::size_t s = 0; s < keep; ++s) {
    const double* col = z_all.data() + s * n;
    double peak = 0.0;
    for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, std::abs(col[j]));
    double sign = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(col[j]) > 1e-6 * peak) {
        sign = col[j] > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    WaveField state(out.grid);
    for (std::size_t j = 0; j < n; ++j) state[j] = Complex{sign * col[j] * inv_sqrt_dx, 0.0};
    out.energies.push_back(w[s]);
    out.states.push_back(std::move(state));
  }
  return out;
}

ThermalEnsemble boltzmann_weights(const EigenSet& eigen, double temperature, const PhysicalConstants& c,
                                  double cutoff) {
  if (!(temperature > 0.0)) throw ContractError("boltzmann_weights: temperature must be > 0");
  if (eigen.energies.empty()) throw ContractError("boltzmann_weights: empty eigen set");
  const double kt = c.kB * temperature;
  const double e0 = eigen.energies.front();
  std::vector<double> w(eigen.size());
  double z = 0.0;
  for (std::size_t nu = 0; nu < w.size(); ++nu) {
    w[nu] = std::exp(-(eigen.energies[nu] - e0) / kt);
    z += w[nu];
  }
  ThermalEnsemble out;
  out.temperature = temperature;
  double kept = 0.0;
  for (std::size_t nu = 0; nu < w.size(); ++nu) {
    const double normalized = w[nu] / z;
    if (normalized < cutoff) {
      out.droppedMass += normalized;
      continue;
    }
    out.members.push_back({nu, w[nu]});
    kept += w[nu];
  }
  for (auto& m : out.members) m.weight /= kept;
  return out;
}

}  // namespace atomguide
