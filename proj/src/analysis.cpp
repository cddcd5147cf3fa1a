#include "atomguide/analysis.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "atomguide/errors.hpp"

namespace atomguide {

namespace {

constexpr int kBrentBits = 52;

double refine_extremum(const std::function<double(double)>& f, double lo, double hi) {
  return boost::math::tools::brent_find_minima(f, lo, hi, kBrentBits).first;
}

// Local minima of v on [a, b], refined, sorted by position.
std::vector<double> local_minima(const std::function<double(double)>& v, double a, double b, double h) {
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / h));
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = v(a + (b - a) * static_cast<double>(i) / static_cast<double>(n));
  std::vector<double> out;
  const double step = (b - a) / static_cast<double>(n);
  for (std::size_t i = 1; i < n; ++i) {
    if (vals[i] < vals[i - 1] && vals[i] <= vals[i + 1]) {
      const double x = a + step * static_cast<double>(i);
      out.push_back(refine_extremum(v, x - step, x + step));
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string grid_key(const Grid1D& g) { return fmt(g.x_min()) + "," + fmt(g.x_max()) + "," + std::to_string(g.size()); }

std::string run_key(const EigenSet& eigen, const GuideParams& p, const PropagationSpec& spec, const Mesh& mesh,
                    const ThermalEnsemble& ensemble, const PhysicalConstants& c) {
  std::ostringstream s;
  s << "atomguide-ensemble-v1\n";
  s << "constants " << fmt(c.hbar) << ' ' << fmt(c.kB) << ' ' << fmt(c.grav) << ' ' << fmt(c.massRb87) << '\n';
  s << "guide " << fmt(p.depthVertical) << ' ' << fmt(p.depthOblique) << ' ' << fmt(p.waistVertical) << ' '
    << fmt(p.waistOblique) << ' ' << fmt(p.crossingHeight) << ' ' << fmt(p.angle) << '\n';
  s << "spec " << fmt(spec.dt) << ' ' << fmt(spec.tFinal) << ' '
    << (spec.switchOffVerticalAt ? fmt(*spec.switchOffVerticalAt) : "none") << ' '
    << (spec.absorber ? fmt(spec.absorber->width) + ' ' + fmt(spec.absorber->strength) : "none") << '\n';
  s << "eigen " << grid_key(eigen.grid->x()) << '\n';
  s << "mesh " << grid_key(mesh.x()) << '\n';
  s << "members";
  for (const auto& m : ensemble.members) s << ' ' << m.nu;
  s << '\n';
  return s.str();
}

std::optional<std::vector<GuideAssignment>> read_cache(const std::filesystem::path& file, std::size_t count) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::vector<GuideAssignment> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.starts_with("nu,")) continue;
    std::istringstream row(line);
    GuideAssignment a;
    std::size_t nu = 0;
    char comma = 0;
    if (!(row >> nu >> comma >> a.barrierPosition >> comma >> a.verticalMinimum >> comma >> a.obliqueMinimum >>
          comma >> a.pVertical >> comma >> a.pOblique >> comma >> a.pLost)) {
      return std::nullopt;
    }
    out.push_back(a);
  }
  if (out.size() != count) return std::nullopt;
  return out;
}

void write_cache(const std::filesystem::path& file, const std::string& key, const std::vector<StateOutcome>& states) {
  std::filesystem::create_directories(file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    std::istringstream lines(key);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
    out << "nu,barrier_m,vertical_min_m,oblique_min_m,p_vertical,p_oblique,p_lost\n";
    for (const auto& s : states) {
      const auto& a = s.assignment;
      out << s.nu << ',' << fmt(a.barrierPosition) << ',' << fmt(a.verticalMinimum) << ',' << fmt(a.obliqueMinimum)
          << ',' << fmt(a.pVertical) << ',' << fmt(a.pOblique) << ',' << fmt(a.pLost) << '\n';
    }
  }
  std::filesystem::rename(tmp, file);
}

EfficiencyResult ensemble_efficiency(const ThermalEnsemble& ensemble, const EigenSet& eigen, const GuideParams& p,
                                     const PropagationSpec& spec, const EnsembleRunOptions& options,
                                     const PhysicalConstants& c) {
  if (!options.propagationMesh) throw ContractError("efficiency: propagation mesh required");
  if (ensemble.members.empty()) throw ContractError("efficiency: empty ensemble");
  p.validate();
  if (p.angle == 0.0) throw GeometryError("efficiency: gamma = 0 gives parallel beams, not a splitter");
  const Mesh& mesh = *options.propagationMesh;
  spec.validate(mesh);
  well_geometry(p, spec.tFinal, c);

  EfficiencyResult result;
  result.droppedMass = ensemble.droppedMass;
  const std::size_t count = ensemble.members.size();

  std::string key;
  std::filesystem::path cache_file;
  std::optional<std::vector<GuideAssignment>> cached;
  if (options.cacheDir) {
    key = run_key(eigen, p, spec, mesh, ensemble, c);
    cache_file = *options.cacheDir / (sha256_hex(key) + ".csv");
    cached = read_cache(cache_file, count);
  }

  std::vector<GuideAssignment> assignments(count);
  if (cached) {
    assignments = *cached;
    result.cacheHit = true;
  } else {
    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, count);
    std::vector<std::exception_ptr> errors(jobs);
    auto work = [&](std::size_t w) {
      try {
        const std::size_t begin = count * w / jobs;
        const std::size_t end = count * (w + 1) / jobs;
        std::vector<WaveField> fields;
        fields.reserve(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
          fields.push_back(spectral_embed(eigen.states.at(ensemble.members[k].nu), options.propagationMesh));
        }
        const auto finals = propagate_batch(std::move(fields), p, spec, c);
        for (std::size_t k = begin; k < end; ++k) assignments[k] = assign_guides(finals[k - begin], p, spec.tFinal, c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (std::size_t w = 0; w < jobs; ++w) {
      if (!errors[w]) continue;
      const std::size_t first = ensemble.members[count * w / jobs].nu;
      try {
        std::rethrow_exception(errors[w]);
      } catch (const NumericFault& e) {
        throw NumericFault(std::string(e.what()) + " (batch starting at nu = " + std::to_string(first) + ")", e.step());
      } catch (const GeometryError& e) {
        throw GeometryError(std::string(e.what()) + " (batch starting at nu = " + std::to_string(first) + ")");
      }
    }
  }

  for (std::size_t k = 0; k < count; ++k) {
    const auto& m = ensemble.members[k];
    result.states.push_back({m.nu, m.weight, assignments[k]});
    result.efficiency += m.weight * assignments[k].pOblique;
  }
  if (options.cacheDir && !cached) write_cache(cache_file, key, result.states);
  return result;
}

}  // namespace

double capture_half_width(const GuideParams& p) { return 4.0 * std::max(p.waistVertical, p.waistOblique); }

WellGeometry well_geometry(const GuideParams& p, double t, const PhysicalConstants& c) {
  const double axis = oblique_axis_x(fall_height(t, c.grav), p);
  WellGeometry g;
  const bool vertical_on = p.depthVertical > 0.0;
  const bool oblique_on = p.depthOblique > 0.0;
  if (!vertical_on || !oblique_on) {
    g.verticalMinimum = 0.0;
    g.obliqueMinimum = axis;
    g.barrier = 0.5 * axis;
    return g;
  }
  auto v = [&](double x) { return effective_potential(x, t, p, c.grav); };
  const double wmax = std::max(p.waistVertical, p.waistOblique);
  const double wmin = std::min(p.waistVertical, p.waistOblique);
  const double a = std::min(0.0, axis) - 2.0 * wmax;
  const double b = std::max(0.0, axis) + 2.0 * wmax;
  const auto minima = local_minima(v, a, b, wmin / 200.0);
  if (minima.size() < 2) throw GeometryError("wells not separated: V_eff has a single minimum at this time");
  auto closest = [&](double target) {
    return *std::min_element(minima.begin(), minima.end(),
                             [&](double l, double r) { return std::abs(l - target) < std::abs(r - target); });
  };
  g.verticalMinimum = closest(0.0);
  g.obliqueMinimum = closest(axis);
  if (g.verticalMinimum == g.obliqueMinimum) {
    throw GeometryError("wells not separated: the vertical and oblique minima coincide");
  }
  const double lo = std::min(g.verticalMinimum, g.obliqueMinimum);
  const double hi = std::max(g.verticalMinimum, g.obliqueMinimum);
  const std::size_t n = 2000;
  double best = lo;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < n; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / n;
    if (v(x) > best_v) {
      best_v = v(x);
      best = x;
    }
  }
  const double h = (hi - lo) / n;
  g.barrier = refine_extremum([&](double x) { return -v(x); }, std::max(lo, best - h), std::min(hi, best + h));
  return g;
}

GuideAssignment assign_guides(const WaveField& field, const GuideParams& p, double t, const PhysicalConstants& c) {
  if (field.mesh().rank() != 1) throw ContractError("assign_guides: 1D field required");
  const WellGeometry g = well_geometry(p, t, c);
  const double w = capture_half_width(p);
  const bool oblique_right = g.obliqueMinimum > g.barrier;
  const Grid1D& grid = field.mesh().x();
  double pv = 0.0;
  double po = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.x(i);
    const double d = std::norm(field[i]);
    const bool oblique_side = oblique_right ? x >= g.barrier : x <= g.barrier;
    if (oblique_side) {
      if (std::abs(x - g.obliqueMinimum) <= w) po += d;
    } else if (std::abs(x - g.verticalMinimum) <= w) {
      pv += d;
    }
  }
  GuideAssignment a;
  a.barrierPosition = g.barrier;
  a.verticalMinimum = g.verticalMinimum;
  a.obliqueMinimum = g.obliqueMinimum;
  a.pVertical = pv * grid.dx();
  a.pOblique = p.depthOblique > 0.0 ? po * grid.dx() : 0.0;
  a.pLost = std::max(0.0, 1.0 - a.pVertical - a.pOblique);
  return a;
}

double default_final_time(const GuideParams& p, const PhysicalConstants& c) {
  p.validate();
  if (p.angle == 0.0) throw GeometryError("default_final_time: gamma = 0 never separates the wells");
  const double target = 1.5 * (p.waistVertical + p.waistOblique);
  double t = std::sqrt(2.0 * (std::abs(p.crossingHeight) + target / std::tan(std::abs(p.angle))) / c.grav);
  for (int i = 0; i < 2000; ++i) {
    try {
      const WellGeometry g = well_geometry(p, t, c);
      if (std::abs(g.obliqueMinimum - g.verticalMinimum) >= target) return t;
    } catch (const GeometryError&) {
    }
    t *= 1.001;
  }
  throw GeometryError("default_final_time: the wells never separate by 3 (w0 + w1) / 2");
}

Grid1D plan_eigen_grid(const GuideParams& p, const PhysicalConstants& c) {
  if (!(p.depthVertical > 0.0)) throw SetupError("plan_eigen_grid: U0 = 0, the vertical guide has no bound states");
  const double half = 4.0 * p.waistVertical;
  const double k_required = 2.0 * std::sqrt(2.0 * c.massRb87 * p.depthVertical) / c.hbar;
  const auto n = next_power_of_two(static_cast<std::size_t>(std::ceil(2.0 * half * k_required / std::numbers::pi)));
  return Grid1D(-half, half, std::max<std::size_t>(n, 16));
}

MeshPtr plan_propagation_mesh(const Grid1D& eigenGrid, const GuideParams& p, const PropagationSpec& spec,
                              const PhysicalConstants& c) {
  const double k_required =
      2.0 * std::sqrt(2.0 * c.massRb87 *
                      estimate_max_kinetic_energy(WaveField(Mesh::line(eigenGrid)), p, spec,
                                                  PropagationMode::Tdse1D, 0.0, c)) /
      c.hbar;
  double dx = eigenGrid.dx();
  while (std::numbers::pi / dx < k_required) dx *= 0.5;

  const double axis = oblique_axis_x(fall_height(spec.tFinal, c.grav), p);
  const double margin = 2.0 * std::max(p.waistVertical, p.waistOblique) + (spec.absorber ? spec.absorber->width : 0.0);
  const double need_lo = std::min({0.0, axis, eigenGrid.x_min() + margin}) - margin;
  const double need_hi = std::max({0.0, axis, eigenGrid.x_max() - margin}) + margin;
  const double center = std::round(0.5 * (need_lo + need_hi) / eigenGrid.dx()) * eigenGrid.dx();
  const double half_span = std::max(center - need_lo, need_hi - center);
  const auto n = next_power_of_two(static_cast<std::size_t>(std::ceil(2.0 * half_span / dx)));
  const double length = static_cast<double>(n) * dx;
  // Nodes of the eigen grid sit at integer multiples of its spacing, and so of dx.
  const double x_min = std::round((center - 0.5 * length) / dx) * dx;
  return Mesh::line(Grid1D(x_min, x_min + length, n));
}

EfficiencyResult splitting_efficiency(const ThermalEnsemble& ensemble, const EigenSet& eigen, const GuideParams& p,
                                      const PropagationSpec& spec, const EnsembleRunOptions& options,
                                      const PhysicalConstants& c) {
  if (spec.switchOffVerticalAt) throw ContractError("splitting_efficiency: spec must not switch the vertical beam off");
  return ensemble_efficiency(ensemble, eigen, p, spec, options, c);
}

EfficiencyResult deflection_efficiency(const ThermalEnsemble& ensemble, const EigenSet& eigen, const GuideParams& p,
                                       const PropagationSpec& spec, const EnsembleRunOptions& options,
                                       const PhysicalConstants& c) {
  const double t0 = crossing_time(p.crossingHeight, c.grav);
  if (!spec.switchOffVerticalAt || std::abs(*spec.switchOffVerticalAt - t0) > 1e-12 * std::max(t0, 1e-300)) {
    throw ContractError("deflection_efficiency: spec must switch the vertical beam off at crossing_time(z0)");
  }
  return ensemble_efficiency(ensemble, eigen, p, spec, options, c);
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw SetupError("sha256_hex: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

GuideParams sweep_point_params(SweepKind kind, double value, const GuideParams& base) {
  GuideParams p = base;
  if (kind == SweepKind::RatioU1U0) {
    p.depthOblique = value * base.depthVertical;
    p.intensityOblique.reset();
  } else {
    p.angle = value * units::deg;
  }
  return p;
}

PropagationSpec scenario_spec(const Scenario& s, const GuideParams& p, const PhysicalConstants& c) {
  PropagationSpec spec;
  spec.dt = s.dt;
  spec.tFinal = s.tFinal ? *s.tFinal : default_final_time(p, c);
  if (s.deflector) spec.switchOffVerticalAt = crossing_time(p.crossingHeight, c.grav);
  if (s.absorber) spec.absorber = Absorber{p.waistOblique, p.depthVertical + p.depthOblique};
  return spec;
}

namespace {

EfficiencyResult run_point(const Scenario& s, const GuideParams& p, const EigenSet& eigen,
                           const ThermalEnsemble& ensemble, const PhysicalConstants& c) {
  const PropagationSpec spec = scenario_spec(s, p, c);
  EnsembleRunOptions options;
  options.propagationMesh = plan_propagation_mesh(eigen.grid->x(), p, spec, c);
  options.jobs = s.jobs;
  options.cacheDir = s.cacheDir;
  return s.deflector ? deflection_efficiency(ensemble, eigen, p, spec, options, c)
                     : splitting_efficiency(ensemble, eigen, p, spec, options, c);
}

}  // namespace

EfficiencyResult run_scenario(const Scenario& s, const PhysicalConstants& c) {
  s.guide.validate();
  const EigenSet eigen = fgh_bound_states(plan_eigen_grid(s.guide, c), s.guide, s.maxStates, c);
  const ThermalEnsemble ensemble = boltzmann_weights(eigen, s.temperature, c);
  return run_point(s, s.guide, eigen, ensemble, c);
}

EfficiencyCurve sweep(SweepKind kind, std::span<const double> values, const Scenario& base,
                      const PhysicalConstants& c) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) throw ConfigError("sweep.values", "values must be strictly ascending");
  }
  base.guide.validate();
  EfficiencyCurve curve;
  curve.sweptName = kind == SweepKind::RatioU1U0 ? "ratio" : "gamma_deg";
  // The vertical-beam spectrum does not depend on either swept quantity.
  const EigenSet eigen = fgh_bound_states(plan_eigen_grid(base.guide, c), base.guide, base.maxStates, c);
  const ThermalEnsemble ensemble = boltzmann_weights(eigen, base.temperature, c);
  for (double value : values) {
    CurvePoint point;
    point.value = value;
    try {
      const GuideParams p = sweep_point_params(kind, value, base.guide);
      p.validate();
      const EfficiencyResult r = run_point(base, p, eigen, ensemble, c);
      point.efficiency = r.efficiency;
      if (r.cacheHit) ++curve.cacheHits;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      point.failure = e.what();
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

}  // namespace atomguide
