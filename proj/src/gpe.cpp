#include "atomguide/gpe.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <string>
#include <thread>

#include "atomguide/errors.hpp"

namespace atomguide {

double g2d_coefficient(double omegaY, const PhysicalConstants& c) {
  if (!(omegaY > 0.0)) throw ContractError("g2d_coefficient: omega_y must be > 0");
  return 2.0 * c.hbar * c.scatteringLength * std::sqrt(2.0 * std::numbers::pi * c.hbar * omegaY / c.massRb87);
}

void GpeParams::validate() const {
  if (!(atomNumber >= 1.0)) throw ContractError("GpeParams: N must be >= 1");
  if (!(perpFrequency > 0.0)) throw ContractError("GpeParams: omega_y must be > 0");
  if (!(couplingG2D > 0.0)) throw ContractError("GpeParams: g2D must be > 0");
  guide.validate();
}

namespace {

// As GpeParams::validate but admitting g2D = 0 for the linear comparison mode.
void check_run_params(const GpeParams& gp, const std::string& where) {
  if (!(gp.atomNumber >= 1.0)) throw ContractError(where + ": N must be >= 1");
  if (!(gp.perpFrequency > 0.0)) throw ContractError(where + ": omega_y must be > 0");
  if (!(gp.couplingG2D >= 0.0)) throw ContractError(where + ": g2D must be >= 0");
  gp.guide.validate();
}

}  // namespace

GpeParams make_gpe_params(double atomNumber, double omegaY, const GuideParams& guide, const PhysicalConstants& c) {
  GpeParams gp;
  gp.atomNumber = atomNumber;
  gp.perpFrequency = omegaY;
  gp.couplingG2D = g2d_coefficient(omegaY, c);
  gp.guide = guide;
  return gp;
}

double isotropic_trap_potential(double x, double z, const GuideParams& p) {
  const double w = p.waistVertical;
  return -p.depthVertical * std::exp(-2.0 * (x * x + z * z) / (w * w));
}

double trap_frequency(const GpeParams& gp, const PhysicalConstants& c) {
  return harmonic_frequency(gp.guide.depthVertical, gp.guide.waistVertical, c.massRb87);
}

double tf_chemical_potential(double atomNumber, const GpeParams& gp, const PhysicalConstants& c) {
  (void)c;
  const double u0 = gp.guide.depthVertical;
  return -u0 + 2.0 / gp.guide.waistVertical * std::sqrt(gp.couplingG2D * u0 * atomNumber / std::numbers::pi);
}

double tf_radius(double atomNumber, const GpeParams& gp, const PhysicalConstants& c) {
  const double omega = trap_frequency(gp, c);
  const double excess = tf_chemical_potential(atomNumber, gp, c) + gp.guide.depthVertical;
  return std::sqrt(2.0 * std::max(excess, 0.0) / (c.massRb87 * omega * omega));
}

double tf_density(double r, double mu, const GpeParams& gp, const PhysicalConstants& c) {
  const double vh = harmonic_potential(r, gp.guide.depthVertical, gp.guide.waistVertical, c.massRb87);
  return std::max(0.0, (mu - vh) / gp.nonlinear());
}

namespace {

double oscillator_length(const GpeParams& gp, const PhysicalConstants& c) {
  return std::sqrt(c.hbar / (c.massRb87 * trap_frequency(gp, c)));
}

}  // namespace

double required_span(const GpeParams& gp, const PhysicalConstants& c) {
  return 4.0 * std::max(oscillator_length(gp, c), tf_radius(gp.atomNumber, gp, c));
}

double max_admissible_atom_number(const Grid2D& grid, const GpeParams& gp, const PhysicalConstants& c) {
  const double span = std::min(grid.x.length(), grid.z.length());
  const double r = span / 4.0;
  if (r < oscillator_length(gp, c)) return 0.0;
  // Invert tf_radius: mu_TF + U0 = m omega^2 r^2 / 2.
  const double omega = trap_frequency(gp, c);
  const double excess = 0.5 * c.massRb87 * omega * omega * r * r;
  const double u0 = gp.guide.depthVertical;
  const double w0 = gp.guide.waistVertical;
  const double root = excess * w0 / 2.0;
  return std::numbers::pi * root * root / (gp.couplingG2D * u0);
}

GroundState gpe_ground_state(const Grid2D& grid, const GpeParams& gp, const PhysicalConstants& c,
                             const GroundStateOptions& options) {
  check_run_params(gp, "gpe_ground_state");
  if (!(gp.guide.depthVertical > 0.0)) throw SetupError("gpe_ground_state: U0 = 0, the trap holds nothing");
  const double span = required_span(gp, c);
  for (const Grid1D* axis : {&grid.x, &grid.z}) {
    if (axis->length() < span) {
      const auto n = next_power_of_two(static_cast<std::size_t>(std::ceil(span / axis->dx())));
      throw SetupError("gpe_ground_state: grid spans " + std::to_string(axis->length()) + " m but needs " +
                           std::to_string(span) + " m (Thomas-Fermi radius " +
                           std::to_string(tf_radius(gp.atomNumber, gp, c)) + " m)",
                       n);
    }
  }
  const MeshPtr mesh = Mesh::plane(grid.x, grid.z);
  SplitStepPropagator stepper(mesh, c.massRb87, c.hbar);
  const auto potential = sample_potential(
      *mesh, [&](double x, double z, double) { return isotropic_trap_potential(x, z, gp.guide); }, 0.0);
  const double a = oscillator_length(gp, c);
  WaveField seed = WaveField::sample(mesh, [&](double x, double z) {
    return Complex{std::exp(-(x * x + z * z) / (2.0 * a * a)), 0.0};
  });

  const double omega = trap_frequency(gp, c);
  const double scale = std::max(c.hbar * omega, tf_chemical_potential(gp.atomNumber, gp, c) + gp.guide.depthVertical);
  RelaxOptions relax;
  relax.tolerance = options.tolerance;
  relax.maxSteps = options.maxSteps;
  relax.dtInitial = options.dtInitial * c.hbar / scale;
  relax.dtFinal = options.dtFinal * c.hbar / scale;
  relax.residualTolerance = options.relativeResidual * scale;

  RelaxResult r = imaginary_time_relax(std::move(seed), potential, gp.nonlinear(), relax, stepper);
  // The target was set from an estimate of mu + U0; tighten once against the value found.
  const double target = options.relativeResidual * std::abs(r.energy + gp.guide.depthVertical);
  std::size_t total = r.steps;
  for (int attempt = 0; r.residual > target && attempt < 3; ++attempt) {
    relax.dtInitial = relax.dtFinal * 0.5;
    relax.dtFinal = relax.dtInitial;
    relax.residualTolerance = target;
    relax.maxSteps = options.maxSteps > total ? options.maxSteps - total : 1;
    r = imaginary_time_relax(std::move(r.field), potential, gp.nonlinear(), relax, stepper);
    total += r.steps;
  }
  if (r.residual > target) {
    throw ConvergenceError("gpe_ground_state: residual " + std::to_string(r.residual) + " J above target " +
                               std::to_string(target) + " J",
                           r.trace);
  }
  return GroundState{std::move(r.field), r.energy, r.decayEnergy, r.residual, total};
}

MuCurve mu_curve(std::span<const double> atomNumbers, const Grid2D& grid, const GpeParams& base, std::size_t jobs,
                 const PhysicalConstants& c, const GroundStateOptions& options) {
  for (std::size_t i = 1; i < atomNumbers.size(); ++i) {
    if (!(atomNumbers[i] > atomNumbers[i - 1])) throw ContractError("mu_curve: N values must be strictly ascending");
  }
  MuCurve curve;
  curve.points.resize(atomNumbers.size());
  std::vector<std::exception_ptr> errors(atomNumbers.size());
  auto work = [&](std::size_t w, std::size_t workers) {
    for (std::size_t i = w; i < atomNumbers.size(); i += workers) {
      try {
        GpeParams gp = base;
        gp.atomNumber = atomNumbers[i];
        const GroundState g = gpe_ground_state(grid, gp, c, options);
        curve.points[i] = {atomNumbers[i], g.mu, tf_chemical_potential(atomNumbers[i], gp, c)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(atomNumbers.size(), 1));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return curve;
}

std::vector<double> log_spaced_atom_numbers(double nMax, std::size_t count) {
  if (!(nMax >= 1.0) || count == 0) throw ContractError("log_spaced_atom_numbers: need nMax >= 1 and count >= 1");
  if (count == 1) return {nMax};
  std::vector<double> out(count);
  const double top = std::log(nMax);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::exp(top * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = 1.0;
  out.back() = nMax;
  return out;
}

ShapeMetrics shape_metrics(const WaveField& field) {
  const Mesh& m = field.mesh();
  if (m.rank() != 2) throw ContractError("shape_metrics: 2D field required");
  const std::size_t nz = m.z().size();
  double n = 0.0, sx = 0.0, sz = 0.0;
  for (std::size_t i = 0; i < m.x().size(); ++i) {
    for (std::size_t j = 0; j < nz; ++j) {
      const double d = std::norm(field[i * nz + j]);
      n += d;
      sx += d * m.x().x(i);
      sz += d * m.z().x(j);
    }
  }
  ShapeMetrics s;
  s.meanX = sx / n;
  s.meanZ = sz / n;
  double cxx = 0.0, czz = 0.0, cxz = 0.0;
  for (std::size_t i = 0; i < m.x().size(); ++i) {
    const double dx = m.x().x(i) - s.meanX;
    for (std::size_t j = 0; j < nz; ++j) {
      const double d = std::norm(field[i * nz + j]);
      const double dz = m.z().x(j) - s.meanZ;
      cxx += d * dx * dx;
      czz += d * dz * dz;
      cxz += d * dx * dz;
    }
  }
  cxx /= n;
  czz /= n;
  cxz /= n;
  const double mean = 0.5 * (cxx + czz);
  const double diff = std::hypot(0.5 * (cxx - czz), cxz);
  const double big = mean + diff;
  const double small = std::max(mean - diff, 0.0);
  s.aspectRatio = small > 0.0 ? std::sqrt(big / small) : std::numeric_limits<double>::infinity();
  // Long axis direction (ux, uz); reported as the angle from +z toward -x.
  const double phi = 0.5 * std::atan2(2.0 * cxz, cxx - czz);  // from +x toward +z
  double ux = std::cos(phi);
  double uz = std::sin(phi);
  if (uz < 0.0 || (uz == 0.0 && ux > 0.0)) {
    ux = -ux;
    uz = -uz;
  }
  s.longAxisAngle = std::atan2(-ux, uz);
  return s;
}

double fraction_near_oblique_axis(const WaveField& field, const GuideParams& p, double halfWidth) {
  const Mesh& m = field.mesh();
  if (m.rank() != 2) throw ContractError("fraction_near_oblique_axis: 2D field required");
  const std::size_t nz = m.z().size();
  const double cg = std::cos(p.angle);
  const double sg = std::sin(p.angle);
  double inside = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < m.x().size(); ++i) {
    for (std::size_t j = 0; j < nz; ++j) {
      const double d = std::norm(field[i * nz + j]);
      total += d;
      // Perpendicular distance to the axis is the rotated coordinate of the oblique beam.
      if (std::abs(m.x().x(i) * cg + (m.z().x(j) - p.crossingHeight) * sg) <= halfWidth) inside += d;
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

double angle_to_oblique_axis(const ShapeMetrics& shape, const GuideParams& p) {
  double d = std::fmod(std::abs(shape.longAxisAngle - p.angle), std::numbers::pi);
  if (d > 0.5 * std::numbers::pi) d = std::numbers::pi - d;
  return d;
}

FallResult gpe_fall(const WaveField& phi0, const GpeParams& gp, const PropagationSpec& spec,
                    const PhysicalConstants& c) {
  if (phi0.mesh().rank() != 2) throw ContractError("gpe_fall: 2D initial field required");
  check_run_params(gp, "gpe_fall");
  FallResult out{propagate(phi0, gp.guide, spec, PropagationMode::Gpe2D, gp.nonlinear(), c), {}, {}, 0.0};
  const double half = 2.0 * gp.guide.waistOblique;
  auto sample = [&](double t, const WaveField& f) {
    WaveField unit = f;
    unit.normalize();
    out.samples.push_back({t, expectation_position(unit, Axis::Z), fraction_near_oblique_axis(f, gp.guide, half)});
  };
  for (const auto& s : out.propagation.snapshots) sample(s.t, s.field);
  if (out.samples.empty() || out.samples.back().t < spec.tFinal) sample(spec.tFinal, out.propagation.finalField);
  out.finalShape = shape_metrics(out.propagation.finalField);
  out.finalFractionOnObliqueAxis = fraction_near_oblique_axis(out.propagation.finalField, gp.guide, half);
  return out;
}

}  // namespace atomguide
