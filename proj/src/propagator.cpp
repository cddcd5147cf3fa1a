#include "atomguide/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace atomguide {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_size(std::span<const double> a, std::size_t n) { return a.empty() || a.size() == n; }

}  // namespace

void PropagationSpec::validate(const Mesh& mesh) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("PropagationSpec: dt must be > 0");
  if (!(tFinal >= dt)) throw ContractError("PropagationSpec: tFinal must be >= dt");
  if (switchOffVerticalAt && !(*switchOffVerticalAt > 0.0 && *switchOffVerticalAt < tFinal)) {
    throw ContractError("PropagationSpec: switch-off time must lie inside (0, tFinal)");
  }
  if (absorber) {
    if (!(absorber->width > 0.0) || !(absorber->strength >= 0.0)) {
      throw ContractError("PropagationSpec: absorber needs width > 0 and strength >= 0");
    }
    for (int a = 0; a < mesh.rank(); ++a) {
      if (!(absorber->width < 0.25 * mesh.axis(a).length())) {
        throw ContractError("PropagationSpec: absorber width must be below a quarter of the domain");
      }
    }
  }
}

SplitStepPropagator::SplitStepPropagator(MeshPtr mesh, double mass, double hbar)
    : mesh_(std::move(mesh)), fft_(*mesh_), mass_(mass), hbar_(hbar) {
  if (!(mass > 0.0) || !(hbar > 0.0)) throw ContractError("SplitStepPropagator: mass and hbar must be > 0");
  const Mesh& m = *mesh_;
  kinetic_.resize(m.size());
  const double c = hbar * hbar / (2.0 * mass);
  if (m.rank() == 1) {
    const auto k = m.x().wavenumbers();
    for (std::size_t i = 0; i < m.size(); ++i) kinetic_[i] = c * k[i] * k[i];
  } else {
    const auto kx = m.x().wavenumbers();
    const auto kz = m.z().wavenumbers();
    const std::size_t nz = kz.size();
    for (std::size_t i = 0; i < kx.size(); ++i)
      for (std::size_t j = 0; j < nz; ++j) kinetic_[i * nz + j] = c * (kx[i] * kx[i] + kz[j] * kz[j]);
  }
  maxKinetic_ = *std::max_element(kinetic_.begin(), kinetic_.end());
}

const ComplexBuffer& SplitStepPropagator::kinetic_factors(double dt, bool imaginary) {
  if (dt == cachedDt_ && imaginary == cachedImaginary_) return kineticFactors_;
  const double inv_n = 1.0 / static_cast<double>(kinetic_.size());
  kineticFactors_.resize(kinetic_.size());
  for (std::size_t i = 0; i < kinetic_.size(); ++i) {
    const double phase = kinetic_[i] * dt / hbar_;
    kineticFactors_[i] = imaginary ? Complex{std::exp(-phase) * inv_n, 0.0} : std::polar(inv_n, -phase);
  }
  cachedDt_ = dt;
  cachedImaginary_ = imaginary;
  return kineticFactors_;
}

double SplitStepPropagator::step(WaveField& psi, std::span<const double> potential, double dt, double nonlinear,
                                 std::span<const double> damping) {
  const std::size_t n = psi.size();
  if (potential.size() != n || !same_size(damping, n)) throw ContractError("step: array size mismatch");
  auto a = psi.amplitudes();
  const double half = 0.5 * dt / hbar_;
  auto potential_half = [&](std::size_t i) {
    const double v = potential[i] + nonlinear * std::norm(a[i]);
    const double mag = damping.empty() ? 1.0 : std::exp(-damping[i] * half);
    a[i] *= std::polar(mag, -v * half);
  };
  for (std::size_t i = 0; i < n; ++i) potential_half(i);
  fft_.forward(a);
  const auto& kf = kinetic_factors(dt, false);
  for (std::size_t i = 0; i < n; ++i) a[i] *= kf[i];
  fft_.backward(a);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    potential_half(i);
    sum += std::norm(a[i]);
  }
  return sum * mesh_->cell_volume();
}

ComplexBuffer SplitStepPropagator::half_step_factors(std::span<const double> potential, double dt,
                                                     std::span<const double> damping) const {
  const std::size_t n = potential.size();
  if (n != mesh_->size() || !same_size(damping, n)) throw ContractError("half_step_factors: array size mismatch");
  const double half = 0.5 * dt / hbar_;
  ComplexBuffer f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = damping.empty() ? 1.0 : std::exp(-damping[i] * half);
    f[i] = std::polar(mag, -potential[i] * half);
  }
  return f;
}

double SplitStepPropagator::step_linear(WaveField& psi, std::span<const Complex> halfFactors, double dt) {
  const std::size_t n = psi.size();
  if (halfFactors.size() != n) throw ContractError("step_linear: array size mismatch");
  auto a = psi.amplitudes();
  for (std::size_t i = 0; i < n; ++i) a[i] *= halfFactors[i];
  fft_.forward(a);
  const auto& kf = kinetic_factors(dt, false);
  for (std::size_t i = 0; i < n; ++i) a[i] *= kf[i];
  fft_.backward(a);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] *= halfFactors[i];
    sum += std::norm(a[i]);
  }
  return sum * mesh_->cell_volume();
}

double SplitStepPropagator::imaginary_step(WaveField& psi, std::span<const double> potential, double dtau,
                                           double nonlinear) {
  const std::size_t n = psi.size();
  if (potential.size() != n) throw ContractError("imaginary_step: array size mismatch");
  auto a = psi.amplitudes();
  const double half = 0.5 * dtau / hbar_;
  const double cell = mesh_->cell_volume();
  stepPotential_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    stepPotential_[i] = potential[i] + nonlinear * std::norm(a[i]);
    a[i] *= std::exp(-stepPotential_[i] * half);
  }
  fft_.forward(a);
  const auto& kf = kinetic_factors(dtau, true);
  for (std::size_t i = 0; i < n; ++i) a[i] *= kf[i].real();
  fft_.backward(a);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] *= std::exp(-stepPotential_[i] * half);
    sum += std::norm(a[i]);
  }
  return sum * cell;
}

double SplitStepPropagator::kinetic_energy(const WaveField& psi) {
  ComplexBuffer work(psi.amplitudes().begin(), psi.amplitudes().end());
  fft_.forward(work);
  double sum = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) sum += kinetic_[i] * std::norm(work[i]);
  return sum * mesh_->cell_volume() / static_cast<double>(work.size());
}

WaveField SplitStepPropagator::apply_hamiltonian(const WaveField& psi, std::span<const double> potential,
                                                 double nonlinear) {
  const std::size_t n = psi.size();
  if (potential.size() != n) throw ContractError("apply_hamiltonian: array size mismatch");
  ComplexBuffer work(psi.amplitudes().begin(), psi.amplitudes().end());
  fft_.forward(work);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) work[i] *= kinetic_[i] * inv_n;
  fft_.backward(work);
  for (std::size_t i = 0; i < n; ++i) work[i] += (potential[i] + nonlinear * std::norm(psi[i])) * psi[i];
  return WaveField(psi.mesh_ptr(), std::move(work));
}

std::vector<double> sample_potential(const Mesh& mesh, const PotentialFunction& v, double t) {
  std::vector<double> out(mesh.size());
  if (mesh.rank() == 1) {
    for (std::size_t i = 0; i < mesh.size(); ++i) out[i] = v(mesh.x().x(i), 0.0, t);
  } else {
    const std::size_t nz = mesh.z().size();
    for (std::size_t i = 0; i < mesh.x().size(); ++i)
      for (std::size_t j = 0; j < nz; ++j) out[i * nz + j] = v(mesh.x().x(i), mesh.z().x(j), t);
  }
  return out;
}

namespace {

std::vector<double> axis_damping(const Grid1D& g, const Absorber& a) {
  std::vector<double> w(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = std::min(g.x(i) - g.x_min(), g.x_max() - g.x(i));
    if (d < a.width) {
      const double c = std::cos(0.5 * std::numbers::pi * d / a.width);
      w[i] = a.strength * c * c;
    }
  }
  return w;
}

}  // namespace

std::vector<double> absorber_profile(const Mesh& mesh, const std::optional<Absorber>& absorber) {
  std::vector<double> out(mesh.size(), 0.0);
  if (!absorber) return out;
  const auto wx = axis_damping(mesh.x(), *absorber);
  if (mesh.rank() == 1) return wx;
  const auto wz = axis_damping(mesh.z(), *absorber);
  const std::size_t nz = wz.size();
  for (std::size_t i = 0; i < wx.size(); ++i)
    for (std::size_t j = 0; j < nz; ++j) out[i * nz + j] = std::max(wx[i], wz[j]);
  return out;
}

void strang_step(SplitStepPropagator& stepper, WaveField& psi, const PotentialFunction& potential, double t,
                 double dt, double nonlinear) {
  if (dt < 0.0) throw ContractError("strang_step: dt must be >= 0");
  if (dt == 0.0) return;
  const auto v = sample_potential(stepper.mesh(), potential, t + 0.5 * dt);
  const double n = stepper.step(psi, v, dt, nonlinear);
  if (!std::isfinite(n)) throw NumericFault("strang_step: non-finite field after step", 0);
}

PotentialFunction mode_potential(PropagationMode mode, const GuideParams& p, const PropagationSpec& spec,
                                 const PhysicalConstants& c) {
  const std::optional<double> off = spec.switchOffVerticalAt;
  GuideParams without_vertical = p;
  without_vertical.depthVertical = 0.0;
  if (mode == PropagationMode::Tdse1D) {
    return [p, without_vertical, off, g = c.grav](double x, double, double t) {
      const GuideParams& q = (off && t > *off) ? without_vertical : p;
      return effective_potential(x, t, q, g);
    };
  }
  return [p, without_vertical, off, mg = c.massRb87 * c.grav](double x, double z, double t) {
    const GuideParams& q = (off && t > *off) ? without_vertical : p;
    return guide_potential_2d(x, z, q) + mg * z;
  };
}

double estimate_max_kinetic_energy(const WaveField& field0, const GuideParams& p, const PropagationSpec& spec,
                                   PropagationMode mode, double nonlinear, const PhysicalConstants& c) {
  const double m = c.massRb87;
  if (mode == PropagationMode::Tdse1D) {
    const double v_well = c.grav * spec.tFinal * std::tan(p.angle);
    return p.depthVertical + p.depthOblique + 0.5 * m * v_well * v_well;
  }
  // Potential drop available to the cloud plus its fall, mean-field and initial kinetic energy.
  const Mesh& mesh = field0.mesh();
  const auto rho = density(field0);
  const double peak = *std::max_element(rho.begin(), rho.end());
  const auto v = sample_potential(mesh, [&](double x, double z, double) { return guide_potential_2d(x, z, p); }, 0.0);
  double v_max_support = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (rho[i] >= 1e-6 * peak) v_max_support = std::max(v_max_support, v[i]);
  const double v_min = -(p.depthVertical + p.depthOblique);
  const double fall = m * c.grav * std::abs(fall_height(spec.tFinal, c.grav));
  SplitStepPropagator stepper(field0.mesh_ptr(), m, c.hbar);
  return (v_max_support - v_min) + fall + std::abs(nonlinear) * peak + stepper.kinetic_energy(field0);
}

void check_resolution(const Mesh& mesh, double estimatedMaxKinetic, const PhysicalConstants& c) {
  const double e = std::max(estimatedMaxKinetic, 0.0);
  const double k_required = 2.0 * std::sqrt(2.0 * c.massRb87 * e) / c.hbar;
  for (int a = 0; a < mesh.rank(); ++a) {
    const Grid1D& g = mesh.axis(a);
    if (g.k_max() < k_required) {
      const double dx_required = std::numbers::pi / k_required;
      const auto n = next_power_of_two(static_cast<std::size_t>(std::ceil(g.length() / dx_required)));
      throw SetupError("grid too coarse on axis " + std::to_string(a) + ": need nPoints >= " + std::to_string(n) +
                           " to represent 4x the estimated maximum kinetic energy",
                       n);
    }
  }
}

std::vector<StepSegment> step_schedule(const PropagationSpec& spec) {
  auto segment = [&](double t0, double t1) {
    const double span = t1 - t0;
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / spec.dt - 1e-9)));
    return StepSegment{t0, span / static_cast<double>(steps), steps};
  };
  if (spec.switchOffVerticalAt) {
    return {segment(0.0, *spec.switchOffVerticalAt), segment(*spec.switchOffVerticalAt, spec.tFinal)};
  }
  return {segment(0.0, spec.tFinal)};
}

namespace {

/// Samples the free-fall potential quickly: the vertical part is cached per switch state.
class EffectivePotentialSampler {
 public:
  EffectivePotentialSampler(const Mesh& mesh, const GuideParams& p, const PropagationSpec& spec, double grav)
      : mesh_(mesh), p_(p), off_(spec.switchOffVerticalAt), grav_(grav), values_(mesh.size()) {
    vertical_.resize(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i) vertical_[i] = vertical_guide_potential(mesh.x().x(i), p);
  }

  std::span<const double> at(double t) {
    const bool vertical_on = !(off_ && t > *off_);
    const double z = fall_height(t, grav_);
    for (std::size_t i = 0; i < mesh_.size(); ++i) {
      const double o = oblique_guide_potential(mesh_.x().x(i), z, p_);
      values_[i] = vertical_on ? vertical_[i] + o : o;
    }
    return values_;
  }

 private:
  const Mesh& mesh_;
  GuideParams p_;
  std::optional<double> off_;
  double grav_;
  std::vector<double> vertical_;
  std::vector<double> values_;
};

}  // namespace

PropagationResult propagate(const WaveField& field0, const GuideParams& p, const PropagationSpec& spec,
                            PropagationMode mode, double nonlinear, const PhysicalConstants& c) {
  const Mesh& mesh = field0.mesh();
  p.validate();
  spec.validate(mesh);
  if (mode == PropagationMode::Tdse1D && mesh.rank() != 1) throw ContractError("propagate: Tdse1D needs a 1D mesh");
  if (mode == PropagationMode::Gpe2D && mesh.rank() != 2) throw ContractError("propagate: Gpe2D needs a 2D mesh");
  check_resolution(mesh, estimate_max_kinetic_energy(field0, p, spec, mode, nonlinear, c), c);

  const double norm0 = norm(field0);
  SplitStepPropagator stepper(field0.mesh_ptr(), c.massRb87, c.hbar);
  const auto damping = absorber_profile(mesh, spec.absorber);
  const bool damped = spec.absorber.has_value();
  const auto potential_fn = mode_potential(mode, p, spec, c);
  EffectivePotentialSampler sampler(mesh, p, spec, c.grav);

  PropagationResult result{field0, {}, {}, 0.0};
  WaveField& psi = result.finalField;
  std::shared_ptr<const Snapshot> last_snapshot;
  auto record = [&](double t) {
    result.snapshots.push_back({t, psi});
    last_snapshot = std::make_shared<const Snapshot>(result.snapshots.back());
  };
  result.normHistory.emplace_back(0.0, norm0);
  if (spec.snapshotEvery > 0) record(0.0);

  long step_index = 0;
  for (const StepSegment& seg : step_schedule(spec)) {
    std::vector<double> static_potential;
    if (mode == PropagationMode::Gpe2D) {
      static_potential = sample_potential(mesh, potential_fn, seg.tStart + 0.5 * seg.dt);
    }
    for (std::size_t s = 0; s < seg.steps; ++s) {
      const double t = seg.tStart + static_cast<double>(s) * seg.dt;
      double n = kNaN;
      if (mode == PropagationMode::Tdse1D && nonlinear == 0.0) {
        const auto v = sampler.at(t + 0.5 * seg.dt);
        const auto factors = stepper.half_step_factors(v, seg.dt, damped ? std::span<const double>(damping)
                                                                           : std::span<const double>{});
        n = stepper.step_linear(psi, factors, seg.dt);
      } else if (mode == PropagationMode::Tdse1D) {
        const auto v = sampler.at(t + 0.5 * seg.dt);
        n = stepper.step(psi, v, seg.dt, nonlinear, damped ? std::span<const double>(damping) : std::span<const double>{});
      } else {
        n = stepper.step(psi, static_potential, seg.dt, nonlinear,
                         damped ? std::span<const double>(damping) : std::span<const double>{});
      }
      ++step_index;
      const double t_end = t + seg.dt;
      if (!std::isfinite(n)) {
        throw PropagationFault("propagate: non-finite field at step " + std::to_string(step_index) +
                                   " (t = " + std::to_string(t_end) + " s)",
                               step_index, last_snapshot);
      }
      result.normHistory.emplace_back(t_end, n);
      if (spec.snapshotEvery > 0 && step_index % static_cast<long>(spec.snapshotEvery) == 0) record(t_end);
    }
  }
  const double final_norm = result.normHistory.back().second;
  result.lostFraction = std::clamp(1.0 - final_norm / norm0, 0.0, 1.0);
  return result;
}

std::vector<WaveField> propagate_batch(std::vector<WaveField> fields, const GuideParams& p,
                                       const PropagationSpec& spec, const PhysicalConstants& c) {
  if (fields.empty()) return fields;
  const MeshPtr mesh = fields.front().mesh_ptr();
  for (const auto& f : fields)
    if (!(f.mesh() == *mesh)) throw ContractError("propagate_batch: all fields must share one grid");
  if (mesh->rank() != 1) throw ContractError("propagate_batch: needs a 1D mesh");
  p.validate();
  spec.validate(*mesh);
  check_resolution(*mesh, estimate_max_kinetic_energy(fields.front(), p, spec, PropagationMode::Tdse1D, 0.0, c), c);

  SplitStepPropagator stepper(mesh, c.massRb87, c.hbar);
  const auto damping = absorber_profile(*mesh, spec.absorber);
  const bool damped = spec.absorber.has_value();
  EffectivePotentialSampler sampler(*mesh, p, spec, c.grav);
  long step_index = 0;
  for (const StepSegment& seg : step_schedule(spec)) {
    for (std::size_t s = 0; s < seg.steps; ++s) {
      const double t = seg.tStart + static_cast<double>(s) * seg.dt;
      const auto v = sampler.at(t + 0.5 * seg.dt);
      const auto factors =
          stepper.half_step_factors(v, seg.dt, damped ? std::span<const double>(damping) : std::span<const double>{});
      ++step_index;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        const double n = stepper.step_linear(fields[k], factors, seg.dt);
        if (!std::isfinite(n)) {
          throw NumericFault("propagate_batch: non-finite field for member " + std::to_string(k) + " at step " +
                                 std::to_string(step_index),
                             step_index);
        }
      }
    }
  }
  return fields;
}

double default_time_step(const SplitStepPropagator& stepper, std::span<const double> potential) {
  double vmax = 0.0;
  for (double v : potential) vmax = std::max(vmax, std::abs(v));
  return 0.1 * stepper.hbar() / std::max(vmax, stepper.max_kinetic_energy());
}

double gp_energy(SplitStepPropagator& stepper, const WaveField& psi, std::span<const double> potential,
                 double nonlinear) {
  double pot = 0.0;
  double quartic = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double r = std::norm(psi[i]);
    pot += potential[i] * r;
    quartic += r * r;
  }
  const double cell = psi.mesh().cell_volume();
  return stepper.kinetic_energy(psi) + pot * cell + 0.5 * nonlinear * quartic * cell;
}

double chemical_potential(SplitStepPropagator& stepper, const WaveField& psi, std::span<const double> potential,
                          double nonlinear) {
  double pot = 0.0;
  double quartic = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double r = std::norm(psi[i]);
    pot += potential[i] * r;
    quartic += r * r;
  }
  const double cell = psi.mesh().cell_volume();
  return stepper.kinetic_energy(psi) + pot * cell + nonlinear * quartic * cell;
}

namespace {

double residual_norm(SplitStepPropagator& stepper, const WaveField& psi, std::span<const double> potential,
                     double nonlinear, double mu) {
  const WaveField h = stepper.apply_hamiltonian(psi, potential, nonlinear);
  double sum = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) sum += std::norm(h[i] - mu * psi[i]);
  return std::sqrt(sum * psi.mesh().cell_volume());
}

}  // namespace

RelaxResult imaginary_time_relax(WaveField seed, std::span<const double> potential, double nonlinear,
                                 const RelaxOptions& options, SplitStepPropagator& stepper) {
  if (!(seed.mesh() == stepper.mesh())) throw ContractError("imaginary_time_relax: seed on a different grid");
  if (potential.size() != seed.size()) throw ContractError("imaginary_time_relax: potential size mismatch");
  seed.normalize();

  const double vmin = *std::min_element(potential.begin(), potential.end());
  std::vector<double> shifted(potential.begin(), potential.end());
  for (double& v : shifted) v -= vmin;

  const double dt_initial = options.dtInitial > 0.0 ? options.dtInitial : default_time_step(stepper, potential);
  const double dt_final = options.dtFinal > 0.0 ? std::min(options.dtFinal, dt_initial) : dt_initial;
  const double refine = std::max(options.refineFactor, 1.0 + 1e-9);

  RelaxResult out{std::move(seed), 0.0, 0.0, 0.0, {}, 0};
  WaveField& psi = out.field;
  double dt = dt_initial;
  while (true) {
    const bool final_stage = dt <= dt_final * (1.0 + 1e-12);
    double previous = kNaN;
    std::size_t since_residual = 0;
    double last_residual = kInf;
    bool stage_done = false;
    while (!stage_done) {
      if (out.steps >= options.maxSteps) {
        throw ConvergenceError("imaginary_time_relax: no convergence within " + std::to_string(options.maxSteps) +
                                   " steps",
                               out.trace);
      }
      const double n = stepper.imaginary_step(psi, shifted, dt, nonlinear);
      if (!std::isfinite(n) || !(n > 0.0)) {
        throw NumericFault("imaginary_time_relax: field collapsed at step " + std::to_string(out.steps),
                           static_cast<long>(out.steps));
      }
      psi.scale(1.0 / std::sqrt(n));
      const double lambda = -stepper.hbar() / (2.0 * dt) * std::log(n) + vmin;
      out.trace.push_back(lambda);
      ++out.steps;
      ++since_residual;
      const bool energy_converged =
          std::isfinite(previous) && std::abs(lambda - previous) <= options.tolerance * std::abs(lambda);
      previous = lambda;
      if (!energy_converged) continue;
      if (!final_stage) {
        stage_done = true;
      } else if (options.residualTolerance <= 0.0) {
        stage_done = true;
      } else if (since_residual >= options.residualEvery) {
        since_residual = 0;
        const double mu = chemical_potential(stepper, psi, potential, nonlinear);
        const double residual = residual_norm(stepper, psi, potential, nonlinear, mu);
        // Stop at the target or at the floor set by dt.
        if (residual <= options.residualTolerance || residual >= 0.999 * last_residual) stage_done = true;
        last_residual = residual;
      }
    }
    if (final_stage) break;
    dt = std::max(dt / refine, dt_final);
  }
  out.decayEnergy = out.trace.back();
  out.energy = chemical_potential(stepper, psi, potential, nonlinear);
  out.residual = residual_norm(stepper, psi, potential, nonlinear, out.energy);
  return out;
}

}  // namespace atomguide
