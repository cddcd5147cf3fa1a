#include <doctest.h>

#include <cmath>
#include <numbers>

#include "atomguide/constants.hpp"
#include "atomguide/eigen_ensemble.hpp"
#include "atomguide/errors.hpp"
#include "atomguide/potentials.hpp"
#include "atomguide/propagator.hpp"

using namespace atomguide;

namespace {

const PhysicalConstants kC;

WaveField packet(const MeshPtr& mesh, double x0, double sigma, double k0 = 0.0) {
  WaveField f = WaveField::sample(mesh, [&](double x, double) {
    return std::polar(std::exp(-(x - x0) * (x - x0) / (4.0 * sigma * sigma)), k0 * x);
  });
  f.normalize();
  return f;
}

double width(const WaveField& f) {
  const double mean = expectation_position(f, Axis::X);
  double s = 0.0;
  const auto rho = density(f);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = f.mesh().x().x(i) - mean;
    s += d * d * rho[i];
  }
  return std::sqrt(s * f.mesh().cell_volume());
}

GuideParams small_well(double depth_uK = 1.5, double waist = 15e-6) {
  GuideParams p;
  p.depthVertical = units::microkelvin(depth_uK);
  p.waistVertical = waist;
  p.waistOblique = waist;
  return p;
}

}  // namespace

TEST_CASE("a zero-length step is the identity") {
  const MeshPtr mesh = Mesh::line(Grid1D(-50e-6, 50e-6, 256));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  WaveField f = packet(mesh, 3e-6, 4e-6, 1e5);
  const WaveField before = f;
  strang_step(stepper, f, [](double x, double, double) { return x * 1e-25; }, 0.0, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == before[i]);
  CHECK_THROWS_AS(strang_step(stepper, f, [](double, double, double) { return 0.0; }, 0.0, -1.0), ContractError);
}

TEST_CASE("free Gaussian spreading") {
  const double sigma0 = 1e-6;
  const double tau = 2.0 * kC.massRb87 * sigma0 * sigma0 / kC.hbar;
  const MeshPtr mesh = Mesh::line(Grid1D(-40e-6, 40e-6, 1024));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  WaveField f = packet(mesh, 0.0, sigma0);
  const double dt = tau / 1000.0;
  const auto zero = [](double, double, double) { return 0.0; };
  for (int s = 0; s < 1000; ++s) strang_step(stepper, f, zero, s * dt, dt);
  const double t = 1000.0 * dt;
  const double expected = sigma0 * std::sqrt(1.0 + std::pow(kC.hbar * t / (2.0 * kC.massRb87 * sigma0 * sigma0), 2));
  CHECK(width(f) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("coherent state follows the classical oscillation") {
  const double u0 = units::microkelvin(1.5);
  const double w0 = 15e-6;
  const double om = harmonic_frequency(u0, w0, kC.massRb87);
  const double a = std::sqrt(kC.hbar / (kC.massRb87 * om));
  const double x0 = 3.0 * a;
  const MeshPtr mesh = Mesh::line(Grid1D(-30.0 * a, 30.0 * a, 512));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  WaveField f = packet(mesh, x0, a / std::sqrt(2.0));
  const auto v = [&](double x, double, double) { return harmonic_potential(x, u0, w0, kC.massRb87); };
  const double period = 2.0 * std::numbers::pi / om;
  const int steps = 4000;
  const double dt = period / steps;
  double worst = 0.0;
  for (int s = 1; s <= steps; ++s) {
    strang_step(stepper, f, v, (s - 1) * dt, dt);
    if (s % 100 == 0) {
      worst = std::max(worst, std::abs(expectation_position(f, Axis::X) - x0 * std::cos(om * s * dt)));
    }
  }
  CHECK(worst <= 1e-4 * x0);
}

TEST_CASE("imaginary time in a harmonic well gives the zero-point energy") {
  const double u0 = units::microkelvin(1.5);
  const double w0 = 15e-6;
  const double om = harmonic_frequency(u0, w0, kC.massRb87);
  const double a = std::sqrt(kC.hbar / (kC.massRb87 * om));
  const MeshPtr mesh = Mesh::line(Grid1D(-20.0 * a, 20.0 * a, 256));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  const auto v = sample_potential(
      *mesh, [&](double x, double, double) { return harmonic_potential(x, u0, w0, kC.massRb87); }, 0.0);
  RelaxOptions o;
  o.dtInitial = 0.05 / om;
  o.dtFinal = 2e-4 / om;
  o.tolerance = 1e-14;
  const RelaxResult r = imaginary_time_relax(packet(mesh, a, 2.0 * a), v, 0.0, o, stepper);
  CHECK(r.energy + u0 == doctest::Approx(0.5 * kC.hbar * om).epsilon(1e-6));
  CHECK(std::abs(norm(r.field) - 1.0) < 1e-12);
  SUBCASE("energy trace is non-increasing after the first steps at fixed dt") {
    RelaxOptions fixed = o;
    fixed.dtFinal = fixed.dtInitial;
    const RelaxResult single = imaginary_time_relax(packet(mesh, a, 2.0 * a), v, 0.0, fixed, stepper);
    const auto& trace = single.trace;
    bool monotone = true;
    for (std::size_t i = 11; i < trace.size(); ++i) {
      if (trace[i] > trace[i - 1] + 1e-12 * std::abs(trace[i - 1])) {
        monotone = false;
        break;
      }
    }
    CHECK(monotone);
  }
}

TEST_CASE("imaginary time agrees with the Fourier-grid ground state") {
  const GuideParams p = small_well();
  const Grid1D grid(-60e-6, 60e-6, 2048);
  const EigenSet e = fgh_bound_states(grid, p, 1);
  const MeshPtr mesh = Mesh::line(grid);
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  const auto v = sample_potential(*mesh, [&](double x, double, double) { return vertical_guide_potential(x, p); }, 0.0);
  const double om = harmonic_frequency(p.depthVertical, p.waistVertical, kC.massRb87);
  RelaxOptions o;
  o.dtInitial = 0.05 / om;
  o.dtFinal = 5e-4 / om;
  o.tolerance = 1e-13;
  const RelaxResult r = imaginary_time_relax(packet(mesh, 0.0, 2e-6), v, 0.0, o, stepper);
  CHECK(r.energy == doctest::Approx(e.energies[0]).epsilon(1e-4));
  CHECK(std::abs(r.energy - r.decayEnergy) <= 1e-6 * std::abs(r.energy));
}

TEST_CASE("property: linear real-time propagation conserves the norm") {
  const GuideParams p = small_well();
  const MeshPtr mesh = Mesh::line(Grid1D(-60e-6, 60e-6, 512));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  const auto v = sample_potential(*mesh, [&](double x, double, double) { return vertical_guide_potential(x, p); }, 0.0);
  const auto factors = stepper.half_step_factors(v, 10e-6);
  WaveField f = packet(mesh, 4e-6, 3e-6, 2e5);
  for (int s = 0; s < 10000; ++s) stepper.step_linear(f, factors, 10e-6);
  CHECK(std::abs(norm(f) - 1.0) <= 1e-9);
}

TEST_CASE("property: static potential conserves energy") {
  const GuideParams p = small_well();
  const MeshPtr mesh = Mesh::line(Grid1D(-60e-6, 60e-6, 512));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  const auto v = sample_potential(*mesh, [&](double x, double, double) { return vertical_guide_potential(x, p); }, 0.0);
  WaveField f = packet(mesh, 4e-6, 3e-6);
  const double e0 = gp_energy(stepper, f, v, 0.0);
  const auto factors = stepper.half_step_factors(v, 2e-6);
  for (int s = 0; s < 10000; ++s) stepper.step_linear(f, factors, 2e-6);
  CHECK(std::abs(gp_energy(stepper, f, v, 0.0) - e0) <= 1e-6 * std::abs(e0));
}

TEST_CASE("property: GPE real-time propagation conserves norm and energy") {
  const MeshPtr mesh = Mesh::plane(Grid1D(-8e-6, 8e-6, 128), Grid1D(-8e-6, 8e-6, 128));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  const GuideParams p = small_well(0.2, 11.3e-6);
  const auto v = sample_potential(
      *mesh, [&](double x, double z, double) { return -p.depthVertical * std::exp(-2.0 * (x * x + z * z) / 1.2769e-10); },
      0.0);
  WaveField f = WaveField::sample(mesh, [](double x, double z) {
    return Complex{std::exp(-((x - 0.5e-6) * (x - 0.5e-6) + z * z) / (2.0 * 0.6e-6 * 0.6e-6)), 0.0};
  });
  f.normalize();
  const double g = 2e-40;
  const double e0 = gp_energy(stepper, f, v, g);
  for (int s = 0; s < 3000; ++s) stepper.step(f, v, 5e-8, g);
  CHECK(std::abs(norm(f) - 1.0) <= 1e-8);
  CHECK(std::abs(gp_energy(stepper, f, v, g) - e0) <= 1e-5 * std::abs(e0));
}

TEST_CASE("property: absorber only removes norm") {
  GuideParams p;
  p.waistVertical = 15e-6;
  p.waistOblique = 15e-6;
  const MeshPtr mesh = Mesh::line(Grid1D(-40e-6, 40e-6, 2048));
  PropagationSpec spec;
  spec.dt = 2e-6;
  spec.tFinal = 4e-3;
  spec.absorber = Absorber{10e-6, units::microkelvin(1.0)};
  const PropagationResult r = propagate(packet(mesh, 10e-6, 2e-6, 2e7), p, spec, PropagationMode::Tdse1D, 0.0);
  REQUIRE(r.normHistory.size() > 10);
  for (std::size_t i = 1; i < r.normHistory.size(); ++i) {
    CHECK(r.normHistory[i].second <= r.normHistory[i - 1].second * (1.0 + 1e-13));
  }
  CHECK(r.lostFraction == doctest::Approx(1.0 - norm(r.finalField)).epsilon(1e-12));
  CHECK(r.lostFraction > 0.1);
  CHECK(r.lostFraction <= 1.0);
}

TEST_CASE("batch propagation is bit-identical to solo runs") {
  GuideParams p = small_well();
  p.depthOblique = units::microkelvin(3.0);
  p.waistOblique = 22.5e-6;
  p.crossingHeight = -50e-6;
  p.angle = 10.0 * units::deg;
  const MeshPtr mesh = Mesh::line(Grid1D(-100e-6, 100e-6, 8192));
  PropagationSpec spec;
  spec.dt = 10e-6;
  spec.tFinal = 2e-3;
  spec.absorber = Absorber{20e-6, p.depthVertical + p.depthOblique};
  std::vector<WaveField> fields = {packet(mesh, 0.0, 2e-6), packet(mesh, 1e-6, 3e-6, 1e5)};
  const auto batch = propagate_batch(fields, p, spec);
  for (std::size_t s = 0; s < fields.size(); ++s) {
    const PropagationResult solo = propagate(fields[s], p, spec, PropagationMode::Tdse1D, 0.0);
    bool same = true;
    for (std::size_t i = 0; i < mesh->size(); ++i) same = same && batch[s][i] == solo.finalField[i];
    CHECK(same);
  }
}

TEST_CASE("specification checks") {
  const MeshPtr mesh = Mesh::line(Grid1D(-40e-6, 40e-6, 256));
  PropagationSpec spec;
  spec.dt = 1e-5;
  spec.tFinal = 1e-3;
  CHECK_NOTHROW(spec.validate(*mesh));
  spec.switchOffVerticalAt = 2e-3;
  CHECK_THROWS_AS(spec.validate(*mesh), ContractError);
  spec.switchOffVerticalAt.reset();
  spec.absorber = Absorber{25e-6, 1e-30};
  CHECK_THROWS_AS(spec.validate(*mesh), ContractError);
  spec.absorber.reset();
  spec.dt = 0.0;
  CHECK_THROWS_AS(spec.validate(*mesh), ContractError);
}

TEST_CASE("switch-off time falls on a step boundary") {
  PropagationSpec spec;
  spec.dt = 10e-6;
  spec.tFinal = 10e-3;
  spec.switchOffVerticalAt = 4.51234e-3;
  const auto segments = step_schedule(spec);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].tStart == 0.0);
  CHECK(segments[0].dt * segments[0].steps == doctest::Approx(4.51234e-3).epsilon(1e-14));
  CHECK(segments[1].tStart == 4.51234e-3);
  CHECK(segments[0].dt <= spec.dt);
  CHECK(segments[1].dt <= spec.dt);
}

TEST_CASE("coarse grids are rejected with a point estimate") {
  GuideParams p = small_well();
  p.depthOblique = units::microkelvin(6.0);
  p.crossingHeight = -200e-6;
  p.angle = 10.0 * units::deg;
  const MeshPtr mesh = Mesh::line(Grid1D(-100e-6, 100e-6, 64));
  PropagationSpec spec;
  spec.dt = 1e-5;
  spec.tFinal = 20e-3;
  try {
    propagate(packet(mesh, 0.0, 5e-6), p, spec, PropagationMode::Tdse1D, 0.0);
    FAIL("expected a setup error");
  } catch (const SetupError& e) {
    CHECK(e.required_points() > 64);
    CHECK(is_power_of_two(e.required_points()));
  }
}

TEST_CASE("non-finite potentials raise a numeric fault") {
  const MeshPtr mesh = Mesh::line(Grid1D(-40e-6, 40e-6, 256));
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  WaveField f = packet(mesh, 0.0, 3e-6);
  CHECK_THROWS_AS(strang_step(stepper, f, [](double, double, double) { return std::nan(""); }, 0.0, 1e-6),
                  NumericFault);
}

TEST_CASE("free fall in two dimensions follows Ehrenfest") {
  GuideParams p;
  p.waistVertical = 10e-6;
  p.waistOblique = 10e-6;
  const MeshPtr mesh = Mesh::plane(Grid1D(-8e-6, 8e-6, 256), Grid1D(-12e-6, 4e-6, 256));
  WaveField f = WaveField::sample(mesh, [](double x, double z) {
    return Complex{std::exp(-(x * x + z * z) / (2.0 * 1e-12)), 0.0};
  });
  f.normalize();
  PropagationSpec spec;
  spec.dt = 1e-6;
  spec.tFinal = 1e-3;
  spec.snapshotEvery = 250;
  const PropagationResult r = propagate(f, p, spec, PropagationMode::Gpe2D, 0.0);
  CHECK(r.snapshots.size() == 5);
  for (const auto& s : r.snapshots) {
    if (s.t == 0.0) continue;
    CHECK(expectation_position(s.field, Axis::Z) == doctest::Approx(fall_height(s.t)).epsilon(1e-3));
  }
  CHECK(expectation_position(r.finalField, Axis::Z) == doctest::Approx(fall_height(1e-3)).epsilon(1e-3));
}
