#include <doctest.h>

#include <cmath>
#include <numbers>

#include "atomguide/constants.hpp"
#include "atomguide/errors.hpp"
#include "atomguide/gpe.hpp"
#include "oracles/quadrature.hpp"

using namespace atomguide;

namespace {

const PhysicalConstants kC;

// U0 = 10 uK, w0 = 30 um trap with omega_y = 10 omega.
GpeParams trap(double atomNumber) {
  GuideParams g;
  g.depthVertical = units::microkelvin(10.0);
  g.waistVertical = 30e-6;
  g.waistOblique = 30e-6;
  const double om = harmonic_frequency(g.depthVertical, g.waistVertical, kC.massRb87);
  return make_gpe_params(atomNumber, 10.0 * om, g);
}

Grid2D small_grid(double half = 12e-6, std::size_t n = 128) { return {Grid1D(-half, half, n), Grid1D(-half, half, n)}; }

WaveField ellipse(const MeshPtr& mesh, double sLong, double sShort, double angle, double x0, double z0) {
  // Long axis at `angle` from +z toward -x.
  const double ux = -std::sin(angle);
  const double uz = std::cos(angle);
  WaveField f = WaveField::sample(mesh, [&](double x, double z) {
    const double a = (x - x0) * ux + (z - z0) * uz;
    const double b = -(x - x0) * uz + (z - z0) * ux;
    return Complex{std::exp(-a * a / (4.0 * sLong * sLong) - b * b / (4.0 * sShort * sShort)), 0.0};
  });
  f.normalize();
  return f;
}

}  // namespace

TEST_CASE("two-dimensional coupling") {
  const double om = harmonic_frequency(units::microkelvin(10.0), 30e-6, kC.massRb87);
  CHECK(g2d_coefficient(10.0 * om) == doctest::Approx(1.0856233405663343e-44).epsilon(1e-12));
  CHECK(g2d_coefficient(40.0 * om) == doctest::Approx(2.0 * g2d_coefficient(10.0 * om)).epsilon(1e-14));
  PhysicalConstants noScattering;
  noScattering.scatteringLength = 0.0;
  CHECK(g2d_coefficient(10.0 * om, noScattering) == 0.0);
  PhysicalConstants doubled;
  doubled.scatteringLength = 2.0 * kC.scatteringLength;
  CHECK(g2d_coefficient(om, doubled) == doctest::Approx(2.0 * g2d_coefficient(om)).epsilon(1e-14));
  CHECK_THROWS_AS(g2d_coefficient(0.0), ContractError);
}

TEST_CASE("parameter validation") {
  GpeParams gp = trap(100.0);
  CHECK_NOTHROW(gp.validate());
  CHECK(gp.nonlinear() == 100.0 * gp.couplingG2D);
  gp.atomNumber = 0.5;
  CHECK_THROWS_AS(gp.validate(), ContractError);
  gp = trap(100.0);
  gp.couplingG2D = 0.0;
  CHECK_THROWS_AS(gp.validate(), ContractError);
}

TEST_CASE("trap potential and frequency") {
  const GpeParams gp = trap(1.0);
  const GuideParams& g = gp.guide;
  CHECK(isotropic_trap_potential(0.0, 0.0, g) == -g.depthVertical);
  CHECK(isotropic_trap_potential(3e-6, 4e-6, g) == doctest::Approx(vertical_guide_potential(5e-6, g)).epsilon(1e-14));
  CHECK(trap_frequency(gp) == doctest::Approx(2062.021269954036).epsilon(1e-12));
}

TEST_CASE("Thomas-Fermi profile") {
  const GpeParams gp = trap(2e4);
  CHECK(tf_chemical_potential(2e4, gp) == doctest::Approx(-1.3155266551488954e-28).epsilon(1e-12));
  const double mu = tf_chemical_potential(2e4, gp);
  const double r = tf_radius(2e4, gp);
  CHECK(tf_density(r * (1.0 + 1e-9), mu, gp) == 0.0);
  CHECK(tf_density(0.99 * r, mu, gp) > 0.0);
  const double integral = oracle::simpson(
      [&](double rr) { return 2.0 * std::numbers::pi * rr * tf_density(rr, mu, gp); }, 0.0, r, 20000);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  SUBCASE("property: TF excess over the trap floor scales as sqrt(N)") {
    for (double n : {10.0, 1e3, 5e4}) {
      const double ratio = (tf_chemical_potential(4.0 * n, gp) + gp.guide.depthVertical) /
                           (tf_chemical_potential(n, gp) + gp.guide.depthVertical);
      CHECK(ratio == doctest::Approx(2.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("admissible atom number") {
  const Grid2D grid = small_grid(12e-6, 256);
  const double nmax = max_admissible_atom_number(grid, trap(1.0));
  CHECK(nmax > 1e4);
  CHECK(required_span(trap(nmax)) == doctest::Approx(24e-6).epsilon(1e-9));
  CHECK(required_span(trap(0.5 * nmax)) < 24e-6);
  CHECK(max_admissible_atom_number(small_grid(1e-7, 16), trap(1.0)) == 0.0);
}

TEST_CASE("log-spaced atom numbers") {
  const auto n = log_spaced_atom_numbers(1e4, 5);
  REQUIRE(n.size() == 5);
  CHECK(n.front() == 1.0);
  CHECK(n.back() == 1e4);
  CHECK(n[2] == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(log_spaced_atom_numbers(30.0, 1) == std::vector<double>{30.0});
  CHECK_THROWS_AS(log_spaced_atom_numbers(0.5, 3), ContractError);
}

TEST_CASE("linear ground state is the two-dimensional zero-point level") {
  GpeParams gp = trap(1.0);
  gp.couplingG2D = 0.0;
  const GroundState s = gpe_ground_state(small_grid(), gp);
  const double hw = kC.hbar * trap_frequency(gp);
  // Gaussian anharmonicity shifts the level by O(hbar omega / U0) ~ 1e-3.
  CHECK((s.mu + gp.guide.depthVertical) / hw == doctest::Approx(1.0).epsilon(3e-3));
  CHECK((s.mu + gp.guide.depthVertical) / hw < 1.0);
  const ShapeMetrics shape = shape_metrics(s.field);
  CHECK(shape.aspectRatio == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(shape.meanX) < 1e-12);
  CHECK(std::abs(shape.meanZ) < 1e-12);
}

TEST_CASE("interacting ground state") {
  const Grid2D grid = small_grid();
  const GpeParams gp = trap(2000.0);
  const GroundState s = gpe_ground_state(grid, gp);
  CHECK(std::abs(norm(s.field) - 1.0) < 1e-12);

  const MeshPtr mesh = s.field.mesh_ptr();
  SplitStepPropagator stepper(mesh, kC.massRb87, kC.hbar);
  const auto v = sample_potential(
      *mesh, [&](double x, double z, double) { return isotropic_trap_potential(x, z, gp.guide); }, 0.0);
  SUBCASE("mu is the stationary eigenvalue") {
    CHECK(chemical_potential(stepper, s.field, v, gp.nonlinear()) == doctest::Approx(s.mu).epsilon(1e-12));
    CHECK(std::abs(s.decayEnergy - s.mu) <= 1e-6 * std::abs(s.mu + gp.guide.depthVertical));
    CHECK(s.residual <= 1e-5 * std::abs(s.mu + gp.guide.depthVertical));
  }
  SUBCASE("mu exceeds the energy per particle by half the interaction energy") {
    double quartic = 0.0;
    for (std::size_t i = 0; i < s.field.size(); ++i) quartic += std::pow(std::norm(s.field[i]), 2);
    quartic *= mesh->cell_volume();
    const double e = gp_energy(stepper, s.field, v, gp.nonlinear());
    CHECK(s.mu - e == doctest::Approx(0.5 * gp.nonlinear() * quartic).epsilon(1e-10));
  }
  SUBCASE("property: interactions raise mu above the linear level") {
    GpeParams linear = gp;
    linear.couplingG2D = 0.0;
    CHECK(s.mu > gpe_ground_state(grid, linear).mu);
  }
  SUBCASE("property: the ground state is isotropic and centred") {
    const ShapeMetrics shape = shape_metrics(s.field);
    CHECK(shape.aspectRatio == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(shape.meanX) < 1e-12);
  }
}

TEST_CASE("property: mu grows with the atom number") {
  const std::vector<double> ns{1.0, 30.0, 1000.0, 8000.0};
  const MuCurve c = mu_curve(ns, small_grid(), trap(1.0), 2);
  REQUIRE(c.points.size() == ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    CHECK(c.points[i].atomNumber == ns[i]);
    CHECK(c.points[i].muTF == tf_chemical_potential(ns[i], trap(ns[i])));
    if (i > 0) CHECK(c.points[i].muNumeric > c.points[i - 1].muNumeric);
  }
  const std::vector<double> descending{10.0, 5.0};
  CHECK_THROWS_AS(mu_curve(descending, small_grid(), trap(1.0)), ContractError);
}

TEST_CASE("ground state setup errors") {
  const GpeParams gp = trap(1e5);
  CHECK_THROWS_AS(gpe_ground_state(small_grid(), gp), SetupError);
  GpeParams empty = trap(1.0);
  empty.guide.depthVertical = 0.0;
  CHECK_THROWS_AS(gpe_ground_state(small_grid(), empty), SetupError);
  GpeParams bad = trap(1.0);
  bad.atomNumber = 0.0;
  CHECK_THROWS_AS(gpe_ground_state(small_grid(), bad), ContractError);
}

TEST_CASE("shape metrics of an analytic ellipse") {
  const MeshPtr mesh = Mesh::plane(Grid1D(-32.0, 32.0, 256), Grid1D(-32.0, 32.0, 256));
  for (double angle : {0.0, 0.3, -0.7, 1.2}) {
    const ShapeMetrics s = shape_metrics(ellipse(mesh, 3.0, 1.0, angle, 0.5, -1.0));
    CHECK(s.aspectRatio == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(s.longAxisAngle == doctest::Approx(angle).epsilon(1e-9));
    CHECK(s.meanX == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.meanZ == doctest::Approx(-1.0).epsilon(1e-9));
  }
  GuideParams g;
  g.angle = 0.3;
  CHECK(angle_to_oblique_axis(shape_metrics(ellipse(mesh, 3.0, 1.0, 0.3, 0.0, 0.0)), g) < 1e-9);
  CHECK(angle_to_oblique_axis(shape_metrics(ellipse(mesh, 3.0, 1.0, 0.3 + std::numbers::pi / 2, 0.0, 0.0)), g) ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-9));
}

TEST_CASE("fraction near the oblique axis") {
  const MeshPtr mesh = Mesh::plane(Grid1D(-20.0, 20.0, 256), Grid1D(-20.0, 20.0, 256));
  GuideParams g;
  g.angle = 0.3;
  g.crossingHeight = -2.0;
  // Elongated along the beam, centred on it: the perpendicular profile is normal with sigma 1.
  const double x0 = oblique_axis_x(0.0, g);
  const WaveField f = ellipse(mesh, 4.0, 1.0, g.angle, x0, 0.0);
  CHECK(fraction_near_oblique_axis(f, g, 1.5) == doctest::Approx(oracle::normal_mass_within(1.5, 1.0)).epsilon(2e-2));
  CHECK(fraction_near_oblique_axis(f, g, 10.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fall dynamics") {
  GuideParams g;
  g.depthVertical = units::microkelvin(2.4);
  g.waistVertical = 11.3e-6;
  g.waistOblique = 5e-6;
  g.crossingHeight = -1e-6;
  const GpeParams gp = make_gpe_params(100.0, 10.0 * harmonic_frequency(g.depthVertical, g.waistVertical, kC.massRb87), g);
  const GroundState s = gpe_ground_state(small_grid(6e-6, 256), gp);
  PropagationSpec spec;
  spec.dt = 200e-9;
  spec.tFinal = 300e-6;
  spec.snapshotEvery = 300;

  SUBCASE("property: gravity alone moves the centre of mass along z") {
    const FallResult r = gpe_fall(s.field, gp, spec);
    REQUIRE(r.samples.size() >= 5);
    for (const auto& sample : r.samples) {
      CHECK(std::abs(sample.meanZ - fall_height(sample.t)) <= 1e-3 * std::abs(fall_height(spec.tFinal)) + 1e-12);
    }
    CHECK(std::abs(r.finalShape.meanX) < 1e-12);
    CHECK(std::abs(norm(r.propagation.finalField) - 1.0) < 1e-9);
  }
  SUBCASE("property: a vertical oblique beam keeps the cloud centred") {
    GpeParams aligned = gp;
    aligned.guide.depthOblique = units::microkelvin(0.5);
    aligned.guide.angle = 0.0;
    const FallResult r = gpe_fall(s.field, aligned, spec);
    CHECK(std::abs(r.finalShape.meanX) < 1e-12);
    CHECK(r.finalFractionOnObliqueAxis > 0.99);
  }
}
