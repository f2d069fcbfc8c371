// Tests for the symplectic kernel and the built-in model systems.
//
// Covers:
//  - standard form: J^2 = -I, antisymmetry of sigma, Gram matrix of the
//    standard basis
//  - analytic gradients and Hessians against central differences
//  - the defining identity dH(w) = sigma(w, X_H)
//  - model-specific closed forms (normal-form monodromy, hyperboloid
//    curvature data, Coulomb-Stark turning points and saddle)
//  - construction errors for malformed model specs

#include <catch2/catch_amalgamated.hpp>

#include <hypres/hamiltonian.hpp>
#include <hypres/models.hpp>
#include <hypres/types.hpp>

#include "oracles.hpp"

#include <memory>
#include <random>

using namespace hypres;
using Catch::Approx;

namespace {

Vec random_point(int dim, std::mt19937_64& rng, double sd = 0.7) {
  std::normal_distribution<double> g(0.0, sd);
  Vec z(dim);
  for (int i = 0; i < dim; ++i) z[i] = g(rng);
  return z;
}

// Central-difference gradient of h0, step tuned for ~1e-10 accuracy.
Vec fd_gradient(const HamiltonianSystem& sys, const Vec& z, double h = 1e-5) {
  Vec g(z.size());
  for (int i = 0; i < z.size(); ++i) {
    Vec zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    g[i] = (sys.h0(zp) - sys.h0(zm)) / (2 * h);
  }
  return g;
}

std::vector<std::unique_ptr<HamiltonianSystem>> builtin_systems() {
  std::vector<std::unique_ptr<HamiltonianSystem>> out;
  out.push_back(std::make_unique<NormalFormSystem>(
      2 * oracles::pi, std::vector<NormalFormSystem::Mode>{{oracles::pi / 2, 0.0}, {0.0, 0.3}}));
  out.push_back(std::make_unique<HyperboloidGeodesicSystem>());
  out.push_back(std::make_unique<CoulombStarkSystem>(1.0));
  return out;
}

} // namespace

TEST_CASE("standard symplectic form") {
  for (int n : {1, 2, 3, 5}) {
    const Mat J = standard_J(n);
    REQUIRE((J * J + Mat::Identity(2 * n, 2 * n)).norm() == Approx(0.0).margin(0.0));

    SymplecticForm form(n);
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      const Vec u = random_point(2 * n, rng), v = random_point(2 * n, rng);
      REQUIRE(form.sigma(u, v) == Approx(-form.sigma(v, u)).margin(1e-14));
      // canonical pairing: sigma(e_i, e_{n+i}) = -J in matrix form
      Mat G(2 * n, 2 * n);
      for (int i = 0; i < 2 * n; ++i)
        for (int j = 0; j < 2 * n; ++j) {
          const Vec ei = Vec::Unit(2 * n, i), ej = Vec::Unit(2 * n, j);
          G(i, j) = form.sigma(ei, ej);
        }
      REQUIRE((G + J).norm() == Approx(0.0).margin(1e-14));
    }
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(17);
  for (const auto& sys : builtin_systems()) {
    for (int rep = 0; rep < 100; ++rep) {
      Vec z = random_point(sys->dim(), rng);
      if (sys->kind() == "coulomb_stark") z.head(3).array() += 2.0; // keep off the singularity
      const Vec ga = sys->grad_h0(z);
      const Vec gn = fd_gradient(*sys, z);
      REQUIRE((ga - gn).norm() <= 1e-6 * std::max(1.0, ga.norm()));
    }
  }
  for (int rep = 0; rep < 100; ++rep) {
    const auto sys = oracles::PolynomialSystem::random(2, rng);
    const Vec z = random_point(sys.dim(), rng);
    const Vec ga = sys.grad_h0(z);
    REQUIRE((ga - fd_gradient(sys, z)).norm() <= 1e-6 * std::max(1.0, ga.norm()));
  }
}

TEST_CASE("hessian matches differenced gradient") {
  std::mt19937_64 rng(23);
  for (const auto& sys : builtin_systems()) {
    Vec z = random_point(sys->dim(), rng);
    if (sys->kind() == "coulomb_stark") z.head(3).array() += 2.0;
    const Mat Ha = sys->hess_h0(z);
    const double h = 1e-5;
    for (int i = 0; i < sys->dim(); ++i) {
      Vec zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const Vec col = (sys->grad_h0(zp) - sys->grad_h0(zm)) / (2 * h);
      REQUIRE((Ha.col(i) - col).norm() <= 1e-5 * std::max(1.0, Ha.norm()));
    }
  }
}

TEST_CASE("vector field satisfies dH(w) = sigma(w, X_H)") {
  std::mt19937_64 rng(31);
  for (const auto& sys : builtin_systems()) {
    SymplecticForm form(sys->n());
    for (int rep = 0; rep < 50; ++rep) {
      Vec z = random_point(sys->dim(), rng);
      if (sys->kind() == "coulomb_stark") z.head(3).array() += 2.0;
      const Vec X = hamilton_vector_field(*sys, z);
      const Vec g = sys->grad_h0(z);
      const Vec w = random_point(sys->dim(), rng);
      REQUIRE(g.dot(w) == Approx(form.sigma(w, X)).margin(1e-10 * std::max(1.0, g.norm())));
    }
  }
}

TEST_CASE("normal form: closed-form flow data") {
  const double T0 = 2 * oracles::pi;
  NormalFormSystem sys(T0, {{oracles::pi / 2, 0.0}, {0.0, 0.3}});
  REQUIRE(sys.n() == 3);
  REQUIRE(sys.angular_periods()[0] == Approx(T0));

  const PhasePoint p = sys.orbit_point(0.5);
  REQUIRE(sys.h0(p.flat()) == Approx(0.5).margin(1e-15));
  // the orbit point is an exact relative equilibrium of the transverse part
  const Vec X = hamilton_vector_field(sys, p.flat());
  REQUIRE(X[0] == Approx(1.0));             // theta' = 1
  REQUIRE(X.tail(sys.dim() - 1).norm() == Approx(0.0).margin(1e-15));

  // constant Hessian: exact monodromy must be symplectic
  const Mat M = sys.exact_monodromy(T0);
  const Mat J = standard_J(sys.n());
  REQUIRE((M.transpose() * J * M - J).norm() <= 1e-12);
}

TEST_CASE("normal form rejects degenerate specs") {
  REQUIRE_THROWS_AS(NormalFormSystem(0.0, {{1.0, 0.0}}), Error);
  REQUIRE_THROWS_AS(NormalFormSystem(1.0, {}), Error);
  REQUIRE_THROWS_AS(NormalFormSystem(1.0, {{0.0, 0.0}}), Error);
}

TEST_CASE("hyperboloid: equator point and metric data") {
  HyperboloidGeodesicSystem sys;
  const PhasePoint eq = sys.equator_point(0.5);
  REQUIRE(sys.h0(eq.flat()) == Approx(0.5).margin(1e-15));
  REQUIRE(hamilton_vector_field(sys, eq.flat())[1] == Approx(1.0)); // v' = sqrt(2E)

  // the embedded surface has curvature -1 on the equator
  REQUIRE(oracles::hyperboloid_curvature(0.0, 0.7) == Approx(-1.0).margin(1e-6));
  // and the chart's inverse-metric weights match the embedding at u = 0.3
  const double u = 0.3;
  REQUIRE(HyperboloidGeodesicSystem::au(u) == Approx(1.0 / std::cosh(2 * u)));
  REQUIRE(HyperboloidGeodesicSystem::bu(u) == Approx(1.0 / std::pow(std::cosh(u), 2)));
}

TEST_CASE("coulomb-stark: saddle and turning points") {
  CoulombStarkSystem sys(1.0);
  REQUIRE(sys.saddle_energy() == Approx(2.0));
  const auto [sm, sp] = sys.turning_points(3.0);
  REQUIRE(sm == Approx(oracles::cs_s_inner).epsilon(1e-14));
  REQUIRE(sp == Approx(oracles::cs_s_outer).epsilon(1e-14));

  const PhasePoint lib = sys.libration_point(3.0);
  REQUIRE(sys.h0(lib.flat()) == Approx(3.0).margin(1e-12));

  REQUIRE_THROWS_AS(sys.turning_points(1.5), Error); // below the saddle
  REQUIRE_THROWS_AS(sys.h0(Vec::Zero(6)), Error);    // singular point
  REQUIRE_THROWS_AS(CoulombStarkSystem(-1.0), Error);
}

TEST_CASE("model factory") {
  ModelSystemSpec spec;
  spec.kind = "normal_form";
  spec.parameters = {{"T0", 2 * oracles::pi}, {"mu1_re", oracles::pi / 2}, {"mu2_im", 0.3}};
  const auto sys = build_model(spec);
  REQUIRE(sys->kind() == "normal_form");
  REQUIRE(sys->n() == 3);
  REQUIRE(model_seed(*sys, 0.5).has_value());

  ModelSystemSpec bad;
  bad.kind = "unknown_model";
  REQUIRE_THROWS_AS(build_model(bad), Error);

  ModelSystemSpec cs;
  cs.kind = "coulomb_stark"; // missing field strength
  REQUIRE_THROWS_AS(build_model(cs), Error);
}
