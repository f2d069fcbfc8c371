// Tests for the transverse reduction, multiplier classification, the
// structure-preserving logarithm, spectral splitting, the quadratic form
// decomposition, and the hypothesis certificates.
//
// Covers:
//  - reduction of a full monodromy to the symplectic transverse block
//  - inversion/conjugation closure of multiplier multisets
//  - degeneracy and branch rejections (spectra touching +-1 or (-inf, 0])
//  - log/exp roundtrip, Hamiltonian structure, exp/eig commutation
//  - half-plane exponent normalization and multiplicity pairing
//  - Lagrangian and dissipativity properties of the splitting
//  - reconstruction of b(rho) = sigma(rho, B rho)/2 from elementary blocks,
//    including the loxodromic double block and Krein-negative elliptic modes
//  - the lattice nonresonance scan with its documented witness case

#include <catch2/catch_amalgamated.hpp>

#include <hypres/floquet.hpp>
#include <hypres/integrate.hpp>
#include <hypres/models.hpp>
#include <hypres/orbit.hpp>

#include "oracles.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <random>

using namespace hypres;
using Catch::Approx;

namespace {

// Per-return transverse log matrix for given elementary blocks: dim 2m with
// blocks written in (y_1..y_m, eta_1..eta_m) coordinates.
Mat block_log(const std::vector<std::pair<double, double>>& modes) {
  int m = 0;
  for (const auto& [a, w] : modes) m += (a != 0.0 && w != 0.0) ? 2 : 1;
  Mat B = Mat::Zero(2 * m, 2 * m);
  int s = 0;
  for (const auto& [a, w] : modes) {
    if (w == 0.0) {
      B(s, s) = a;
      B(m + s, m + s) = -a;
      s += 1;
    } else if (a == 0.0) {
      B(s, m + s) = w;
      B(m + s, s) = -w;
      s += 1;
    } else {
      // generator of q = a (y1 n1 + y2 n2) + w (y1 n2 - y2 n1)
      B(s, s) = a;
      B(s, s + 1) = -w;
      B(s + 1, s) = w;
      B(s + 1, s + 1) = a;
      B(m + s, m + s) = -a;
      B(m + s, m + s + 1) = -w;
      B(m + s + 1, m + s) = w;
      B(m + s + 1, m + s + 1) = -a;
      s += 2;
    }
  }
  return B;
}

ReducedMonodromy reduced_for(const HamiltonianSystem& sys, const PeriodicOrbit& orbit) {
  const auto vr = integrate_variational(sys, orbit.ref_point, orbit.period);
  const Vec z = orbit.ref_point.flat();
  return reduce_monodromy(vr.fundamental_matrix, hamilton_vector_field(sys, z),
                          sys.gradient(z));
}

} // namespace

TEST_CASE("block generator is Hamiltonian and reproduces its modes") {
  const Mat B = block_log({{1.0, 0.0}, {0.0, 2 * oracles::pi * 0.3}});
  const Mat J = standard_J(2);
  REQUIRE((B.transpose() * J + J * B).norm() <= 1e-14);
  const auto exps = floquet_exponents(B);
  REQUIRE(exps.size() == 2);
  REQUIRE(exps[0].value.real() == Approx(1.0).margin(1e-12));
  REQUIRE(exps[0].value.imag() == 0.0); // real-hyperbolic entries are pinned to the axis
  REQUIRE(exps[1].value.real() == 0.0);
  REQUIRE(exps[1].value.imag() == Approx(2 * oracles::pi * 0.3));
}

TEST_CASE("reduction: normal form transverse block") {
  NormalFormSystem sys(2 * oracles::pi, {{oracles::pi / 2, 0.0}, {0.0, 0.3}});
  const double E = 0.4;
  const auto orbit = find_periodic_orbit(sys, sys.orbit_point(E), E);
  const auto red = reduced_for(sys, orbit);

  REQUIRE(red.trivial_multiplicity == 2);
  REQUIRE(red.reduced.rows() == 4);
  const Mat J = standard_J(2);
  REQUIRE((red.reduced.transpose() * J * red.reduced - J).norm() <= 1e-7);

  // transverse multipliers: e^{+-pi/2} and a unit-circle pair
  const auto groups = classify_multipliers(red.reduced);
  REQUIRE(groups.size() == 4);
  REQUIRE(std::abs(groups[0].value) == Approx(std::exp(oracles::pi / 2)).epsilon(1e-7));
  REQUIRE(pairing_closure_residual(groups) <= 1e-8);
}

TEST_CASE("reduction rejects inputs that are not symplectic") {
  Mat M = Mat::Identity(4, 4);
  M(0, 0) = 2.0; // breaks the symplectic identity beyond tolerance
  Vec X = Vec::Unit(4, 0), g = Vec::Unit(4, 2);
  REQUIRE_THROWS_AS(reduce_monodromy(M, X, g), Error);
}

TEST_CASE("classification: tags and deterministic order") {
  const Mat B = block_log({{0.7, 0.0}, {0.0, 1.1}, {0.4, 1.3}});
  const Mat A = B.exp();
  const auto groups = classify_multipliers(A);
  REQUIRE(pairing_closure_residual(groups) <= 1e-8);

  int elliptic = 0, hyper = 0, loxo = 0;
  for (const auto& g : groups) {
    if (g.tag == ModeTag::elliptic) ++elliptic;
    if (g.tag == ModeTag::real_hyperbolic) ++hyper;
    if (g.tag == ModeTag::loxodromic) ++loxo;
  }
  REQUIRE(elliptic == 2); // e^{+-1.1 i}
  REQUIRE(hyper == 2);    // e^{+-0.7}
  REQUIRE(loxo == 4);     // e^{+-0.4 +- 1.3 i}

  for (size_t i = 1; i < groups.size(); ++i)
    REQUIRE(std::abs(groups[i - 1].value) >= std::abs(groups[i].value) - 1e-12);
}

TEST_CASE("classification: inadmissible spectra are rejected with their kind") {
  // +1 eigenvalue pair: shear block
  Mat shear = Mat::Identity(4, 4);
  shear(0, 2) = 0.3;
  try {
    classify_multipliers(shear);
    FAIL("expected degeneracy");
  } catch (const Error& e) {
    REQUIRE(e.kind == Error::Kind::degeneracy);
  }

  // negative real pair away from -1: no real logarithm branch
  Mat neg = Mat::Zero(2, 2);
  neg(0, 0) = -2.0;
  neg(1, 1) = -0.5;
  try {
    classify_multipliers(neg);
    FAIL("expected branch");
  } catch (const Error& e) {
    REQUIRE(e.kind == Error::Kind::branch);
  }

  // -1 pair: degeneracy takes precedence over the branch complaint
  Mat minus = -Mat::Identity(2, 2);
  try {
    classify_multipliers(minus);
    FAIL("expected degeneracy");
  } catch (const Error& e) {
    REQUIRE(e.kind == Error::Kind::degeneracy);
  }
}

TEST_CASE("pairing closure on a random symplectic ensemble") {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 50; ++rep) {
    const Mat A = oracles::random_symplectic(2 + rep % 2, rng);
    REQUIRE(pairing_closure_residual(classify_multipliers(A)) <= 1e-8);
  }
}

TEST_CASE("symplectic log: roundtrip, structure, and eigenvalue commutation") {
  std::mt19937_64 rng(67);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 1 + rep % 3;
    const Mat A = oracles::random_symplectic(n, rng);
    const Mat B = symplectic_log(A);
    const Mat J = standard_J(n);

    REQUIRE((B.exp() - A).norm() <= 1e-8 * std::max(1.0, A.norm()));
    REQUIRE((B.transpose() * J + J * B).norm() <= 1e-10);
    // equivalent statement: J B is symmetric
    REQUIRE((J * B - (J * B).transpose()).norm() <= 1e-10);

    // exponentiated spectrum of B matches the spectrum of A
    Eigen::EigenSolver<Mat> esA(A), esB(B);
    for (int i = 0; i < 2 * n; ++i) {
      const cplx lb = std::exp(esB.eigenvalues()(i));
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < 2 * n; ++j) best = std::min(best, std::abs(esA.eigenvalues()(j) - lb));
      REQUIRE(best <= 1e-8 * std::max(1.0, std::abs(lb)));
    }
  }
}

TEST_CASE("symplectic log refuses the negative branch") {
  Mat neg = Mat::Zero(2, 2);
  neg(0, 0) = -3.0;
  neg(1, 1) = -1.0 / 3.0;
  REQUIRE_THROWS_AS(symplectic_log(neg), Error);
}

TEST_CASE("exponent normalization and multiplicity pairing") {
  const Mat B = block_log({{0.9, 0.0}, {0.9, 0.0}, {0.0, 0.4}});
  const auto exps = floquet_exponents(B);
  // repeated hyperbolic rate clusters into one entry of multiplicity 2
  REQUIRE(exps.size() == 2);
  REQUIRE(exps[0].value.real() == Approx(0.9).margin(1e-12));
  REQUIRE(exps[0].multiplicity == 2);
  REQUIRE(exps[1].tag == ModeTag::elliptic);
  int total = 0;
  for (const auto& e : exps) total += e.multiplicity;
  REQUIRE(2 * total == B.rows());
  for (const auto& e : exps) {
    const bool right = e.value.real() > 0.0;
    const bool axis = e.value.real() == 0.0 && e.value.imag() > 0.0;
    REQUIRE((right || axis));
  }
}

TEST_CASE("zero exponent is a degeneracy") {
  Mat B = Mat::Zero(4, 4);
  B(0, 0) = 1.0;
  B(2, 2) = -1.0; // other pair identically zero
  REQUIRE_THROWS_AS(floquet_exponents(B), Error);
}

TEST_CASE("splitting: Lagrangian planes and dissipativity signs") {
  // spec'd 2x2 elliptic block: B = 0.3 J
  {
    const Mat B = 0.3 * standard_J(1);
    const auto split = invariant_splitting(B);
    REQUIRE(split.lagrangian_residual <= 1e-9);
    REQUIRE(split.dissipativity.size() == 1);
    REQUIRE(split.dissipativity[0] > 0.0);
    // F_plus = span(e1 + i e2) up to phase
    const CVec u = split.F_plus.col(0);
    const cplx ratio = u(1) / u(0);
    REQUIRE(ratio.real() == Approx(0.0).margin(1e-9));
    REQUIRE(ratio.imag() == Approx(1.0).margin(1e-9));
  }
  // hyperbolic diag(ln 2, -ln 2): F_plus = e1, F_minus = e2
  {
    Mat B = Mat::Zero(2, 2);
    B(0, 0) = std::log(2.0);
    B(1, 1) = -std::log(2.0);
    const auto split = invariant_splitting(B);
    REQUIRE(std::abs(split.F_plus(0, 0)) == Approx(1.0).margin(1e-12));
    REQUIRE(std::abs(split.F_plus(1, 0)) == Approx(0.0).margin(1e-12));
    REQUIRE(std::abs(split.F_minus(1, 0)) == Approx(1.0).margin(1e-12));
  }
  // mixed system: 2-dimensional Lagrangian F_plus
  {
    const Mat B = block_log({{0.8, 0.0}, {0.0, 0.5}});
    const auto split = invariant_splitting(B);
    REQUIRE(split.F_plus.cols() == 2);
    REQUIRE(split.lagrangian_residual <= 1e-9);
    for (double dval : split.dissipativity) REQUIRE(std::isfinite(dval));
  }
}

TEST_CASE("quadratic form: reconstruction over elementary blocks") {
  std::mt19937_64 rng(71);
  const std::vector<std::vector<std::pair<double, double>>> cases = {
      {{1.0, 0.0}, {0.0, 2 * oracles::pi * 0.3}}, // hyperbolic + elliptic
      {{0.4, 1.1}},                               // loxodromic quadruple
      {{0.7, 0.0}, {0.4, 1.1}},                   // mixed with loxodromic
      {{0.0, -0.7}},                              // Krein-negative elliptic
  };
  for (const auto& modes : cases) {
    const Mat B = block_log(modes);
    const auto q = quadratic_form_b(B);
    const int d = static_cast<int>(B.rows());
    const Mat J = standard_J(d / 2);

    REQUIRE(q.decomposition_residual <= 1e-10 * std::max(1.0, q.b_matrix.norm()));

    // q(z) = sigma(z, Bz)/2 at random points
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
      Vec z(d);
      for (int i = 0; i < d; ++i) z[i] = g(rng);
      const double direct = 0.5 * (J * z).dot(B * z);
      const double viaq = z.dot(q.b_matrix * z);
      double viasum = 0.0;
      for (size_t j = 0; j < q.coefficients.size(); ++j)
        viasum += q.coefficients[j] * z.dot(q.action_coordinates[j] * z);
      REQUIRE(viaq == Approx(direct).margin(1e-9 * std::max(1.0, std::abs(direct))));
      REQUIRE(viasum == Approx(direct).margin(1e-9 * std::max(1.0, std::abs(direct))));
    }
  }
}

TEST_CASE("quadratic form: coefficients carry the mode data") {
  // hyperbolic + elliptic: coefficients are Re mu and the signed Im mu
  {
    const auto q = quadratic_form_b(block_log({{1.0, 0.0}, {0.0, 1.9}}));
    REQUIRE(q.kinds.size() == 2);
    double hyp = 0, ell = 0;
    for (size_t i = 0; i < q.kinds.size(); ++i) {
      if (q.kinds[i] == "hyperbolic-pair") hyp = q.coefficients[i];
      if (q.kinds[i] == "elliptic-pair") ell = q.coefficients[i];
    }
    REQUIRE(hyp == Approx(1.0).margin(1e-10));
    REQUIRE(ell == Approx(1.9).margin(1e-10));
  }
  // Krein-negative elliptic mode keeps its negative coefficient
  {
    const auto q = quadratic_form_b(block_log({{0.0, -0.7}}));
    REQUIRE(q.kinds == std::vector<std::string>{"elliptic-pair"});
    REQUIRE(q.coefficients[0] == Approx(-0.7).margin(1e-10));
  }
  // loxodromic quadruple decomposes into one hyperbolic and one rotation pair
  {
    const auto q = quadratic_form_b(block_log({{0.4, 1.1}}));
    double hyp = 0, rot = 0;
    for (size_t i = 0; i < q.kinds.size(); ++i) {
      if (q.kinds[i] == "hyperbolic-pair") hyp = q.coefficients[i];
      if (q.kinds[i] == "rotation-pair") rot = q.coefficients[i];
    }
    REQUIRE(hyp == Approx(0.4).margin(1e-9));
    REQUIRE(std::abs(rot) == Approx(1.1).margin(1e-9));
  }
}

TEST_CASE("analyze_floquet: end-to-end on the normal form") {
  NormalFormSystem sys(2 * oracles::pi, {{oracles::pi / 2, 0.0}, {0.0, 0.3}});
  const double E = 0.5;
  const auto orbit = find_periodic_orbit(sys, sys.orbit_point(E), E);
  const auto red = reduced_for(sys, orbit);
  const auto fd = analyze_floquet(red.reduced, orbit.period);

  REQUIRE(fd.exponents.size() == 2);
  // per-unit-time exponents: modes divided by T0
  REQUIRE(fd.exponents[0].value.real() * orbit.period == Approx(oracles::pi / 2).margin(1e-7));
  REQUIRE(fd.exponents[1].value.imag() * orbit.period == Approx(0.3).margin(1e-7));
  REQUIRE(fd.hyperbolic_dimension == 1);
  REQUIRE(fd.log_residual <= 1e-8);
  REQUIRE(fd.structure_residual <= 1e-10);
  REQUIRE(fd.pairing_residual <= 1e-8);
  REQUIRE(fd.lagrangian_residual <= 1e-9);
  for (double dval : fd.dissipativity) REQUIRE(std::isfinite(dval));
}

TEST_CASE("basepoint independence of the exponents") {
  NormalFormSystem sys(2 * oracles::pi, {{oracles::pi / 2, 0.0}, {0.0, 0.3}});
  const double E = 0.5;
  const auto orbit = find_periodic_orbit(sys, sys.orbit_point(E), E);

  // advance the reference point a third of a period along the orbit
  const PhasePoint moved = flow(sys, orbit.ref_point, orbit.period / 3.0);
  const auto vr1 = integrate_variational(sys, orbit.ref_point, orbit.period);
  const auto vr2 = integrate_variational(sys, moved, orbit.period);

  auto exps = [&](const Mat& M, const Vec& z) {
    const auto red = reduce_monodromy(M, hamilton_vector_field(sys, z), sys.gradient(z));
    const auto fd = analyze_floquet(red.reduced, orbit.period);
    return fd.exponents;
  };
  const auto e1 = exps(vr1.fundamental_matrix, orbit.ref_point.flat());
  const auto e2 = exps(vr2.fundamental_matrix, moved.flat());
  REQUIRE(e1.size() == e2.size());
  for (size_t i = 0; i < e1.size(); ++i)
    REQUIRE(std::abs(e1[i].value - e2[i].value) <= 1e-7);
}

TEST_CASE("hypothesis certificates: witness example") {
  const Mat B = block_log({{1.0, 0.0}, {0.0, 2 * oracles::pi * 0.3}});
  const Mat A = B.exp();
  const auto fd = analyze_floquet(A, 1.0);
  const std::vector<double> field(8, 1.0);

  HypothesisOptions o10;
  o10.K_bound = 10;
  const auto r10 = check_hypotheses(fd, 1.0, 2, field, o10);
  REQUIRE(r10.principal_type_ok);
  REQUIRE(r10.orbit_hyperbolic_ok);
  REQUIRE(r10.williamson_ok);
  REQUIRE_FALSE(r10.nonresonance_ok);
  REQUIRE_FALSE(r10.strong_nonresonance_ok);
  REQUIRE(r10.witness_nonresonance == std::vector<int>{0, 10});
  REQUIRE(r10.witness_strong_nonresonance == std::vector<int>{0, 10});

  HypothesisOptions o9;
  o9.K_bound = 9;
  const auto r9 = check_hypotheses(fd, 1.0, 2, field, o9);
  REQUIRE(r9.nonresonance_ok);
  REQUIRE(r9.strong_nonresonance_ok);
}

TEST_CASE("hypothesis certificates: real exponent never resonates") {
  Mat B = Mat::Zero(2, 2);
  B(0, 0) = std::log(2.0);
  B(1, 1) = -std::log(2.0);
  const auto fd = analyze_floquet(B.exp(), 1.0);
  HypothesisOptions opts;
  opts.K_bound = 25;
  const auto rep = check_hypotheses(fd, 1.0, 1, {1.0}, opts);
  REQUIRE(rep.orbit_hyperbolic_ok);
  REQUIRE(rep.hyperbolic_dimension == 1);
  REQUIRE(rep.nonresonance_ok);
  REQUIRE(rep.strong_nonresonance_ok);
}

TEST_CASE("hypothesis certificates: principal type needs a nonvanishing field") {
  const Mat B = block_log({{1.0, 0.0}});
  const auto fd = analyze_floquet(B.exp(), 1.0);
  const auto rep = check_hypotheses(fd, 1.0, 1, {1.0, 1e-12, 1.0});
  REQUIRE_FALSE(rep.principal_type_ok);
}

TEST_CASE("hypothesis certificates: repeated exponents break (1.7) structurally") {
  const Mat B = block_log({{0.9, 0.0}, {0.9, 0.0}});
  const auto fd = analyze_floquet(B.exp(), 1.0);
  REQUIRE(fd.exponents.size() == 1);
  REQUIRE(fd.exponents[0].multiplicity == 2);
  const auto rep = check_hypotheses(fd, 1.0, 2, {1.0});
  REQUIRE(rep.nonresonance_ok);
  REQUIRE_FALSE(rep.strong_nonresonance_ok);
  REQUIRE_FALSE(rep.witness_strong_nonresonance.has_value());
  REQUIRE(rep.notes.find("structurally") != std::string::npos);
}

TEST_CASE("krein-negative elliptic mode fails the admissibility check") {
  const Mat B = block_log({{0.0, -0.7}});
  const auto fd = analyze_floquet(B.exp(), 1.0);
  REQUIRE(fd.dissipativity[0] < 0.0);
  const auto rep = check_hypotheses(fd, 1.0, 1, {1.0});
  REQUIRE_FALSE(rep.williamson_ok);
}

TEST_CASE("lattice representatives: canonical, exhaustive, bounded") {
  const auto ks = hypres::detail::lattice_representatives(2, 3, 1000);
  // (2K+1)^2 points, minus zero, halved by the sign convention
  REQUIRE(ks.size() == (7 * 7 - 1) / 2);
  for (const auto& k : ks) {
    int first = 0;
    for (int v : k)
      if (first == 0 && v != 0) first = v;
    REQUIRE(first > 0);
  }
  REQUIRE_THROWS_AS(hypres::detail::lattice_representatives(6, 40, 5'000'000), Error);
}
