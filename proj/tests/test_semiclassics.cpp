// Tests for the quantization anchors, resonance strings, and the window
// filters.
//
// Covers:
//  - exponent table interpolation and branch tracking
//  - anchor solve against the closed-form action S(E) = T0 E
//  - out-of-range longitudinal indices
//  - string widths: the alpha = 0 closed form, h-linearity, monotonicity
//  - exactness of the window filters against their definitions
//  - the all-elliptic case: every entry filtered
//  - summary bookkeeping

#include <catch2/catch_amalgamated.hpp>

#include <hypres/interp.hpp>
#include <hypres/semiclassics.hpp>

#include "oracles.hpp"

#include <cmath>
#include <complex>

using namespace hypres;
using Catch::Approx;

namespace {

// Family tables of the solvable model: T(E) = T0, S(E) = T0 * E.
struct ModelTables {
  CubicHermite S, T;
};

ModelTables flat_tables(double T0, double Elo, double Ehi, int nodes = 9) {
  std::vector<double> E, S, T, dS, dT;
  for (int i = 0; i < nodes; ++i) {
    const double e = Elo + (Ehi - Elo) * i / (nodes - 1);
    E.push_back(e);
    S.push_back(T0 * e);
    T.push_back(T0);
    dS.push_back(T0);
    dT.push_back(0.0);
  }
  return {CubicHermite::with_slopes(E, S, dS), CubicHermite::with_slopes(E, T, dT)};
}

ExponentTable constant_exponents(std::vector<cplx> mu, double Elo, double Ehi, int nodes = 9) {
  std::vector<double> E;
  std::vector<std::vector<cplx>> rows;
  for (int i = 0; i < nodes; ++i) {
    E.push_back(Elo + (Ehi - Elo) * i / (nodes - 1));
    rows.push_back(mu);
  }
  return ExponentTable(std::move(E), std::move(rows));
}

} // namespace

TEST_CASE("exponent table: nodal exactness and smooth interpolation") {
  std::vector<double> E = {0.0, 0.5, 1.0};
  std::vector<std::vector<cplx>> rows = {
      {cplx(1.0, 0.0), cplx(0.0, 2.0)},
      {cplx(1.25, 0.0), cplx(0.0, 2.1)},
      {cplx(1.5, 0.0), cplx(0.0, 2.2)},
  };
  ExponentTable tab(E, rows);
  REQUIRE(tab.modes() == 2);
  const auto mid = tab.at(0.5);
  REQUIRE(mid[0].real() == Approx(1.25).margin(1e-12));
  REQUIRE(mid[1].imag() == Approx(2.1).margin(1e-12));
  const auto q = tab.at(0.25);
  REQUIRE(q[0].real() > 1.0);
  REQUIRE(q[0].real() < 1.25);

  // a single-energy table only answers at its own energy
  ExponentTable single({0.5}, {{cplx(1.0, 2.0)}});
  REQUIRE(single.at(0.5)[0] == cplx(1.0, 2.0));
  REQUIRE_THROWS_AS(single.at(0.6), Error);
}

TEST_CASE("exponent table: branch tracking across row permutations") {
  // the same two branches, handed over in swapped column order
  std::vector<double> E = {0.0, 1.0};
  std::vector<std::vector<cplx>> rows = {
      {cplx(1.0, 0.0), cplx(0.0, 2.0)},
      {cplx(0.0, 2.05), cplx(1.1, 0.0)},
  };
  ExponentTable tab(E, rows);
  const auto r1 = tab.rows()[1];
  REQUIRE(r1[0].real() == Approx(1.1));
  REQUIRE(r1[1].imag() == Approx(2.05));
}

TEST_CASE("exponent table rejects malformed input") {
  REQUIRE_THROWS_AS(ExponentTable({0.0, 0.0}, {{cplx(1.0)}, {cplx(1.0)}}), Error);
  REQUIRE_THROWS_AS(ExponentTable({0.0, 1.0}, {{cplx(1.0)}, {cplx(1.0), cplx(2.0)}}), Error);
}

TEST_CASE("anchor solve: closed-form action") {
  const double T0 = 2 * oracles::pi;
  const auto tabs = flat_tables(T0, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;

  // S(E_k) = 2 pi k h  =>  E_k = k h for S = T0 E with T0 = 2 pi
  for (int k : {15, 50, 99}) {
    const double Ek = longitudinal_anchor(tabs.S, tabs.T, k, q);
    REQUIRE(Ek == Approx(k * q.h).margin(1e-10));
    const double resid = tabs.S(Ek) - 2 * oracles::pi * k * q.h;
    REQUIRE(std::abs(resid) <= 1e-10 * std::max(1.0, std::abs(tabs.S(Ek))));
  }

  // the Maslov correction shifts the target by (pi/2) nu h
  ResonanceQuery qm = q;
  qm.maslov_index = 2.0;
  const double Em = longitudinal_anchor(tabs.S, tabs.T, 50, qm);
  REQUIRE(Em == Approx(50 * q.h + 0.25 * q.h * 2.0).margin(1e-10));
}

TEST_CASE("anchor solve: out-of-range index names the admissible interval") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;
  bool threw = false;
  try {
    longitudinal_anchor(tabs.S, tabs.T, 2000, q);
  } catch (const Error& e) {
    threw = true;
    REQUIRE(e.kind == Error::Kind::range);
    const std::string msg = e.what();
    REQUIRE(msg.find("[10, 100]") != std::string::npos);
  }
  REQUIRE(threw);
}

TEST_CASE("alpha = 0 width equals (h/2T) sum Re mu") {
  // single mode mu = 2 pi, T = 2 pi: width must be exactly h/2
  const double T0 = 2 * oracles::pi;
  const auto tabs = flat_tables(T0, 0.1, 1.0);
  const auto mu = constant_exponents({cplx(2 * oracles::pi, 0.0)}, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 0;
  q.anchor_indices = {50};
  q.window_center = 0.5;
  q.window_half_width = 0.4;
  q.depth_constant = 10.0; // keep the depth filter out of the way
  const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
  REQUIRE(strings.size() == 1);
  REQUIRE(strings[0].entries.size() == 1);
  const double width = -strings[0].entries[0].z.imag();
  REQUIRE(width == Approx(q.h / 2).epsilon(1e-12));
}

TEST_CASE("widths scale linearly in h") {
  const double T0 = 2 * oracles::pi;
  const auto tabs = flat_tables(T0, 0.0, 1.0);
  const auto mu = constant_exponents({cplx(oracles::pi / 2, 0.0)}, 0.0, 1.0);
  double ratio0 = 0.0;
  int idx = 0;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    ResonanceQuery q;
    q.h = h;
    q.alpha_max = 0;
    q.anchor_indices = {static_cast<int>(std::lround(0.5 / h))}; // anchor at E = 0.5
    q.window_center = 0.5;
    q.window_half_width = 0.4;
    const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
    const double ratio = -strings[0].entries[0].z.imag() / h;
    if (idx++ == 0)
      ratio0 = ratio;
    else
      REQUIRE(ratio == Approx(ratio0).epsilon(1e-12));
  }
}

TEST_CASE("width monotonicity in each transverse index") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.1, 1.0);
  const auto mu = constant_exponents({cplx(1.3, 0.0), cplx(0.2, 0.9)}, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 3;
  q.anchor_indices = {50};
  q.window_center = 0.5;
  q.window_half_width = 0.45;
  q.depth_constant = 100.0;
  const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
  const auto& es = strings[0].entries;
  const int m = 2, Amax = 3;
  auto at = [&](int a1, int a2) { return es[static_cast<size_t>(a1 * (Amax + 1) + a2)]; };
  (void)m;
  for (int a1 = 0; a1 <= Amax; ++a1)
    for (int a2 = 0; a2 <= Amax; ++a2) {
      REQUIRE(at(a1, a2).alpha == std::vector<int>{a1, a2});
      if (a1 > 0) REQUIRE(-at(a1, a2).z.imag() > -at(a1 - 1, a2).z.imag());
      if (a2 > 0) REQUIRE(-at(a1, a2).z.imag() > -at(a1, a2 - 1).z.imag());
    }
}

TEST_CASE("window filters match their definitions exactly") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.1, 1.0);
  // an elliptic mode walks Re z away from the anchor, a hyperbolic one sets
  // the width; narrow window and shallow depth exercise all three filters
  const auto mu = constant_exponents({cplx(0.8, 0.0), cplx(0.0, 1.5)}, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 5;
  q.anchor_indices = {50};
  q.window_center = 0.5;
  q.window_half_width = 0.004;
  q.delta = 0.5;
  q.depth_constant = 0.02; // cap 2e-3 splits the width ladder
  const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
  const double cap = q.depth_constant * std::pow(q.h, q.delta);
  long kept = 0, depth_cut = 0;
  for (const auto& e : strings[0].entries) {
    const double width = -e.z.imag();
    const bool in_window = std::abs(e.z.real() - q.window_center) <= q.window_half_width;
    const bool in_depth = width > 0.0 && width <= cap;
    REQUIRE(e.excluded == !(in_window && in_depth));
    if (!e.excluded) ++kept;
    if (e.excluded && !in_window) REQUIRE(e.exclusion_reason == "real-window");
    if (e.excluded && in_window && width > cap) {
      REQUIRE(e.exclusion_reason == "depth");
      ++depth_cut;
    }
  }
  REQUIRE(kept > 0);
  REQUIRE(depth_cut > 0);
  REQUIRE(kept < static_cast<long>(strings[0].entries.size()));

  const auto rep = string_report(strings, q, 2);
  REQUIRE(rep.total_entries == static_cast<long>(strings[0].entries.size()));
  REQUIRE(rep.kept_entries == kept);
  REQUIRE(rep.kept_entries + rep.excluded_real_window + rep.excluded_depth +
              rep.excluded_zero_width ==
          rep.total_entries);
}

TEST_CASE("all-elliptic systems leave the window empty") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.1, 1.0);
  const auto mu = constant_exponents({cplx(0.0, 1.1), cplx(0.0, 0.4)}, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 2;
  q.anchor_indices = {40, 50};
  q.window_center = 0.5;
  q.window_half_width = 0.45;
  const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
  const auto rep = string_report(strings, q, 2);
  REQUIRE(rep.kept_entries == 0);
  for (const auto& s : strings)
    for (const auto& e : s.entries) {
      REQUIRE(e.excluded);
      REQUIRE(-e.z.imag() <= 0.0);
    }
}

TEST_CASE("auto-enumerated anchors stay inside the window") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.1, 1.0);
  const auto mu = constant_exponents({cplx(1.0, 0.0)}, 0.1, 1.0);
  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 1;
  q.window_center = 0.5;
  q.window_half_width = 0.0305; // off a node so boundary anchors are unambiguous
  const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
  REQUIRE(strings.size() == 7); // anchors at E = 0.47 ... 0.53
  for (const auto& s : strings) REQUIRE(std::abs(s.E_k - 0.5) <= 0.0305 + 1e-12);
}

TEST_CASE("anchors at the family edge resolve despite rounding") {
  // the quantization target for the edge index can land one rounding past
  // the tabulated action span; the anchor solve must absorb that instead of
  // reporting the index as out of range
  const auto tabs = flat_tables(2 * oracles::pi, 0.3, 0.7);
  const auto mu = constant_exponents({cplx(1.0, 0.0)}, 0.3, 0.7);
  ResonanceQuery q;
  q.h = 0.01;
  for (int k : {30, 70}) {
    const double E = longitudinal_anchor(tabs.S, tabs.T, k, q);
    REQUIRE(E >= 0.3);
    REQUIRE(E <= 0.7);
    REQUIRE(E == Approx(0.01 * k).margin(1e-10));
  }
  // one index past either edge is a genuine range error
  REQUIRE_THROWS_AS(longitudinal_anchor(tabs.S, tabs.T, 29, q), Error);
  REQUIRE_THROWS_AS(longitudinal_anchor(tabs.S, tabs.T, 71, q), Error);
}

TEST_CASE("auto-enumeration clamps the window to the family") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.3, 0.7);
  const auto mu = constant_exponents({cplx(1.0, 0.0)}, 0.3, 0.7);
  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 0;

  SECTION("window hanging off one edge keeps the edge anchors") {
    q.window_center = 0.675;
    q.window_half_width = 0.05; // window [0.625, 0.725] meets family up to 0.7
    const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
    REQUIRE(strings.size() == 8); // anchors at E = 0.63 ... 0.70
    REQUIRE(strings.front().k == 63);
    REQUIRE(strings.back().k == 70);
  }
  SECTION("window disjoint from the family yields no strings") {
    q.window_center = 5.0;
    q.window_half_width = 0.1;
    const auto strings = resonance_strings(tabs.S, tabs.T, mu, q);
    REQUIRE(strings.empty());
  }
}

TEST_CASE("query validation") {
  const auto tabs = flat_tables(2 * oracles::pi, 0.1, 1.0);
  const auto mu = constant_exponents({cplx(1.0, 0.0)}, 0.1, 1.0);
  ResonanceQuery q; // window unset
  REQUIRE_THROWS_AS(resonance_strings(tabs.S, tabs.T, mu, q), Error);
  q.window_center = 0.5;
  q.window_half_width = 0.1;
  q.delta = 1.5;
  REQUIRE_THROWS_AS(resonance_strings(tabs.S, tabs.T, mu, q), Error);
  q.delta = 0.5;
  q.h = -1.0;
  REQUIRE_THROWS_AS(resonance_strings(tabs.S, tabs.T, mu, q), Error);
}
