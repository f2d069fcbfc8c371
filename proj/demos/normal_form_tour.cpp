// Library tour on the solvable model: one hyperbolic and one elliptic
// transverse mode around a circular orbit. Everything printed here has a
// closed form, so the output doubles as a quick numerical sanity check:
//
//   T(E) = T0          S(E) = T0 * E        mu = {0.8, 0.45 i}  per return
//
// Build and run:
//   cmake --build build --target demo_normal_form_tour
//   ./build/demos/demo_normal_form_tour

#include <cstdio>

#include <hypres/floquet.hpp>
#include <hypres/models.hpp>
#include <hypres/orbit.hpp>
#include <hypres/semiclassics.hpp>

using namespace hypres;

int main() {
  const double T0 = 2.0 * std::numbers::pi_v<double>;
  NormalFormSystem sys(T0, {{0.8, 0.0}, {0.0, 0.45}});

  // one orbit per grid energy, previous orbit as predictor
  const auto seed = find_periodic_orbit(sys, sys.orbit_point(0.5), 0.5);
  const auto family = continue_family(sys, seed, {0.3, 0.4, 0.5, 0.6, 0.7});

  std::printf("%-8s %-14s %-14s %-12s\n", "E", "T", "S", "closure");
  for (const auto& o : family.orbits)
    std::printf("%-8.3f %-14.10f %-14.10f %-12.3e\n", o.energy, o.period, o.action,
                o.closure_residual);

  // transverse stability at the middle energy: monodromy from the variational
  // flow, reduced to the transverse symplectic block, then its exponents
  const auto& mid = family.orbits[2];
  const auto vr = integrate_variational(sys, mid.ref_point, mid.period);
  const Vec z0 = mid.ref_point.flat();
  const auto red =
      reduce_monodromy(vr.fundamental_matrix, hamilton_vector_field(sys, z0), sys.gradient(z0));
  const auto fl = analyze_floquet(red.reduced, mid.period);
  std::printf("\nexponents (per return, T * lambda):\n");
  for (const auto& e : fl.exponents)
    std::printf("  %+.6f %+.6f i   multiplicity %d\n", e.value.real() * mid.period,
                e.value.imag() * mid.period, e.multiplicity);
  std::printf("hyperbolic dimension: %d\n", fl.hyperbolic_dimension);

  // standing hypotheses for the analysis to apply; the field norms come from
  // the orbit samples
  std::vector<double> field_norms;
  for (const auto& s : mid.samples.states)
    field_norms.push_back(hamilton_vector_field(sys, s.flat()).norm());
  const auto hyp = check_hypotheses(fl, mid.period, sys.n() - 1, field_norms);
  std::printf("\nhypotheses: principal_type=%s hyperbolic=%s normal_form=%s nonresonance=%s\n",
              hyp.principal_type_ok ? "ok" : "FAIL", hyp.orbit_hyperbolic_ok ? "ok" : "FAIL",
              hyp.williamson_ok ? "ok" : "FAIL", hyp.nonresonance_ok ? "ok" : "FAIL");

  // a short resonance string at the quantization anchor nearest E = 0.5;
  // the table carries per-return exponents, constant across this family
  ExponentTable per_return({0.3, 0.4, 0.5, 0.6, 0.7},
                           {{{0.8, 0.0}, {0.0, 0.45}},
                            {{0.8, 0.0}, {0.0, 0.45}},
                            {{0.8, 0.0}, {0.0, 0.45}},
                            {{0.8, 0.0}, {0.0, 0.45}},
                            {{0.8, 0.0}, {0.0, 0.45}}});

  ResonanceQuery q;
  q.h = 0.01;
  q.alpha_max = 2;
  q.anchor_indices = {50};
  q.window_center = 0.5;
  q.window_half_width = 0.1;
  const auto strings = resonance_strings(family.S_of_E, family.T_of_E, per_return, q);
  std::printf("\nstring at k=%d, E_k=%.6f:\n", strings[0].k, strings[0].E_k);
  for (const auto& e : strings[0].entries)
    std::printf("  alpha=(%d,%d)  z = %.6f %+.3e i   %s\n", e.alpha[0], e.alpha[1], e.z.real(),
                e.z.imag(), e.excluded ? e.exclusion_reason.c_str() : "kept");
  return 0;
}
