// The closed geodesic on the one-sheeted hyperboloid of revolution: the
// equator is unstable, and for the metric used here the per-return expansion
// exponent equals 2 pi at every energy. This demo computes it numerically
// from the monodromy and prints the deviation.
//
// Build and run:
//   cmake --build build --target demo_equator_exponent
//   ./build/demos/demo_equator_exponent

#include <cstdio>

#include <hypres/floquet.hpp>
#include <hypres/models.hpp>
#include <hypres/orbit.hpp>

using namespace hypres;

int main() {
  HyperboloidGeodesicSystem sys;
  const double two_pi = 2.0 * std::numbers::pi_v<double>;

  std::printf("%-8s %-14s %-18s %-12s\n", "E", "T", "T*lambda", "|dev|");
  for (double E : {0.25, 0.5, 1.0, 2.0}) {
    const auto orbit = find_periodic_orbit(sys, sys.equator_point(E), E);
    const auto vr = integrate_variational(sys, orbit.ref_point, orbit.period);
    const Vec z = orbit.ref_point.flat();
    const auto red =
        reduce_monodromy(vr.fundamental_matrix, hamilton_vector_field(sys, z), sys.gradient(z));
    const auto fl = analyze_floquet(red.reduced, orbit.period);
    // the positive real exponent, scaled to one return
    double mu = 0.0;
    for (const auto& e : fl.exponents)
      if (e.value.real() > 0.0) mu = e.value.real() * orbit.period;
    std::printf("%-8.3f %-14.10f %-18.12f %-12.3e\n", E, orbit.period, mu,
                std::abs(mu - two_pi));
  }
  return 0;
}
