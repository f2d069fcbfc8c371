#pragma once

#include <optional>

#include "integrate.hpp"
#include "interp.hpp"

namespace hypres {

struct OrbitOptions {
  IntegrateOptions integ{};
  int shooting_segments = 1; // 4 works well for strongly unstable orbits
  int max_iterations = 60;
  int damped_trials = 10;      // backtracking halvings before giving up
  double residual_target = 1e-11;
  int samples = 256;          // stored one-period sample count
  double max_period = 1000.0; // section-return search horizon
  double period_hint = 0.0;   // 0 = estimate from the first section return
  std::optional<Vec> section_normal{}; // default: along X_H at the projected guess
};

struct PeriodicOrbit {
  double energy = 0.0;
  double period = 0.0;
  PhasePoint ref_point;
  Vec section_normal;
  Trajectory samples; // uniform grid over one period, samples.size() == N+1
  double action = 0.0;
  double closure_residual = 0.0;
};

struct OrbitFamily {
  std::vector<PeriodicOrbit> orbits; // ascending energy
  CubicHermite T_of_E;               // slopes from centered differences
  CubicHermite S_of_E;               // exact nodal slopes: dS/dE = T
  bool complete = true;
  std::vector<double> failed_energies; // grid points not reached, each side past the break
  double action_slope_residual = 0.0;  // max |centered dS/dE - T| over interior nodes
};

// Loop integral of xi . dx over one period, trapezoid on the uniform samples.
// For a periodic analytic integrand the rule converges spectrally.
inline double action_integral(const HamiltonianSystem& sys, const Trajectory& one_period) {
  const size_t N = one_period.times.size();
  require(N >= 3, Error::Kind::config, "action quadrature needs at least three samples");
  const int n = sys.n();
  std::vector<double> f(N);
  for (size_t i = 0; i < N; ++i) {
    const Vec z = one_period.states[i].flat();
    const Vec g = sys.gradient(z);
    f[i] = z.tail(n).dot(g.tail(n)); // xi . dH/dxi = xi . xdot
  }
  const double dt = one_period.times[1] - one_period.times[0];
  double s = 0.5 * (f.front() + f.back());
  for (size_t i = 1; i + 1 < N; ++i) s += f[i];
  return s * dt;
}

namespace detail {

// Newton projection onto the energy shell along the gradient direction.
inline Vec project_to_energy(const HamiltonianSystem& sys, Vec z, double E) {
  for (int it = 0; it < 50; ++it) {
    const double r = sys.energy(z) - E;
    if (std::abs(r) <= 1e-13 * std::max(1.0, std::abs(E))) return z;
    const Vec g = sys.gradient(z);
    const double gg = g.squaredNorm();
    require(gg > 1e-28, Error::Kind::degeneracy, "gradient vanishes while projecting to the energy shell");
    z -= (r / gg) * g;
  }
  raise(Error::Kind::convergence, "energy-shell projection did not converge");
}

struct ShootingWork {
  std::vector<Vec> nodes; // m phase vectors
  double T = 0.0;

  Vec pack() const {
    const auto d = nodes[0].size();
    Vec u(static_cast<Eigen::Index>(nodes.size()) * d + 1);
    for (size_t i = 0; i < nodes.size(); ++i) u.segment(static_cast<Eigen::Index>(i) * d, d) = nodes[i];
    u[u.size() - 1] = T;
    return u;
  }
  void unpack(const Vec& u) {
    const auto d = nodes[0].size();
    for (size_t i = 0; i < nodes.size(); ++i) nodes[i] = u.segment(static_cast<Eigen::Index>(i) * d, d);
    T = u[u.size() - 1];
  }
};

// Residual of the closed multiple-shooting system:
//   segment matching (wrapped), section pin on node 0, energy pin per node.
inline Vec shooting_residual(const HamiltonianSystem& sys, const ShootingWork& w, const Vec& c,
                             const Vec& zref, double E, const IntegrateOptions& io) {
  const int m = static_cast<int>(w.nodes.size());
  const int d = sys.dim();
  Vec F(m * d + 1 + m);
  const double dt = w.T / m;
  for (int i = 0; i < m; ++i) {
    const Vec e = flow(sys, PhasePoint::from_flat(w.nodes[i]), dt, io).flat();
    F.segment(i * d, d) = phase_diff(sys, e, w.nodes[(i + 1) % m]);
  }
  F[m * d] = c.dot(phase_diff(sys, w.nodes[0], zref));
  for (int i = 0; i < m; ++i) F[m * d + 1 + i] = sys.energy(w.nodes[i]) - E;
  return F;
}

} // namespace detail

// Damped Gauss-Newton on the bordered shooting system. The unknowns are the
// shooting nodes and the period; the residual pins segment closure, the
// section plane through the initial guess, and the energy at every node.
inline PeriodicOrbit find_periodic_orbit(const HamiltonianSystem& sys, const PhasePoint& guess,
                                         double E, const OrbitOptions& opts = {}) {
  const int d = sys.dim();
  const int m = std::max(1, opts.shooting_segments);

  Vec z0 = detail::project_to_energy(sys, guess.flat(), E);
  const Vec X0 = hamilton_vector_field(sys, z0);
  require(X0.norm() > 1e-12, Error::Kind::degeneracy,
          "Hamiltonian vector field vanishes at the guess; no flow direction");

  Vec c;
  if (opts.section_normal.has_value()) {
    c = *opts.section_normal;
    require(c.size() == d, Error::Kind::config, "section normal has wrong length");
    c.normalize();
  } else {
    c = X0.normalized();
  }
  require(std::abs(c.dot(X0)) >= 1e-6 * X0.norm(), Error::Kind::degeneracy,
          "requested section is tangent to the flow at the guess");
  const int direction = c.dot(X0) > 0.0 ? 1 : -1;
  const Vec zref = z0;

  double T = opts.period_hint;
  if (T <= 0.0) {
    const auto sc = section_crossing(sys, PhasePoint::from_flat(z0), c,
                                     PhasePoint::from_flat(z0), direction, opts.max_period, opts.integ);
    T = sc.t;
  }
  require(T > 0.0, Error::Kind::section, "period estimate is not positive");

  detail::ShootingWork w;
  w.T = T;
  w.nodes.resize(m);
  if (m == 1) {
    w.nodes[0] = z0;
  } else {
    const Trajectory tr = integrate_sampled(sys, PhasePoint::from_flat(z0), T, m, opts.integ);
    for (int i = 0; i < m; ++i) w.nodes[i] = tr.states[i].flat();
  }

  const double scale = std::max({1.0, std::abs(E), z0.cwiseAbs().maxCoeff()});
  const int rows = m * d + 1 + m, cols = m * d + 1;

  Vec F = detail::shooting_residual(sys, w, c, zref, E, opts.integ);
  double phi = F.squaredNorm();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (F.cwiseAbs().maxCoeff() <= opts.residual_target * scale) break;

    Mat J = Mat::Zero(rows, cols);
    const double dt = w.T / m;
    for (int i = 0; i < m; ++i) {
      const auto vr = integrate_variational(sys, PhasePoint::from_flat(w.nodes[i]), dt, opts.integ);
      J.block(i * d, i * d, d, d) = vr.fundamental_matrix;
      J.block(i * d, ((i + 1) % m) * d, d, d) -= Mat::Identity(d, d);
      J.block(i * d, m * d, d, 1) = hamilton_vector_field(sys, vr.endpoint.flat()) / m;
    }
    J.block(m * d, 0, 1, d) = c.transpose();
    for (int i = 0; i < m; ++i)
      J.block(m * d + 1 + i, i * d, 1, d) = sys.gradient(w.nodes[i]).transpose();

    const Vec delta = J.colPivHouseholderQr().solve(-F);

    // backtracking on ||F||^2
    bool accepted = false;
    double lam = 1.0;
    Vec u0 = w.pack();
    detail::ShootingWork wt = w;
    for (int trial = 0; trial < opts.damped_trials; ++trial, lam *= 0.5) {
      wt.unpack(u0 + lam * delta);
      if (wt.T <= 0.0) continue;
      Vec Ft;
      try {
        Ft = detail::shooting_residual(sys, wt, c, zref, E, opts.integ);
      } catch (const Error&) {
        continue; // trial state left the domain; shrink further
      }
      const double phit = Ft.squaredNorm();
      if (phit <= (1.0 - 1e-4 * lam) * phi || phit < phi) {
        w = wt;
        F = std::move(Ft);
        phi = phit;
        accepted = true;
        break;
      }
    }
    // Stagnation means the iterate sits at the integrator's noise floor;
    // the acceptance gate below decides whether that floor is good enough.
    if (!accepted) break;
  }
  require(F.cwiseAbs().maxCoeff() <= opts.residual_target * scale * 10, Error::Kind::convergence,
          "shooting stalled at residual " + fmt_num(F.cwiseAbs().maxCoeff()) +
              ", above the acceptance bound " + fmt_num(opts.residual_target * scale * 10));

  PeriodicOrbit orbit;
  orbit.energy = E;
  orbit.period = w.T;
  orbit.ref_point = PhasePoint::from_flat(w.nodes[0]);
  orbit.section_normal = c;

  const Vec endpoint = flow(sys, orbit.ref_point, orbit.period, opts.integ).flat();
  orbit.closure_residual = phase_diff(sys, endpoint, w.nodes[0]).norm();
  require(orbit.closure_residual <= 1e-8, Error::Kind::convergence,
          "orbit closure residual " + fmt_num(orbit.closure_residual) + " above 1e-8");
  require(std::abs(sys.energy(w.nodes[0]) - E) <= 1e-10, Error::Kind::convergence,
          "orbit energy misses the target by more than 1e-10");
  const Vec Xe = hamilton_vector_field(sys, w.nodes[0]);
  require(std::abs(c.dot(Xe)) >= 1e-6 * c.norm() * Xe.norm(), Error::Kind::degeneracy,
          "section became tangent to the flow at the converged point");

  orbit.samples = integrate_sampled(sys, orbit.ref_point, orbit.period, opts.samples, opts.integ);
  orbit.action = action_integral(sys, orbit.samples);
  return orbit;
}

namespace detail {

// One continuation move between neighboring grid energies; halves the energy
// step up to `max_halvings` times, walking through intermediate orbits.
inline PeriodicOrbit continuation_step(const HamiltonianSystem& sys, const PeriodicOrbit& from,
                                       double E_target, const OrbitOptions& base,
                                       int max_halvings) {
  std::exception_ptr last;
  for (int k = 0; k <= max_halvings; ++k) {
    const int sub = 1 << k;
    PeriodicOrbit cur = from;
    try {
      for (int j = 1; j <= sub; ++j) {
        const double Ej = from.energy + (E_target - from.energy) * static_cast<double>(j) / sub;
        OrbitOptions o = base;
        o.period_hint = cur.period;
        cur = find_periodic_orbit(sys, cur.ref_point, Ej, o);
      }
      return cur;
    } catch (const Error&) {
      last = std::current_exception();
    }
  }
  std::rethrow_exception(last);
}

} // namespace detail

// (Re)builds the T(E) and S(E) interpolants from the stored orbits and checks
// the action/period consistency: a centered difference of S must reproduce T
// at every interior node. Sorts the orbits by energy first.
inline void rebuild_family_tables(OrbitFamily& fam) {
  std::sort(fam.orbits.begin(), fam.orbits.end(),
            [](const PeriodicOrbit& a, const PeriodicOrbit& b) { return a.energy < b.energy; });
  if (fam.orbits.size() < 2) return;
  std::vector<double> Es, Ts, Ss;
  for (const auto& o : fam.orbits) {
    Es.push_back(o.energy);
    Ts.push_back(o.period);
    Ss.push_back(o.action);
  }
  fam.T_of_E = CubicHermite::from_data(Es, Ts);
  fam.S_of_E = CubicHermite::with_slopes(Es, Ss, Ts);

  fam.action_slope_residual = 0.0;
  for (size_t i = 1; i + 1 < fam.orbits.size(); ++i) {
    const double hm = Es[i] - Es[i - 1], hp = Es[i + 1] - Es[i];
    const double slope =
        (hm * hm * (Ss[i + 1] - Ss[i]) + hp * hp * (Ss[i] - Ss[i - 1])) / (hm * hp * (hm + hp));
    fam.action_slope_residual = std::max(fam.action_slope_residual, std::abs(slope - Ts[i]));
  }
  require(fam.action_slope_residual <= 1e-4, Error::Kind::convergence,
          "action derivative deviates from the period by " +
              fmt_num(fam.action_slope_residual));
}

// Natural continuation over the energy grid, previous orbit as predictor.
// The grid must contain the seed energy; continuation marches outward from it.
inline OrbitFamily continue_family(const HamiltonianSystem& sys, const PeriodicOrbit& seed,
                                   std::vector<double> energy_grid, const OrbitOptions& opts = {}) {
  require(!energy_grid.empty(), Error::Kind::config, "energy grid is empty");
  std::sort(energy_grid.begin(), energy_grid.end());
  for (size_t i = 0; i + 1 < energy_grid.size(); ++i)
    require(energy_grid[i] < energy_grid[i + 1], Error::Kind::config,
            "energy grid has duplicate entries");

  size_t seed_idx = 0;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < energy_grid.size(); ++i) {
    const double dE = std::abs(energy_grid[i] - seed.energy);
    if (dE < best) {
      best = dE;
      seed_idx = i;
    }
  }
  require(best <= 1e-9 * std::max(1.0, std::abs(seed.energy)), Error::Kind::config,
          "energy grid does not contain the seed energy");

  std::vector<std::optional<PeriodicOrbit>> slots(energy_grid.size());
  slots[seed_idx] = seed;
  OrbitFamily fam;

  auto march = [&](int step) {
    const PeriodicOrbit* prev = &*slots[seed_idx];
    for (long i = static_cast<long>(seed_idx) + step; i >= 0 && i < static_cast<long>(energy_grid.size());
         i += step) {
      try {
        slots[i] = detail::continuation_step(sys, *prev, energy_grid[i], opts, 5);
      } catch (const Error&) {
        fam.complete = false;
        for (long j = i; j >= 0 && j < static_cast<long>(energy_grid.size()); j += step)
          fam.failed_energies.push_back(energy_grid[j]);
        return;
      }
      prev = &*slots[i];
    }
  };
  march(+1);
  march(-1);

  for (auto& s : slots)
    if (s.has_value()) fam.orbits.push_back(std::move(*s));
  std::sort(fam.failed_energies.begin(), fam.failed_energies.end());
  rebuild_family_tables(fam);
  return fam;
}

} // namespace hypres
