#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "hamiltonian.hpp"

namespace hypres {

struct IntegrateOptions {
  double atol = 1e-12;
  double rtol = 1e-10;
  double initial_step = 0.0; // 0 picks a starting step from the local derivative scale
  double max_step = 0.0;     // 0 = no cap; event scans cap this themselves
  long max_steps = 5'000'000;
  bool symplectic_mode = false; // fixed-step Gauss-Legendre cross-check, no dense output
  double symplectic_step = 1e-3;
};

struct Trajectory {
  std::vector<double> times; // strictly monotone in the direction of integration
  std::vector<PhasePoint> states;
  double energy_drift = 0.0; // max |H0(state) - H0(initial)| over the samples
};

struct VariationalResult {
  PhasePoint endpoint;
  Mat fundamental_matrix;          // dPhi^t at the initial point
  double symplectic_residual = 0.0; // ||M^T J M - J||, operator norm
};

namespace detail {

// Quartic interpolant over one accepted step [t0, t0+h]; coefficients follow
// the embedded 5(4) pair's dense-output construction.
struct DenseSegment {
  double t0 = 0.0, h = 0.0;
  Vec r1, r2, r3, r4, r5;

  Vec eval(double t) const {
    const double th = (t - t0) / h;
    const double th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }
};

struct Dopri5Tableau {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - bhat, error weights of the embedded order-4 solution
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600;
  static constexpr double e3 = 500.0 / 1113 - 7571.0 / 16695;
  static constexpr double e4 = 125.0 / 192 - 393.0 / 640;
  static constexpr double e5 = -2187.0 / 6784 + 92097.0 / 339200;
  static constexpr double e6 = 11.0 / 84 - 187.0 / 2100;
  static constexpr double e7 = -1.0 / 40;
  // dense output weights
  static constexpr double d1 = -12715105075.0 / 11282082432.0;
  static constexpr double d3 = 87487479700.0 / 32700410799.0;
  static constexpr double d4 = -10690763975.0 / 1880347072.0;
  static constexpr double d5 = 701980252875.0 / 199316789632.0;
  static constexpr double d6 = -1453857185.0 / 822651844.0;
  static constexpr double d7 = 69997945.0 / 29380423.0;
};

// Starting step from derivative magnitudes at t0 plus one explicit Euler probe.
template <class F>
double initial_step_guess(F&& f, double t0, const Vec& y0, const Vec& f0, double dir,
                          double span, const IntegrateOptions& o) {
  const auto rms_scaled = [&](const Vec& v, const Vec& ref) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sc = o.atol + o.rtol * std::abs(ref[i]);
      s += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  const double d0 = rms_scaled(y0, y0);
  const double d1 = rms_scaled(f0, y0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  Vec y1 = y0 + dir * h0 * f0;
  Vec f1(y0.size());
  f(t0 + dir * h0, y1, f1);
  const double d2 = rms_scaled(f1 - f0, y0) / h0;
  double h1;
  if (std::max(d1, d2) <= 1e-15)
    h1 = std::max(1e-6, h0 * 1e-3);
  else
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
  return dir * std::min({100.0 * h0, h1, span});
}

// Drives y' = f(t, y) from t0 to t1 with the embedded 5(4) pair. After every
// accepted step the observer sees the dense segment, the right endpoint and
// its derivative; returning false stops the drive at that point.
template <class F, class Obs>
void dopri5_drive(F&& f, double t0, double t1, Vec& y, const IntegrateOptions& o, Obs&& obs) {
  using T = Dopri5Tableau;
  const Eigen::Index N = y.size();
  if (t1 == t0) return;
  const double dir = (t1 > t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  Vec k1(N), k2(N), k3(N), k4(N), k5(N), k6(N), k7(N), ynew(N), ework(N);
  f(t0, y, k1);

  double t = t0;
  double h = (o.initial_step != 0.0) ? dir * std::min(std::abs(o.initial_step), span)
                                     : initial_step_guess(f, t0, y, k1, dir, span, o);
  bool rejected_last = false;
  DenseSegment seg;

  for (long step = 0; step < o.max_steps; ++step) {
    if (o.max_step > 0.0 && std::abs(h) > o.max_step) h = dir * o.max_step;
    bool last = false;
    if ((t + h - t1) * dir >= 0.0) {
      h = t1 - t;
      last = true;
    }
    const double hmin = 32.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (std::abs(h) < hmin) {
      if (!last)
        raise(Error::Kind::integration,
              "step size underflow at t = " + fmt_num(t) + ", last good state " +
                  detail::point_to_string(y));
      // remaining span is below resolution; close it with one explicit update
      seg.t0 = t;
      seg.h = h;
      seg.r1 = y;
      seg.r2 = h * k1;
      seg.r3 = Vec::Zero(N);
      seg.r4 = Vec::Zero(N);
      seg.r5 = Vec::Zero(N);
      y += h * k1;
      t = t1;
      f(t, y, k1);
      obs(seg, t, y, k1);
      return;
    }

    ework = y + h * (T::a21 * k1);
    f(t + T::c2 * h, ework, k2);
    ework = y + h * (T::a31 * k1 + T::a32 * k2);
    f(t + T::c3 * h, ework, k3);
    ework = y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
    f(t + T::c4 * h, ework, k4);
    ework = y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
    f(t + T::c5 * h, ework, k5);
    ework = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
    f(t + h, ework, k6);
    ynew = y + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
    f(t + h, ynew, k7);

    ework = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
    double errsum = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      const double sc = o.atol + o.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      errsum += (ework[i] / sc) * (ework[i] / sc);
    }
    const double err = std::sqrt(errsum / static_cast<double>(N));

    if (err <= 1.0) {
      seg.t0 = t;
      seg.h = h;
      seg.r1 = y;
      seg.r2 = ynew - y;
      seg.r3 = h * k1 - seg.r2;
      seg.r4 = seg.r2 - h * k7 - seg.r3;
      seg.r5 = h * (T::d1 * k1 + T::d3 * k3 + T::d4 * k4 + T::d5 * k5 + T::d6 * k6 + T::d7 * k7);
      t += h;
      y.swap(ynew);
      k1.swap(k7);
      if (!obs(seg, t, y, k1)) return;
      if (last) return;
      double fac = 0.9 * std::pow(std::max(err, 1e-30), -0.2);
      fac = std::min(rejected_last ? 1.0 : 5.0, std::max(0.2, fac));
      h *= fac;
      rejected_last = false;
    } else {
      const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
      h *= std::min(1.0, fac);
      rejected_last = true;
    }
  }
  raise(Error::Kind::integration, "step limit exceeded at t = " + fmt_num(t));
}

// One fixed step of the 3-stage Gauss-Legendre collocation scheme (order 6,
// symplectic for Hamiltonian fields). Stages solved by fixed-point iteration.
template <class F>
void gauss_legendre_step(F&& f, double t, Vec& y, double h) {
  static const double s15 = std::sqrt(15.0);
  static const double c[3] = {0.5 - s15 / 10.0, 0.5, 0.5 + s15 / 10.0};
  static const double A[3][3] = {
      {5.0 / 36, 2.0 / 9 - s15 / 15, 5.0 / 36 - s15 / 30},
      {5.0 / 36 + s15 / 24, 2.0 / 9, 5.0 / 36 - s15 / 24},
      {5.0 / 36 + s15 / 30, 2.0 / 9 + s15 / 15, 5.0 / 36}};
  static const double b[3] = {5.0 / 18, 4.0 / 9, 5.0 / 18};

  const Eigen::Index N = y.size();
  Vec g[3], gn(N), arg(N), f0(N);
  f(t, y, f0);
  for (auto& gi : g) gi = f0;

  const double tol = 1e-14;
  for (int it = 0; it < 100; ++it) {
    double delta = 0.0;
    for (int i = 0; i < 3; ++i) {
      arg = y + h * (A[i][0] * g[0] + A[i][1] * g[1] + A[i][2] * g[2]);
      f(t + c[i] * h, arg, gn);
      delta = std::max(delta, (gn - g[i]).cwiseAbs().maxCoeff() / std::max(1.0, gn.cwiseAbs().maxCoeff()));
      g[i] = gn;
    }
    if (delta <= tol) break;
    if (it == 99)
      raise(Error::Kind::integration, "implicit stage iteration failed to settle at t = " + fmt_num(t));
  }
  y += h * (b[0] * g[0] + b[1] * g[1] + b[2] * g[2]);
}

// Fixed-step drive; calls obs(t, y) after every step.
template <class F, class Obs>
void gauss_legendre_drive(F&& f, double t0, double t1, Vec& y, double dt_target, Obs&& obs) {
  if (t1 == t0) return;
  const double span = t1 - t0;
  const long m = std::max(1L, static_cast<long>(std::ceil(std::abs(span) / dt_target)));
  const double dt = span / static_cast<double>(m);
  double t = t0;
  for (long i = 0; i < m; ++i) {
    gauss_legendre_step(f, t, y, dt);
    t = t0 + span * static_cast<double>(i + 1) / static_cast<double>(m);
    obs(t, y);
  }
}

// Right-hand side z' = X_H(z).
struct FlowRhs {
  const HamiltonianSystem* sys;
  void operator()(double, const Vec& z, Vec& dz) const {
    const Vec g = sys->gradient(z);
    const int n = sys->n();
    dz.head(n) = g.tail(n);
    dz.tail(n) = -g.head(n);
  }
};

// Extended state [z; vec(M)] with M' = J H''(z) M, column-major vec.
struct VariationalRhs {
  const HamiltonianSystem* sys;
  void operator()(double, const Vec& zy, Vec& dzy) const {
    const int n = sys->n(), d = 2 * n;
    const Vec z = zy.head(d);
    const Vec g = sys->gradient(z);
    dzy.head(n) = g.tail(n);
    dzy.segment(n, n) = -g.head(n);
    const Mat H = sys->hessian(z);
    Eigen::Map<const Mat> M(zy.data() + d, d, d);
    Eigen::Map<Mat> dM(dzy.data() + d, d, d);
    // J H'' without forming J: rows swap with a sign
    dM.topRows(n).noalias() = H.bottomRows(n) * M;
    dM.bottomRows(n).noalias() = -(H.topRows(n) * M);
  }
};

inline double operator_norm(const Mat& A) {
  return Eigen::JacobiSVD<Mat>(A).singularValues()(0);
}

} // namespace detail

// Flow map endpoint only.
inline PhasePoint flow(const HamiltonianSystem& sys, const PhasePoint& p0, double t_final,
                       const IntegrateOptions& opts = {}) {
  Vec y = p0.flat();
  if (opts.symplectic_mode) {
    detail::gauss_legendre_drive(detail::FlowRhs{&sys}, 0.0, t_final, y, opts.symplectic_step,
                                 [](double, const Vec&) {});
  } else {
    detail::dopri5_drive(detail::FlowRhs{&sys}, 0.0, t_final, y, opts,
                         [](const detail::DenseSegment&, double, const Vec&, const Vec&) { return true; });
  }
  return PhasePoint::from_flat(y);
}

// Full trajectory at the accepted step points (or the fixed grid in
// symplectic mode). t_final may have either sign.
inline Trajectory integrate(const HamiltonianSystem& sys, const PhasePoint& p0, double t_final,
                            const IntegrateOptions& opts = {}) {
  Trajectory tr;
  Vec y = p0.flat();
  const double E0 = sys.energy(y);
  tr.times.push_back(0.0);
  tr.states.push_back(p0);
  auto record = [&](double t, const Vec& z) {
    tr.times.push_back(t);
    tr.states.push_back(PhasePoint::from_flat(z));
    tr.energy_drift = std::max(tr.energy_drift, std::abs(sys.energy(z) - E0));
  };
  if (opts.symplectic_mode) {
    detail::gauss_legendre_drive(detail::FlowRhs{&sys}, 0.0, t_final, y, opts.symplectic_step,
                                 [&](double t, const Vec& z) { record(t, z); });
  } else {
    detail::dopri5_drive(detail::FlowRhs{&sys}, 0.0, t_final, y, opts,
                         [&](const detail::DenseSegment&, double t, const Vec& z, const Vec&) {
                           record(t, z);
                           return true;
                         });
  }
  return tr;
}

// Exactly samples+1 states on the uniform grid over [0, t_final], read off the
// dense interpolant. Used wherever a periodic integrand is integrated.
inline Trajectory integrate_sampled(const HamiltonianSystem& sys, const PhasePoint& p0,
                                    double t_final, int samples,
                                    const IntegrateOptions& opts = {}) {
  require(samples >= 1, Error::Kind::config, "need at least one sample interval");
  require(!opts.symplectic_mode, Error::Kind::config,
          "uniform sampling needs the dense-output integrator");
  Trajectory tr;
  Vec y = p0.flat();
  const double E0 = sys.energy(y);
  tr.times.push_back(0.0);
  tr.states.push_back(p0);
  if (t_final == 0.0) return tr;
  int next = 1;
  auto push = [&](double t, const Vec& z) {
    tr.times.push_back(t);
    tr.states.push_back(PhasePoint::from_flat(z));
    tr.energy_drift = std::max(tr.energy_drift, std::abs(sys.energy(z) - E0));
  };
  detail::dopri5_drive(detail::FlowRhs{&sys}, 0.0, t_final, y, opts,
                       [&](const detail::DenseSegment& seg, double t, const Vec& z, const Vec&) {
                         while (next <= samples) {
                           const double ts = t_final * static_cast<double>(next) / samples;
                           if ((ts - t) * (t_final > 0 ? 1.0 : -1.0) > 0.0) break;
                           if (next == samples) {
                             push(ts, z); // grid end coincides with the step end
                           } else {
                             push(ts, seg.eval(ts));
                           }
                           ++next;
                         }
                         return true;
                       });
  // the final accepted step can land one ulp short of t_final, in which case
  // the loop above never saw the terminal grid point; the endpoint state is
  // the terminal sample to integrator accuracy
  if (next == samples) push(t_final, y);
  require(static_cast<int>(tr.times.size()) == samples + 1, Error::Kind::integration,
          "uniform sampling lost grid points");
  return tr;
}

// Joint integration of the flow and its linearization; M stays consistent
// with the realized path because both move in one extended system.
inline VariationalResult integrate_variational(const HamiltonianSystem& sys, const PhasePoint& p0,
                                               double t_final, const IntegrateOptions& opts = {}) {
  const int d = sys.dim();
  Vec y(d + d * d);
  y.head(d) = p0.flat();
  Eigen::Map<Mat>(y.data() + d, d, d) = Mat::Identity(d, d);
  if (opts.symplectic_mode) {
    detail::gauss_legendre_drive(detail::VariationalRhs{&sys}, 0.0, t_final, y,
                                 opts.symplectic_step, [](double, const Vec&) {});
  } else {
    detail::dopri5_drive(detail::VariationalRhs{&sys}, 0.0, t_final, y, opts,
                         [](const detail::DenseSegment&, double, const Vec&, const Vec&) { return true; });
  }
  VariationalResult r;
  r.endpoint = PhasePoint::from_flat(y.head(d));
  r.fundamental_matrix = Eigen::Map<const Mat>(y.data() + d, d, d);
  const Mat J = standard_J(sys.n());
  r.symplectic_residual =
      detail::operator_norm(r.fundamental_matrix.transpose() * J * r.fundamental_matrix - J);
  return r;
}

struct SectionCrossing {
  double t = 0.0;
  PhasePoint state;
  double g_dot = 0.0; // d/dt <c, Phi^t - ref> at the crossing
};

// First transversal crossing of the affine section {<c, rho - ref> = 0} after
// leaving the start. direction > 0 wants increasing event values, < 0
// decreasing, 0 either. Angular coordinates are compared wrapped, so a start
// on the section registers the true return, not the antipodal wrap jump.
inline SectionCrossing section_crossing(const HamiltonianSystem& sys, const PhasePoint& p0,
                                        const Vec& c, const PhasePoint& ref, int direction,
                                        double t_horizon, const IntegrateOptions& opts = {}) {
  require(c.size() == sys.dim(), Error::Kind::config, "section normal has wrong length");
  require(c.norm() > 0.0, Error::Kind::config, "section normal is zero");
  require(t_horizon > 0.0, Error::Kind::config, "section search needs a positive horizon");

  const Vec zref = ref.flat();
  const auto g_of = [&](const Vec& z) { return c.dot(phase_diff(sys, z, zref)); };

  // wrap jumps move the event value by about a full period; genuine crossings
  // move it continuously, so within one subinterval the two are separable
  double min_period = std::numeric_limits<double>::infinity();
  const Vec periods = sys.angular_periods();
  for (int i = 0; i < sys.n(); ++i)
    if (periods[i] > 0.0 && c[i] != 0.0) min_period = std::min(min_period, periods[i]);
  const double jump_guard = 0.45 * min_period;

  const double scale = std::max(1.0, p0.flat().cwiseAbs().maxCoeff());
  const double g_tol = 1e-12 * scale;
  const double arm_tol = 1e-9 * scale;

  // exactly integrable fields would otherwise grow the step without bound
  // and the scan could miss sign changes entirely
  IntegrateOptions io = opts;
  io.max_step =
      (opts.max_step > 0.0) ? std::min(opts.max_step, t_horizon / 256.0) : t_horizon / 256.0;

  detail::FlowRhs rhs{&sys};
  Vec y = p0.flat();
  bool armed = std::abs(g_of(y)) > arm_tol;
  double g_prev = g_of(y);

  bool found = false;
  double t_hit = 0.0;

  constexpr int subdiv = 8;
  detail::dopri5_drive(
      rhs, 0.0, t_horizon, y, io,
      [&](const detail::DenseSegment& seg, double /*t_new*/, const Vec& y_new, const Vec&) {
        double ta = seg.t0, ga = g_prev;
        for (int s = 1; s <= subdiv; ++s) {
          const double tb = seg.t0 + seg.h * static_cast<double>(s) / subdiv;
          const Vec zb = (s == subdiv) ? y_new : seg.eval(tb);
          const double gb = g_of(zb);
          const bool wrap_jump = std::abs(gb - ga) > jump_guard;
          if (armed && !wrap_jump && ((ga <= 0.0 && gb >= 0.0) || (ga >= 0.0 && gb <= 0.0)) &&
              (ga != gb)) {
            // refine inside [ta, tb]: bisection bracket, then Newton on the interpolant
            double lo = ta, hi = tb, glo = ga;
            for (int it = 0; it < 60 && (hi - lo) > 1e-3 * std::abs(seg.h); ++it) {
              const double mid = 0.5 * (lo + hi);
              const double gm = g_of(seg.eval(mid));
              if ((glo <= 0.0) == (gm <= 0.0)) {
                lo = mid;
                glo = gm;
              } else {
                hi = mid;
              }
            }
            double tc = 0.5 * (lo + hi);
            Vec zc(y_new.size()), fc(y_new.size());
            for (int it = 0; it < 50; ++it) {
              zc = seg.eval(tc);
              const double gc = g_of(zc);
              rhs(tc, zc, fc);
              const double gd = c.dot(fc);
              if (std::abs(gc) <= g_tol || gd == 0.0) break;
              double step = -gc / gd;
              step = std::clamp(step, lo - tc, hi - tc); // stay inside the bracket
              tc += step;
              if (std::abs(step) < 1e-17 * std::max(1.0, std::abs(tc))) break;
            }
            zc = seg.eval(tc);
            rhs(tc, zc, fc);
            const double gd = c.dot(fc);
            if (direction == 0 || static_cast<double>(direction) * gd > 0.0) {
              found = true;
              t_hit = tc;
              return false; // stop the drive
            }
          }
          // arming happens after the detection pass so that leaving the
          // section at t = 0 is never itself reported as the crossing
          if (!armed && std::abs(gb) > 1000.0 * arm_tol) armed = true;
          ta = tb;
          ga = gb;
        }
        g_prev = ga;
        return true;
      });

  require(found, Error::Kind::section,
          "no transversal section crossing within horizon " + fmt_num(t_horizon));

  // land exactly on the section: integrate to the interpolated time, then a
  // couple of Newton corrections on the true flow
  SectionCrossing out;
  Vec z = p0.flat();
  detail::dopri5_drive(rhs, 0.0, t_hit, z, opts,
                       [](const detail::DenseSegment&, double, const Vec&, const Vec&) { return true; });
  Vec f(z.size());
  for (int it = 0; it < 8; ++it) {
    const double g = g_of(z);
    rhs(t_hit, z, f);
    const double gd = c.dot(f);
    if (std::abs(g) <= g_tol || gd == 0.0) break;
    const double dt = -g / gd;
    if (std::abs(dt) < 1e-12) {
      z += dt * f; // below integrator resolution; explicit update is exact enough
    } else {
      detail::dopri5_drive(rhs, t_hit, t_hit + dt, z, opts,
                           [](const detail::DenseSegment&, double, const Vec&, const Vec&) { return true; });
    }
    t_hit += dt;
  }
  rhs(t_hit, z, f);
  out.t = t_hit;
  out.state = PhasePoint::from_flat(z);
  out.g_dot = c.dot(f);
  require(std::abs(g_of(z)) <= 1e-10 * scale, Error::Kind::section,
          "section refinement did not reach the requested accuracy");
  return out;
}

} // namespace hypres
