#pragma once

#include <cstdlib>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <unsupported/Eigen/MatrixFunctions>

#include "hamiltonian.hpp"

namespace hypres {

// System selector as read from config files: {"kind": ..., "parameters": {...}}.
// Custom systems are registered programmatically and bypass this.
struct ModelSystemSpec {
  std::string kind;
  std::map<std::string, double> parameters;

  double param(const std::string& name, std::optional<double> fallback = std::nullopt) const {
    auto it = parameters.find(name);
    if (it != parameters.end()) return it->second;
    require(fallback.has_value(), Error::Kind::config,
            "missing parameter '" + name + "' for system '" + kind + "'");
    return *fallback;
  }
  bool has(const std::string& name) const { return parameters.count(name) > 0; }
};

// Solvable benchmark: one angle-action pair carrying the closed orbit plus a
// direct sum of elementary quadratic blocks on the transverse coordinates.
//
//   H(theta, y, eta_theta, eta) = eta_theta + sum_j b_j(y, eta)
//
// theta is angular with period T0, so the orbit {y = eta = 0, eta_theta = E}
// closes after exactly T0 at every energy. A block with per-return exponent
// mu = re + i*im contributes, at rate 1/T0:
//   im == 0:           (re/T0) * y*eta                 (1 dof, multipliers e^{+-re})
//   re == 0:           (im/T0) * (y^2 + eta^2)/2       (1 dof, multipliers e^{+-i im})
//   re, im both != 0:  ((re)(y1 eta1 + y2 eta2) + (im)(y1 eta2 - y2 eta1))/T0
//                                                      (2 dof, quadruple e^{+-re +- i im})
class NormalFormSystem : public HamiltonianSystem {
public:
  struct Mode {
    double re = 0.0, im = 0.0;
    int dof() const { return (re != 0.0 && im != 0.0) ? 2 : 1; }
  };

  NormalFormSystem(double T0, std::vector<Mode> modes, double h1_const = 0.0)
      : HamiltonianSystem(count_dof(modes) + 1), T0_(T0), modes_(std::move(modes)), h1_(h1_const) {
    require(T0 > 0.0, Error::Kind::config, "normal_form needs T0 > 0");
    build_quadratic();
  }

  double h0(const Vec& z) const override { return z[n()] + z.dot(Q_ * z); }
  Vec grad_h0(const Vec& z) const override {
    Vec g = 2.0 * (Q_ * z);
    g[n()] += 1.0;
    return g;
  }
  Mat hess_h0(const Vec&) const override { return 2.0 * Q_; }
  double h1(const Vec&) const override { return h1_; }
  bool has_h1() const override { return h1_ != 0.0; }
  std::string kind() const override { return "normal_form"; }

  Vec angular_periods() const override {
    Vec p = Vec::Zero(n());
    p[0] = T0_;
    return p;
  }

  double T0() const { return T0_; }
  const std::vector<Mode>& modes() const { return modes_; }

  // Orbit at energy E: theta free, eta_theta = E, transverse zero.
  PhasePoint orbit_point(double E) const {
    Vec x = Vec::Zero(n()), xi = Vec::Zero(n());
    xi[0] = E;
    return PhasePoint(x, xi);
  }

  // The Hessian is constant, so dPhi^t = exp(t J H'') everywhere.
  Mat exact_monodromy(double t) const {
    const Mat G = t * standard_J(n()) * (2.0 * Q_);
    return G.exp();
  }

private:
  static int count_dof(const std::vector<Mode>& ms) {
    require(!ms.empty(), Error::Kind::config, "normal_form needs at least one mode");
    int d = 0;
    for (const auto& m : ms) {
      require(m.re != 0.0 || m.im != 0.0, Error::Kind::config, "normal_form mode must be nonzero");
      d += m.dof();
    }
    return d;
  }

  void build_quadratic() {
    const int N = n();
    Q_ = Mat::Zero(2 * N, 2 * N);
    int slot = 1; // transverse position index; momentum partner sits at N + slot
    auto sym = [&](int i, int j, double v) {
      Q_(i, j) += v / 2;
      Q_(j, i) += v / 2;
    };
    for (const auto& m : modes_) {
      const double a = m.re / T0_, w = m.im / T0_;
      if (m.dof() == 1) {
        if (m.im == 0.0) {
          sym(slot, N + slot, a);
        } else {
          sym(slot, slot, w / 2);
          sym(N + slot, N + slot, w / 2);
        }
        slot += 1;
      } else {
        const int y1 = slot, y2 = slot + 1, e1 = N + slot, e2 = N + slot + 1;
        sym(y1, e1, a);
        sym(y2, e2, a);
        sym(y1, e2, w);
        sym(y2, e1, -w);
        slot += 2;
      }
    }
  }

  double T0_;
  std::vector<Mode> modes_;
  double h1_;
  Mat Q_;
};

// Geodesic flow on the one-sheeted hyperboloid in the chart
//   x = cosh u cos v, y = cosh u sin v, z = sinh u,
// first fundamental form diag(cosh 2u, cosh^2 u). The equator u = 0 is a
// closed unstable geodesic; v is angular with period 2 pi.
class HyperboloidGeodesicSystem : public HamiltonianSystem {
public:
  HyperboloidGeodesicSystem() : HamiltonianSystem(2) {}

  // H = (a(u) xi_u^2 + b(u) xi_v^2)/2 with inverse-metric weights
  // a = 1/cosh 2u, b = 1/cosh^2 u.
  double h0(const Vec& z) const override {
    const double u = z[0], xu = z[2], xv = z[3];
    return 0.5 * (au(u) * xu * xu + bu(u) * xv * xv);
  }

  Vec grad_h0(const Vec& z) const override {
    const double u = z[0], xu = z[2], xv = z[3];
    Vec g(4);
    g[0] = 0.5 * (dau(u) * xu * xu + dbu(u) * xv * xv);
    g[1] = 0.0;
    g[2] = au(u) * xu;
    g[3] = bu(u) * xv;
    return g;
  }

  Mat hess_h0(const Vec& z) const override {
    const double u = z[0], xu = z[2], xv = z[3];
    Mat h = Mat::Zero(4, 4);
    h(0, 0) = 0.5 * (ddau(u) * xu * xu + ddbu(u) * xv * xv);
    h(0, 2) = h(2, 0) = dau(u) * xu;
    h(0, 3) = h(3, 0) = dbu(u) * xv;
    h(2, 2) = au(u);
    h(3, 3) = bu(u);
    return h;
  }

  std::string kind() const override { return "hyperboloid_geodesic"; }

  Vec angular_periods() const override {
    Vec p = Vec::Zero(2);
    p[1] = 2.0 * std::numbers::pi_v<double>;
    return p;
  }

  // Equator at energy E > 0: u = 0, xi_v = sqrt(2E).
  PhasePoint equator_point(double E) const {
    require(E > 0.0, Error::Kind::config, "equator needs E > 0");
    Vec x = Vec::Zero(2), xi = Vec::Zero(2);
    xi[1] = std::sqrt(2.0 * E);
    return PhasePoint(x, xi);
  }

  static double au(double u) { return 1.0 / std::cosh(2 * u); }
  static double bu(double u) {
    const double c = std::cosh(u);
    return 1.0 / (c * c);
  }
  static double dau(double u) { return -2.0 * std::tanh(2 * u) * au(u); }
  static double dbu(double u) { return -2.0 * std::tanh(u) * bu(u); }
  static double ddau(double u) {
    const double s = au(u), t = std::tanh(2 * u);
    return 4.0 * s * (t * t - s * s);
  }
  static double ddbu(double u) {
    const double b = bu(u), t = std::tanh(u);
    return b * (4.0 * t * t - 2.0 * b);
  }
};

// Repulsive Coulomb center with a constant field along x1:
//   H = |xi|^2 + 1/|r| + a*x1   on R^3 (kinetic term without the 1/2).
// The effective axis potential 1/s + a*s has its saddle at s = 1/sqrt(a) with
// energy 2*sqrt(a); above that energy the axis segment between the turning
// points carries a closed libration.
class CoulombStarkSystem : public HamiltonianSystem {
public:
  explicit CoulombStarkSystem(double a) : HamiltonianSystem(3), a_(a) {
    require(a > 0.0, Error::Kind::config, "coulomb_stark needs a > 0");
  }

  double h0(const Vec& z) const override {
    const auto r = z.head(3);
    const auto xi = z.tail(3);
    const double rn = r.norm();
    require(rn > 1e-12, Error::Kind::evaluation,
            "coulomb_stark evaluated at the singular point r = 0");
    return xi.squaredNorm() + 1.0 / rn + a_ * r[0];
  }

  Vec grad_h0(const Vec& z) const override {
    const Eigen::Vector3d r = z.head(3);
    const double rn = r.norm();
    require(rn > 1e-12, Error::Kind::evaluation,
            "coulomb_stark evaluated at the singular point r = 0");
    Vec g(6);
    g.head(3) = -r / (rn * rn * rn);
    g[0] += a_;
    g.tail(3) = 2.0 * z.tail(3);
    return g;
  }

  Mat hess_h0(const Vec& z) const override {
    const Eigen::Vector3d r = z.head(3);
    const double rn = r.norm();
    require(rn > 1e-12, Error::Kind::evaluation,
            "coulomb_stark evaluated at the singular point r = 0");
    const double r3 = rn * rn * rn, r5 = r3 * rn * rn;
    Mat h = Mat::Zero(6, 6);
    h.topLeftCorner(3, 3) = 3.0 * (r * r.transpose()) / r5 - Mat::Identity(3, 3) / r3;
    h.bottomRightCorner(3, 3) = 2.0 * Mat::Identity(3, 3);
    return h;
  }

  std::string kind() const override { return "coulomb_stark"; }

  double field() const { return a_; }
  double saddle_energy() const { return 2.0 * std::sqrt(a_); }

  // Inner/outer axis turning points: roots of a s^2 - E s + 1 = 0.
  std::pair<double, double> turning_points(double E) const {
    require(E > saddle_energy(), Error::Kind::config,
            "coulomb_stark axis orbit needs E above the saddle energy");
    const double d = std::sqrt(E * E - 4.0 * a_);
    return {(E - d) / (2.0 * a_), (E + d) / (2.0 * a_)};
  }

  // Inner turning point of the axis libration, momentum zero.
  PhasePoint libration_point(double E) const {
    const auto [sm, sp] = turning_points(E);
    (void)sp;
    Vec x = Vec::Zero(3), xi = Vec::Zero(3);
    x[0] = sm;
    return PhasePoint(x, xi);
  }

private:
  double a_;
};

inline NormalFormSystem::Mode normal_form_mode(const ModelSystemSpec& spec, int j) {
  const std::string base = "mu" + std::to_string(j);
  NormalFormSystem::Mode m;
  m.re = spec.has(base + "_re") ? spec.param(base + "_re") : 0.0;
  m.im = spec.has(base + "_im") ? spec.param(base + "_im") : 0.0;
  require(m.re != 0.0 || m.im != 0.0, Error::Kind::config,
          "normal_form mode " + base + " must have a nonzero _re or _im part");
  return m;
}

// Parameter names: normal_form takes T0 plus modes mu1_re/mu1_im, mu2_re, ...
// (consecutively numbered, missing part = 0, optional h1); coulomb_stark takes
// the field strength a; hyperboloid_geodesic takes none.
inline std::unique_ptr<HamiltonianSystem> build_model(const ModelSystemSpec& spec) {
  if (spec.kind == "normal_form") {
    const double T0 = spec.param("T0");
    std::vector<NormalFormSystem::Mode> modes;
    for (int j = 1; spec.has("mu" + std::to_string(j) + "_re") || spec.has("mu" + std::to_string(j) + "_im"); ++j)
      modes.push_back(normal_form_mode(spec, j));
    require(!modes.empty(), Error::Kind::config, "normal_form needs mu1_re or mu1_im");
    for (const auto& [key, value] : spec.parameters) {
      (void)value;
      if (key.rfind("mu", 0) == 0) {
        const int j = std::atoi(key.substr(2).c_str());
        require(j >= 1 && j <= static_cast<int>(modes.size()), Error::Kind::config,
                "normal_form modes must be numbered consecutively from mu1; '" + key + "' leaves a gap");
      }
    }
    const double h1c = spec.has("h1") ? spec.param("h1") : 0.0;
    return std::make_unique<NormalFormSystem>(T0, std::move(modes), h1c);
  }
  if (spec.kind == "hyperboloid_geodesic") {
    return std::make_unique<HyperboloidGeodesicSystem>();
  }
  if (spec.kind == "coulomb_stark") {
    return std::make_unique<CoulombStarkSystem>(spec.param("a"));
  }
  raise(Error::Kind::config, "unknown system kind '" + spec.kind + "'");
}

// Built-in starting guess for the distinguished closed orbit at energy E.
inline std::optional<PhasePoint> model_seed(const HamiltonianSystem& sys, double E) {
  if (auto* nf = dynamic_cast<const NormalFormSystem*>(&sys)) return nf->orbit_point(E);
  if (auto* hy = dynamic_cast<const HyperboloidGeodesicSystem*>(&sys)) return hy->equator_point(E);
  if (auto* cs = dynamic_cast<const CoulombStarkSystem*>(&sys)) return cs->libration_point(E);
  return std::nullopt;
}

} // namespace hypres
