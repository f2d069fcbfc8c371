#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hypres {

// Compact number formatting for error messages (std::to_string truncates
// small magnitudes to 0.000000).
inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Single error type for the whole library. `kind` drives the CLI exit code;
// everything else is message text.
struct Error : std::runtime_error {
  enum class Kind {
    config,       // bad input, unknown kind, unusable paths
    io,           // filesystem trouble
    evaluation,   // non-finite values out of a Hamiltonian callback
    integration,  // step-size underflow, horizon exceeded
    convergence,  // Newton stagnation
    degeneracy,   // trivial multiplicity wrong, section degenerate, Jordan block
    branch,       // spectrum touches (-inf,0] or +-1, no real log
    section,      // no transversal crossing found
    range         // query outside tabulated data
  };
  Kind kind;
  Error(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void raise(Error::Kind k, const std::string& msg) { throw Error(k, msg); }

inline void require(bool ok, Error::Kind k, const std::string& msg) {
  if (!ok) raise(k, msg);
}

// Point of the phase space R^n x R^n. Position and momentum are kept as the
// two named blocks; flat() is the (x, xi) concatenation the integrators use.
struct PhasePoint {
  Vec x;
  Vec xi;

  PhasePoint() = default;
  PhasePoint(Vec x_, Vec xi_) : x(std::move(x_)), xi(std::move(xi_)) {
    require(x.size() == xi.size() && x.size() >= 1, Error::Kind::config,
            "phase point needs matching x/xi blocks of length >= 1");
    require(finite(), Error::Kind::evaluation, "phase point has non-finite entries");
  }

  int n() const { return static_cast<int>(x.size()); }
  int dim() const { return 2 * n(); }

  bool finite() const { return x.allFinite() && xi.allFinite(); }

  Vec flat() const {
    Vec z(dim());
    z << x, xi;
    return z;
  }

  static PhasePoint from_flat(const Vec& z) {
    const auto m = z.size() / 2;
    require(z.size() % 2 == 0 && m >= 1, Error::Kind::config, "flat phase vector must have even length");
    return PhasePoint(z.head(m), z.tail(m));
  }
};

// J = [[0, I], [-I, 0]] acting on (x, xi). J^2 = -Id exactly.
inline Mat standard_J(int m) {
  Mat J = Mat::Zero(2 * m, 2 * m);
  J.topRightCorner(m, m) = Mat::Identity(m, m);
  J.bottomLeftCorner(m, m) = -Mat::Identity(m, m);
  return J;
}

// sigma(u, v) = <Ju, v>. The Gram matrix of the coordinate basis is -J,
// so sigma(e_{x_i}, e_{xi_i}) = -1 and dH(w) = sigma(w, X_H).
struct SymplecticForm {
  int dim; // 2m
  Mat J;

  explicit SymplecticForm(int m) : dim(2 * m), J(standard_J(m)) {
    require(m >= 1, Error::Kind::config, "symplectic form needs m >= 1");
  }

  double sigma(const Vec& u, const Vec& v) const { return (J * u).dot(v); }
  cplx sigma(const CVec& u, const CVec& v) const {
    // bilinear extension, no conjugation
    return (J.cast<cplx>() * u).cwiseProduct(v).sum();
  }
};

// sigma evaluated against an explicit Gram matrix G (G = -J in standard
// coordinates); used on reduced spaces where the induced form is recomputed.
inline double sigma_with_gram(const Mat& G, const Vec& u, const Vec& v) { return u.dot(G * v); }
inline cplx sigma_with_gram(const Mat& G, const CVec& u, const CVec& v) {
  return (G.cast<cplx>() * v).cwiseProduct(u).sum();
}

} // namespace hypres
