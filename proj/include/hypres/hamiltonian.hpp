#pragma once

#include <cmath>
#include <limits>
#include <sstream>

#include "types.hpp"

namespace hypres {

namespace detail {
inline std::string point_to_string(const Vec& z) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (Eigen::Index i = 0; i < z.size(); ++i) os << (i ? ", " : "") << z[i];
  os << ")";
  return os.str();
}
} // namespace detail

// Energy function on R^n x R^n together with its derivatives. Subclasses
// override grad/hess when closed forms exist; the defaults fall back to
// central differences of h0 (step eps^{1/3} scaled by the coordinate).
//
// h1 is the order-h correction entering averaged energy shifts; zero unless
// a model provides one.
class HamiltonianSystem {
public:
  explicit HamiltonianSystem(int n) : n_(n) {
    require(n >= 1, Error::Kind::config, "system needs n >= 1 degrees of freedom");
  }
  virtual ~HamiltonianSystem() = default;

  int n() const { return n_; }
  int dim() const { return 2 * n_; }

  virtual double h0(const Vec& z) const = 0;
  virtual Vec grad_h0(const Vec& z) const { return fd_gradient(z); }
  virtual Mat hess_h0(const Vec& z) const { return fd_hessian(z); }
  virtual double h1(const Vec& /*z*/) const { return 0.0; }
  virtual bool has_h1() const { return false; }
  virtual std::string kind() const = 0;

  // Periods of the position coordinates; 0 marks an ordinary line coordinate.
  // Closure and section tests wrap angular differences, the integrator state
  // itself is never wrapped.
  virtual Vec angular_periods() const { return Vec::Zero(n_); }

  double energy(const Vec& z) const {
    check_input(z);
    const double v = h0(z);
    require(std::isfinite(v), Error::Kind::evaluation,
            "h0 not finite at " + detail::point_to_string(z));
    return v;
  }

  Vec gradient(const Vec& z) const {
    check_input(z);
    Vec g = grad_h0(z);
    require(g.size() == dim(), Error::Kind::evaluation, "gradient has wrong length");
    require(g.allFinite(), Error::Kind::evaluation,
            "gradient not finite at " + detail::point_to_string(z));
    return g;
  }

  Mat hessian(const Vec& z) const {
    check_input(z);
    Mat h = hess_h0(z);
    require(h.rows() == dim() && h.cols() == dim(), Error::Kind::evaluation,
            "hessian has wrong shape");
    require(h.allFinite(), Error::Kind::evaluation,
            "hessian not finite at " + detail::point_to_string(z));
    // evaluator output is symmetrized; asymmetric analytic Hessians are bugs
    // caught by the derivative consistency tests, not here
    return 0.5 * (h + h.transpose());
  }

  Vec fd_gradient(const Vec& z) const {
    const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
    Vec g(dim());
    Vec zp = z, zm = z;
    for (int i = 0; i < dim(); ++i) {
      const double step = cbrt_eps * std::max(1.0, std::abs(z[i]));
      zp[i] = z[i] + step;
      zm[i] = z[i] - step;
      g[i] = (h0(zp) - h0(zm)) / (zp[i] - zm[i]);
      zp[i] = z[i];
      zm[i] = z[i];
    }
    return g;
  }

  // Differences the gradient, so an analytic gradient buys second-order
  // accurate Hessians for free.
  Mat fd_hessian(const Vec& z) const {
    const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
    Mat h(dim(), dim());
    Vec zp = z, zm = z;
    for (int i = 0; i < dim(); ++i) {
      const double step = cbrt_eps * std::max(1.0, std::abs(z[i]));
      zp[i] = z[i] + step;
      zm[i] = z[i] - step;
      h.col(i) = (grad_h0(zp) - grad_h0(zm)) / (zp[i] - zm[i]);
      zp[i] = z[i];
      zm[i] = z[i];
    }
    return 0.5 * (h + h.transpose());
  }

private:
  void check_input(const Vec& z) const {
    require(z.size() == dim(), Error::Kind::config, "phase vector has wrong length");
    require(z.allFinite(), Error::Kind::evaluation, "phase vector has non-finite entries");
  }

  int n_;
};

// X_H = J grad H = (dH/dxi, -dH/dx).
inline Vec hamilton_vector_field(const HamiltonianSystem& sys, const Vec& z) {
  const Vec g = sys.gradient(z);
  const int n = sys.n();
  Vec X(2 * n);
  X.head(n) = g.tail(n);
  X.tail(n) = -g.head(n);
  return X;
}

inline Vec hamilton_vector_field(const HamiltonianSystem& sys, const PhasePoint& p) {
  return hamilton_vector_field(sys, p.flat());
}

// z - zref with angular position coordinates wrapped to (-p/2, p/2].
inline Vec phase_diff(const HamiltonianSystem& sys, const Vec& z, const Vec& zref) {
  Vec d = z - zref;
  const Vec periods = sys.angular_periods();
  for (int i = 0; i < sys.n(); ++i) {
    const double p = periods[i];
    if (p > 0.0) {
      d[i] = std::remainder(d[i], p);
      if (d[i] == -p / 2) d[i] = p / 2;
    }
  }
  return d;
}

} // namespace hypres
