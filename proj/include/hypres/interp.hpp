#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "types.hpp"

namespace hypres {

// Piecewise cubic Hermite interpolant on a strictly increasing grid. Nodal
// slopes are either supplied exactly or estimated by three-point differences
// (nonuniform-aware, second order).
class CubicHermite {
public:
  CubicHermite() = default;

  static CubicHermite with_slopes(std::vector<double> x, std::vector<double> y,
                                  std::vector<double> d) {
    CubicHermite c;
    c.init(std::move(x), std::move(y), std::move(d));
    return c;
  }

  static CubicHermite from_data(std::vector<double> x, std::vector<double> y) {
    require(x.size() >= 2, Error::Kind::config, "interpolation needs at least two nodes");
    const size_t m = x.size();
    std::vector<double> d(m);
    auto slope3 = [&](size_t a, size_t b, size_t c, double at) {
      // derivative of the quadratic through nodes a, b, c evaluated at `at`
      const double xa = x[a], xb = x[b], xc = x[c];
      const double la = (2 * at - xb - xc) / ((xa - xb) * (xa - xc));
      const double lb = (2 * at - xa - xc) / ((xb - xa) * (xb - xc));
      const double lc = (2 * at - xa - xb) / ((xc - xa) * (xc - xb));
      return la * y[a] + lb * y[b] + lc * y[c];
    };
    if (m == 2) {
      d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
    } else {
      d[0] = slope3(0, 1, 2, x[0]);
      d[m - 1] = slope3(m - 3, m - 2, m - 1, x[m - 1]);
      for (size_t i = 1; i + 1 < m; ++i) d[i] = slope3(i - 1, i, i + 1, x[i]);
    }
    CubicHermite c;
    c.init(std::move(x), std::move(y), std::move(d));
    return c;
  }

  bool valid() const { return x_.size() >= 2; }
  double min_x() const { return x_.front(); }
  double max_x() const { return x_.back(); }

  double operator()(double t) const {
    const size_t i = locate(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
  }

  double derivative(double t) const {
    const size_t i = locate(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double g00 = 6 * s * (s - 1);
    const double g10 = 3 * s * s - 4 * s + 1;
    const double g01 = -6 * s * (s - 1);
    const double g11 = 3 * s * s - 2 * s;
    return g00 * y_[i] / h + g10 * d_[i] + g01 * y_[i + 1] / h + g11 * d_[i + 1];
  }

private:
  void init(std::vector<double> x, std::vector<double> y, std::vector<double> d) {
    require(x.size() >= 2 && x.size() == y.size() && x.size() == d.size(), Error::Kind::config,
            "interpolation nodes, values and slopes must match, two or more nodes");
    for (size_t i = 0; i + 1 < x.size(); ++i)
      require(x[i] < x[i + 1], Error::Kind::config, "interpolation nodes must increase strictly");
    x_ = std::move(x);
    y_ = std::move(y);
    d_ = std::move(d);
  }

  size_t locate(double t) const {
    require(valid(), Error::Kind::config, "empty interpolant");
    require(t >= x_.front() - 1e-12 * std::max(1.0, std::abs(x_.front())) &&
                t <= x_.back() + 1e-12 * std::max(1.0, std::abs(x_.back())),
            Error::Kind::range,
            "query " + fmt_num(t) + " outside tabulated range [" +
                fmt_num(x_.front()) + ", " + fmt_num(x_.back()) + "]");
    size_t lo = 0, hi = x_.size() - 1;
    while (hi - lo > 1) {
      const size_t mid = (lo + hi) / 2;
      (t >= x_[mid] ? lo : hi) = mid;
    }
    return lo;
  }

  std::vector<double> x_, y_, d_;
};

} // namespace hypres
