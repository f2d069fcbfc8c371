#pragma once

#include "interp.hpp"
#include "types.hpp"

namespace hypres {

// Per-return transverse exponents tabulated along an orbit family, one row
// per energy. Rows are mode-tracked: column j follows the same branch across
// energies by nearest-neighbor matching, so cubic interpolation in between is
// meaningful. Repeated exponents occupy one column each.
class ExponentTable {
public:
  ExponentTable() = default;

  ExponentTable(std::vector<double> energies, std::vector<std::vector<cplx>> rows) {
    require(energies.size() == rows.size() && !rows.empty(), Error::Kind::config,
            "exponent table needs one row per energy");
    // sort rows by energy
    std::vector<size_t> idx(energies.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return energies[a] < energies[b]; });
    for (size_t i : idx) {
      energies_.push_back(energies[i]);
      rows_.push_back(rows[i]);
    }
    const size_t m = rows_[0].size();
    require(m >= 1, Error::Kind::config, "exponent table needs at least one mode");
    for (const auto& r : rows_)
      require(r.size() == m, Error::Kind::config, "exponent table rows must have equal length");
    for (size_t i = 1; i + 1 <= energies_.size() && i < energies_.size(); ++i)
      require(energies_[i] > energies_[i - 1], Error::Kind::config, "duplicate energy in exponent table");

    // nearest-neighbor branch tracking row to row
    for (size_t i = 1; i < rows_.size(); ++i) {
      std::vector<cplx> tracked(m);
      std::vector<bool> used(m, false);
      for (size_t j = 0; j < m; ++j) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < m; ++c) {
          if (used[c]) continue;
          const double dcur = std::abs(rows_[i][c] - rows_[i - 1][j]);
          if (dcur < bd) {
            bd = dcur;
            best = static_cast<int>(c);
          }
        }
        used[static_cast<size_t>(best)] = true;
        tracked[j] = rows_[i][static_cast<size_t>(best)];
      }
      rows_[i] = tracked;
    }

    if (energies_.size() >= 2) {
      for (size_t j = 0; j < m; ++j) {
        std::vector<double> re, im;
        for (const auto& r : rows_) {
          re.push_back(r[j].real());
          im.push_back(r[j].imag());
        }
        re_.push_back(CubicHermite::from_data(energies_, re));
        im_.push_back(CubicHermite::from_data(energies_, im));
      }
    }
  }

  int modes() const { return rows_.empty() ? 0 : static_cast<int>(rows_[0].size()); }

  std::vector<cplx> at(double E) const {
    require(!rows_.empty(), Error::Kind::config, "empty exponent table");
    if (energies_.size() == 1) {
      require(std::abs(E - energies_[0]) <= 1e-9 * std::max(1.0, std::abs(energies_[0])),
              Error::Kind::range, "exponent table holds a single energy");
      return rows_[0];
    }
    std::vector<cplx> out;
    for (size_t j = 0; j < re_.size(); ++j) out.emplace_back(re_[j](E), im_[j](E));
    return out;
  }

  const std::vector<double>& energies() const { return energies_; }
  const std::vector<std::vector<cplx>>& rows() const { return rows_; }

private:
  std::vector<double> energies_;
  std::vector<std::vector<cplx>> rows_;
  std::vector<CubicHermite> re_, im_;
};

struct ResonanceQuery {
  double h = 0.01;
  double delta = 0.5;          // depth window exponent, in (0, 1)
  double depth_constant = 1.0; // C in the bound 0 < -Im z <= C h^delta
  int alpha_max = 3;           // box bound on each transverse index
  std::vector<int> anchor_indices; // empty: every admissible index inside the window
  double maslov_index = 0.0;       // contributes (pi/2) * nu * h to the quantization target
  double h1_time_integral = 0.0;   // one-period time integral of the subprincipal term
  bool include_h1 = false;
  double window_center = std::numeric_limits<double>::quiet_NaN();
  double window_half_width = std::numeric_limits<double>::quiet_NaN();
  long max_entries = 2'000'000;
};

struct ResonanceEntry {
  std::vector<int> alpha;
  cplx z;
  bool excluded = false;
  std::string exclusion_reason; // "real-window" | "depth" | "zero-width"
};

struct ResonanceString {
  int k = 0;      // longitudinal quantization index
  double E_k = 0; // anchor energy
  double T_k = 0; // period at the anchor
  std::vector<cplx> mu; // per-return exponents at the anchor, one per mode
  std::vector<ResonanceEntry> entries; // lexicographic in alpha
  long excluded_count = 0;
};

namespace detail {

inline double quantization_target(int k, const ResonanceQuery& q) {
  double t = 2.0 * std::numbers::pi_v<double> * static_cast<double>(k) * q.h +
             0.5 * std::numbers::pi_v<double> * q.maslov_index * q.h;
  if (q.include_h1) t += q.h * q.h1_time_integral;
  return t;
}

inline double index_from_action(double S, const ResonanceQuery& q) {
  double v = S / q.h - 0.5 * std::numbers::pi_v<double> * q.maslov_index;
  if (q.include_h1) v -= q.h1_time_integral;
  return v / (2.0 * std::numbers::pi_v<double>);
}

} // namespace detail

// Solves S(E) = 2 pi k h + (pi/2) nu h [+ h Integral(H1)] for E on the
// tabulated family. Newton in E with S' = T, clamped to the table range.
// An index outside the attainable action range reports the admissible
// interval of k in the error message.
inline double longitudinal_anchor(const CubicHermite& S_of_E, const CubicHermite& T_of_E, int k,
                                  const ResonanceQuery& q) {
  require(q.h > 0.0, Error::Kind::config, "h must be positive");
  const double target = detail::quantization_target(k, q);
  const double Elo = S_of_E.min_x(), Ehi = S_of_E.max_x();
  const double Slo = S_of_E(Elo), Shi = S_of_E(Ehi);
  require(Shi > Slo, Error::Kind::degeneracy, "action is not increasing across the family");
  // indices at the family edge can put the target one rounding past the
  // table; the slack mirrors the one used when computing the index range
  const double slack = 1e-12 * std::max(1.0, std::abs(target));
  if (target < Slo - slack || target > Shi + slack) {
    const int klo = static_cast<int>(std::ceil(detail::index_from_action(Slo, q) - 1e-12));
    const int khi = static_cast<int>(std::floor(detail::index_from_action(Shi, q) + 1e-12));
    raise(Error::Kind::range, "index k=" + std::to_string(k) +
                                  " has no anchor on the family; admissible k range is [" +
                                  std::to_string(klo) + ", " + std::to_string(khi) + "]");
  }
  double E = 0.5 * (Elo + Ehi);
  for (int it = 0; it < 80; ++it) {
    const double r = S_of_E(E) - target;
    if (std::abs(r) <= 1e-13 * std::max(1.0, std::abs(target))) return E;
    const double T = T_of_E(std::clamp(E, T_of_E.min_x(), T_of_E.max_x()));
    require(T > 0.0, Error::Kind::degeneracy, "nonpositive period in anchor solve");
    E = std::clamp(E - r / T, Elo, Ehi);
  }
  const double r = S_of_E(E) - target;
  require(std::abs(r) <= 1e-10 * std::max(1.0, std::abs(target)), Error::Kind::convergence,
          "anchor solve stagnated at residual " + fmt_num(r));
  return E;
}

// One string per anchor index: entries z = E_k - (i h / T(E_k)) * sum_j
// (alpha_j + 1/2) mu_j(E_k) over the alpha box, filtered by the real window
// and the depth bound. Excluded entries stay listed with their reason.
inline std::vector<ResonanceString> resonance_strings(const CubicHermite& S_of_E,
                                                      const CubicHermite& T_of_E,
                                                      const ExponentTable& table,
                                                      const ResonanceQuery& q) {
  require(q.h > 0.0 && q.delta > 0.0 && q.delta < 1.0, Error::Kind::config,
          "need h > 0 and delta in (0,1)");
  require(q.alpha_max >= 0, Error::Kind::config, "alpha_max must be >= 0");
  require(std::isfinite(q.window_center) && std::isfinite(q.window_half_width) &&
              q.window_half_width > 0.0,
          Error::Kind::config, "real window must be set");

  std::vector<int> ks = q.anchor_indices;
  if (ks.empty()) {
    // every index whose anchor lies inside the real window and on the family;
    // S is increasing, so the window maps to a contiguous index interval and
    // anchors outside it never need solving
    const double wlo = std::max(S_of_E.min_x(), q.window_center - q.window_half_width);
    const double whi = std::min(S_of_E.max_x(), q.window_center + q.window_half_width);
    if (wlo <= whi) {
      const int klo =
          static_cast<int>(std::ceil(detail::index_from_action(S_of_E(wlo), q) - 1e-12));
      const int khi =
          static_cast<int>(std::floor(detail::index_from_action(S_of_E(whi), q) + 1e-12));
      require(static_cast<long>(khi) - klo < 200000, Error::Kind::config,
              "admissible index range too large; pass anchor indices explicitly");
      for (int k = klo; k <= khi; ++k) {
        const double E = longitudinal_anchor(S_of_E, T_of_E, k, q);
        if (std::abs(E - q.window_center) <= q.window_half_width) ks.push_back(k);
      }
    }
  }

  const int m = table.modes();
  double box = 1.0;
  for (int j = 0; j < m; ++j) box *= static_cast<double>(q.alpha_max) + 1.0;
  require(box * static_cast<double>(std::max<size_t>(ks.size(), 1)) <=
              static_cast<double>(q.max_entries),
          Error::Kind::config, "alpha box too large; reduce alpha_max or the index list");

  const double depth_cap = q.depth_constant * std::pow(q.h, q.delta);
  std::vector<ResonanceString> out;
  for (int k : ks) {
    ResonanceString s;
    s.k = k;
    s.E_k = longitudinal_anchor(S_of_E, T_of_E, k, q);
    s.T_k = T_of_E(std::clamp(s.E_k, T_of_E.min_x(), T_of_E.max_x()));
    s.mu = table.at(s.E_k);

    std::vector<int> alpha(static_cast<size_t>(m), 0);
    while (true) {
      cplx acc = 0.0;
      for (int j = 0; j < m; ++j)
        acc += (static_cast<double>(alpha[static_cast<size_t>(j)]) + 0.5) * s.mu[static_cast<size_t>(j)];
      const cplx z = cplx(s.E_k, 0.0) - cplx(0.0, q.h / s.T_k) * acc;

      ResonanceEntry e;
      e.alpha = alpha;
      e.z = z;
      const double width = -z.imag();
      if (std::abs(z.real() - q.window_center) > q.window_half_width) {
        e.excluded = true;
        e.exclusion_reason = "real-window";
      } else if (width <= 0.0) {
        e.excluded = true;
        e.exclusion_reason = "zero-width";
      } else if (width > depth_cap) {
        e.excluded = true;
        e.exclusion_reason = "depth";
      }
      if (e.excluded) ++s.excluded_count;
      s.entries.push_back(std::move(e));

      int pos = m - 1;
      while (pos >= 0 && alpha[static_cast<size_t>(pos)] == q.alpha_max) {
        alpha[static_cast<size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++alpha[static_cast<size_t>(pos)];
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct StringReport {
  long n_strings = 0;
  long total_entries = 0;
  long kept_entries = 0;
  long excluded_real_window = 0;
  long excluded_depth = 0;
  long excluded_zero_width = 0;
  double min_width = 0.0; // over kept entries
  double max_width = 0.0;
  double density_per_unit_energy = 0.0; // kept entries / window width
  double density_reference = 0.0;       // h^{-n (1 - delta)}, for comparison only
};

// Aggregates string data. The density comparison against h^{-n(1-delta)} is
// informational; nothing here asserts it.
inline StringReport string_report(const std::vector<ResonanceString>& strings,
                                  const ResonanceQuery& q, int n_dof) {
  StringReport r;
  r.n_strings = static_cast<long>(strings.size());
  double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
  for (const auto& s : strings)
    for (const auto& e : s.entries) {
      ++r.total_entries;
      if (e.excluded) {
        if (e.exclusion_reason == "real-window")
          ++r.excluded_real_window;
        else if (e.exclusion_reason == "depth")
          ++r.excluded_depth;
        else
          ++r.excluded_zero_width;
      } else {
        ++r.kept_entries;
        const double w = -e.z.imag();
        wmin = std::min(wmin, w);
        wmax = std::max(wmax, w);
      }
    }
  r.min_width = (r.kept_entries > 0) ? wmin : 0.0;
  r.max_width = wmax;
  if (q.window_half_width > 0.0)
    r.density_per_unit_energy = static_cast<double>(r.kept_entries) / (2.0 * q.window_half_width);
  r.density_reference = std::pow(q.h, -static_cast<double>(n_dof) * (1.0 - q.delta));
  return r;
}

} // namespace hypres
