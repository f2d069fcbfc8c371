#pragma once

#include <map>
#include <optional>
#include <unsupported/Eigen/MatrixFunctions>

#include "types.hpp"

namespace hypres {

struct ReduceOptions {
  double symplectic_tol = 1e-8; // bound on ||M^T J M - J|| of the input
  // The trivial eigenvalue pair sits in a Jordan block whenever the period
  // varies with energy, so its numerical splitting scales like the square
  // root of the monodromy error; the cluster radius must allow for that.
  double unit_cluster_tol = 1e-4;
};

struct ReducedMonodromy {
  Mat full;    // 2n x 2n
  Mat reduced; // (2n-2) x (2n-2), symplectic w.r.t. the standard form
  Mat basis;   // 2n x (2n-2) Darboux frame of the transverse space
  int trivial_multiplicity = 0;
};

enum class ModeTag { elliptic, real_hyperbolic, loxodromic };

inline const char* tag_name(ModeTag t) {
  switch (t) {
    case ModeTag::elliptic: return "elliptic";
    case ModeTag::real_hyperbolic: return "real-hyperbolic";
    default: return "loxodromic";
  }
}

struct Multiplier {
  cplx value;
  int multiplicity = 1;
  ModeTag tag = ModeTag::elliptic;
};

struct Exponent {
  cplx value; // normalized: Re > 0, or Re = 0 and Im > 0
  int multiplicity = 1;
  ModeTag tag = ModeTag::elliptic;
};

struct FloquetData {
  std::vector<Multiplier> multipliers; // clustered, deterministic order
  std::vector<Exponent> exponents;     // distinct normalized representatives
  Mat log_matrix;                      // B with exp(B) = A, J-antisymmetric
  int hyperbolic_dimension = 0;        // distinct exponents with Re > 0
  CMat F_plus, F_minus;                // eigenbases, n-1 columns each
  Mat b_matrix;                        // q(z) = z . b_matrix z equals sigma(z, Bz)/2
  std::vector<Mat> action_coordinates; // elementary quadratics, reduced coordinates
  std::vector<double> action_coefficients;
  std::vector<std::string> action_kinds; // per entry: which elementary shape it is
  Mat adapted_basis;                   // reduced-space Darboux frame adapted to B

  double pairing_residual = 0.0;
  double log_residual = 0.0;       // ||exp(B) - A|| / max(1, ||A||)
  double structure_residual = 0.0; // ||B^T J + J B||
  double lagrangian_residual = 0.0;
  double decomposition_residual = 0.0;
  std::vector<double> dissipativity; // (1/2i) sigma(u, conj u) per F_plus column
};

namespace detail {

inline double operator_norm_f(const Mat& A) { return Eigen::JacobiSVD<Mat>(A).singularValues()(0); }

// Symplectic pair orthogonalization: removes the (u_k, v_k) components of w,
// where the pairs are normalized to sigma(u_k, v_k) = -1.
inline void symplectic_project_out(const Mat& G, const std::vector<Vec>& us,
                                   const std::vector<Vec>& vs, Vec& w) {
  for (size_t k = 0; k < us.size(); ++k) {
    const double a = vs[k].dot(G * w);  // sigma(v_k, w)
    const double b = us[k].dot(G * w);  // sigma(u_k, w)
    w = w - a * us[k] + b * vs[k];
  }
}

// Darboux frame for an antisymmetric nondegenerate Gram matrix G on R^{2m}:
// returns C with C^T G C = -J_std. Greedy pivoting keeps it stable for the
// small dimensions that occur here.
inline Mat darboux_frame(const Mat& G) {
  const int dim = static_cast<int>(G.rows());
  require(dim % 2 == 0 && dim >= 2, Error::Kind::degeneracy, "induced form on odd-dimensional space");
  const int m = dim / 2;
  std::vector<Vec> pool;
  for (int i = 0; i < dim; ++i) pool.push_back(Vec::Unit(dim, i));
  std::vector<Vec> us, vs;
  for (int k = 0; k < m; ++k) {
    // pick the remaining vector with the largest norm, then its best partner
    std::sort(pool.begin(), pool.end(), [](const Vec& a, const Vec& b) { return a.norm() > b.norm(); });
    Vec u = pool.front();
    pool.erase(pool.begin());
    require(u.norm() > 1e-12, Error::Kind::degeneracy, "degenerate induced symplectic form");
    u.normalize();
    size_t best = 0;
    double best_s = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
      const double s = std::abs(u.dot(G * pool[i]) / std::max(pool[i].norm(), 1e-300));
      if (s > best_s) {
        best_s = s;
        best = i;
      }
    }
    require(best_s > 1e-10, Error::Kind::degeneracy, "induced symplectic form is degenerate");
    Vec v = pool[best];
    pool.erase(pool.begin() + static_cast<long>(best));
    const double s = u.dot(G * v); // sigma(u, v)
    v /= -s;                       // sigma(u, v) = -1
    const double gamma = std::sqrt(v.norm() / u.norm());
    u *= gamma;
    v /= gamma;
    for (auto& w : pool) {
      const double a = v.dot(G * w);
      const double b = u.dot(G * w);
      w = w - a * u + b * v;
    }
    us.push_back(u);
    vs.push_back(v);
  }
  Mat C(dim, dim);
  for (int k = 0; k < m; ++k) {
    C.col(k) = us[static_cast<size_t>(k)];
    C.col(m + k) = vs[static_cast<size_t>(k)];
  }
  return C;
}

} // namespace detail

// Restriction of the monodromy to the symplectic complement of the plane
// spanned by the flow direction X and the energy gradient g, expressed in a
// Darboux frame so the result is symplectic w.r.t. the standard form.
// Exact at a true periodic point because M X = X and g^T M = g^T.
inline ReducedMonodromy reduce_monodromy(const Mat& full, const Vec& X, const Vec& g,
                                         const ReduceOptions& opts = {}) {
  const int d = static_cast<int>(full.rows());
  require(full.cols() == d && d >= 4 && d % 2 == 0, Error::Kind::config,
          "monodromy must be square of even dimension >= 4");
  require(X.size() == d && g.size() == d, Error::Kind::config, "vector lengths must match the matrix");
  require(X.norm() > 0.0 && g.norm() > 0.0, Error::Kind::degeneracy,
          "flow direction or gradient vanishes on the orbit");
  const int n = d / 2;
  const Mat J = standard_J(n);

  const double symp = detail::operator_norm_f(full.transpose() * J * full - J);
  require(symp <= opts.symplectic_tol, Error::Kind::degeneracy,
          "monodromy violates the symplectic identity by " + fmt_num(symp));

  ReducedMonodromy out;
  out.full = full;

  // multiplicity of the trivial eigenvalue; the flow and gradient directions
  // must account for exactly two
  const Eigen::EigenSolver<Mat> es(full);
  int mult = 0;
  for (int i = 0; i < d; ++i)
    if (std::abs(es.eigenvalues()[i] - cplx(1.0, 0.0)) <= opts.unit_cluster_tol) ++mult;
  out.trivial_multiplicity = mult;
  require(mult == 2, Error::Kind::degeneracy,
          "eigenvalue 1 has multiplicity " + std::to_string(mult) +
              ", need exactly 2 (degenerate transverse dynamics)");

  // The symplectic complement of span{X, g} coincides with the Euclidean one
  // because J maps the span onto itself (JX = -g up to scaling, Jg = X).
  Mat P(d, 2);
  P.col(0) = X.normalized();
  P.col(1) = (g - g.dot(P.col(0)) * P.col(0)).normalized();
  const Eigen::HouseholderQR<Mat> qr(P);
  const Mat Qfull = qr.householderQ();
  const Mat W = Qfull.rightCols(d - 2); // orthonormal basis of the transverse space

  const Mat A_W = W.transpose() * full * W;
  const Mat G_W = -(W.transpose() * J * W); // induced Gram, sigma(w_i, w_j)

  const Mat C = detail::darboux_frame(G_W);
  const Mat Jr = standard_J(n - 1);
  // C^T G_W C = -Jr, so C^{-1} = Jr C^T G_W
  const Mat Cinv = Jr * C.transpose() * G_W;
  out.reduced = Cinv * A_W * C;
  out.basis = W * C;

  const double rsymp =
      detail::operator_norm_f(out.reduced.transpose() * Jr * out.reduced - Jr);
  require(rsymp <= 1e-7, Error::Kind::degeneracy,
          "reduced return map violates the symplectic identity by " + fmt_num(rsymp));
  return out;
}

struct ClassifyOptions {
  double pairing_tol = 1e-7; // relative
};

// Eigenvalues of a symplectic matrix grouped into clusters and tagged.
// Eigenvalues on (-inf, 0] or within pairing tolerance of +-1 are rejected:
// the first has no real logarithm branch, the second has degenerate
// normal-form type.
inline std::vector<Multiplier> classify_multipliers(const Mat& A, const ClassifyOptions& opts = {}) {
  const int d = static_cast<int>(A.rows());
  require(A.cols() == d && d >= 2 && d % 2 == 0, Error::Kind::config,
          "return map must be square of even dimension");
  const Eigen::EigenSolver<Mat> es(A);
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + d);

  const double tol = opts.pairing_tol;
  for (const cplx& l : ev) {
    const double s = std::max(1.0, std::abs(l));
    require(std::abs(l - 1.0) > tol * s && std::abs(l + 1.0) > tol * s, Error::Kind::degeneracy,
            "multiplier within pairing tolerance of +-1");
    require(!(std::abs(l.imag()) <= tol * std::abs(l) && l.real() < 0.0), Error::Kind::branch,
            "negative real multiplier has no admissible logarithm");
    require(std::abs(l) > 1e-12, Error::Kind::degeneracy, "multiplier at zero; map is singular");
  }

  // greedy clustering at relative tolerance
  std::vector<Multiplier> groups;
  std::vector<bool> used(ev.size(), false);
  for (size_t i = 0; i < ev.size(); ++i) {
    if (used[i]) continue;
    cplx sum = ev[i];
    int cnt = 1;
    used[i] = true;
    for (size_t j = i + 1; j < ev.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(ev[j] - ev[i]) <= tol * std::max(1.0, std::abs(ev[i]))) {
        sum += ev[j];
        ++cnt;
        used[j] = true;
      }
    }
    Multiplier m;
    m.value = sum / static_cast<double>(cnt);
    m.multiplicity = cnt;
    const double s = std::abs(m.value);
    if (std::abs(s - 1.0) <= tol * std::max(1.0, s))
      m.tag = ModeTag::elliptic;
    else if (std::abs(m.value.imag()) <= tol * s)
      m.tag = ModeTag::real_hyperbolic;
    else
      m.tag = ModeTag::loxodromic;
    groups.push_back(m);
  }

  // deterministic order: modulus down, then real part down, then imag down
  std::sort(groups.begin(), groups.end(), [](const Multiplier& a, const Multiplier& b) {
    const double ma = std::abs(a.value), mb = std::abs(b.value);
    if (ma != mb) return ma > mb;
    if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
    return a.value.imag() > b.value.imag();
  });
  return groups;
}

// Largest distance from any multiplier cluster to the nearest cluster that
// should partner it under inversion and conjugation.
inline double pairing_closure_residual(const std::vector<Multiplier>& groups) {
  double worst = 0.0;
  auto nearest = [&](cplx target, int want_mult) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : groups)
      if (g.multiplicity == want_mult)
        best = std::min(best, std::abs(g.value - target) / std::max(1.0, std::abs(target)));
    return best;
  };
  for (const auto& g : groups) {
    worst = std::max(worst, nearest(1.0 / g.value, g.multiplicity));
    worst = std::max(worst, nearest(std::conj(g.value), g.multiplicity));
  }
  return worst;
}

struct LogOptions {
  double exp_tol = 1e-8;        // bound on ||exp(B) - A|| / max(1, ||A||)
  double structure_tol = 1e-10; // bound on ||B^T J + J B||
};

// Real logarithm of a symplectic matrix with the Hamiltonian structure
// restored by projection B <- (B + J B^T J)/2 and certified afterwards.
// The principal branch of a real matrix conjugates correctly by itself.
// The roundtrip certificate is relative to ||A||: for a strongly unstable
// return map the product ||A|| * eps already exceeds any fixed absolute
// bound, so an absolute certificate would reject exact arithmetic.
inline Mat symplectic_log(const Mat& A, const LogOptions& opts = {}) {
  classify_multipliers(A); // rejects (-inf, 0] and +-1 spectra up front
  const int d = static_cast<int>(A.rows());
  const Mat J = standard_J(d / 2);

  Mat B = A.log();
  require(B.allFinite(), Error::Kind::branch, "matrix logarithm produced non-finite entries");
  B = 0.5 * (B + J * B.transpose() * J);

  const double structure = (B.transpose() * J + J * B).norm();
  require(structure <= opts.structure_tol, Error::Kind::branch,
          "logarithm lost the Hamiltonian structure: residual " + fmt_num(structure));
  const Mat expB = B.exp();
  const double rt = detail::operator_norm_f(expB - A) / std::max(1.0, detail::operator_norm_f(A));
  require(rt <= opts.exp_tol, Error::Kind::convergence,
          "log/exp roundtrip residual " + fmt_num(rt) + " above tolerance");
  return B;
}

// Normalized exponent representatives from the spectrum of B: Re > 0 kept,
// pure-imaginary kept with Im > 0. Multiplicities from clustering.
inline std::vector<Exponent> floquet_exponents(const Mat& B, double pairing_tol = 1e-7) {
  const int d = static_cast<int>(B.rows());
  const Eigen::EigenSolver<Mat> es(B);
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + d);

  const double zero_tol = pairing_tol;
  std::vector<Exponent> out;
  std::vector<bool> used(ev.size(), false);
  for (size_t i = 0; i < ev.size(); ++i) {
    if (used[i]) continue;
    require(std::abs(ev[i]) > zero_tol, Error::Kind::degeneracy,
            "zero Floquet exponent: transverse dynamics is degenerate");
    // normalize to the closed right half plane, upper imaginary axis
    cplx mu = ev[i];
    if (mu.real() < -zero_tol || (std::abs(mu.real()) <= zero_tol && mu.imag() < 0.0)) continue;
    cplx sum = mu;
    int cnt = 1;
    used[i] = true;
    for (size_t j = i + 1; j < ev.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(ev[j] - mu) <= pairing_tol * std::max(1.0, std::abs(mu))) {
        sum += ev[j];
        ++cnt;
        used[j] = true;
      }
    }
    Exponent e;
    e.value = sum / static_cast<double>(cnt);
    if (std::abs(e.value.real()) <= zero_tol) e.value.real(0.0);
    e.multiplicity = cnt;
    if (e.value.real() == 0.0)
      e.tag = ModeTag::elliptic;
    else if (std::abs(e.value.imag()) <= zero_tol * std::max(1.0, std::abs(e.value)))
      e.tag = ModeTag::real_hyperbolic;
    else
      e.tag = ModeTag::loxodromic;
    if (e.tag == ModeTag::real_hyperbolic) e.value.imag(0.0);
    out.push_back(e);
  }

  int total = 0;
  for (const auto& e : out) total += e.multiplicity;
  require(2 * total == d, Error::Kind::degeneracy,
          "exponent multiplicities do not pair up across the spectrum");

  std::sort(out.begin(), out.end(), [](const Exponent& a, const Exponent& b) {
    if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
    return a.value.imag() > b.value.imag();
  });
  return out;
}

namespace detail {

// Deterministic phase: rotate so the largest-magnitude entry is real positive,
// then scale to unit Euclidean norm.
inline CVec fix_phase(CVec u) {
  int imax = 0;
  double amax = 0.0;
  for (int i = 0; i < u.size(); ++i)
    if (std::abs(u[i]) > amax) {
      amax = std::abs(u[i]);
      imax = i;
    }
  require(amax > 0.0, Error::Kind::degeneracy, "zero eigenvector");
  u *= std::conj(u[imax]) / amax;
  u /= u.norm();
  return u;
}

struct EigenPairs {
  std::vector<cplx> values;
  std::vector<CVec> vectors;
  double cond = 0.0;
};

inline EigenPairs eigen_pairs(const Mat& B) {
  const Eigen::EigenSolver<Mat> es(B);
  EigenPairs out;
  const int d = static_cast<int>(B.rows());
  CMat V = es.eigenvectors();
  const Eigen::JacobiSVD<CMat> svd(V);
  const double smin = svd.singularValues()(d - 1);
  const double smax = svd.singularValues()(0);
  out.cond = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    out.values.push_back(es.eigenvalues()[i]);
    out.vectors.push_back(fix_phase(V.col(i)));
  }
  return out;
}

} // namespace detail

struct InvariantSplitting {
  CMat F_plus;  // (2n-2) x (n-1), eigenvectors for the normalized exponents
  CMat F_minus; // same for their negatives, column-aligned
  double lagrangian_residual = 0.0;
  std::vector<double> dissipativity; // (1/2i) sigma(u, conj u) per F_plus column
};

// Spectral subspaces of B split by the half-plane normalization. Columns are
// ordered to follow floquet_exponents(B) with multiplicity. Requires a
// semisimple B; a near-defective eigenbasis is rejected.
inline InvariantSplitting invariant_splitting(const Mat& B, double pairing_tol = 1e-7) {
  const int d = static_cast<int>(B.rows());
  const int m = d / 2;
  const auto exps = floquet_exponents(B, pairing_tol);
  const auto ep = detail::eigen_pairs(B);
  require(ep.cond <= 1e8, Error::Kind::degeneracy,
          "eigenbasis condition number exceeds 1e8; transverse block is not semisimple");

  InvariantSplitting out;
  out.F_plus.resize(d, m);
  out.F_minus.resize(d, m);
  std::vector<bool> taken_p(ep.values.size(), false), taken_m(ep.values.size(), false);
  int col = 0;
  for (const auto& e : exps) {
    for (int rep = 0; rep < e.multiplicity; ++rep) {
      auto grab = [&](cplx target, std::vector<bool>& taken) -> CVec {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < ep.values.size(); ++i) {
          if (taken[i]) continue;
          const double dist = std::abs(ep.values[i] - target);
          if (dist < bd) {
            bd = dist;
            best = static_cast<int>(i);
          }
        }
        require(best >= 0 && bd <= 1e-6 * std::max(1.0, std::abs(target)), Error::Kind::degeneracy,
                "spectral splitting could not match an exponent to an eigenvector");
        taken[static_cast<size_t>(best)] = true;
        return ep.vectors[static_cast<size_t>(best)];
      };
      out.F_plus.col(col) = grab(e.value, taken_p);
      out.F_minus.col(col) = grab(-e.value, taken_m);
      ++col;
    }
  }
  require(col == m, Error::Kind::degeneracy, "splitting dimension mismatch");

  const Mat J = standard_J(m);
  const CMat Jc = J.cast<cplx>();
  double lag = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const cplx s = (Jc * out.F_plus.col(i)).cwiseProduct(out.F_plus.col(j)).sum();
      lag = std::max(lag, std::abs(s));
    }
  out.lagrangian_residual = lag;

  for (int i = 0; i < m; ++i) {
    const CVec u = out.F_plus.col(i);
    const cplx s = (Jc * u).cwiseProduct(u.conjugate()).sum();
    out.dissipativity.push_back((s / cplx(0.0, 2.0)).real());
  }
  return out;
}

struct BQuadratic {
  Mat b_matrix;                        // symmetric, q(z) = z . b_matrix z
  Mat adapted_basis;                   // Darboux frame adapted to the mode blocks
  std::vector<Mat> action_coordinates; // elementary quadratics pulled back
  std::vector<double> coefficients;
  std::vector<std::string> kinds; // "hyperbolic-pair" | "elliptic-pair" | "rotation-pair"
  double decomposition_residual = 0.0;
};

namespace detail {

// Builds a real Darboux basis adapted to the eigenstructure of B and the list
// of elementary quadratics carried by each mode block. Pairs are normalized to
// sigma(y_j, eta_j) = -1 and cross terms projected out, so repeated exponents
// stay consistent.
inline BQuadratic decompose_quadratic(const Mat& B, const std::vector<Exponent>& exps,
                                      const InvariantSplitting& split) {
  const int d = static_cast<int>(B.rows());
  const int m = d / 2;
  const Mat J = standard_J(m);
  auto sig = [&](const Vec& a, const Vec& b) { return (J * a).dot(b); };

  BQuadratic out;
  out.b_matrix = -0.5 * (J * B);
  out.b_matrix = 0.5 * (out.b_matrix + out.b_matrix.transpose()).eval();

  std::vector<Vec> ys, etas;
  // per elementary block: list of (y index, eta index) plus quadratic shapes
  struct Block {
    std::string kind;
    std::vector<std::pair<int, int>> pairs; // indices into ys/etas
  };
  std::vector<Block> blocks;

  int col = 0;
  for (const auto& e : exps) {
    if (e.tag == ModeTag::loxodromic && e.value.imag() < 0.0) {
      // the conjugate representative already carries this 4-dimensional block
      col += e.multiplicity;
      continue;
    }
    for (int rep = 0; rep < e.multiplicity; ++rep) {
      const CVec up = split.F_plus.col(col);
      const CVec um = split.F_minus.col(col);
      if (e.tag == ModeTag::real_hyperbolic) {
        Vec y = up.real();
        if (y.norm() < 0.5) y = up.imag(); // phase fix keeps one part dominant
        Vec eta = um.real();
        if (eta.norm() < 0.5) eta = um.imag();
        symplectic_project_out(-J, ys, etas, y);
        symplectic_project_out(-J, ys, etas, eta);
        const double s = sig(y, eta);
        require(std::abs(s) > 1e-10, Error::Kind::degeneracy,
                "hyperbolic pair degenerates under the symplectic form");
        eta /= -s;
        const double gamma = std::sqrt(eta.norm() / y.norm());
        y *= gamma;
        eta /= gamma;
        ys.push_back(y);
        etas.push_back(eta);
        blocks.push_back({"hyperbolic-pair", {{static_cast<int>(ys.size()) - 1, static_cast<int>(etas.size()) - 1}}});
        ++col;
      } else if (e.tag == ModeTag::elliptic) {
        Vec p = up.real();
        Vec q = up.imag();
        symplectic_project_out(-J, ys, etas, p);
        symplectic_project_out(-J, ys, etas, q);
        const double s = sig(p, q);
        require(std::abs(s) > 1e-10, Error::Kind::degeneracy,
                "elliptic pair degenerates under the symplectic form");
        Vec y, eta;
        if (s < 0.0) {
          y = p / std::sqrt(-s);
          eta = q / std::sqrt(-s);
        } else {
          y = q / std::sqrt(s);
          eta = p / std::sqrt(s);
        }
        ys.push_back(y);
        etas.push_back(eta);
        blocks.push_back({"elliptic-pair", {{static_cast<int>(ys.size()) - 1, static_cast<int>(etas.size()) - 1}}});
        ++col;
      } else {
        // loxodromic: the conjugate exponent follows immediately in the list
        // (same real part, opposite imaginary sign is excluded by the
        // normalization, so the partner is this same column's conjugate data)
        const Vec p = up.real();
        const Vec q = up.imag();
        Vec y1 = p, y2 = q;
        symplectic_project_out(-J, ys, etas, y1);
        symplectic_project_out(-J, ys, etas, y2);
        // dual pair inside the contracting plane: solve sigma(y_i, eta_j) = -delta_ij
        const Vec a = um.real();
        const Vec b = um.imag();
        Vec av = a, bv = b;
        symplectic_project_out(-J, ys, etas, av);
        symplectic_project_out(-J, ys, etas, bv);
        Eigen::Matrix2d S;
        S << sig(y1, av), sig(y1, bv), sig(y2, av), sig(y2, bv);
        require(std::abs(S.determinant()) > 1e-12, Error::Kind::degeneracy,
                "loxodromic planes do not pair under the symplectic form");
        const Eigen::Matrix2d coef = S.inverse() * (-Eigen::Matrix2d::Identity());
        Vec e1 = coef(0, 0) * av + coef(1, 0) * bv;
        Vec e2 = coef(0, 1) * av + coef(1, 1) * bv;
        const double gamma = std::sqrt((e1.norm() + e2.norm()) / (y1.norm() + y2.norm()));
        y1 *= gamma;
        y2 *= gamma;
        e1 /= gamma;
        e2 /= gamma;
        ys.push_back(y1);
        etas.push_back(e1);
        ys.push_back(y2);
        etas.push_back(e2);
        const int i1 = static_cast<int>(ys.size()) - 2;
        const int i2 = static_cast<int>(ys.size()) - 1;
        blocks.push_back({"hyperbolic-pair", {{i1, i1}, {i2, i2}}});
        blocks.push_back({"rotation-pair", {{i1, i2}}});
        ++col; // consumes one splitting column per conjugate representative
      }
    }
  }
  require(static_cast<int>(ys.size()) == m, Error::Kind::degeneracy,
          "adapted basis does not span the reduced space");

  Mat D(d, d);
  for (int k = 0; k < m; ++k) {
    D.col(k) = ys[static_cast<size_t>(k)];
    D.col(m + k) = etas[static_cast<size_t>(k)];
  }
  out.adapted_basis = D;
  // D^T (-J) D = -J  =>  D is symplectic, D^{-1} = -J D^T J
  const Mat Dinv = -J * D.transpose() * J;

  // elementary quadratics in adapted coordinates, pulled back to reduced ones
  auto pullback = [&](const Mat& Qstd) { return Mat(Dinv.transpose() * Qstd * Dinv); };
  std::vector<Mat> iotas;
  std::vector<std::string> kinds;
  for (const auto& blk : blocks) {
    Mat Q = Mat::Zero(d, d);
    if (blk.kind == "hyperbolic-pair") {
      for (const auto& pr : blk.pairs) {
        const int y = pr.first, h = m + pr.second;
        Q(y, h) += 0.5;
        Q(h, y) += 0.5;
      }
    } else if (blk.kind == "elliptic-pair") {
      const int y = blk.pairs[0].first, h = m + blk.pairs[0].second;
      Q(y, y) = 0.5;
      Q(h, h) = 0.5;
    } else { // rotation-pair: y1 eta2 - y2 eta1
      const int y1 = blk.pairs[0].first, y2 = blk.pairs[0].second;
      const int h1 = m + y1, h2 = m + y2;
      Q(y1, h2) += 0.5;
      Q(h2, y1) += 0.5;
      Q(y2, h1) -= 0.5;
      Q(h1, y2) -= 0.5;
    }
    iotas.push_back(pullback(Q));
    kinds.push_back(blk.kind);
  }

  // least-squares fit of b to the elementary pieces; with a correct basis it
  // is an exact decomposition and the residual certifies that
  const int k = static_cast<int>(iotas.size());
  Mat Als(d * d, k);
  Vec bls(d * d);
  for (int j = 0; j < k; ++j)
    Als.col(j) = Eigen::Map<const Vec>(iotas[static_cast<size_t>(j)].data(), d * d);
  bls = Eigen::Map<const Vec>(out.b_matrix.data(), d * d);
  const Vec c = Als.colPivHouseholderQr().solve(bls);
  Mat recon = Mat::Zero(d, d);
  for (int j = 0; j < k; ++j) recon += c[j] * iotas[static_cast<size_t>(j)];
  out.decomposition_residual = (recon - out.b_matrix).norm();

  out.action_coordinates = iotas;
  out.kinds = kinds;
  out.coefficients.assign(c.data(), c.data() + k);
  return out;
}

} // namespace detail

// q(z) = sigma(z, Bz)/2 decomposed over elementary quadratics adapted to the
// spectrum of B. Coefficients recover the real and imaginary parts of the
// exponents up to the recorded orientation conventions.
inline BQuadratic quadratic_form_b(const Mat& B, double pairing_tol = 1e-7) {
  const auto exps = floquet_exponents(B, pairing_tol);
  const auto split = invariant_splitting(B, pairing_tol);
  auto out = detail::decompose_quadratic(B, exps, split);
  require(out.decomposition_residual <= 1e-10 * std::max(1.0, out.b_matrix.norm()),
          Error::Kind::degeneracy,
          "quadratic decomposition residual " + fmt_num(out.decomposition_residual));
  return out;
}

// Full transverse analysis of a reduced return map over one period T.
// Exponents are reported per unit time (log spectrum divided by T).
inline FloquetData analyze_floquet(const Mat& reduced, double period,
                                   const ClassifyOptions& copts = {}, const LogOptions& lopts = {}) {
  require(period > 0.0, Error::Kind::config, "period must be positive");
  FloquetData out;
  out.multipliers = classify_multipliers(reduced, copts);
  out.pairing_residual = pairing_closure_residual(out.multipliers);
  require(out.pairing_residual <= copts.pairing_tol * 10.0, Error::Kind::degeneracy,
          "multipliers not closed under inversion/conjugation: residual " +
              fmt_num(out.pairing_residual));

  const Mat Blog = symplectic_log(reduced, lopts);
  out.log_matrix = Blog / period;
  {
    const Mat J = standard_J(static_cast<int>(reduced.rows()) / 2);
    // relative roundtrip, matching the certificate inside symplectic_log
    out.log_residual = detail::operator_norm_f(Blog.exp() - reduced) /
                       std::max(1.0, detail::operator_norm_f(reduced));
    out.structure_residual = (out.log_matrix.transpose() * J + J * out.log_matrix).norm();
  }

  auto exps = floquet_exponents(out.log_matrix, copts.pairing_tol);
  out.exponents = exps;
  out.hyperbolic_dimension = 0;
  for (const auto& e : exps)
    if (e.value.real() > copts.pairing_tol) out.hyperbolic_dimension += 1;

  const auto split = invariant_splitting(out.log_matrix, copts.pairing_tol);
  out.F_plus = split.F_plus;
  out.F_minus = split.F_minus;
  out.lagrangian_residual = split.lagrangian_residual;
  out.dissipativity = split.dissipativity;

  const auto bq = quadratic_form_b(out.log_matrix, copts.pairing_tol);
  out.b_matrix = bq.b_matrix;
  out.action_coordinates = bq.action_coordinates;
  out.action_coefficients = bq.coefficients;
  out.action_kinds = bq.kinds;
  out.adapted_basis = bq.adapted_basis;
  out.decomposition_residual = bq.decomposition_residual;
  return out;
}

struct HypothesisOptions {
  int K_bound = 12;
  double tolerance = 1e-9;       // lattice resonance tolerance
  double rate_floor = 1e-8;      // smallest |Re mu| counted as hyperbolic
  double field_floor = 1e-8;     // smallest ||X_H|| allowed along the orbit
  long max_lattice_points = 5'000'000;
};

struct HypothesisReport {
  bool principal_type_ok = false;
  bool orbit_hyperbolic_ok = false;
  bool williamson_ok = false;
  bool nonresonance_ok = false;        // no integer combination lands on 2 pi i Z \ {0}
  bool strong_nonresonance_ok = false; // only k = 0 reaches 2 pi i Z, exponents distinct
  int hyperbolic_dimension = 0;
  int K_bound = 12;
  double tolerance = 1e-9;
  std::map<std::string, double> residuals;
  std::optional<std::vector<int>> witness_nonresonance;        // first violating k
  std::optional<std::vector<int>> witness_strong_nonresonance; // first violating k
  std::string notes;
};

namespace detail {

// Canonical lattice representatives: k and -k test the same combination, so
// only vectors whose first nonzero entry is positive are enumerated, ordered
// by sup norm shell and then lexicographically.
inline std::vector<std::vector<int>> lattice_representatives(int r, int K, long cap) {
  require(r >= 1, Error::Kind::config, "lattice dimension must be positive");
  double total = 1.0;
  for (int i = 0; i < r; ++i) total *= 2.0 * K + 1.0;
  require(total <= static_cast<double>(cap), Error::Kind::config,
          "lattice scan too large; reduce K or the number of exponents");
  std::vector<std::vector<int>> out;
  std::vector<int> k(static_cast<size_t>(r), -K);
  while (true) {
    int first = 0;
    int linf = 0;
    for (int i = 0; i < r; ++i) {
      if (first == 0 && k[static_cast<size_t>(i)] != 0) first = k[static_cast<size_t>(i)];
      linf = std::max(linf, std::abs(k[static_cast<size_t>(i)]));
    }
    if (first > 0 && linf <= K) out.push_back(k);
    int pos = r - 1;
    while (pos >= 0 && k[static_cast<size_t>(pos)] == K) {
      k[static_cast<size_t>(pos)] = -K;
      --pos;
    }
    if (pos < 0) break;
    ++k[static_cast<size_t>(pos)];
  }
  std::sort(out.begin(), out.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
    int la = 0, lb = 0;
    for (int v : a) la = std::max(la, std::abs(v));
    for (int v : b) lb = std::max(lb, std::abs(v));
    if (la != lb) return la < lb;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  return out;
}

inline double dist_to_2pi_lattice(cplx s) {
  const double twopi = 2.0 * std::numbers::pi_v<double>;
  const double q = std::round(s.imag() / twopi);
  return std::hypot(s.real(), s.imag() - q * twopi);
}

} // namespace detail

// Checks the standing hypotheses on a computed orbit: nonvanishing vector
// field, at least one expanding exponent, admissible transverse normal form,
// and the two lattice nonresonance conditions up to sup norm K. The lattice
// scan works per return: exponents are scaled by the period first, because
// the 2 pi i ambiguity is the branch freedom of the return-map logarithm.
inline HypothesisReport check_hypotheses(const FloquetData& fd, double period, int n_minus_1,
                                         const std::vector<double>& field_norms,
                                         const HypothesisOptions& opts = {}) {
  HypothesisReport rep;
  rep.K_bound = opts.K_bound;
  rep.tolerance = opts.tolerance;

  double minX = std::numeric_limits<double>::infinity();
  for (double v : field_norms) minX = std::min(minX, v);
  if (field_norms.empty()) minX = 0.0;
  rep.principal_type_ok = minX >= opts.field_floor;
  rep.residuals["min_field_norm"] = minX;

  rep.hyperbolic_dimension = fd.hyperbolic_dimension;
  double max_rate = 0.0;
  for (const auto& e : fd.exponents) max_rate = std::max(max_rate, e.value.real());
  rep.orbit_hyperbolic_ok = max_rate > opts.rate_floor;
  rep.residuals["max_expansion_rate"] = max_rate;

  double min_ell_diss = std::numeric_limits<double>::infinity();
  bool has_elliptic = false;
  {
    int col = 0;
    for (const auto& e : fd.exponents)
      for (int rpt = 0; rpt < e.multiplicity; ++rpt, ++col)
        if (e.tag == ModeTag::elliptic) {
          has_elliptic = true;
          min_ell_diss = std::min(min_ell_diss, fd.dissipativity[static_cast<size_t>(col)]);
        }
  }
  rep.residuals["pairing_residual"] = fd.pairing_residual;
  rep.residuals["log_residual"] = fd.log_residual;
  rep.residuals["structure_residual"] = fd.structure_residual;
  rep.residuals["lagrangian_residual"] = fd.lagrangian_residual;
  rep.residuals["min_elliptic_dissipativity"] = has_elliptic ? min_ell_diss : 0.0;
  rep.williamson_ok = fd.pairing_residual <= 1e-6 && fd.log_residual <= 1e-8 &&
                      fd.structure_residual <= 1e-9 && (!has_elliptic || min_ell_diss > 0.0);
  if (has_elliptic && min_ell_diss <= 0.0)
    rep.notes += "an elliptic direction carries a nonpositive energy form; ";

  // lattice scan over the distinct normalized exponents, per return
  require(period > 0.0, Error::Kind::config, "period must be positive");
  const int r = static_cast<int>(fd.exponents.size());
  std::vector<cplx> mu;
  for (const auto& e : fd.exponents) mu.push_back(period * e.value);
  rep.nonresonance_ok = true;
  rep.strong_nonresonance_ok = (r == n_minus_1);
  if (r != n_minus_1)
    rep.notes += "repeated exponents: r < n-1, strong nonresonance fails structurally; ";

  double margin16 = std::numeric_limits<double>::infinity();
  double margin17 = std::numeric_limits<double>::infinity();
  const auto ks = detail::lattice_representatives(r, opts.K_bound, opts.max_lattice_points);
  for (const auto& k : ks) {
    cplx s = 0.0;
    for (int i = 0; i < r; ++i) s += static_cast<double>(k[static_cast<size_t>(i)]) * mu[static_cast<size_t>(i)];
    const double dist = detail::dist_to_2pi_lattice(s);
    margin17 = std::min(margin17, dist);
    const bool on_lattice = dist < opts.tolerance;
    const bool at_zero = std::abs(s) < opts.tolerance;
    if (!(on_lattice && at_zero)) margin16 = std::min(margin16, dist);
    if (on_lattice && !at_zero && rep.nonresonance_ok) {
      rep.nonresonance_ok = false;
      rep.witness_nonresonance = k;
    }
    if (on_lattice && rep.strong_nonresonance_ok) {
      rep.strong_nonresonance_ok = false;
      rep.witness_strong_nonresonance = k;
    }
  }
  rep.residuals["lattice_margin"] = margin16;
  rep.residuals["lattice_margin_strict"] = margin17;
  return rep;
}

} // namespace hypres
