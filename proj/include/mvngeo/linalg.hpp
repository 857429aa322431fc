#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvngeo/errors.hpp"

namespace mvngeo {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense symmetric matrix. Construction stores the symmetric part
/// (a + a^T) / 2, so downstream spectral code can rely on exact symmetry,
/// and rejects inputs whose asymmetry exceeds 1e-12 (scaled up by the
/// largest entry when entries exceed 1). Results that are symmetric only in
/// exact arithmetic (inverses, conjugations, spectral rebuilds) carry
/// condition-dependent roundoff skew that can exceed that gate; build those
/// with symmetrized() instead.
template <class Scalar>
struct SymMatrix {
  Mat<Scalar> m;

  SymMatrix() = default;

  template <class Derived>
  SymMatrix(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols())
      throw std::invalid_argument("SymMatrix: input is not square");
    if (a.rows() > 0) {
      const Mat<Scalar> dense = a;
      const Scalar skew = (dense - dense.transpose()).cwiseAbs().maxCoeff();
      const Scalar scale = std::max(Scalar(1), dense.cwiseAbs().maxCoeff());
      if (!(skew <= Scalar(1e-12) * scale))
        throw std::invalid_argument("SymMatrix: input is not symmetric");
      m = Scalar(0.5) * (dense + dense.transpose());
    } else {
      m = a;
    }
  }

  /// Average with the transpose, no asymmetry gate.
  template <class Derived>
  [[nodiscard]] static SymMatrix symmetrized(
      const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols())
      throw std::invalid_argument("SymMatrix: input is not square");
    SymMatrix out;
    const Mat<Scalar> dense = a;
    out.m = Scalar(0.5) * (dense + dense.transpose());
    return out;
  }

  [[nodiscard]] Eigen::Index dim() const { return m.rows(); }
};

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
template <class Scalar>
struct Spectrum {
  Vec<Scalar> eigenvalues;
  Mat<Scalar> eigenvectors;
};

template <class Scalar>
[[nodiscard]] Spectrum<Scalar> spectrum(const SymMatrix<Scalar>& s) {
  if (!s.m.allFinite())
    throw NumericalOverflow("spectrum: matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(s.m);
  if (es.info() != Eigen::Success)
    throw NumericalOverflow("spectrum: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Rebuild V diag(f(lambda)) V^T from a spectrum and per-eigenvalue values.
template <class Scalar>
[[nodiscard]] SymMatrix<Scalar> spectral_rebuild(const Spectrum<Scalar>& sp,
                                                 const Vec<Scalar>& f) {
  return SymMatrix<Scalar>::symmetrized(
      sp.eigenvectors * f.asDiagonal() * sp.eigenvectors.transpose());
}

enum class SymFnKind { sqrt, inv_sqrt, log, exp };

/// Spectral function of a symmetric matrix. All kinds except exp require the
/// input to be positive definite: smallest eigenvalue above 1e-12 times the
/// largest.
template <class Scalar>
[[nodiscard]] SymMatrix<Scalar> sym_fn(const SymMatrix<Scalar>& s,
                                       SymFnKind kind) {
  const Spectrum<Scalar> sp = spectrum(s);
  const Eigen::Index d = sp.eigenvalues.size();
  if (kind != SymFnKind::exp) {
    const Scalar lmax = sp.eigenvalues(d - 1);
    if (!(sp.eigenvalues(0) > Scalar(1e-12) * lmax))
      throw NotPositiveDefinite("sym_fn: matrix is not positive definite");
  }
  Vec<Scalar> f(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Scalar l = sp.eigenvalues(i);
    switch (kind) {
      case SymFnKind::sqrt: f(i) = std::sqrt(l); break;
      case SymFnKind::inv_sqrt: f(i) = Scalar(1) / std::sqrt(l); break;
      case SymFnKind::log: f(i) = std::log(l); break;
      case SymFnKind::exp: f(i) = std::exp(l); break;
    }
  }
  return spectral_rebuild(sp, f);
}

/// Matrix exponential of a general square matrix (scaling and squaring with
/// Pade approximants, via Eigen's MatrixFunctions module).
template <class Scalar>
[[nodiscard]] Mat<Scalar> expm(const Mat<Scalar>& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("expm: matrix is not square");
  if (!a.allFinite())
    throw NumericalOverflow("expm: matrix has non-finite entries");
  Mat<Scalar> e = a.exp();
  if (!e.allFinite())
    throw NumericalOverflow("expm: result is not finite");
  return e;
}

/// Spectrum of a matrix that is a squared symmetric matrix G^2, hence
/// positive semi-definite up to roundoff. Eigenvalues below -1e-10 times the
/// largest are an error; anything below 1e-14 times the largest is clamped
/// to exactly zero so the null space is treated as exact.
template <class Scalar>
[[nodiscard]] Spectrum<Scalar> gsq_spectrum(const SymMatrix<Scalar>& gsq) {
  Spectrum<Scalar> sp = spectrum(gsq);
  const Eigen::Index d = sp.eigenvalues.size();
  const Scalar scale = std::max(sp.eigenvalues(d - 1), Scalar(0));
  for (Eigen::Index i = 0; i < d; ++i) {
    if (sp.eigenvalues(i) < Scalar(-1e-10) * scale)
      throw NegativeSpectrum("gsq_spectrum: eigenvalue " +
                             std::to_string(sp.eigenvalues(i)) +
                             " below PSD tolerance");
    if (sp.eigenvalues(i) < Scalar(1e-14) * scale) sp.eigenvalues(i) = 0;
  }
  return sp;
}

/// The three spectral functions of G^2 needed to evaluate hyperbolic-rotation
/// flows without ever forming G itself: cosh(tG), sinh(tG) G^-, and (G^-)^2,
/// where G^- is the pseudo-inverse on the range of G^2.
template <class Scalar>
struct GsqParts {
  SymMatrix<Scalar> coshtG;
  SymMatrix<Scalar> sinhtG_Ginv;
  SymMatrix<Scalar> Ginv_sq;
};

template <class Scalar>
[[nodiscard]] GsqParts<Scalar> gsq_fn(const SymMatrix<Scalar>& gsq, Scalar t) {
  const Spectrum<Scalar> sp = gsq_spectrum(gsq);
  const Eigen::Index d = sp.eigenvalues.size();
  Vec<Scalar> fc(d), fs(d), fi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Scalar l = sp.eigenvalues(i);
    if (l > 0) {
      const Scalar g = std::sqrt(l);
      fc(i) = std::cosh(t * g);
      fs(i) = std::sinh(t * g) / g;
      fi(i) = Scalar(1) / l;
    } else {
      // limits as the eigenvalue of G tends to zero; the pseudo-inverse is
      // zero on the null space by definition
      fc(i) = 1;
      fs(i) = t;
      fi(i) = 0;
    }
  }
  return {spectral_rebuild(sp, fc), spectral_rebuild(sp, fs),
          spectral_rebuild(sp, fi)};
}

/// acosh(1 + u) computed from the excess u >= 0 without forming 1 + u, so
/// tiny arguments keep full relative accuracy. Slightly negative u from
/// roundoff clamps to zero.
template <class Scalar>
[[nodiscard]] Scalar acosh1p(Scalar u) {
  if (u < Scalar(0)) u = 0;
  return std::log1p(u + std::sqrt(u * (u + Scalar(2))));
}

/// Deterministic random source. Wraps mt19937_64 but derives uniforms and
/// normals by hand so streams are bit-identical across standard libraries
/// (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double u01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Standard normal via Box-Muller; caches the second value of each pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - u01();  // (0, 1], keeps log finite
    const double u2 = u01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool have_spare_ = false;
};

/// Uniformly random orthogonal matrix built by Gram-Schmidt on standard
/// normal draws. A draw that collapses onto the span of the previous columns
/// is retried; 100 consecutive failures raise DegenerateDraw.
template <class Scalar = double>
[[nodiscard]] Mat<Scalar> random_orthogonal(Eigen::Index dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("random_orthogonal: dim < 1");
  Mat<Scalar> q(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    int retries = 0;
    for (;;) {
      Vec<Scalar> v(dim);
      for (Eigen::Index i = 0; i < dim; ++i)
        v(i) = static_cast<Scalar>(rng.normal());
      const Scalar raw = v.norm();
      // two projection passes keep orthogonality near machine precision
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < k; ++j)
          v -= q.col(j).dot(v) * q.col(j);
      const Scalar rem = v.norm();
      if (raw > 0 && rem > Scalar(1e-8) * raw) {
        q.col(k) = v / rem;
        break;
      }
      if (++retries >= 100)
        throw DegenerateDraw("random_orthogonal: 100 degenerate draws");
    }
  }
  return q;
}

namespace detail {

/// Split ascending eigenvalues into runs whose members are equal within a
/// relative gap. Returns [begin, end) index pairs.
template <class Scalar>
[[nodiscard]] std::vector<std::pair<Eigen::Index, Eigen::Index>> eigen_groups(
    const Vec<Scalar>& evals, Scalar rel_gap) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  const Eigen::Index d = evals.size();
  Eigen::Index begin = 0;
  for (Eigen::Index i = 1; i <= d; ++i) {
    const Scalar scale =
        i == d ? Scalar(0)
               : std::max(std::abs(evals(begin)), std::abs(evals(i)));
    const bool split =
        i == d || std::abs(evals(i) - evals(begin)) > rel_gap * scale;
    if (split) {
      groups.emplace_back(begin, i);
      begin = i;
    }
  }
  return groups;
}

/// Rotate the eigenbasis within each equal-eigenvalue group so that the
/// group's first column points along the projection of dir onto the group's
/// eigenspace (when that projection is nonzero). Eigenvalues are unchanged;
/// the basis stays orthonormal.
template <class Scalar>
void align_groups_to(
    Spectrum<Scalar>& sp, const Vec<Scalar>& dir,
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& groups) {
  for (const auto& [b, e] : groups) {
    const Eigen::Index w = e - b;
    if (w < 2) {
      // a simple axis only needs its sign fixed toward dir
      if (sp.eigenvectors.col(b).dot(dir) < 0) sp.eigenvectors.col(b) *= -1;
      continue;
    }
    auto block = sp.eigenvectors.middleCols(b, w);
    Vec<Scalar> coeff = block.transpose() * dir;
    const Scalar cn = coeff.norm();
    if (!(cn > 0)) continue;
    Mat<Scalar> seeded(sp.eigenvectors.rows(), w + 1);
    seeded.col(0) = block * (coeff / cn);
    seeded.rightCols(w) = block;
    Eigen::HouseholderQR<Mat<Scalar>> qr(seeded);
    Mat<Scalar> qfull = qr.householderQ() *
                        Mat<Scalar>::Identity(seeded.rows(), w);
    if (qfull.col(0).dot(seeded.col(0)) < 0) qfull.col(0) *= -1;
    block = qfull;
  }
}

}  // namespace detail

}  // namespace mvngeo
