#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "mvngeo/linalg.hpp"

namespace mvngeo {

/// A nondegenerate Gaussian N(mu, sigma). Construction validates that sigma
/// is positive definite: smallest eigenvalue above 1e-12 times the largest.
template <class Scalar>
struct GaussianPoint {
  Vec<Scalar> mu;
  SymMatrix<Scalar> sigma;

  GaussianPoint(Vec<Scalar> mu_in, SymMatrix<Scalar> sigma_in)
      : mu(std::move(mu_in)), sigma(std::move(sigma_in)) {
    if (mu.size() < 1)
      throw std::invalid_argument("GaussianPoint: dimension must be positive");
    if (mu.size() != sigma.dim())
      throw std::invalid_argument(
          "GaussianPoint: mu and sigma dimensions disagree");
    if (!mu.allFinite())
      throw NumericalOverflow("GaussianPoint: mu has non-finite entries");
    const Spectrum<Scalar> sp = spectrum(sigma);
    const Eigen::Index d = sp.eigenvalues.size();
    if (!(sp.eigenvalues(0) > Scalar(1e-12) * sp.eigenvalues(d - 1)))
      throw NotPositiveDefinite(
          "GaussianPoint: sigma is not positive definite");
  }

  [[nodiscard]] static GaussianPoint origin(Eigen::Index d) {
    return GaussianPoint(Vec<Scalar>::Zero(d),
                         SymMatrix<Scalar>(Mat<Scalar>::Identity(d, d)));
  }

  [[nodiscard]] Eigen::Index dim() const { return mu.size(); }
};

/// Natural-parameter coordinates: delta = sigma^-1 mu, Delta = sigma^-1.
template <class Scalar>
struct CanonicalPoint {
  Vec<Scalar> delta;
  SymMatrix<Scalar> Delta;
};

template <class Scalar>
[[nodiscard]] CanonicalPoint<Scalar> to_canonical(
    const GaussianPoint<Scalar>& p) {
  Eigen::LLT<Mat<Scalar>> llt(p.sigma.m);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("to_canonical: sigma factorization failed");
  const Eigen::Index d = p.dim();
  return {llt.solve(p.mu),
          SymMatrix<Scalar>::symmetrized(
              llt.solve(Mat<Scalar>::Identity(d, d)))};
}

template <class Scalar>
[[nodiscard]] GaussianPoint<Scalar> from_canonical(
    const CanonicalPoint<Scalar>& c) {
  Eigen::LLT<Mat<Scalar>> llt(c.Delta.m);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("from_canonical: Delta is not positive definite");
  const Eigen::Index d = c.Delta.dim();
  const SymMatrix<Scalar> sigma =
      SymMatrix<Scalar>::symmetrized(llt.solve(Mat<Scalar>::Identity(d, d)));
  return GaussianPoint<Scalar>(sigma.m * c.delta, sigma);
}

/// Tangent direction (u_mu, u_sigma) at a point; u_sigma is symmetric.
template <class Scalar>
struct TangentVector {
  Vec<Scalar> u_mu;
  SymMatrix<Scalar> u_sigma;

  [[nodiscard]] static TangentVector zero(Eigen::Index d) {
    return {Vec<Scalar>::Zero(d), SymMatrix<Scalar>(Mat<Scalar>::Zero(d, d))};
  }

  [[nodiscard]] Eigen::Index dim() const { return u_mu.size(); }
};

template <class Scalar>
[[nodiscard]] TangentVector<Scalar> operator+(const TangentVector<Scalar>& a,
                                              const TangentVector<Scalar>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("TangentVector: dimensions disagree");
  return {a.u_mu + b.u_mu, SymMatrix<Scalar>(a.u_sigma.m + b.u_sigma.m)};
}

template <class Scalar>
[[nodiscard]] TangentVector<Scalar> operator-(const TangentVector<Scalar>& a,
                                              const TangentVector<Scalar>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("TangentVector: dimensions disagree");
  return {a.u_mu - b.u_mu, SymMatrix<Scalar>(a.u_sigma.m - b.u_sigma.m)};
}

template <class Scalar>
[[nodiscard]] TangentVector<Scalar> operator*(Scalar s,
                                              const TangentVector<Scalar>& v) {
  return {s * v.u_mu, SymMatrix<Scalar>(s * v.u_sigma.m)};
}

template <class Scalar>
[[nodiscard]] TangentVector<Scalar> operator*(const TangentVector<Scalar>& v,
                                              Scalar s) {
  return s * v;
}

/// Chart difference of two points, as a tangent vector (b - a).
template <class Scalar>
[[nodiscard]] TangentVector<Scalar> chart_difference(
    const GaussianPoint<Scalar>& a, const GaussianPoint<Scalar>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("chart_difference: dimensions disagree");
  return {b.mu - a.mu, SymMatrix<Scalar>(b.sigma.m - a.sigma.m)};
}

/// Information inner product at a point:
///   <u, v> = u_mu^T sigma^-1 v_mu + tr(sigma^-1 u_sigma sigma^-1 v_sigma)/2.
template <class Scalar>
[[nodiscard]] Scalar inner_product(const TangentVector<Scalar>& u,
                                   const TangentVector<Scalar>& v,
                                   const GaussianPoint<Scalar>& at) {
  if (u.dim() != at.dim() || v.dim() != at.dim())
    throw std::invalid_argument("inner_product: dimensions disagree");
  Eigen::LLT<Mat<Scalar>> llt(at.sigma.m);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("inner_product: sigma factorization failed");
  const Mat<Scalar> su = llt.solve(u.u_sigma.m);
  const Mat<Scalar> sv = llt.solve(v.u_sigma.m);
  return u.u_mu.dot(llt.solve(v.u_mu)) +
         Scalar(0.5) * su.cwiseProduct(sv.transpose()).sum();
}

/// Squared length of a displacement d in the metric at a point.
template <class Scalar>
[[nodiscard]] Scalar metric_sq(const GaussianPoint<Scalar>& at,
                               const TangentVector<Scalar>& d) {
  return inner_product(d, d, at);
}

/// Length of a straight-line velocity leaving the unit-isotropic origin:
///   sqrt(x^T x + |B|_F^2 / 2).
template <class Scalar>
[[nodiscard]] Scalar fisher_rao_from_velocity(const TangentVector<Scalar>& v) {
  return std::sqrt(v.u_mu.squaredNorm() +
                   Scalar(0.5) * v.u_sigma.m.squaredNorm());
}

/// KL divergence KL(a || b) between Gaussians.
template <class Scalar>
[[nodiscard]] Scalar kl(const GaussianPoint<Scalar>& a,
                        const GaussianPoint<Scalar>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("kl: dimensions disagree");
  const Eigen::Index d = a.dim();
  Eigen::LLT<Mat<Scalar>> la(a.sigma.m), lb(b.sigma.m);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success)
    throw NotPositiveDefinite("kl: sigma factorization failed");
  Scalar logdet = 0;  // log det(sigma_b) - log det(sigma_a)
  for (Eigen::Index i = 0; i < d; ++i)
    logdet += 2 * (std::log(lb.matrixLLT()(i, i)) -
                   std::log(la.matrixLLT()(i, i)));
  const Vec<Scalar> dm = b.mu - a.mu;
  const Scalar tr = lb.solve(a.sigma.m).trace();
  return Scalar(0.5) * (tr + dm.dot(lb.solve(dm)) - Scalar(d) + logdet);
}

/// Symmetrized KL divergence (Jeffreys divergence halved):
///   (KL(a||b) + KL(b||a)) / 2, in closed form.
template <class Scalar>
[[nodiscard]] Scalar sym_kl(const GaussianPoint<Scalar>& a,
                            const GaussianPoint<Scalar>& b) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("sym_kl: dimensions disagree");
  const Eigen::Index d = a.dim();
  Eigen::LLT<Mat<Scalar>> la(a.sigma.m), lb(b.sigma.m);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success)
    throw NotPositiveDefinite("sym_kl: sigma factorization failed");
  const Vec<Scalar> dm = b.mu - a.mu;
  const Scalar tr = lb.solve(a.sigma.m).trace() + la.solve(b.sigma.m).trace();
  const Scalar quad = dm.dot(la.solve(dm)) + dm.dot(lb.solve(dm));
  return Scalar(0.25) * (tr - 2 * Scalar(d) + quad);
}

/// A point pair rewritten so the source sits at the unit-isotropic origin.
/// whitener W = sigma_0^{1/2} R maps origin-frame quantities back:
/// points via (W m + mu_0, W S W^T), velocities via (W x, W B W^T).
template <class Scalar>
struct OriginProblem {
  GaussianPoint<Scalar> source;
  GaussianPoint<Scalar> destination;
  GaussianPoint<Scalar> target;  // destination, seen from the origin
  Mat<Scalar> whitener;
  Mat<Scalar> whitener_inv;
};

/// Move the pair (a, b) by the affine change of variables that takes a to
/// the origin, with an extra orthogonal alignment R applied after whitening.
/// R must be orthonormal within 1e-10.
template <class Scalar>
[[nodiscard]] OriginProblem<Scalar> normalize_to_origin(
    const GaussianPoint<Scalar>& a, const GaussianPoint<Scalar>& b,
    const Mat<Scalar>& r) {
  const Eigen::Index d = a.dim();
  if (b.dim() != d)
    throw std::invalid_argument("normalize_to_origin: dimensions disagree");
  if (r.rows() != d || r.cols() != d)
    throw std::invalid_argument("normalize_to_origin: R has wrong shape");
  const Scalar ortho_defect =
      (r.transpose() * r - Mat<Scalar>::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(ortho_defect <= Scalar(1e-10)))
    throw NotOrthogonal("normalize_to_origin: R is not orthonormal");

  const Spectrum<Scalar> sp = spectrum(a.sigma);
  Vec<Scalar> fs(d), fi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    fs(i) = std::sqrt(sp.eigenvalues(i));
    fi(i) = Scalar(1) / fs(i);
  }
  const Mat<Scalar> root = spectral_rebuild(sp, fs).m;
  const Mat<Scalar> inv_root = spectral_rebuild(sp, fi).m;

  const Vec<Scalar> tmu = r.transpose() * (inv_root * (b.mu - a.mu));
  const SymMatrix<Scalar> tsigma = SymMatrix<Scalar>::symmetrized(
      r.transpose() * inv_root * b.sigma.m * inv_root * r);
  return {a, b, GaussianPoint<Scalar>(tmu, tsigma), root * r,
          r.transpose() * inv_root};
}

template <class Scalar>
[[nodiscard]] OriginProblem<Scalar> normalize_to_origin(
    const GaussianPoint<Scalar>& a, const GaussianPoint<Scalar>& b) {
  return normalize_to_origin(a, b,
                             Mat<Scalar>(Mat<Scalar>::Identity(a.dim(),
                                                               a.dim())));
}

/// Map an origin-frame velocity back to the problem's original coordinates.
/// The change of variables is an isometry, so lengths are preserved.
template <class Scalar>
[[nodiscard]] TangentVector<Scalar> denormalize_velocity(
    const TangentVector<Scalar>& v, const OriginProblem<Scalar>& prob) {
  const Mat<Scalar>& w = prob.whitener;
  return {w * v.u_mu,
          SymMatrix<Scalar>::symmetrized(w * v.u_sigma.m * w.transpose())};
}

/// Inverse of denormalize_velocity.
template <class Scalar>
[[nodiscard]] TangentVector<Scalar> normalize_velocity(
    const TangentVector<Scalar>& v, const OriginProblem<Scalar>& prob) {
  const Mat<Scalar>& wi = prob.whitener_inv;
  return {wi * v.u_mu,
          SymMatrix<Scalar>::symmetrized(wi * v.u_sigma.m * wi.transpose())};
}

/// Generator of the geodesic flow for the origin velocity (x, B): the
/// (2d+1) x (2d+1) block matrix
///   [ -B   x   0  ]
///   [ x^T  0  -x^T]
///   [  0  -x   B  ].
/// exp(t M) carries the natural parameters (Delta, delta) of the geodesic in
/// its first block row.
template <class Scalar>
[[nodiscard]] Mat<Scalar> geodesic_generator(const TangentVector<Scalar>& v) {
  const Eigen::Index d = v.dim();
  Mat<Scalar> m = Mat<Scalar>::Zero(2 * d + 1, 2 * d + 1);
  m.topLeftCorner(d, d) = -v.u_sigma.m;
  m.block(0, d, d, 1) = v.u_mu;
  m.block(d, 0, 1, d) = v.u_mu.transpose();
  m.block(d, d + 1, 1, d) = -v.u_mu.transpose();
  m.block(d + 1, d, d, 1) = -v.u_mu;
  m.bottomRightCorner(d, d) = v.u_sigma.m;
  return m;
}

namespace detail {

/// Recover N(mu, sigma) from natural parameters (Delta, delta) produced by a
/// flow evaluation. A Delta that fails the positive-definite test means the
/// requested point lies outside the numerically representable range.
template <class Scalar>
[[nodiscard]] GaussianPoint<Scalar> point_from_natural(
    const SymMatrix<Scalar>& Delta, const Vec<Scalar>& delta) {
  if (!Delta.m.allFinite() || !delta.allFinite())
    throw NumericalOverflow("geodesic: natural parameters are not finite");
  const Spectrum<Scalar> sp = spectrum(Delta);
  const Eigen::Index d = sp.eigenvalues.size();
  if (!(sp.eigenvalues(0) > Scalar(1e-12) * sp.eigenvalues(d - 1)))
    throw NotPositiveDefinite(
        "geodesic: recovered precision matrix is not positive definite");
  Vec<Scalar> f(d);
  for (Eigen::Index i = 0; i < d; ++i) f(i) = Scalar(1) / sp.eigenvalues(i);
  const SymMatrix<Scalar> sigma = spectral_rebuild(sp, f);
  return GaussianPoint<Scalar>(sigma.m * delta, sigma);
}

}  // namespace detail

enum class GeodesicMethod { matrix_exp, closed_form };

/// Canonical coordinates (delta(t), Delta(t)) of the geodesic leaving the
/// origin with velocity (x, B), evaluated at time t.
///
/// matrix_exp exponentiates the flow generator and reads off the blocks.
/// closed_form assembles the same pair through the spectrum of
/// G^2 = B^2 + 2 x x^T:
///   delta(t) = -B (cosh(tG) - I)(G^-)^2 x + sinh(tG) G^- x
///   Delta(t) = I + (cosh(tG) - I)/2 + B (cosh(tG) - I)(G^-)^2 B / 2
///              - (sinh(tG) G^- B + B sinh(tG) G^-)/2
/// where each eigenvalue function is evaluated with its exact limit on the
/// null space of G^2 (which the flow never leaves, so the pseudo-inverse
/// introduces no error).
///
/// These coordinates are where the two methods can be compared: both build
/// (delta, Delta) from cosh-scaled terms, so their normwise relative
/// disagreement stays near machine precision. Recovering (mu, sigma)
/// afterwards inverts Delta, whose small eigenvalues emerge from
/// cancellation between those terms; that step amplifies absolute error by
/// about e^(2t‖G‖) regardless of which method produced the input.
template <class Scalar>
[[nodiscard]] CanonicalPoint<Scalar> geodesic_canonical(
    const TangentVector<Scalar>& v, Scalar t,
    GeodesicMethod method = GeodesicMethod::matrix_exp) {
  const Eigen::Index d = v.dim();
  if (method == GeodesicMethod::matrix_exp) {
    const Mat<Scalar> e = expm(Mat<Scalar>(t * geodesic_generator(v)));
    return {Vec<Scalar>(e.block(0, d, d, 1)),
            SymMatrix<Scalar>::symmetrized(e.topLeftCorner(d, d))};
  }

  const Mat<Scalar>& b = v.u_sigma.m;
  const Vec<Scalar>& x = v.u_mu;
  const SymMatrix<Scalar> gsq =
      SymMatrix<Scalar>::symmetrized(b * b + 2 * x * x.transpose());
  const Spectrum<Scalar> sp = gsq_spectrum(gsq);
  Vec<Scalar> fc(d), fq(d), fs(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Scalar l = sp.eigenvalues(i);
    if (l > 0) {
      const Scalar g = std::sqrt(l);
      const Scalar sh = std::sinh(t * g / 2);
      fc(i) = 2 * sh * sh;       // cosh(tg) - 1, stable near zero
      fq(i) = fc(i) / l;         // (cosh(tg) - 1) / g^2
      fs(i) = std::sinh(t * g) / g;
    } else {
      fc(i) = 0;
      fq(i) = t * t / 2;
      fs(i) = t;
    }
  }
  const Mat<Scalar> cm1 = spectral_rebuild(sp, fc).m;
  const Mat<Scalar> q = spectral_rebuild(sp, fq).m;
  const Mat<Scalar> s = spectral_rebuild(sp, fs).m;
  const Vec<Scalar> delta = -b * (q * x) + s * x;
  const Mat<Scalar> sb = s * b;
  const SymMatrix<Scalar> Delta = SymMatrix<Scalar>::symmetrized(
      Mat<Scalar>::Identity(d, d) + Scalar(0.5) * cm1 +
      Scalar(0.5) * b * q * b - Scalar(0.5) * (sb + sb.transpose()));
  if (!delta.allFinite() || !Delta.m.allFinite())
    throw NumericalOverflow("geodesic: natural parameters are not finite");
  return {delta, Delta};
}

/// Evaluate the geodesic leaving the origin with velocity (x, B) at time t,
/// as a mean/covariance point.
template <class Scalar>
[[nodiscard]] GaussianPoint<Scalar> geodesic_from_origin(
    const TangentVector<Scalar>& v, Scalar t,
    GeodesicMethod method = GeodesicMethod::matrix_exp) {
  const CanonicalPoint<Scalar> c = geodesic_canonical(v, t, method);
  return detail::point_from_natural(c.Delta, c.delta);
}

/// Evaluate the geodesic leaving an arbitrary point p with a velocity given
/// in p's own coordinates, by whitening to the origin, flowing, and mapping
/// back.
template <class Scalar>
[[nodiscard]] GaussianPoint<Scalar> point_along(
    const GaussianPoint<Scalar>& p, const TangentVector<Scalar>& v, Scalar t,
    GeodesicMethod method = GeodesicMethod::matrix_exp) {
  if (p.dim() != v.dim())
    throw std::invalid_argument("point_along: dimensions disagree");
  const Eigen::Index d = p.dim();
  const Spectrum<Scalar> sp = spectrum(p.sigma);
  Vec<Scalar> fs(d), fi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    fs(i) = std::sqrt(sp.eigenvalues(i));
    fi(i) = Scalar(1) / fs(i);
  }
  const Mat<Scalar> root = spectral_rebuild(sp, fs).m;
  const Mat<Scalar> inv_root = spectral_rebuild(sp, fi).m;
  const TangentVector<Scalar> v0{
      inv_root * v.u_mu,
      SymMatrix<Scalar>::symmetrized(inv_root * v.u_sigma.m * inv_root)};
  const GaussianPoint<Scalar> q = geodesic_from_origin(v0, t, method);
  return GaussianPoint<Scalar>(
      root * q.mu + p.mu,
      SymMatrix<Scalar>::symmetrized(root * q.sigma.m * root));
}

/// Max-norm defect of the geodesic equations at time t, using central
/// differences with step h. The flow (mu(t), sigma(t)) must satisfy
///   mu' = sigma x,  sigma' = sigma (B - x mu^T).
/// Requires 0 < h <= 1e-4 and h < t < 1 - h.
template <class Scalar>
[[nodiscard]] Scalar geodesic_ode_residual(const TangentVector<Scalar>& v,
                                           Scalar t, Scalar h) {
  if (!(h > 0 && h <= Scalar(1e-4)))
    throw std::invalid_argument("geodesic_ode_residual: h out of range");
  if (!(t > h && t < 1 - h))
    throw std::invalid_argument("geodesic_ode_residual: t out of range");
  const GaussianPoint<Scalar> p0 = geodesic_from_origin(v, t);
  const GaussianPoint<Scalar> pp = geodesic_from_origin(v, t + h);
  const GaussianPoint<Scalar> pm = geodesic_from_origin(v, t - h);
  const Vec<Scalar> mu_dot = (pp.mu - pm.mu) / (2 * h);
  const Mat<Scalar> sigma_dot = (pp.sigma.m - pm.sigma.m) / (2 * h);
  const Vec<Scalar> mu_rhs = p0.sigma.m * v.u_mu;
  const Mat<Scalar> sigma_rhs =
      p0.sigma.m * (v.u_sigma.m - v.u_mu * p0.mu.transpose());
  return std::max((mu_dot - mu_rhs).cwiseAbs().maxCoeff(),
                  (sigma_dot - sigma_rhs).cwiseAbs().maxCoeff());
}

}  // namespace mvngeo
