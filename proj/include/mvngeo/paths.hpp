#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvngeo/closed_form.hpp"
#include "mvngeo/manifold.hpp"

namespace mvngeo {

/// Reference interpolation families between two Gaussians. Only the
/// geodesic itself is information-optimal; these are the paths practical
/// algorithms actually traverse, plus euclidean as a naive baseline.
enum class PathKind { annealing, moment, wasserstein, projection, euclidean };

[[nodiscard]] inline const char* path_kind_name(PathKind kind) {
  switch (kind) {
    case PathKind::annealing: return "annealing";
    case PathKind::moment: return "moment";
    case PathKind::wasserstein: return "wasserstein";
    case PathKind::projection: return "projection";
    case PathKind::euclidean: return "euclidean";
  }
  return "?";
}

namespace detail {

/// Augmented (d+1) x (d+1) embedding of a Gaussian with natural base point:
///   [ sigma + mu mu^T   mu ]
///   [ mu^T               1 ].
/// Matrix powers of this block matrix interpolate Gaussians multiplicatively.
template <class Scalar>
[[nodiscard]] SymMatrix<Scalar> augmented_embedding(const Vec<Scalar>& mu,
                                                    const Mat<Scalar>& sigma) {
  const Eigen::Index d = mu.size();
  Mat<Scalar> e(d + 1, d + 1);
  e.topLeftCorner(d, d) = sigma + mu * mu.transpose();
  e.block(0, d, d, 1) = mu;
  e.block(d, 0, 1, d) = mu.transpose();
  e(d, d) = 1;
  return SymMatrix<Scalar>(e);
}

/// Read a Gaussian back out of an augmented-embedding matrix.
template <class Scalar>
[[nodiscard]] GaussianPoint<Scalar> gaussian_from_embedding(
    const Mat<Scalar>& e) {
  const Eigen::Index d = e.rows() - 1;
  const Scalar beta = e(d, d);
  if (!(beta > 0))
    throw NotPositiveDefinite("embedding base weight is not positive");
  const Vec<Scalar> pmu = e.block(0, d, d, 1);
  const Vec<Scalar> mu = pmu / beta;
  const SymMatrix<Scalar> sigma(e.topLeftCorner(d, d) -
                                pmu * pmu.transpose() / beta);
  return GaussianPoint<Scalar>(mu, sigma);
}

}  // namespace detail

/// Point at parameter t of the chosen interpolation family.
///
/// annealing interpolates the natural parameters (sigma^-1 mu, sigma^-1)
/// linearly. moment interpolates the first two moments, picking up the
/// t(1-t)/4 transient variance along the displacement. wasserstein follows
/// the optimal-transport displacement between the Gaussians. projection
/// raises the origin-normalized target's augmented embedding to the power t
/// and projects back onto the manifold; the result is mapped back to the
/// original frame. euclidean interpolates (mu, sigma) entrywise.
template <class Scalar>
[[nodiscard]] GaussianPoint<Scalar> path_point(PathKind kind,
                                               const GaussianPoint<Scalar>& a,
                                               const GaussianPoint<Scalar>& b,
                                               Scalar t) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("path_point: dimensions disagree");
  if (!(t >= 0 && t <= 1))
    throw std::invalid_argument("path_point: t outside [0,1]");
  if (t == 0) return a;
  if (t == 1) return b;
  const Eigen::Index d = a.dim();
  try {
    switch (kind) {
      case PathKind::annealing: {
        const CanonicalPoint<Scalar> ca = to_canonical(a);
        const CanonicalPoint<Scalar> cb = to_canonical(b);
        return from_canonical(CanonicalPoint<Scalar>{
            (1 - t) * ca.delta + t * cb.delta,
            SymMatrix<Scalar>((1 - t) * ca.Delta.m + t * cb.Delta.m)});
      }
      case PathKind::moment: {
        const Vec<Scalar> dm = b.mu - a.mu;
        return GaussianPoint<Scalar>(
            (1 - t) * a.mu + t * b.mu,
            SymMatrix<Scalar>((1 - t) * a.sigma.m + t * b.sigma.m +
                              Scalar(0.25) * t * (1 - t) * dm *
                                  dm.transpose()));
      }
      case PathKind::wasserstein: {
        const Mat<Scalar> root_b = sym_fn(b.sigma, SymFnKind::sqrt).m;
        const SymMatrix<Scalar> inner =
            SymMatrix<Scalar>::symmetrized(root_b * a.sigma.m * root_b);
        const Mat<Scalar> c =
            root_b * sym_fn(inner, SymFnKind::inv_sqrt).m * root_b;
        const Mat<Scalar> blend =
            (1 - t) * Mat<Scalar>::Identity(d, d) + t * c;
        return GaussianPoint<Scalar>(
            (1 - t) * a.mu + t * b.mu,
            SymMatrix<Scalar>::symmetrized(blend * a.sigma.m *
                                           blend.transpose()));
      }
      case PathKind::projection: {
        const OriginProblem<Scalar> prob = normalize_to_origin(a, b);
        const SymMatrix<Scalar> e = detail::augmented_embedding(
            prob.target.mu, prob.target.sigma.m);
        const Spectrum<Scalar> sp = spectrum(e);
        if (!(sp.eigenvalues(0) > Scalar(1e-12) * sp.eigenvalues(d)))
          throw NotPositiveDefinite(
              "path_point: augmented embedding lost definiteness");
        Vec<Scalar> f(d + 1);
        for (Eigen::Index i = 0; i <= d; ++i)
          f(i) = std::exp(t * std::log(sp.eigenvalues(i)));
        const GaussianPoint<Scalar> q =
            detail::gaussian_from_embedding(spectral_rebuild(sp, f).m);
        const Mat<Scalar>& w = prob.whitener;
        return GaussianPoint<Scalar>(
            w * q.mu + a.mu,
            SymMatrix<Scalar>::symmetrized(w * q.sigma.m * w.transpose()));
      }
      case PathKind::euclidean:
        return GaussianPoint<Scalar>(
            (1 - t) * a.mu + t * b.mu,
            SymMatrix<Scalar>((1 - t) * a.sigma.m + t * b.sigma.m));
    }
  } catch (const NotPositiveDefinite& err) {
    throw NotPositiveDefinite(std::string(err.what()) + " (path kind " +
                              path_kind_name(kind) + ", t = " +
                              std::to_string(t) + ")");
  }
  throw std::invalid_argument("path_point: unknown kind");
}

/// Manifold length of the interpolation, by midpoint-rule quadrature:
/// the path is sampled at 2n+1 points and each segment contributes
/// sqrt(metric_sq) of its endpoint difference, with the metric taken at the
/// segment midpoint.
template <class Scalar>
[[nodiscard]] Scalar path_length(PathKind kind, const GaussianPoint<Scalar>& a,
                                 const GaussianPoint<Scalar>& b,
                                 int segments = 1000) {
  if (segments < 2)
    throw std::invalid_argument("path_length: segments must be >= 2");
  const Scalar step = Scalar(1) / (2 * segments);
  std::vector<GaussianPoint<Scalar>> pts;
  pts.reserve(2 * segments + 1);
  for (int k = 0; k <= 2 * segments; ++k)
    pts.push_back(path_point(kind, a, b, std::min(Scalar(1), k * step)));
  Scalar len = 0;
  for (int i = 0; i < segments; ++i)
    len += std::sqrt(metric_sq(pts[2 * i + 1],
                               chart_difference(pts[2 * i], pts[2 * i + 2])));
  return len;
}

/// A path sampled at uniform parameters, with its quadrature length.
template <class Scalar>
struct DiscretizedPath {
  std::vector<GaussianPoint<Scalar>> samples;
  Scalar length;
};

template <class Scalar>
[[nodiscard]] DiscretizedPath<Scalar> discretize(PathKind kind,
                                                 const GaussianPoint<Scalar>& a,
                                                 const GaussianPoint<Scalar>& b,
                                                 int n_samples,
                                                 int length_segments = 1000) {
  if (n_samples < 2)
    throw std::invalid_argument("discretize: need at least 2 samples");
  std::vector<GaussianPoint<Scalar>> samples;
  samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i)
    samples.push_back(path_point(
        kind, a, b, std::min(Scalar(1), Scalar(i) / (n_samples - 1))));
  return {std::move(samples), path_length(kind, a, b, length_segments)};
}

/// Approximate geodesic velocities from the origin to a target, used to
/// seed and steer the boundary-value solver.
enum class ApproxKind { taylor, eigen, projection };

[[nodiscard]] inline const char* approx_kind_name(ApproxKind kind) {
  switch (kind) {
    case ApproxKind::taylor: return "taylor";
    case ApproxKind::eigen: return "eigen";
    case ApproxKind::projection: return "projection";
  }
  return "?";
}

/// Approximate initial velocity (x, B) aiming at an origin-normalized
/// target.
///
/// taylor: B = log sigma_t, x = f(sigma_t) mu_t with f(l) = log(l)/(l - 1),
/// the small-velocity expansion; undefined (SingularTaylor) when sigma_t has
/// an eigenvalue within 1e-10 of 1.
///
/// eigen: treats each eigen-axis of sigma_t as an independent aligned
/// problem, applying the exact single-axis solution to the projection of the
/// precision-weighted mean onto that axis. Exact whenever the target is in
/// fact aligned.
///
/// projection: reads (B, x) off the matrix logarithm of the augmented
/// embedding. Exact at mu_t = 0.
template <class Scalar>
[[nodiscard]] TangentVector<Scalar> approx_velocity(
    ApproxKind kind, const GaussianPoint<Scalar>& target) {
  const Eigen::Index d = target.dim();
  switch (kind) {
    case ApproxKind::taylor: {
      const Spectrum<Scalar> sp = spectrum(target.sigma);
      Vec<Scalar> flog(d), fratio(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        const Scalar r = sp.eigenvalues(i) - 1;
        if (std::abs(r) < Scalar(1e-10))
          throw SingularTaylor(
              "approx_velocity: taylor undefined, covariance eigenvalue "
              "within 1e-10 of 1");
        flog(i) = std::log1p(r);
        fratio(i) = flog(i) / r;
      }
      return {spectral_rebuild(sp, fratio).m * target.mu,
              spectral_rebuild(sp, flog)};
    }
    case ApproxKind::eigen: {
      Spectrum<Scalar> sp = spectrum(target.sigma);
      Vec<Scalar> inv(d);
      for (Eigen::Index i = 0; i < d; ++i)
        inv(i) = Scalar(1) / sp.eigenvalues(i);
      const Vec<Scalar> delta_vec = spectral_rebuild(sp, inv).m * target.mu;
      detail::align_groups_to(sp, delta_vec,
                              detail::eigen_groups(sp.eigenvalues,
                                                   Scalar(1e-8)));
      Vec<Scalar> bdiag(d), xrot(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const Scalar p = Scalar(1) / sp.eigenvalues(j);
        const Scalar dj = sp.eigenvectors.col(j).dot(delta_vec);
        const auto ax = detail::solve_axis(p, dj);
        bdiag(j) = ax.b;
        xrot(j) = ax.x;
      }
      return {sp.eigenvectors * xrot,
              SymMatrix<Scalar>::symmetrized(sp.eigenvectors *
                                             bdiag.asDiagonal() *
                                             sp.eigenvectors.transpose())};
    }
    case ApproxKind::projection: {
      const SymMatrix<Scalar> e =
          detail::augmented_embedding(target.mu, target.sigma.m);
      const Mat<Scalar> l = sym_fn(e, SymFnKind::log).m;
      return {l.block(0, d, d, 1),
              SymMatrix<Scalar>(l.topLeftCorner(d, d))};
    }
  }
  throw std::invalid_argument("approx_velocity: unknown kind");
}

}  // namespace mvngeo
