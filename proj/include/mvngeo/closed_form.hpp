#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mvngeo/manifold.hpp"

namespace mvngeo {

namespace detail {

/// Exact single-axis geodesic solve. An axis with target precision p that
/// carries a (signed) share delta of the precision-weighted target mean
/// moves with velocity entries
///   B = (alpha / gamma) g,  x = 2 g delta p / gamma,
///   alpha = delta^2 - 2 p^2 + 2 p,  gamma = sqrt(alpha^2 + 8 delta^2 p^2),
///   g = acosh(1 + gamma^2 / (8 p^3)).
/// gamma = 0 forces p = 1 and delta = 0: the axis does not move at all.
/// At delta = 0 the expression collapses to B = log(1/p), the pure
/// change-of-variance solution.
template <class Scalar>
struct AxisSolve {
  Scalar b, x, alpha, gamma, g;
};

template <class Scalar>
[[nodiscard]] AxisSolve<Scalar> solve_axis(Scalar precision, Scalar delta) {
  const Scalar p = precision;
  const Scalar alpha = delta * delta - 2 * p * p + 2 * p;
  const Scalar gamma =
      std::hypot(alpha, Scalar(2) * std::sqrt(Scalar(2)) * delta * p);
  AxisSolve<Scalar> out{0, 0, alpha, gamma, 0};
  out.g = acosh1p(gamma * gamma / (8 * p * p * p));
  if (gamma > 0) {
    out.b = alpha / gamma * out.g;
    out.x = 2 * out.g * delta * p / gamma;
  }
  return out;
}

}  // namespace detail

/// Which closed-form family an origin-normalized target falls into, from
/// most to least specific. general means no closed form applies.
enum class SpecialKind {
  univariate,
  equal_means,
  equal_variances,
  axis_aligned,
  general
};

[[nodiscard]] inline const char* special_kind_name(SpecialKind kind) {
  switch (kind) {
    case SpecialKind::univariate: return "univariate";
    case SpecialKind::equal_means: return "equal_means";
    case SpecialKind::equal_variances: return "equal_variances";
    case SpecialKind::axis_aligned: return "axis_aligned";
    case SpecialKind::general: return "general";
  }
  return "?";
}

template <class Scalar>
struct CaseClassification {
  SpecialKind kind;
  Eigen::Index axis_index;   // moving axis in the rotated frame; -1 if none
  Mat<Scalar> diagonalizer;  // orthogonal R with R^T sigma_t R diagonal
  Scalar aligned_delta;      // precision-weighted mean along the axis, >= 0
};

/// Constants of the single-axis solve, recorded per rotated axis.
template <class Scalar>
struct AxisConstants {
  Scalar Delta_t, alpha, gamma, g;
};

template <class Scalar>
struct SpecialCaseSolution {
  TangentVector<Scalar> velocity;
  Scalar distance;
  std::vector<AxisConstants<Scalar>> constants;
};

/// Decide whether an origin-normalized target admits a closed-form geodesic:
/// the precision-weighted mean must lie in an eigenspace of the target
/// covariance (within angle_tol, relative). Eigenvalues are grouped with a
/// relative gap of 1e-8 so repeated eigenvalues expose their full
/// eigenspace, and the returned diagonalizer points its aligned column along
/// the mean's projection.
template <class Scalar>
[[nodiscard]] CaseClassification<Scalar> classify(
    const GaussianPoint<Scalar>& target, Scalar angle_tol = Scalar(1e-9)) {
  const Eigen::Index d = target.dim();
  Spectrum<Scalar> sp = spectrum(target.sigma);
  Vec<Scalar> inv(d);
  for (Eigen::Index i = 0; i < d; ++i) inv(i) = Scalar(1) / sp.eigenvalues(i);
  const Vec<Scalar> delta_vec = spectral_rebuild(sp, inv).m * target.mu;

  if (d == 1) {
    Mat<Scalar> r(1, 1);
    r(0, 0) = target.mu(0) < 0 ? Scalar(-1) : Scalar(1);
    return {SpecialKind::univariate, 0, r, std::abs(delta_vec(0))};
  }

  const Scalar mu_scale =
      Scalar(1e-13) * (1 + target.sigma.m.cwiseAbs().maxCoeff());
  if (target.mu.norm() <= mu_scale)
    return {SpecialKind::equal_means, -1, sp.eigenvectors, 0};

  if ((sp.eigenvalues.array() - 1).abs().maxCoeff() <= Scalar(1e-9)) {
    // covariance is the identity to within tolerance, so every frame
    // diagonalizes it; pick the one whose first axis is the mean direction
    Mat<Scalar> seeded(d, d);
    seeded.col(0) = target.mu.normalized();
    seeded.rightCols(d - 1) = Mat<Scalar>::Identity(d, d).leftCols(d - 1);
    Eigen::HouseholderQR<Mat<Scalar>> qr(seeded);
    Mat<Scalar> r = qr.householderQ();
    if (r.col(0).dot(seeded.col(0)) < 0) r.col(0) *= -1;
    return {SpecialKind::equal_variances, 0, r,
            std::abs(r.col(0).dot(delta_vec))};
  }

  const auto groups = detail::eigen_groups(sp.eigenvalues, Scalar(1e-8));
  const Scalar dnorm = delta_vec.norm();
  Eigen::Index best = -1;
  Scalar best_resid = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index gi = 0; gi < static_cast<Eigen::Index>(groups.size());
       ++gi) {
    const auto& [gb, ge] = groups[gi];
    const auto block = sp.eigenvectors.middleCols(gb, ge - gb);
    const Vec<Scalar> proj = block * (block.transpose() * delta_vec);
    const Scalar resid = (delta_vec - proj).norm();
    if (resid <= angle_tol * dnorm && resid < best_resid) {
      best = gi;
      best_resid = resid;
    }
  }
  if (best < 0)
    return {SpecialKind::general, -1, sp.eigenvectors, 0};

  detail::align_groups_to(sp, delta_vec, {groups[best]});
  const Eigen::Index axis = groups[best].first;
  return {SpecialKind::axis_aligned, axis, sp.eigenvectors,
          std::abs(sp.eigenvectors.col(axis).dot(delta_vec))};
}

/// Closed-form geodesic velocity and distance for a special-case target.
/// In the rotated frame every axis is an independent single-axis problem:
/// the aligned axis carries the whole mean displacement, each other axis
/// changes variance only (B entry log of its target eigenvalue). The
/// distance combines the aligned axis's g with the passive axes' log terms:
///   d^2 = g^2/2 + sum_{j != k} log^2(lambda_j) / 2.
template <class Scalar>
[[nodiscard]] SpecialCaseSolution<Scalar> solve_special(
    const GaussianPoint<Scalar>& target, const CaseClassification<Scalar>& c) {
  if (c.kind == SpecialKind::general)
    throw NotSpecialCase(
        "solve_special: target mean is not aligned with an eigenspace");
  const Eigen::Index d = target.dim();
  const Mat<Scalar>& r = c.diagonalizer;

  SpecialCaseSolution<Scalar> out;
  out.constants.reserve(d);
  Vec<Scalar> bdiag(d), xrot = Vec<Scalar>::Zero(d);
  Scalar dist_sq = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const Scalar lambda = r.col(j).dot(target.sigma.m * r.col(j));
    const Scalar p = Scalar(1) / lambda;
    const Scalar dj = j == c.axis_index ? c.aligned_delta : Scalar(0);
    const auto ax = detail::solve_axis(p, dj);
    out.constants.push_back({p, ax.alpha, ax.gamma, ax.g});
    if (j == c.axis_index) {
      bdiag(j) = ax.b;
      xrot(j) = ax.x;
      dist_sq += ax.g * ax.g / 2;
    } else {
      bdiag(j) = std::log(lambda);
      dist_sq += bdiag(j) * bdiag(j) / 2;
    }
  }
  out.velocity = {r * xrot, SymMatrix<Scalar>::symmetrized(
                                r * bdiag.asDiagonal() * r.transpose())};
  out.distance = std::sqrt(dist_sq);
  return out;
}

template <class Scalar>
[[nodiscard]] SpecialCaseSolution<Scalar> solve_special(
    const GaussianPoint<Scalar>& target) {
  return solve_special(target, classify(target));
}

/// Closed-form Fisher-Rao distance for a special-case target.
template <class Scalar>
[[nodiscard]] Scalar distance_special(const GaussianPoint<Scalar>& target) {
  return solve_special(target).distance;
}

}  // namespace mvngeo
