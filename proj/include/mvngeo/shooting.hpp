#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mvngeo/paths.hpp"

namespace mvngeo {

enum class ResidualKind { euclid, taylor, eigen, projection };
enum class InitKind { zero, taylor, eigen, projection };
enum class SolveStatus { converged, max_iters, diverged, numerical_failure };

[[nodiscard]] inline const char* residual_kind_name(ResidualKind kind) {
  switch (kind) {
    case ResidualKind::euclid: return "euclid";
    case ResidualKind::taylor: return "taylor";
    case ResidualKind::eigen: return "eigen";
    case ResidualKind::projection: return "projection";
  }
  return "?";
}

[[nodiscard]] inline const char* init_kind_name(InitKind kind) {
  switch (kind) {
    case InitKind::zero: return "zero";
    case InitKind::taylor: return "taylor";
    case InitKind::eigen: return "eigen";
    case InitKind::projection: return "projection";
  }
  return "?";
}

[[nodiscard]] inline const char* solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

template <class Scalar>
struct ShootingConfig {
  Scalar tol = Scalar(1e-10);       // sym_kl termination threshold
  Scalar r_norm_max = Scalar(1);    // over-ambition cap on the update step
  int max_iters = 1000;
  ResidualKind residual_kind = ResidualKind::projection;
  InitKind init_kind = InitKind::projection;
  int steps_per_length = 250;       // transport resolution per unit length
  // Throughput knob for batch runs: when > 0, give up (reporting max_iters
  // and the best iterate) whenever a window of this many iterations improves
  // the best sym_kl by less than 5%. 0 runs the full budget.
  int stall_iters = 0;
};

template <class Scalar>
struct TraceRow {
  int iteration;
  Scalar sym_kl;
  Scalar residual_norm;
  Scalar step;
};

template <class Scalar>
struct ShootingReport {
  TangentVector<Scalar> velocity;         // original frame, at the start point
  TangentVector<Scalar> velocity_origin;  // origin frame
  Scalar distance = 0;
  int iterations = 0;
  std::vector<TraceRow<Scalar>> trace;
  SolveStatus status = SolveStatus::numerical_failure;
};

/// A correction vector pointing from `at` toward `toward`, in `at`'s own
/// coordinates: normalize `at` to the origin, read off an approximate
/// velocity toward the normalized `toward`, and map it back through the
/// whitener. euclid uses the raw chart offset of the normalized target;
/// the other kinds use the corresponding approx_velocity.
template <class Scalar>
[[nodiscard]] TangentVector<Scalar> residual_vector(
    const GaussianPoint<Scalar>& at, const GaussianPoint<Scalar>& toward,
    ResidualKind kind) {
  const OriginProblem<Scalar> prob = normalize_to_origin(at, toward);
  TangentVector<Scalar> local = TangentVector<Scalar>::zero(at.dim());
  switch (kind) {
    case ResidualKind::euclid:
      local.u_mu = prob.target.mu;
      local.u_sigma = SymMatrix<Scalar>(
          prob.target.sigma.m -
          Mat<Scalar>::Identity(at.dim(), at.dim()));
      break;
    case ResidualKind::taylor:
      local = approx_velocity(ApproxKind::taylor, prob.target);
      break;
    case ResidualKind::eigen:
      local = approx_velocity(ApproxKind::eigen, prob.target);
      break;
    case ResidualKind::projection:
      local = approx_velocity(ApproxKind::projection, prob.target);
      break;
  }
  return denormalize_velocity(local, prob);
}

/// Carry the endpoint vector r back to the start of the geodesic that leaves
/// the origin with velocity v, by integrating the parallel transport
/// equations backward from t = 1 to t = 0 with fixed-step classical RK4 and
/// N = ceil(steps_per_length * length) steps.
///
/// The geodesic state at the substeps comes from the flow-matrix
/// exponential: the running product exp(t M) is advanced by a constant
/// half-step factor and re-anchored with a fresh exponential every 64 steps
/// to keep drift at roundoff. Writing the transport rates with
/// A = dSigma/dt Sigma^-1 (symmetrized) gives
///   du_mu   = (A u_mu + u_sigma x) / 2
///   du_sigma = (A u_sigma + u_sigma A^T
///               - mdot u_mu^T - u_mu mdot^T) / 2,  mdot = Sigma x,
/// which keeps u_sigma symmetric exactly.
namespace detail {

/// Fixed-step RK4 core of parallel_transport_back, templated on the
/// compile-time dimension D (Eigen::Dynamic when no specialization applies)
/// so that the small-matrix arithmetic unrolls. The transport dominates the
/// cost of every shooting iteration, which makes this one loop worth the
/// dispatch.
template <int D, class Scalar>
[[nodiscard]] TangentVector<Scalar> transport_back_loop(
    const TangentVector<Scalar>& r, const TangentVector<Scalar>& v,
    const Mat<Scalar>& gen, const Mat<Scalar>& half_step_dyn,
    const Mat<Scalar>& lam_start, long n, Scalar h) {
  constexpr int A = D == Eigen::Dynamic ? Eigen::Dynamic : 2 * D + 1;
  using MatD = Eigen::Matrix<Scalar, D, D>;
  using VecD = Eigen::Matrix<Scalar, D, 1>;
  using MatA = Eigen::Matrix<Scalar, A, A>;
  const Eigen::Index d = v.dim();

  const MatA half_step = half_step_dyn;
  MatA lam = lam_start;  // flow at t = 1
  const VecD x = v.u_mu;
  const MatD bmat = v.u_sigma.m;
  const MatD eye = MatD::Identity(d, d);

  // per-substep geodesic data: A = sym(dSigma/dt) Sigma^-1... precomposed
  struct Stage {
    MatD a;
    VecD mdot;
  };
  Stage st_t{MatD(d, d), VecD(d)};
  Stage st_m{MatD(d, d), VecD(d)};
  Stage st_n{MatD(d, d), VecD(d)};

  Eigen::LLT<MatD> llt;
  MatD prec(d, d), sig(d, d), sdot(d, d), work(d, d);
  VecD mu(d);
  const auto decode = [&](const MatA& flow, Stage& out) {
    if constexpr (D == Eigen::Dynamic) {
      prec = Scalar(0.5) * (flow.topLeftCorner(d, d) +
                            flow.topLeftCorner(d, d).transpose());
      mu = flow.block(0, d, d, 1);
    } else {
      prec = Scalar(0.5) * (flow.template topLeftCorner<D, D>() +
                            flow.template topLeftCorner<D, D>().transpose());
      mu = flow.template block<D, 1>(0, D);
    }
    llt.compute(prec);
    if (llt.info() != Eigen::Success)
      throw NumericalOverflow(
          "parallel_transport_back: flow left the representable range");
    sig = eye;
    llt.solveInPlace(sig);
    llt.solveInPlace(mu);
    out.mdot.noalias() = sig * x;
    work.noalias() = sig * bmat;
    work.noalias() -= out.mdot * mu.transpose();
    sdot = Scalar(0.5) * (work + work.transpose());
    out.a.noalias() = sdot * prec;
  };

  VecD u_mu = r.u_mu;
  MatD u_sig = r.u_sigma.m;
  VecD k_mu(d), s_mu(d), acc_mu(d);
  MatD k_sig(d, d), s_sig(d, d), acc_sig(d, d);
  const auto rates = [&](const Stage& st, const VecD& um, const MatD& us,
                         VecD& out_mu, MatD& out_sig) {
    out_mu.noalias() = st.a * um;
    out_mu.noalias() += us * x;
    out_mu *= Scalar(0.5);
    out_sig.noalias() = st.a * us;
    work.noalias() = us * st.a.transpose();
    out_sig += work;
    out_sig.noalias() -= st.mdot * um.transpose();
    out_sig.noalias() -= um * st.mdot.transpose();
    out_sig *= Scalar(0.5);
  };

  const Eigen::Index a = 2 * d + 1;
  MatA lam_mid(a, a), lam_next(a, a);
  decode(lam, st_t);
  for (long k = 0; k < n; ++k) {
    lam_mid.noalias() = lam * half_step;
    decode(lam_mid, st_m);
    lam_next.noalias() = lam_mid * half_step;
    decode(lam_next, st_n);

    // classical RK4 with step -h
    rates(st_t, u_mu, u_sig, k_mu, k_sig);
    acc_mu = k_mu;
    acc_sig = k_sig;
    s_mu = u_mu - (h / 2) * k_mu;
    s_sig = u_sig - (h / 2) * k_sig;
    rates(st_m, s_mu, s_sig, k_mu, k_sig);
    acc_mu += 2 * k_mu;
    acc_sig += 2 * k_sig;
    s_mu = u_mu - (h / 2) * k_mu;
    s_sig = u_sig - (h / 2) * k_sig;
    rates(st_m, s_mu, s_sig, k_mu, k_sig);
    acc_mu += 2 * k_mu;
    acc_sig += 2 * k_sig;
    s_mu = u_mu - h * k_mu;
    s_sig = u_sig - h * k_sig;
    rates(st_n, s_mu, s_sig, k_mu, k_sig);
    acc_mu += k_mu;
    acc_sig += k_sig;
    u_mu -= (h / 6) * acc_mu;
    u_sig -= (h / 6) * acc_sig;

    if ((k + 1) % 64 == 0 && k + 1 < n) {
      const Scalar t_next = Scalar(n - (k + 1)) * h;
      lam = expm(Mat<Scalar>(t_next * gen));
      decode(lam, st_t);
    } else {
      lam.swap(lam_next);
      std::swap(st_t, st_n);
    }
  }
  if (!u_mu.allFinite() || !u_sig.allFinite())
    throw NumericalOverflow("parallel_transport_back: result not finite");
  return {Vec<Scalar>(u_mu), SymMatrix<Scalar>::symmetrized(Mat<Scalar>(u_sig))};
}

}  // namespace detail

template <class Scalar>
[[nodiscard]] TangentVector<Scalar> parallel_transport_back(
    const TangentVector<Scalar>& r, const TangentVector<Scalar>& v,
    int steps_per_length = 250) {
  const Eigen::Index d = v.dim();
  if (r.dim() != d)
    throw std::invalid_argument(
        "parallel_transport_back: dimensions disagree");
  if (steps_per_length < 1)
    throw std::invalid_argument(
        "parallel_transport_back: steps_per_length must be positive");
  const Scalar len = fisher_rao_from_velocity(v);
  if (!std::isfinite(len))
    throw NumericalOverflow("parallel_transport_back: velocity not finite");
  if (!(len > 0)) return r;
  const Scalar raw_steps = std::ceil(Scalar(steps_per_length) * len);
  if (!(raw_steps <= Scalar(50'000'000)))
    throw NumericalOverflow(
        "parallel_transport_back: step count out of range");
  const long n = std::max<long>(1, static_cast<long>(raw_steps));
  const Scalar h = Scalar(1) / Scalar(n);

  const Mat<Scalar> gen = geodesic_generator(v);
  const Mat<Scalar> half_step = expm(Mat<Scalar>(Scalar(-0.5) * h * gen));
  const Mat<Scalar> lam = expm(gen);

  switch (d) {
    case 1:
      return detail::transport_back_loop<1>(r, v, gen, half_step, lam, n, h);
    case 2:
      return detail::transport_back_loop<2>(r, v, gen, half_step, lam, n, h);
    case 3:
      return detail::transport_back_loop<3>(r, v, gen, half_step, lam, n, h);
    default:
      return detail::transport_back_loop<Eigen::Dynamic>(r, v, gen, half_step,
                                                         lam, n, h);
  }
}

namespace detail {

template <class Scalar>
[[nodiscard]] std::optional<GaussianPoint<Scalar>> try_flow_endpoint(
    const TangentVector<Scalar>& v) {
  if (!v.u_mu.allFinite() || !v.u_sigma.m.allFinite()) return std::nullopt;
  try {
    return geodesic_from_origin(v, Scalar(1));
  } catch (const NotPositiveDefinite&) {
    return std::nullopt;
  } catch (const NumericalOverflow&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Iteratively correct an initial velocity until its geodesic endpoint hits
/// the target. Works in the origin-normalized frame throughout:
/// each iteration computes a residual at the current endpoint, transports it
/// back to the start, probes the endpoint's sensitivity to that update
/// direction with a finite difference, scalarises the optimal step by inner
/// products at the endpoint, caps over-ambitious steps, and updates.
///
/// v0, when given, is in the original frame at a. Trace rows record the
/// pre-update sym_kl, the residual norm at the endpoint, and the accepted
/// step. On non-convergence the best iterate seen is returned.
template <class Scalar>
[[nodiscard]] ShootingReport<Scalar> shoot(
    const GaussianPoint<Scalar>& a, const GaussianPoint<Scalar>& b,
    const std::type_identity_t<std::optional<TangentVector<Scalar>>>& v0,
    const ShootingConfig<Scalar>& cfg) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("shoot: dimensions disagree");
  if (!(cfg.tol > 0) || !(cfg.r_norm_max > 0) || cfg.max_iters < 0)
    throw std::invalid_argument("shoot: invalid config");
  const Eigen::Index d = a.dim();
  const OriginProblem<Scalar> prob = normalize_to_origin(a, b);
  const GaussianPoint<Scalar>& target = prob.target;

  TangentVector<Scalar> v = TangentVector<Scalar>::zero(d);
  if (v0) {
    if (v0->dim() != d)
      throw std::invalid_argument("shoot: v0 dimension disagrees");
    v = normalize_velocity(*v0, prob);
  } else {
    // every init is only advisory, so any failure (taylor's pole, a target
    // too ill-conditioned for the spectral routines) falls back to rest
    try {
      switch (cfg.init_kind) {
        case InitKind::zero: break;
        case InitKind::taylor:
          v = approx_velocity(ApproxKind::taylor, target);
          break;
        case InitKind::eigen:
          v = approx_velocity(ApproxKind::eigen, target);
          break;
        case InitKind::projection:
          v = approx_velocity(ApproxKind::projection, target);
          break;
      }
    } catch (const Error&) {
      v = TangentVector<Scalar>::zero(d);
    }
  }

  ShootingReport<Scalar> report;
  auto endpoint = detail::try_flow_endpoint(v);
  if (!endpoint) {
    v = TangentVector<Scalar>::zero(d);
    endpoint = detail::try_flow_endpoint(v);
  }

  TangentVector<Scalar> best_v = v;
  Scalar best_kl = std::numeric_limits<Scalar>::infinity();
  Scalar prev_kl = std::numeric_limits<Scalar>::infinity();
  int grow_streak = 0;
  Scalar stall_mark = std::numeric_limits<Scalar>::infinity();
  SolveStatus status = SolveStatus::max_iters;
  bool keep_current = false;  // current v is the answer (converged)

  for (int iter = 0;; ++iter) {
    const Scalar dkl = sym_kl(*endpoint, target);
    if (dkl < best_kl) {
      best_kl = dkl;
      best_v = v;
    }
    if (dkl <= cfg.tol) {
      status = SolveStatus::converged;
      keep_current = true;
      break;
    }
    bool stalled = false;
    if (cfg.stall_iters > 0 && iter > 0 && iter % cfg.stall_iters == 0) {
      stalled = best_kl > Scalar(0.95) * stall_mark;
      stall_mark = best_kl;
    }
    if (iter >= cfg.max_iters || stalled) {
      status = SolveStatus::max_iters;
      break;
    }
    if (dkl > prev_kl) {
      if (++grow_streak >= 25) {
        status = SolveStatus::diverged;
        break;
      }
    } else {
      grow_streak = 0;
    }
    prev_kl = dkl;
    if (fisher_rao_from_velocity(v) > Scalar(100)) {
      // runaway velocity; transporting along it would cost unbounded work
      status = SolveStatus::diverged;
      break;
    }

    // approximate residuals can fail (taylor's pole, spectral routines
    // rejecting an extreme endpoint); substitute the plain chart offset, and
    // give up only when even that is unavailable
    TangentVector<Scalar> residual = TangentVector<Scalar>::zero(d);
    try {
      residual = residual_vector(*endpoint, target, cfg.residual_kind);
    } catch (const Error&) {
      try {
        residual = residual_vector(*endpoint, target, ResidualKind::euclid);
      } catch (const Error&) {
        status = SolveStatus::numerical_failure;
        break;
      }
    }
    const Scalar r_norm =
        std::sqrt(std::max(Scalar(0),
                           inner_product(residual, residual, *endpoint)));

    TangentVector<Scalar> dv = TangentVector<Scalar>::zero(d);
    try {
      dv = parallel_transport_back(residual, v, cfg.steps_per_length);
    } catch (const NumericalOverflow&) {
      status = SolveStatus::numerical_failure;
      break;
    }
    const Scalar dv_norm = fisher_rao_from_velocity(dv);
    if (!(dv_norm > 0) || !std::isfinite(dv_norm)) {
      status = SolveStatus::numerical_failure;
      break;
    }

    // probe endpoint sensitivity along dv: h ties the finite difference to
    // the tolerance, floored so it cannot underflow the chart resolution
    Scalar h = std::max(cfg.tol / dv_norm, Scalar(1e-9));
    auto probe = detail::try_flow_endpoint(v + h * dv);
    if (!probe) {
      h *= Scalar(1e-3);
      probe = detail::try_flow_endpoint(v + h * dv);
    }
    if (!probe) {
      status = SolveStatus::numerical_failure;
      break;
    }
    const TangentVector<Scalar> jacobi =
        (Scalar(1) / h) * chart_difference(*endpoint, *probe);
    const TangentVector<Scalar> err = chart_difference(*endpoint, target);
    const Scalar jj = inner_product(jacobi, jacobi, *endpoint);
    if (!(jj > 0) || !std::isfinite(jj)) {
      status = SolveStatus::numerical_failure;
      break;
    }
    Scalar s = inner_product(err, jacobi, *endpoint) / jj;
    // over-ambition guard: cap the applied update so a single correction
    // never moves the velocity by more than r_norm_max. For the plain chart
    // residual this is the classic residual-norm damping (transport
    // preserves norms), and it extends soundly to the approximate residual
    // kinds, whose norms stay modest even when the chart offset is
    // astronomical. The scaling acts on the magnitude only; a negative s
    // must never come out larger than it went in.
    const Scalar step_norm = std::abs(s) * dv_norm;
    if (step_norm > cfg.r_norm_max) s *= cfg.r_norm_max / step_norm;
    if (!std::isfinite(s)) {
      status = SolveStatus::numerical_failure;
      break;
    }

    const TangentVector<Scalar> v_next = v + s * dv;
    auto next = detail::try_flow_endpoint(v_next);
    if (!next) {
      status = SolveStatus::numerical_failure;
      break;
    }
    v = v_next;
    endpoint = std::move(next);
    report.trace.push_back({iter + 1, dkl, r_norm, s});
  }

  const TangentVector<Scalar>& v_final = keep_current ? v : best_v;
  report.velocity_origin = v_final;
  report.velocity = denormalize_velocity(v_final, prob);
  report.distance = fisher_rao_from_velocity(v_final);
  report.iterations = static_cast<int>(report.trace.size());
  report.status = status;
  return report;
}

template <class Scalar>
struct RefinementConfig {
  int m = 7;  // number of points N = 2^m + 1
  PathKind init_path = PathKind::moment;
  Scalar req_improvement = Scalar(0.01);
  ShootingConfig<Scalar> sub;  // settings for the per-segment sub-problems
  int max_sweeps = 100;

  // Sub-problems get a tolerance ten times stricter than the overall target
  // and a short leash on iterations: a warm-started segment shoot that has
  // not converged after 60 corrections is plateaued, and its best iterate is
  // all the sweep needs.
  RefinementConfig() {
    sub.tol = Scalar(1e-11);
    sub.max_iters = 60;
  }
};

/// Settle a chain of N = 2^m + 1 points onto the geodesic between a and b.
///
/// Points start on init_path. Each sweep shoots short geodesics across
/// alternating point pairs (first the even-index interior centers, then the
/// odd), repositioning each center at the sub-geodesic's midpoint and
/// accumulating half-lengths. The overall answer is declared converged when
/// extrapolating the first sub-velocity across the whole chain,
/// (N-1)/2 times itself, lands on b within ten times the sub-problem
/// tolerance.
///
/// Adaptive mode culls every other point whenever a sweep improves total
/// length by less than req_improvement (relative) and N > 3, doubling the
/// retained velocities, and finishes with a single plain shoot warm-started
/// from the extrapolated velocity (its iterations are folded into the
/// count). Once the chain is down to N = 3, two consecutive stalled sweeps
/// end the sweep phase early and hand straight off to that final shoot.
/// Non-adaptive mode reports the chain as is (distance = sum of segment
/// lengths).
///
/// Trace rows log one entry per sweep, reusing the shooting row fields:
/// iteration = cumulative sub-shoot iterations, sym_kl = extrapolated
/// endpoint sym_kl, residual_norm = chain length, step = current N. The
/// recorded chain length is the polyline through the even-index points
/// (the spans the sweep's second pass just measured, which tile the chain
/// without overlap), so it is an actual length of the current chain rather
/// than a mid-sweep accumulation.
template <class Scalar>
[[nodiscard]] ShootingReport<Scalar> path_refine(
    const GaussianPoint<Scalar>& a, const GaussianPoint<Scalar>& b,
    const RefinementConfig<Scalar>& cfg, bool adaptive) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("path_refine: dimensions disagree");
  if (cfg.m < 1)
    throw std::invalid_argument("path_refine: m must be at least 1");
  const Eigen::Index d = a.dim();
  const Scalar tol = 10 * cfg.sub.tol;
  const OriginProblem<Scalar> prob = normalize_to_origin(a, b);

  ShootingReport<Scalar> report;
  if (sym_kl(a, b) <= tol) {
    report.velocity = TangentVector<Scalar>::zero(d);
    report.velocity_origin = TangentVector<Scalar>::zero(d);
    report.status = SolveStatus::converged;
    return report;
  }

  int n_pts = (1 << cfg.m) + 1;
  std::vector<GaussianPoint<Scalar>> pts;
  pts.reserve(n_pts);
  for (int i = 0; i < n_pts; ++i)
    pts.push_back(path_point(cfg.init_path, a, b,
                             Scalar(i) / Scalar(n_pts - 1)));
  // velocity stored at index i spans the two segments [i, i+2]
  std::vector<std::optional<TangentVector<Scalar>>> warm(n_pts);
  std::vector<Scalar> seg_len(n_pts, 0);

  long long cum_iters = 0;
  int n3_stall = 0;
  Scalar ltot_old = std::numeric_limits<Scalar>::infinity();
  Scalar ltot = 0;
  Scalar chain_len = 0;
  Scalar best_kl = std::numeric_limits<Scalar>::infinity();
  std::optional<TangentVector<Scalar>> best_extrap;
  std::optional<TangentVector<Scalar>> extrap;
  SolveStatus status = SolveStatus::max_iters;

  const auto run_center = [&](int c) {
    const ShootingReport<Scalar> sub =
        shoot(pts[c - 1], pts[c + 1], warm[c - 1], cfg.sub);
    cum_iters += sub.iterations;
    warm[c - 1] = sub.velocity;
    seg_len[c - 1] = Scalar(0.5) * sub.distance;
    if (sub.status == SolveStatus::diverged) return;  // runaway velocity;
    // repositioning on it would poison the chain with an extreme point
    try {
      pts[c] = point_along(pts[c - 1], sub.velocity, Scalar(0.5));
    } catch (const Error&) {
      // midpoint fell outside the representable range; keep the old point
    }
  };

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    for (int c = 2; c <= n_pts - 3; c += 2) run_center(c);
    for (int c = 1; c <= n_pts - 2; c += 2) run_center(c);

    // Stall clock: overlapping-span accumulation, cheap but part-stale
    // because each span was measured against neighbors that the other pass
    // has since moved. The final segment is the second half of the last
    // sub-geodesic, whose first half is the last stored length.
    ltot = 0;
    for (int j = 0; j <= n_pts - 3; ++j) ltot += seg_len[j];
    ltot += seg_len[n_pts - 3];
    // Recorded chain length: the odd-center spans [0,2], [2,4], ... tile the
    // chain exactly and were measured by the pass that just finished, after
    // the even points stopped moving this sweep.
    chain_len = 0;
    for (int j = 0; j <= n_pts - 3; j += 2) chain_len += seg_len[j];
    chain_len *= 2;

    extrap = Scalar(0.5) * Scalar(n_pts - 1) * (*warm[0]);
    Scalar dkl = std::numeric_limits<Scalar>::infinity();
    try {
      const GaussianPoint<Scalar> reach = point_along(a, *extrap, Scalar(1));
      dkl = sym_kl(reach, b);
    } catch (const Error&) {
      // extrapolation overflowed; the chain is nowhere near a geodesic yet
    }
    if (dkl < best_kl) {
      best_kl = dkl;
      best_extrap = extrap;
    }
    report.trace.push_back({static_cast<int>(cum_iters), dkl, chain_len,
                            Scalar(n_pts)});
    if (dkl <= tol) {
      status = SolveStatus::converged;
      break;
    }

    const bool stalled = ltot / ltot_old > 1 - cfg.req_improvement;
    if (adaptive && stalled && n_pts == 3 && ++n3_stall >= 2)
      break;  // nothing left to cull and sweeps stopped paying; the final
              // warm-started shoot is the only move remaining
    if (adaptive && stalled && n_pts > 3) {
      const int n_new = (n_pts - 1) / 2 + 1;
      for (int i = 0; i < n_new; ++i) {
        pts[i] = pts[2 * i];
        warm[i] = warm[2 * i] ? std::optional<TangentVector<Scalar>>(
                                    Scalar(2) * (*warm[2 * i]))
                              : std::nullopt;
      }
      pts.erase(pts.begin() + n_new, pts.end());
      warm.resize(n_new);
      seg_len.assign(n_new, 0);
      n_pts = n_new;
    }
    ltot_old = ltot;
  }

  const std::optional<TangentVector<Scalar>>& vel =
      status == SolveStatus::converged ? extrap : best_extrap;
  if (adaptive) {
    ShootingConfig<Scalar> fin = cfg.sub;
    fin.tol = tol;
    ShootingReport<Scalar> final_report = shoot(a, b, vel, fin);
    final_report.iterations += static_cast<int>(cum_iters);
    final_report.trace = std::move(report.trace);
    return final_report;
  }

  report.velocity = vel ? *vel : TangentVector<Scalar>::zero(d);
  report.velocity_origin = normalize_velocity(report.velocity, prob);
  report.distance = chain_len;
  report.iterations = static_cast<int>(cum_iters);
  report.status = status;
  return report;
}

}  // namespace mvngeo
