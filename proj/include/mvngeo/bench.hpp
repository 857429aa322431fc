#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mvngeo/shooting.hpp"

namespace mvngeo {

/// Generator settings for one family of random problems. Problem id i uses
/// the stream (seed, i), so any subset of ids can be regenerated
/// independently and results never depend on execution order.
struct ProblemSpec {
  int dim = 2;
  double mu_range = 10;
  double log_eig_range = 10;
  std::uint64_t seed = 0;
};

/// Random Gaussian: mean components uniform in [-mu_range, mu_range],
/// covariance eigenvalues log-uniform in [-log_eig_range, log_eig_range],
/// eigenvectors from a Gram-Schmidt random orthonormal matrix.
/// Draw order is fixed (mean, eigenvalues, basis) for reproducibility.
inline GaussianPoint<double> random_point(const ProblemSpec& spec, Rng& rng) {
  if (spec.dim < 1)
    throw std::invalid_argument("random_point: dim must be positive");
  if (spec.mu_range < 0 || spec.log_eig_range < 0)
    throw std::invalid_argument("random_point: ranges must be nonnegative");
  const Eigen::Index d = spec.dim;
  Vec<double> mu(d);
  for (Eigen::Index i = 0; i < d; ++i)
    mu(i) = rng.uniform(-spec.mu_range, spec.mu_range);
  Vec<double> evals(d);
  for (Eigen::Index i = 0; i < d; ++i)
    evals(i) = std::exp(rng.uniform(-spec.log_eig_range, spec.log_eig_range));
  const Mat<double> q = random_orthogonal(d, rng);
  return GaussianPoint<double>(
      mu, SymMatrix<double>::symmetrized(q * evals.asDiagonal() *
                                         q.transpose()));
}

struct ResultRow {
  long long id;
  int d;
  std::uint64_t seed;
  double d_F;
  std::string method;
  double value;
  std::string status;
};

struct ExperimentResult {
  std::string name;
  std::vector<ResultRow> rows;
  nlohmann::json summary;
};

namespace detail {

[[nodiscard]] inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Quartiles {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

[[nodiscard]] inline Quartiles quartiles(std::vector<double> xs) {
  Quartiles q;
  q.count = xs.size();
  if (xs.empty()) return q;
  std::sort(xs.begin(), xs.end());
  const auto at = [&](double p) {
    const double pos = p * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
  };
  q.min = xs.front();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  q.max = xs.back();
  return q;
}

[[nodiscard]] inline nlohmann::json quartiles_json(const Quartiles& q) {
  if (q.count == 0) return {{"count", 0}};
  return {{"count", q.count}, {"min", q.min},    {"q1", q.q1},
          {"median", q.median}, {"q3", q.q3},    {"max", q.max}};
}

/// Re-check a claimed geodesic: the velocity must actually reach b and its
/// origin-frame length must match the reported distance.
[[nodiscard]] inline bool validate_reference(const GaussianPoint<double>& a,
                                             const GaussianPoint<double>& b,
                                             const ShootingReport<double>& rep,
                                             double tol) {
  if (std::abs(fisher_rao_from_velocity(rep.velocity_origin) - rep.distance) >
      1e-8)
    return false;
  try {
    return sym_kl(point_along(a, rep.velocity, 1.0), b) <= tol;
  } catch (const Error&) {
    return false;
  }
}

/// Validated reference geodesic distance for the batteries, via adaptive
/// refinement with escalation on two axes. Shooting updates can pin in a
/// way that depends on which endpoint is normalized to the origin, and the
/// distance is symmetric, so every stage is tried from a toward b and
/// reversed. Cheap stages first: N = 3 chains both ways (little more than a
/// polished direct shoot, settling most problems in milliseconds), then per
/// direction a chain sized from a rough quadrature of the moment path.
/// A direction whose best iterate lands within the fixed-step transport
/// bias of the default resolution (endpoint sym_kl near 1e-4) earns one
/// warm restart at eightfold resolution, which closes the last stretch when
/// transport bias was the only blocker. Every candidate is re-validated by
/// flowing its velocity to the far endpoint before its distance is
/// believed.
[[nodiscard]] inline std::optional<double> reference_distance(
    const GaussianPoint<double>& a, const GaussianPoint<double>& b) {
  const double rough = path_length(PathKind::moment, a, b, 200);
  const int mid = std::clamp(
      static_cast<int>(std::ceil(std::log2(std::max(rough, 0.4) / 0.2))), 2,
      6);

  struct Direction {
    const GaussianPoint<double>* from;
    const GaussianPoint<double>* to;
    std::optional<TangentVector<double>> best;
    double best_kl = std::numeric_limits<double>::infinity();
  };
  Direction dirs[2] = {{&a, &b}, {&b, &a}};

  const auto rung = [](Direction& dir, int m) -> std::optional<double> {
    RefinementConfig<double> rc;
    rc.m = m;
    rc.sub.stall_iters = 50;
    if (m == 1) {
      // the single segment is the whole problem: give it the budget of a
      // plain shoot, and one sweep decides whether this rung can work
      rc.sub.max_iters = 200;
      rc.max_sweeps = 1;
    }
    try {
      const ShootingReport<double> rep =
          path_refine(*dir.from, *dir.to, rc, true);
      if (rep.status == SolveStatus::converged &&
          validate_reference(*dir.from, *dir.to, rep, 10 * rc.sub.tol))
        return rep.distance;
      double kl = std::numeric_limits<double>::infinity();
      try {
        kl = sym_kl(point_along(*dir.from, rep.velocity, 1.0), *dir.to);
      } catch (const Error&) {
      }
      if (kl < dir.best_kl) {
        dir.best_kl = kl;
        dir.best = rep.velocity;
      }
    } catch (const Error&) {
      // an intermediate chain point left the representable range; deeper
      // chains keep segments shorter and may survive
    }
    return std::nullopt;
  };

  for (Direction& dir : dirs)
    if (const auto d_f = rung(dir, 1)) return d_f;
  for (Direction& dir : dirs) {
    if (const auto d_f = rung(dir, mid)) return d_f;
    if (!dir.best || dir.best_kl > 1e-4) continue;
    ShootingConfig<double> fine;
    fine.steps_per_length = 2000;
    fine.max_iters = 250;
    fine.stall_iters = 50;
    try {
      const ShootingReport<double> rep = shoot(*dir.from, *dir.to, *dir.best,
                                               fine);
      if (rep.status == SolveStatus::converged &&
          validate_reference(*dir.from, *dir.to, rep, fine.tol))
        return rep.distance;
    } catch (const Error&) {
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Lengths of the four practical interpolation families relative to the
/// geodesic distance, problem by problem. The reference d_F comes from
/// adaptive refinement and is re-validated before use; rows whose reference
/// failed carry status "ref_failed" and a NaN d_F.
inline ExperimentResult run_path_comparison(int n, int d,
                                            const ProblemSpec& base,
                                            int segments = 1000) {
  ProblemSpec spec = base;
  spec.dim = d;
  ExperimentResult result;
  result.name = "paths";
  constexpr PathKind kinds[] = {PathKind::annealing, PathKind::moment,
                                PathKind::wasserstein, PathKind::projection};
  const GaussianPoint<double> a = GaussianPoint<double>::origin(d);
  for (int id = 0; id < n; ++id) {
    Rng rng(spec.seed, static_cast<std::uint64_t>(id));
    const GaussianPoint<double> b = random_point(spec, rng);
    double d_f = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
    const bool trivial = sym_kl(a, b) <= 1e-10;
    if (trivial) {
      d_f = 0;
    } else {
      const auto ref = detail::reference_distance(a, b);
      if (ref) {
        d_f = *ref;
      } else {
        status = "ref_failed";
      }
    }
    for (const PathKind kind : kinds) {
      double value = std::numeric_limits<double>::quiet_NaN();
      std::string row_status = status;
      if (trivial) {
        value = 1;  // coincident endpoints: ratio defined as 1
      } else if (d_f > 1e-9) {
        try {
          value = path_length(kind, a, b, segments) / d_f;
        } catch (const Error&) {
          row_status = "numerical_failure";
        }
      }
      result.rows.push_back({id, d, spec.seed, d_f, path_kind_name(kind),
                             value, row_status});
    }
  }

  nlohmann::json methods;
  for (const PathKind kind : kinds) {
    std::vector<double> ratios;
    for (const ResultRow& row : result.rows)
      if (row.method == path_kind_name(kind) && row.status == "ok" &&
          std::isfinite(row.value))
        ratios.push_back(row.value);
    methods[path_kind_name(kind)] =
        detail::quartiles_json(detail::quartiles(std::move(ratios)));
  }
  result.summary = {{"experiment", "paths"},
                    {"problems", n},
                    {"dim", d},
                    {"seed", spec.seed},
                    {"segments", segments},
                    {"ratio_to_geodesic", methods}};
  return result;
}

namespace detail {

struct ResidualArm {
  const char* name;
  ResidualKind residual;
  InitKind init;
};

/// The eight arms of the residual/initialization comparison. init_zero is
/// the same configuration as residual_projection; it is listed separately so
/// both views of the data appear in the output, but is solved only once.
inline constexpr ResidualArm residual_arms[] = {
    {"residual_euclid", ResidualKind::euclid, InitKind::zero},
    {"residual_taylor", ResidualKind::taylor, InitKind::zero},
    {"residual_eigen", ResidualKind::eigen, InitKind::zero},
    {"residual_projection", ResidualKind::projection, InitKind::zero},
    {"init_zero", ResidualKind::projection, InitKind::zero},
    {"init_taylor", ResidualKind::projection, InitKind::taylor},
    {"init_eigen", ResidualKind::projection, InitKind::eigen},
    {"init_projection", ResidualKind::projection, InitKind::projection},
};

}  // namespace detail

/// Shooting iteration counts per residual kind and per initialization kind,
/// binned by geodesic distance. Non-converged runs keep their status in the
/// rows and are excluded from medians but counted per bin. `max_bins` > 0
/// caps the number of bins by merging the tail into one overflow bin.
inline ExperimentResult run_residual_comparison(int n, int d,
                                                const ProblemSpec& base,
                                                int max_bins = 0) {
  ProblemSpec spec = base;
  spec.dim = d;
  ExperimentResult result;
  result.name = "residuals";
  const GaussianPoint<double> a = GaussianPoint<double>::origin(d);
  ShootingConfig<double> cfg;
  // the cap and stall window bound the worst-case runtime; they are set high
  // enough that runs cut off by them are genuinely plateaued, since censoring
  // slow-but-converging runs would bias the per-bin medians below
  cfg.max_iters = 800;
  cfg.stall_iters = 150;

  for (int id = 0; id < n; ++id) {
    Rng rng(spec.seed, static_cast<std::uint64_t>(id));
    const GaussianPoint<double> b = random_point(spec, rng);

    std::vector<ShootingReport<double>> reports;
    reports.reserve(std::size(detail::residual_arms));
    for (const auto& arm : detail::residual_arms) {
      if (std::string(arm.name) == "init_zero") {
        reports.push_back(reports[3]);  // same run as residual_projection
        continue;
      }
      ShootingConfig<double> arm_cfg = cfg;
      arm_cfg.residual_kind = arm.residual;
      arm_cfg.init_kind = arm.init;
      try {
        reports.push_back(shoot(a, b, std::nullopt, arm_cfg));
      } catch (const Error&) {
        ShootingReport<double> failed;  // status defaults to the failure case
        failed.velocity = TangentVector<double>::zero(d);
        failed.velocity_origin = TangentVector<double>::zero(d);
        reports.push_back(std::move(failed));
      }
    }

    // reference distance for binning: the first converged arm, re-validated.
    // When no arm converges the problem's d_F stays NaN: its rows are all
    // non-converged, so they sit outside every bin and are only counted.
    double d_f = std::numeric_limits<double>::quiet_NaN();
    for (const auto& rep : reports) {
      if (rep.status == SolveStatus::converged &&
          detail::validate_reference(a, b, rep, 1e-9)) {
        d_f = rep.distance;
        break;
      }
    }

    for (std::size_t k = 0; k < std::size(detail::residual_arms); ++k) {
      result.rows.push_back({id, d, spec.seed, d_f,
                             detail::residual_arms[k].name,
                             static_cast<double>(reports[k].iterations),
                             solve_status_name(reports[k].status)});
    }
  }

  // integer-edge bins over the validated distances; sparse bins merge right
  double max_df = 0;
  for (const ResultRow& row : result.rows)
    if (std::isfinite(row.d_F)) max_df = std::max(max_df, row.d_F);
  const int top_edge = static_cast<int>(std::floor(max_df)) + 1;
  struct Bin {
    double lo, hi;
    std::vector<int> ids;
  };
  std::vector<Bin> bins;
  {
    std::vector<std::vector<int>> raw(top_edge);
    for (const ResultRow& row : result.rows) {
      if (row.method != detail::residual_arms[0].name) continue;  // 1/problem
      if (!std::isfinite(row.d_F)) continue;
      const int k = std::min(top_edge - 1,
                             static_cast<int>(std::floor(row.d_F)));
      raw[k].push_back(static_cast<int>(row.id));
    }
    Bin pending{0, 0, {}};
    bool open = false;
    for (int k = 0; k < top_edge; ++k) {
      if (!open) {
        pending = {static_cast<double>(k), 0, {}};
        open = true;
      }
      pending.hi = static_cast<double>(k + 1);
      pending.ids.insert(pending.ids.end(), raw[k].begin(), raw[k].end());
      if (pending.ids.size() >= 10) {
        bins.push_back(std::move(pending));
        open = false;
      }
    }
    if (open && !pending.ids.empty()) {
      if (!bins.empty()) {
        bins.back().hi = pending.hi;
        bins.back().ids.insert(bins.back().ids.end(), pending.ids.begin(),
                               pending.ids.end());
      } else {
        bins.push_back(std::move(pending));
      }
    }
    if (max_bins > 0 && static_cast<int>(bins.size()) > max_bins) {
      for (std::size_t k = max_bins; k < bins.size(); ++k) {
        bins[max_bins - 1].hi = bins[k].hi;
        bins[max_bins - 1].ids.insert(bins[max_bins - 1].ids.end(),
                                      bins[k].ids.begin(), bins[k].ids.end());
      }
      bins.resize(max_bins);
    }
  }

  // per-(bin, arm) medians over converged runs
  nlohmann::json bins_json = nlohmann::json::array();
  for (const Bin& bin : bins) {
    nlohmann::json arms;
    for (const auto& arm : detail::residual_arms) {
      std::vector<double> iters;
      std::size_t converged = 0;
      for (const int id : bin.ids) {
        const ResultRow& row =
            result.rows[static_cast<std::size_t>(id) *
                            std::size(detail::residual_arms) +
                        (&arm - detail::residual_arms)];
        if (row.status == "converged") {
          ++converged;
          iters.push_back(row.value);
        }
      }
      nlohmann::json entry =
          detail::quartiles_json(detail::quartiles(std::move(iters)));
      entry["converged"] = converged;
      entry["total"] = bin.ids.size();
      arms[arm.name] = std::move(entry);
    }
    bins_json.push_back({{"lo", bin.lo},
                         {"hi", bin.hi},
                         {"problems", bin.ids.size()},
                         {"arms", std::move(arms)}});
  }
  result.summary = {{"experiment", "residuals"}, {"problems", n},
                    {"dim", d},                  {"seed", spec.seed},
                    {"max_iters", cfg.max_iters}, {"bins", bins_json}};
  return result;
}

/// Convergence traces of standard vs adaptive refinement from moment vs
/// euclidean initial paths, on one problem pair. Rows reuse the columns as:
/// id = cumulative sub-shoot iterations, d_F = chain length, value =
/// extrapolated endpoint sym_kl, status = "sweep" for per-sweep rows and the
/// final solver status for each arm's closing row.
inline ExperimentResult run_refinement_experiment(
    const GaussianPoint<double>& a, const GaussianPoint<double>& b,
    const RefinementConfig<double>& base) {
  ExperimentResult result;
  result.name = "refinement";
  const int d = static_cast<int>(a.dim());
  struct Arm {
    const char* name;
    bool adaptive;
    PathKind init;
  };
  constexpr Arm arms[] = {
      {"standard_moment", false, PathKind::moment},
      {"standard_euclidean", false, PathKind::euclidean},
      {"adaptive_moment", true, PathKind::moment},
      {"adaptive_euclidean", true, PathKind::euclidean},
  };
  nlohmann::json arms_json;
  for (const Arm& arm : arms) {
    RefinementConfig<double> cfg = base;
    cfg.init_path = arm.init;
    ShootingReport<double> rep;
    try {
      rep = path_refine(a, b, cfg, arm.adaptive);
    } catch (const Error&) {
      // a chain point left the representable range; report the arm as a
      // numerical failure instead of aborting the experiment
      rep.velocity = TangentVector<double>::zero(a.dim());
      rep.velocity_origin = TangentVector<double>::zero(a.dim());
    }
    for (const auto& row : rep.trace)
      result.rows.push_back({row.iteration, d, 0, row.residual_norm, arm.name,
                             row.sym_kl, "sweep"});
    double final_kl = std::numeric_limits<double>::infinity();
    try {
      final_kl = sym_kl(point_along(a, rep.velocity, 1.0), b);
    } catch (const Error&) {
    }
    result.rows.push_back({rep.iterations, d, 0, rep.distance, arm.name,
                           final_kl, solve_status_name(rep.status)});
    arms_json[arm.name] = {{"status", solve_status_name(rep.status)},
                           {"iterations", rep.iterations},
                           {"distance", rep.distance},
                           {"final_sym_kl", final_kl},
                           {"sweeps", rep.trace.size()}};
  }
  result.summary = {{"experiment", "refinement"},
                    {"m", base.m},
                    {"sub_tol", base.sub.tol},
                    {"arms", arms_json}};
  return result;
}

/// CSV rendering with the stable column order id,d,seed,d_F,method,value,
/// status and 17-significant-digit numbers.
[[nodiscard]] inline std::string render_csv(const ExperimentResult& result) {
  std::string out = "id,d,seed,d_F,method,value,status\n";
  for (const ResultRow& row : result.rows) {
    out += std::to_string(row.id);
    out += ',';
    out += std::to_string(row.d);
    out += ',';
    out += std::to_string(row.seed);
    out += ',';
    out += detail::format_g17(row.d_F);
    out += ',';
    out += row.method;
    out += ',';
    out += detail::format_g17(row.value);
    out += ',';
    out += row.status;
    out += '\n';
  }
  return out;
}

[[nodiscard]] inline std::string render_summary_json(
    const ExperimentResult& result) {
  return result.summary.dump(2) + "\n";
}

}  // namespace mvngeo
