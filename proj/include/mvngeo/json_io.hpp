#pragma once

#include <string>

#include "json.hpp"

#include "mvngeo/shooting.hpp"

namespace mvngeo {

/// JSON layer for the CLI and fixtures. Parse errors are
/// std::invalid_argument with messages naming the offending field; geometric
/// validity errors (non-PD sigma) surface as the usual Error subclasses.
/// Points serialize as {"mu": [...], "sigma": [[...], ...]} with sigma
/// written in full. Unknown keys are ignored on read so annotated points
/// (for example sample rows carrying "t") round-trip as inputs.

namespace detail {

[[nodiscard]] inline Vec<double> vec_from_json(const nlohmann::json& j,
                                               const std::string& field) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("field \"" + field +
                                "\" must be a nonempty array of numbers");
  Vec<double> v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw std::invalid_argument("field \"" + field +
                                  "\" must contain only numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

[[nodiscard]] inline Mat<double> mat_from_json(const nlohmann::json& j,
                                               const std::string& field) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("field \"" + field +
                                "\" must be a nonempty array of row arrays");
  const std::size_t rows = j.size();
  Mat<double> m(rows, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != rows)
      throw std::invalid_argument("field \"" + field + "\" row " +
                                  std::to_string(i) +
                                  " must be an array matching the row count");
    for (std::size_t k = 0; k < rows; ++k) {
      if (!j[i][k].is_number())
        throw std::invalid_argument("field \"" + field +
                                    "\" must contain only numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          j[i][k].get<double>();
    }
  }
  return m;
}

}  // namespace detail

[[nodiscard]] inline GaussianPoint<double> point_from_json(
    const nlohmann::json& j) {
  if (!j.is_object())
    throw std::invalid_argument("point must be a JSON object");
  if (!j.contains("mu")) throw std::invalid_argument("missing field \"mu\"");
  if (!j.contains("sigma"))
    throw std::invalid_argument("missing field \"sigma\"");
  const Vec<double> mu = detail::vec_from_json(j["mu"], "mu");
  Mat<double> sigma = detail::mat_from_json(j["sigma"], "sigma");
  if (sigma.rows() != mu.size())
    throw std::invalid_argument(
        "field \"sigma\" dimension does not match \"mu\"");
  // accept roundoff-level asymmetry from external producers, then symmetrize
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("field \"sigma\" is not symmetric");
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return GaussianPoint<double>(mu, SymMatrix<double>(sigma));
}

[[nodiscard]] inline nlohmann::json vec_to_json(const Vec<double>& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

[[nodiscard]] inline nlohmann::json mat_to_json(const Mat<double>& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(row);
  }
  return j;
}

[[nodiscard]] inline nlohmann::json point_to_json(
    const GaussianPoint<double>& p) {
  return {{"mu", vec_to_json(p.mu)}, {"sigma", mat_to_json(p.sigma.m)}};
}

[[nodiscard]] inline nlohmann::json velocity_to_json(
    const TangentVector<double>& v) {
  return {{"u_mu", vec_to_json(v.u_mu)}, {"u_sigma", mat_to_json(v.u_sigma.m)}};
}

[[nodiscard]] inline nlohmann::json report_to_json(
    const ShootingReport<double>& rep) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& row : rep.trace)
    trace.push_back({{"iteration", row.iteration},
                     {"sym_kl", row.sym_kl},
                     {"residual_norm", row.residual_norm},
                     {"step", row.step}});
  return {{"velocity", velocity_to_json(rep.velocity)},
          {"distance", rep.distance},
          {"iterations", rep.iterations},
          {"status", solve_status_name(rep.status)},
          {"trace", trace}};
}

}  // namespace mvngeo
