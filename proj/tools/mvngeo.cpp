// Command-line front end: distance queries, path/geodesic sampling, and the
// seeded experiment batteries with machine-readable output.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mvngeo/mvngeo.hpp"

namespace {

using mvngeo::GaussianPoint;
using mvngeo::Mat;
using mvngeo::SymMatrix;
using mvngeo::Vec;

/// Points arrive either as inline JSON (first non-space character is '{')
/// or as a path to a JSON file.
GaussianPoint<double> load_point(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
    throw std::invalid_argument("empty point argument");
  std::string text;
  if (arg[first] == '{') {
    text = arg;
  } else {
    std::ifstream in(arg);
    if (!in)
      throw std::invalid_argument("cannot open point file: " + arg);
    text.assign(std::istreambuf_iterator<char>(in),
                std::istreambuf_iterator<char>());
  }
  try {
    return mvngeo::point_from_json(nlohmann::json::parse(text));
  } catch (const mvngeo::Error& e) {
    // a malformed input point (wrong shape, not positive definite) is a
    // usage error, not a solver failure
    throw std::invalid_argument(e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out)
      throw std::invalid_argument("cannot write output file: " +
                                  tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct DistanceArgs {
  std::string a, b;
  std::string method = "auto";
  double tol = 1e-10;
  double r_norm_max = 1.0;
  std::string format = "json";
};

int cmd_distance(const DistanceArgs& args) {
  const GaussianPoint<double> a = load_point(args.a);
  const GaussianPoint<double> b = load_point(args.b);

  double d_f = 0;
  std::string used;
  std::string status = "converged";
  int iterations = 0;

  bool solved = false;
  if (args.method == "auto" || args.method == "closed") {
    const auto prob = mvngeo::normalize_to_origin(a, b);
    const auto cls = mvngeo::classify(prob.target);
    if (cls.kind != mvngeo::SpecialKind::general) {
      const auto sol = mvngeo::solve_special(prob.target, cls);
      d_f = sol.distance;
      used = "closed";
      solved = true;
    } else if (args.method == "closed") {
      throw mvngeo::NotSpecialCase(
          "distance: pair does not admit the closed form; use method auto, "
          "shoot, or refine");
    }
  }
  if (!solved && args.method == "shoot") {
    mvngeo::ShootingConfig<double> cfg;
    cfg.tol = args.tol;
    cfg.r_norm_max = args.r_norm_max;
    const auto rep = mvngeo::shoot(a, b, std::nullopt, cfg);
    d_f = rep.distance;
    used = "shoot";
    status = mvngeo::solve_status_name(rep.status);
    iterations = rep.iterations;
    solved = true;
  }
  if (!solved) {
    mvngeo::RefinementConfig<double> rc;
    rc.sub.tol = args.tol / 10;  // overall refine tolerance lands on --tol
    const auto rep = mvngeo::path_refine(a, b, rc, true);
    d_f = rep.distance;
    used = "refine";
    status = mvngeo::solve_status_name(rep.status);
    iterations = rep.iterations;
  }

  if (args.format == "csv") {
    std::printf("d_F,method,status,iterations\n%.17g,%s,%s,%d\n", d_f,
                used.c_str(), status.c_str(), iterations);
  } else {
    const nlohmann::json out = {{"d_F", d_f},
                                {"method", used},
                                {"status", status},
                                {"iterations", iterations}};
    std::cout << out.dump() << "\n";
  }
  return status == "converged" ? 0 : 2;
}

struct SampleArgs {
  std::string a, b;
  std::string kind = "geodesic";
  int n = 11;
  double tol = 1e-10;
};

int cmd_sample(const SampleArgs& args) {
  const GaussianPoint<double> a = load_point(args.a);
  const GaussianPoint<double> b = load_point(args.b);
  if (args.n < 2)
    throw std::invalid_argument("--n must be at least 2");

  std::optional<mvngeo::PathKind> path_kind;
  if (args.kind == "annealing") path_kind = mvngeo::PathKind::annealing;
  else if (args.kind == "moment") path_kind = mvngeo::PathKind::moment;
  else if (args.kind == "wasserstein")
    path_kind = mvngeo::PathKind::wasserstein;
  else if (args.kind == "projection") path_kind = mvngeo::PathKind::projection;
  else if (args.kind == "euclidean") path_kind = mvngeo::PathKind::euclidean;
  else if (args.kind != "geodesic")
    throw std::invalid_argument("unknown path kind: " + args.kind);

  std::optional<mvngeo::TangentVector<double>> velocity;
  if (!path_kind) {
    // geodesic sampling needs the boundary-value problem solved first
    const auto prob = mvngeo::normalize_to_origin(a, b);
    const auto cls = mvngeo::classify(prob.target);
    if (cls.kind != mvngeo::SpecialKind::general) {
      velocity = mvngeo::denormalize_velocity(
          mvngeo::solve_special(prob.target, cls).velocity, prob);
    } else {
      mvngeo::RefinementConfig<double> rc;
      rc.sub.tol = args.tol / 10;
      const auto rep = mvngeo::path_refine(a, b, rc, true);
      if (rep.status != mvngeo::SolveStatus::converged) {
        std::cerr << "error: geodesic solve did not converge (status "
                  << mvngeo::solve_status_name(rep.status) << ")\n";
        return 2;
      }
      velocity = rep.velocity;
    }
  }

  // build every line before printing so failures never leave partial output
  std::vector<std::string> lines;
  lines.reserve(static_cast<std::size_t>(args.n));
  for (int i = 0; i < args.n; ++i) {
    const double t = static_cast<double>(i) / (args.n - 1);
    GaussianPoint<double> p = [&] {
      if (i == 0) return a;
      if (i == args.n - 1 && path_kind) return b;
      return path_kind ? mvngeo::path_point(*path_kind, a, b, t)
                       : mvngeo::point_along(a, *velocity, t);
    }();
    nlohmann::json row = mvngeo::point_to_json(p);
    row["t"] = t;
    lines.push_back(row.dump());
  }
  for (const std::string& line : lines) std::cout << line << "\n";
  return 0;
}

struct BenchArgs {
  std::string experiment;
  int problems = 500;
  int dim = 2;
  std::uint64_t seed = 42;
  bool full = false;
  int segments = 1000;
  std::string out = ".";
  std::string a, b;  // refinement pair override
};

void print_bench_table(const mvngeo::ExperimentResult& res) {
  const nlohmann::json& s = res.summary;
  if (res.name == "paths") {
    std::printf("%-12s %10s %10s %10s\n", "method", "q1", "median", "q3");
    for (const auto& [name, q] : s.at("ratio_to_geodesic").items()) {
      if (q.at("count").get<int>() == 0) {
        std::printf("%-12s %10s %10s %10s\n", name.c_str(), "-", "-", "-");
        continue;
      }
      std::printf("%-12s %10.4f %10.4f %10.4f\n", name.c_str(),
                  q.at("q1").get<double>(), q.at("median").get<double>(),
                  q.at("q3").get<double>());
    }
  } else if (res.name == "residuals") {
    std::printf("%-18s %12s %10s %12s\n", "arm", "bin", "median", "converged");
    for (const auto& bin : s.at("bins")) {
      char label[32];
      std::snprintf(label, sizeof label, "[%g, %g)",
                    bin.at("lo").get<double>(), bin.at("hi").get<double>());
      for (const auto& [name, q] : bin.at("arms").items()) {
        if (q.at("count").get<int>() == 0)
          std::printf("%-18s %12s %10s %7zu/%zu\n", name.c_str(), label, "-",
                      q.at("converged").get<std::size_t>(),
                      q.at("total").get<std::size_t>());
        else
          std::printf("%-18s %12s %10.1f %7zu/%zu\n", name.c_str(), label,
                      q.at("median").get<double>(),
                      q.at("converged").get<std::size_t>(),
                      q.at("total").get<std::size_t>());
      }
    }
  } else {
    std::printf("%-20s %-12s %10s %12s %14s\n", "arm", "status", "iters",
                "distance", "final_sym_kl");
    for (const auto& [name, info] : s.at("arms").items())
      std::printf("%-20s %-12s %10d %12.6f %14.3e\n", name.c_str(),
                  info.at("status").get<std::string>().c_str(),
                  info.at("iterations").get<int>(),
                  info.at("distance").get<double>(),
                  info.at("final_sym_kl").is_number()
                      ? info.at("final_sym_kl").get<double>()
                      : std::numeric_limits<double>::infinity());
  }
}

int cmd_bench(const BenchArgs& args) {
  mvngeo::ProblemSpec spec;
  spec.seed = args.seed;
  const int n = args.full ? 5000 : args.problems;

  mvngeo::ExperimentResult res;
  if (args.experiment == "paths") {
    res = mvngeo::run_path_comparison(n, args.dim, spec, args.segments);
  } else if (args.experiment == "residuals") {
    res = mvngeo::run_residual_comparison(n, args.dim, spec);
  } else if (args.experiment == "refinement") {
    const GaussianPoint<double> a =
        args.a.empty() ? GaussianPoint<double>(
                             (Vec<double>(2) << 1, 2).finished(),
                             SymMatrix<double>((Mat<double>(2, 2) << 1, 0.1,
                                                0.1, 10)
                                                   .finished()))
                       : load_point(args.a);
    const GaussianPoint<double> b =
        args.b.empty() ? GaussianPoint<double>(
                             (Vec<double>(2) << 70, 35).finished(),
                             SymMatrix<double>((Mat<double>(2, 2) << 10, -0.8,
                                                -0.8, 1)
                                                   .finished()))
                       : load_point(args.b);
    res = mvngeo::run_refinement_experiment(a, b,
                                            mvngeo::RefinementConfig<double>());
  } else {
    throw std::invalid_argument("unknown experiment: " + args.experiment);
  }

  const std::filesystem::path dir(args.out);
  write_file_atomic(dir / (res.name + ".csv"), mvngeo::render_csv(res));
  write_file_atomic(dir / (res.name + "_summary.json"),
                    mvngeo::render_summary_json(res));
  print_bench_table(res);

  std::size_t bad = 0;
  for (const auto& row : res.rows)
    if (row.status == "ref_failed" || row.status == "numerical_failure")
      ++bad;
  const bool ok = res.rows.empty() ||
                  static_cast<double>(bad) <=
                      0.05 * static_cast<double>(res.rows.size());
  std::printf("rows: %zu (%zu flagged) -> %s, %s\n", res.rows.size(), bad,
              (dir / (res.name + ".csv")).c_str(),
              (dir / (res.name + "_summary.json")).c_str());
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Fisher geometry of multivariate normal distributions: geodesic "
      "distances, path sampling, and seeded experiment batteries"};
  app.require_subcommand(1);

  DistanceArgs dist;
  CLI::App* cd = app.add_subcommand(
      "distance", "Fisher-Rao distance between two Gaussians");
  cd->add_option("--a", dist.a, "first point (inline JSON or file)")
      ->required();
  cd->add_option("--b", dist.b, "second point (inline JSON or file)")
      ->required();
  cd->add_option("--method", dist.method,
                 "auto | closed | shoot | refine (default auto)")
      ->check(CLI::IsMember({"auto", "closed", "shoot", "refine"}));
  cd->add_option("--tol", dist.tol, "convergence tolerance on sym KL");
  cd->add_option("--r-norm-max", dist.r_norm_max,
                 "shooting update cap (method shoot)");
  cd->add_option("--format", dist.format, "json | csv (default json)")
      ->check(CLI::IsMember({"json", "csv"}));

  SampleArgs samp;
  CLI::App* cs = app.add_subcommand(
      "sample", "emit points along a path as JSON lines");
  cs->add_option("--a", samp.a, "first point (inline JSON or file)")
      ->required();
  cs->add_option("--b", samp.b, "second point (inline JSON or file)")
      ->required();
  cs->add_option("--kind", samp.kind,
                 "geodesic | annealing | moment | wasserstein | projection | "
                 "euclidean (default geodesic)");
  cs->add_option("--n", samp.n, "number of samples, endpoints included");
  cs->add_option("--tol", samp.tol, "geodesic solve tolerance");

  BenchArgs bench;
  CLI::App* cb = app.add_subcommand(
      "bench", "run a seeded experiment battery, writing CSV + JSON summary");
  cb->add_option("experiment", bench.experiment,
                 "paths | residuals | refinement")
      ->required()
      ->check(CLI::IsMember({"paths", "residuals", "refinement"}));
  cb->add_option("--problems", bench.problems,
                 "battery size (default 500)");
  cb->add_option("--dim", bench.dim, "problem dimension (default 2)");
  cb->add_option("--seed", bench.seed, "battery seed (default 42)")
      ->envname("MVNGEO_SEED");
  cb->add_flag("--full", bench.full, "full 5000-problem scale");
  cb->add_option("--segments", bench.segments,
                 "quadrature segments for path lengths (paths experiment)");
  cb->add_option("--out", bench.out, "output directory (default .)");
  cb->add_option("--a", bench.a, "refinement pair start (JSON or file)");
  cb->add_option("--b", bench.b, "refinement pair end (JSON or file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cd->parsed()) return cmd_distance(dist);
    if (cs->parsed()) return cmd_sample(samp);
    return cmd_bench(bench);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "error: invalid JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const mvngeo::NotSpecialCase& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const mvngeo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
