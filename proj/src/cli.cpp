#include "topp3/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "topp3/error.hpp"
#include "topp3/log.hpp"
#include "topp3/oracle.hpp"
#include "topp3/scenario.hpp"

namespace topp3 {
namespace cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitSolverFailure = 2;
constexpr int kExitSchemaError = 3;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  std::optional<double> dt;
  std::optional<int> segments;
  std::optional<std::uint64_t> seed;
  double jerk_scale = 1.0;
  bool trace = false;
};

Scenario load_with_overrides(const CommonArgs& args) {
  Scenario sc = load_scenario_file(args.scenario_path);
  if (args.dt) sc.dt = *args.dt;
  if (args.segments) sc.segments = *args.segments;
  if (args.seed) sc.seed = *args.seed;
  return sc;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) raise(ErrorCode::Precondition, "cannot write " + p.string());
  out << content;
}

int cmd_solve(const CommonArgs& args) {
  const Scenario sc = load_with_overrides(args);
  Topp3Problem problem = sc.problem(args.jerk_scale);
  problem.opts.newton.collect_trace = args.trace;
  const Topp3Solution sol = solve(problem);

  fs::create_directories(args.out_dir);
  std::vector<std::string> refs;
  if (sol.ok()) {
    const auto samples = to_trajectory(sol, *sc.path, sc.dt);
    std::ostringstream traj;
    write_trajectory_csv(traj, samples);
    write_file(fs::path(args.out_dir) / "trajectory.csv", traj.str());
    refs.push_back("trajectory.csv");
    for (size_t i = 0; i < sol.pieces.size(); ++i) {
      std::ostringstream name;
      name << "piece_" << i << '_' << to_string(sol.pieces[i].tag) << ".csv";
      std::ostringstream body;
      sol.pieces[i].profile.dump_csv(body);
      write_file(fs::path(args.out_dir) / name.str(), body.str());
      refs.push_back(name.str());
    }
    const auto report = validate(samples, problem.cs);
    std::cout << "duration " << fmt_g12(sol.duration) << " s; worst violation "
              << fmt_g12(report.worst_relative) << " (row scale)\n";
  } else {
    std::cerr << "solve failed: " << to_string(sol.status) << " - "
              << sol.message << '\n';
  }
  if (args.trace)
    write_file(fs::path(args.out_dir) / "bridge_trace.json",
               trace_to_json(sol.bridge_trace));
  write_file(fs::path(args.out_dir) / "solution.json",
             solution_to_json(sol, refs));
  return sol.ok() ? kExitOk : kExitSolverFailure;
}

int cmd_profiles(const CommonArgs& args) {
  const Scenario sc = load_with_overrides(args);
  const Topp3Problem problem = sc.problem(args.jerk_scale);
  const PathState b0 = boundary_state(*sc.path, sc.bc, Endpoint::Start);
  const PathState b1 = boundary_state(*sc.path, sc.bc, Endpoint::End);
  const IntegrationLimits& limits = problem.opts.limits;

  const Profile fwd = integrate(problem.cs, State{b0.s, b0.sd, b0.sdd},
                                Direction::Forward, JerkPolicy::max_jerk(),
                                std::nullopt, limits);
  const Profile bwd = integrate(problem.cs, State{b1.s, b1.sd, b1.sdd},
                                Direction::Backward, JerkPolicy::max_jerk(),
                                std::nullopt, limits);
  fs::create_directories(args.out_dir);
  std::ostringstream f, b;
  fwd.dump_csv(f);
  bwd.dump_csv(b);
  write_file(fs::path(args.out_dir) / "profile_forward.csv", f.str());
  write_file(fs::path(args.out_dir) / "profile_backward.csv", b.str());
  std::cout << "forward: [" << fmt_g12(fwd.s_min()) << ", " << fmt_g12(fwd.s_max())
            << "] " << to_string(fwd.termination()) << "; backward: ["
            << fmt_g12(bwd.s_min()) << ", " << fmt_g12(bwd.s_max()) << "] "
            << to_string(bwd.termination()) << '\n';
  return kExitOk;
}

int cmd_singular(const CommonArgs& args) {
  const Scenario sc = load_with_overrides(args);
  const Topp3Problem problem = sc.problem(args.jerk_scale);
  const auto sings =
      find_singularities(problem.cs, 0.0, sc.path->s_end(), std::nullopt);
  std::vector<SingularCurve> curves;
  for (const auto& sing : sings) {
    try {
      curves.push_back(singular_curve(problem.cs, sing, problem.opts.sd_cap));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySingularCurve) throw;
    }
  }
  fs::create_directories(args.out_dir);
  std::ostringstream body;
  write_singular_csv(body, curves);
  write_file(fs::path(args.out_dir) / "singularities.csv", body.str());
  std::cout << curves.size() << " singular curve(s) found\n";
  return kExitOk;
}

int cmd_check(const std::string& trajectory_path, const CommonArgs& args) {
  const Scenario sc = load_with_overrides(args);
  const Topp3Problem problem = sc.problem(args.jerk_scale);
  std::ifstream in(trajectory_path);
  if (!in) raise(ErrorCode::SchemaError, "cannot open " + trajectory_path);
  const auto samples = read_trajectory_csv(in);
  const auto report = validate(samples, problem.cs);
  std::cout << "worst violation " << fmt_g12(report.worst_relative)
            << " (relative to row scale) at sample " << report.worst.sample
            << ", row " << report.worst.row << ", " << report.n_samples
            << " samples\n";
  return report.pass() ? kExitOk : kExitSolverFailure;
}

int cmd_oracle_compare(const CommonArgs& args) {
  const Scenario sc = load_with_overrides(args);
  Topp3Problem problem = sc.problem(args.jerk_scale);
  const Topp3Solution sol = solve(problem);
  if (!sol.ok()) {
    std::cerr << "solve failed: " << to_string(sol.status) << '\n';
    return kExitSolverFailure;
  }

  const PathState b0 = boundary_state(*sc.path, sc.bc, Endpoint::Start);
  const PathState b1 = boundary_state(*sc.path, sc.bc, Endpoint::End);
  const IntegrationLimits& limits = problem.opts.limits;
  const ProfileChain fwd(integrate(problem.cs, State{b0.s, b0.sd, b0.sdd},
                                   Direction::Forward, JerkPolicy::max_jerk(),
                                   std::nullopt, limits),
                         PolicyTag::MaxJerk);
  const ProfileChain bwd(integrate(problem.cs, State{b1.s, b1.sd, b1.sdd},
                                   Direction::Backward, JerkPolicy::max_jerk(),
                                   std::nullopt, limits),
                         PolicyTag::MaxJerk);
  const auto conn = oracle::single_shooting_bridge(
      problem.cs, fwd, bwd, (fwd.s_max() - fwd.s_min()) / 2000.0,
      10.0 * problem.opts.newton.tol_f, limits);

  json j = json::array();
  {
    json r;
    r["method"] = "single-shooting";
    if (conn) {
      r["s_a"] = conn->s_a;
      r["s_b"] = conn->s_b;
      r["total_time"] = conn->total_time;
      r["solver_duration"] = sol.duration;
      r["delta_relative"] =
          (conn->total_time - sol.duration) / std::max(sol.duration, 1e-12);
    } else {
      r["found"] = false;
    }
    j.push_back(r);
  }
  {
    // dense surface scan at a few mid-path probes vs the closed-form reduction
    json r;
    r["method"] = "dense-surface";
    json probes = json::array();
    for (double frac : {0.25, 0.5, 0.75}) {
      const double s = frac * sc.path->s_end();
      const double sd = std::max(0.5, 0.5 * (b0.sd + b1.sd));
      json probe;
      probe["s"] = s;
      probe["sd"] = sd;
      const auto scan =
          oracle::dense_surface_scan(problem.cs, s, sd, 1e3, 1.0);
      const auto exact = problem.cs.accel_surfaces(s, sd, 1e3);
      probe["scan_empty"] = !scan.has_value();
      probe["exact_empty"] = !exact.has_value();
      if (scan && exact) {
        probe["mias_delta"] = scan->mias - exact->mias;
        probe["maas_delta"] = scan->maas - exact->maas;
      }
      probes.push_back(probe);
    }
    r["probes"] = probes;
    j.push_back(r);
  }
  {
    json r;
    r["method"] = "dense-curve";
    json entries = json::array();
    for (const auto& sing :
         find_singularities(problem.cs, 0.0, sc.path->s_end(), std::nullopt)) {
      json e;
      e["s_star"] = sing.s_star;
      e["row"] = sing.row;
      const auto scan = oracle::dense_curve_scan(problem.cs, sing,
                                                 problem.opts.sd_cap,
                                                 problem.opts.sd_cap / 2000.0);
      e["scan_empty"] = scan.empty;
      if (!scan.empty) {
        const auto curve = singular_curve(problem.cs, sing, problem.opts.sd_cap);
        e["lp_sd_min"] = curve.sd_min;
        e["lp_sd_max"] = curve.sd_max;
        e["scan_sd_min"] = scan.sd_min;
        e["scan_sd_max"] = scan.sd_max;
      }
      entries.push_back(e);
    }
    r["curves"] = entries;
    j.push_back(r);
  }

  fs::create_directories(args.out_dir);
  write_file(fs::path(args.out_dir) / "oracle_report.json", j.dump(2) + "\n");
  if (conn) {
    std::cout << "single-shooting total " << fmt_g12(conn->total_time)
              << " s vs solver " << fmt_g12(sol.duration) << " s\n";
  } else {
    std::cout << "single-shooting found no connection\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"time-optimal path parameterization under jerk bounds"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string trajectory_path;

  const auto add_common = [&common](CLI::App* cmd, bool with_out = true) {
    cmd->add_option("scenario", common.scenario_path, "scenario JSON file")
        ->required();
    if (with_out)
      cmd->add_option("-o,--out", common.out_dir, "output directory");
    cmd->add_option("--dt", common.dt, "integration time step override (s)");
    cmd->add_option("--segments", common.segments,
                    "multiple-shooting segment count override");
    cmd->add_option("--seed", common.seed, "RNG seed override");
    cmd->add_flag("--trace", common.trace, "write Newton trace JSON");
    cmd->add_option("--jerk-scale", common.jerk_scale,
                    "uniform scale factor on the jerk bounds");
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve a scenario");
  add_common(solve_cmd);
  CLI::App* profiles_cmd = app.add_subcommand(
      "profiles", "dump the forward/backward max-jerk profiles");
  add_common(profiles_cmd);
  CLI::App* singular_cmd =
      app.add_subcommand("singular", "dump singularities and singular curves");
  add_common(singular_cmd);
  CLI::App* check_cmd =
      app.add_subcommand("check", "validate a trajectory CSV against a scenario");
  check_cmd->add_option("trajectory", trajectory_path, "trajectory CSV file")
      ->required();
  add_common(check_cmd, false);
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle-compare", "compare the solver against brute-force references");
  add_common(oracle_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(common);
    if (profiles_cmd->parsed()) return cmd_profiles(common);
    if (singular_cmd->parsed()) return cmd_singular(common);
    if (check_cmd->parsed()) return cmd_check(trajectory_path, common);
    if (oracle_cmd->parsed()) return cmd_oracle_compare(common);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::SchemaError ? kExitSchemaError
                                              : kExitSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolverFailure;
  }
  return kExitOk;
}

}  // namespace cli
}  // namespace topp3
