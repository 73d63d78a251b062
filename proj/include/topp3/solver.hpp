#pragma once

#include <string>
#include <vector>

#include "topp3/extension.hpp"
#include "topp3/path.hpp"

namespace topp3 {

struct SolverOptions {
  IntegrationLimits limits;        // dt lives here (default 1 ms)
  int segments = 3;                // multiple-shooting grid size N
  NewtonOptions newton;
  double sd_cap = 100.0;           // LP velocity cap for singular curves
  int max_extensions = 32;         // per direction
  std::optional<double> scan_step; // singularity scan step (default s_end/2000)
};

struct Topp3Problem {
  std::shared_ptr<const PathSpec> path;
  ConstraintSet cs;
  BoundaryCondition bc;
  SolverOptions opts;
};

enum class SolveStatus { Ok, InfeasibleBoundary, NoConnection, ExtensionFailed };

const char* to_string(SolveStatus s);

struct SolutionPiece {
  Profile profile;
  PolicyTag tag = PolicyTag::MaxJerk;
  bool singular_band = false;
  double t_begin = 0, t_end = 0;  // on the global time axis
};

struct Topp3Solution {
  SolveStatus status = SolveStatus::NoConnection;
  std::string message;
  std::vector<SolutionPiece> pieces;        // ordered by s and by time
  std::vector<double> switch_positions;     // junction s-values
  double duration = 0;
  int bridge_iterations = 0;
  int bridge_restarts = 0;
  int extensions_forward = 0;
  int extensions_backward = 0;
  double failed_s_star = 0;                 // set on ExtensionFailed
  NewtonTrace bridge_trace;

  bool ok() const { return status == SolveStatus::Ok; }
  std::vector<std::string> structure_tags() const;
};

// Algorithm-1 orchestration: forward/backward max-jerk integration with
// extension loops, then the final min-jerk bridge.
Topp3Solution solve(const Topp3Problem& problem);

struct TrajectorySample {
  double t = 0;
  double s = 0, sd = 0, sdd = 0, sddd = 0;
  Vector q, qd, qdd, qddd;
};

// Samples the solution on a uniform time axis and maps through the kinematic
// chain rule.
std::vector<TrajectorySample> to_trajectory(const Topp3Solution& solution,
                                            const PathSpec& path,
                                            double sample_dt);

struct RowViolation {
  int row = -1;
  double value = 0;      // worst raw row value
  double relative = 0;   // value / row scale
  int sample = -1;
};

struct ValidationReport {
  double worst_relative = 0;
  RowViolation worst;
  std::vector<double> per_row_max_relative;
  int n_samples = 0;

  bool pass(double tol_rel = 1e-3) const { return worst_relative <= tol_rel; }
};

// Evaluates every constraint row at every sample's stored (s, sd, sdd, sddd).
ValidationReport validate(const std::vector<TrajectorySample>& samples,
                          const ConstraintSet& cs);

}  // namespace topp3
