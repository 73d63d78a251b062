#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topp3/integrator.hpp"
#include "topp3/singularity.hpp"

namespace topp3 {

struct NewtonOptions {
  int max_iters = 50;
  double tol_f = 1e-4;            // scaled defect infinity-norm
  double fd_step = 1e-6;          // h_i = fd_step * (1 + |x_i|)
  double armijo = 1e-4;
  int max_backtracks = 12;  // alpha floor 2^-12; smaller steps count as stalls
  double levenberg_lambda0 = 1e-6;
  int restarts = 5;
  double restart_jitter = 0.10;   // fraction of anchor box width
  double penalty_stiffness = 1e3; // early-stopped segment defect per unit s
  std::uint64_t seed = 0;
  bool collect_trace = false;
  // Anchor-guess overrides (defaults: 0.7/0.3 range points, curve midpoint).
  std::optional<double> guess_s_a, guess_s_b, guess_sd_c;
};

struct NewtonIterate {
  int iteration = 0;
  double defect_norm = 0;
  double step_scale = 0;
  std::vector<double> anchors;
};

struct NewtonTrace {
  std::vector<NewtonIterate> iterates;
  int restarts = 0;
};

enum class ShootStatus { Ok, NonConvergence, NoOverlapWindow, DefectStalled,
                         EmptySingularCurve };

const char* to_string(ShootStatus s);

struct BridgeResult {
  ShootStatus status = ShootStatus::NonConvergence;
  Profile bridge;         // single min-jerk run from (s_a, r_A(s_a)) to s_b
  double s_a = 0, s_b = 0;
  double landing_residual = 0;  // scaled distance to r_B(s_b)
  int iterations = 0;
  int restarts = 0;
  NewtonTrace trace;
};

struct ExtensionShootResult {
  ShootStatus status = ShootStatus::NonConvergence;
  Profile bridge;        // min-jerk run from (s_a, r_A(s_a)) to s* on the curve
  double s_a = 0;
  double sd_c = 0;       // landing velocity on the curve
  double landing_residual = 0;
  int iterations = 0;
  int restarts = 0;
  NewtonTrace trace;
};

struct SegmentEnd {
  double sd = 0, sdd = 0;
  bool early_stop = false;
  double s_reached = 0;
};

// Min-jerk shoot from (s_i, sd_i, sdd_i) to s = s_j (either direction in s;
// backward runs the time-reversed flow). On early termination the last state
// and an early-stop flag are returned.
SegmentEnd shoot_segment(const ConstraintSet& cs, double s_i, double sd_i,
                         double sdd_i, double s_j, const JerkPolicy& policy,
                         const IntegrationLimits& limits);

// Defect of the bridge system: N forward segment rows, then the A and B
// anchor rows, scaled by (1 + max |sd|) / (1 + max |sdd|) of A.
Eigen::VectorXd defect_bridge(const ConstraintSet& cs, const ProfileChain& a,
                              const ProfileChain& b, const Eigen::VectorXd& x,
                              const IntegrationLimits& limits,
                              const NewtonOptions& opts);

// Defect of the extension system: N reversed segment rows (shot from s_{i+1}
// down to s_i), then the A anchor and curve anchor rows.
Eigen::VectorXd defect_extension(const ConstraintSet& cs,
                                 const ProfileChain& a,
                                 const SingularCurve& curve,
                                 const Eigen::VectorXd& x,
                                 const IntegrationLimits& limits,
                                 const NewtonOptions& opts);

// Box-constrained damped Newton on defect_bridge. Unknowns
// [sd_0, sdd_0, ..., sd_N, sdd_N, s_A, s_B] on the uniform grid
// s_i = s_A + (i/N)(s_B - s_A).
BridgeResult solve_bridge(const ConstraintSet& cs, const ProfileChain& a,
                          const ProfileChain& b, int segments,
                          const NewtonOptions& opts,
                          const IntegrationLimits& limits);

// Same machinery for the profile-to-curve connection; unknowns
// [sd_0, sdd_0, ..., sd_N, sdd_N, s_A, sd_C], s_N = s*.
ExtensionShootResult solve_extension(const ConstraintSet& cs,
                                     const ProfileChain& a,
                                     const SingularCurve& curve, int segments,
                                     const NewtonOptions& opts,
                                     const IntegrationLimits& limits);

// Forward-difference Jacobian of the bridge/extension defect at x. Columns
// are perturbed inward where x sits on a box edge (lo/hi may be empty).
// Exposed for the consistency checks.
Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double fd_step,
    const Eigen::VectorXd& lo = Eigen::VectorXd(),
    const Eigen::VectorXd& hi = Eigen::VectorXd());

}  // namespace topp3
