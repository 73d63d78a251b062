#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "topp3/path.hpp"

namespace topp3 {

// A point of the parameterization in the (s, sd, sdd) space.
struct State {
  double s = 0, sd = 0, sdd = 0;
};

enum class RowKind { JerkUpper, JerkLower, Custom };

// Canonical third-order constraint rows at a fixed s:
//   a_i sddd + b_i sd sdd + c_i sd^3 + d_i <= 0.
// Jerk bounds stack as a = (q_s; -q_s), b = (3 q_ss; -3 q_ss),
// c = (q_sss; -q_sss), d = (-j_max; j_min): all upper rows, then all lower.
struct ConstraintRowBlock {
  double s = 0;
  Vector a, b, c, d;
  std::vector<RowKind> kind;
  std::vector<int> joint;  // joint index for jerk rows, -1 for custom

  int rows() const { return static_cast<int>(a.size()); }
  // max_i |a_i|, used by the relative zero-row threshold.
  double a_scale() const { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }
  // Row value a_i j + b_i sd sdd + c_i sd^3 + d_i.
  double value(int i, const State& x, double jerk) const {
    return a[i] * jerk + b[i] * x.sd * x.sdd + c[i] * x.sd * x.sd * x.sd + d[i];
  }
};

// Extremal feasible path jerks at a state (Eq.-(3)-style bounds).
// gamma/eta are -inf/+inf markers when no row bounds that side.
// excluded_violation is the worst epsilon-excluded row value relative to its
// own magnitude scale; such rows cannot be repaired by any jerk, so a
// positive value means the state itself is infeasible.
struct Controls {
  double gamma = -std::numeric_limits<double>::infinity();
  double eta = std::numeric_limits<double>::infinity();
  double excluded_violation = -std::numeric_limits<double>::infinity();

  bool feasible(double slack_rel = 1e-6) const {
    double scale = 1.0;
    if (std::isfinite(gamma)) scale += std::abs(gamma);
    if (std::isfinite(eta)) scale += std::abs(eta);
    return gamma <= eta + slack_rel * scale && excluded_violation <= slack_rel;
  }
};

// Extremal feasible accelerations at (s, sd): the MiAS/MaAS values clipped to
// [-window, window]; *_unbounded marks values pinned at the window edge.
struct AccelSurfaces {
  double mias = 0, maas = 0;
  bool mias_unbounded = false, maas_unbounded = false;
};

struct CustomRow {
  // coeffs(s) -> {a, b, c, d}
  std::function<std::array<double, 4>(double)> coeffs;
};

// Generator of canonical constraint rows along a path under joint jerk
// bounds, plus the pointwise control bounds and acceleration surfaces.
// Immutable and freely shareable; all operations are pure.
class ConstraintSet {
 public:
  ConstraintSet(std::shared_ptr<const PathSpec> path, Vector jerk_min,
                Vector jerk_max, double eps_a = 1e-8,
                std::optional<double> jerk_cap = std::nullopt);

  // Additional rows beyond the jerk stack (test scenarios, torque-rate-like
  // bounds). Appended after the jerk rows.
  void add_custom_row(CustomRow row);

  const PathSpec& path() const { return *path_; }
  std::shared_ptr<const PathSpec> path_ptr() const { return path_; }
  const Vector& jerk_min() const { return jerk_min_; }
  const Vector& jerk_max() const { return jerk_max_; }
  double eps_a() const { return eps_a_; }
  double jerk_cap() const { return jerk_cap_; }
  int rows() const { return 2 * path_->n_dof() + static_cast<int>(custom_.size()); }

  // Jerk bounds scaled by `factor` (constraint-inclusion studies).
  ConstraintSet scaled_jerk(double factor) const;
  // The constraint set of the mirrored path (bounds negated and swapped).
  ConstraintSet mirrored() const;

  ConstraintRowBlock coeffs(double s) const;

  Controls controls(const State& x) const;
  Controls controls(const ConstraintRowBlock& block, const State& x) const;

  // Eq.-(6)-style surfaces by pairwise jerk elimination; empty optional when
  // F(s, sd) is empty. window > 0 bounds the search interval in sdd.
  std::optional<AccelSurfaces> accel_surfaces(double s, double sd,
                                              double window) const;

 private:
  std::shared_ptr<const PathSpec> path_;
  Vector jerk_min_, jerk_max_;
  double eps_a_;
  double jerk_cap_;
  std::vector<CustomRow> custom_;
};

}  // namespace topp3
