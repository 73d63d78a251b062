#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

namespace topp3 {

using Vector = Eigen::VectorXd;

// One joint of a piecewise-polynomial path. Coefficients are monomial in the
// local variable x = s - breakpoints[piece], degree <= 7 per piece.
struct JointPolynomial {
  std::vector<double> breakpoints;            // strictly increasing, spans [0, s_end]
  std::vector<std::vector<double>> pieces;    // pieces.size() == breakpoints.size() - 1
};

// Geometric path q(s) on [0, s_end] with exact derivatives up to order 4.
// Immutable after construction; safe to share across threads.
class PathSpec {
 public:
  // continuity: derivative orders 0..continuity are checked at interior
  // breakpoints at tolerance 1e-9 (C0..C4).
  PathSpec(std::vector<JointPolynomial> joints, double s_end, int continuity = 0);

  int n_dof() const { return static_cast<int>(joints_.size()); }
  double s_end() const { return s_end_; }
  int continuity() const { return continuity_; }
  const std::vector<JointPolynomial>& joints() const { return joints_; }

  // Derivatives [q, q_s, ..., q^(max_order)] at s; the right piece is used at
  // breakpoints (left piece at s = s_end). max_order <= 4.
  std::vector<Vector> eval_derivatives(double s, int max_order) const;

  // Single derivative order, same piece rules.
  Vector derivative(double s, int order) const;

  // The path traversed in reverse: q~(u) = q(s_end - u). Exact (binomial
  // coefficient transform per piece).
  PathSpec mirrored() const;

  // Single-piece path from global monomial coefficients (basis of s itself),
  // one coefficient vector per joint.
  static PathSpec single_piece(const std::vector<std::vector<double>>& coeffs,
                               double s_end);

  // Clamped C2 cubic spline through waypoints (rows of `waypoints` are
  // configurations at uniformly spaced s). Emits a warning: the result has
  // piecewise-constant q_sss and zero q_ssss almost everywhere, which the
  // solver's singular-jerk machinery cannot differentiate through.
  static PathSpec fit_cubic(const std::vector<Vector>& waypoints, double s_end);

 private:
  std::vector<JointPolynomial> joints_;
  double s_end_;
  int continuity_;
};

// Joint-space boundary conditions (rad/s, rad/s^2).
struct BoundaryCondition {
  Vector v_beg, a_beg, v_end, a_end;
};

enum class Endpoint { Start, End };

struct PathState {
  double s, sd, sdd;
};

// Path-parameter boundary state from joint-space boundary conditions:
//   sd = ||v|| / ||q_s||,  sdd = <a - q_ss sd^2, q_s> / ||q_s||^2.
// Errors: DegeneratePath if ||q_s|| = 0; InconsistentBoundary if v is not
// parallel to q_s within 1e-6 rad (or points against it).
PathState boundary_state(const PathSpec& path, const BoundaryCondition& bc,
                         Endpoint endpoint);

}  // namespace topp3
