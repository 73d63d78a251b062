#pragma once

#include <Eigen/Core>

namespace topp3 {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0;
  Eigen::VectorXd x;  // free-variable values at the optimum
};

// Small dense two-phase simplex with Bland's rule.
//
//   maximize    c^T x
//   subject to  A_le x <= b_le,  A_eq x = b_eq,   x free.
//
// Free variables are split internally into positive/negative parts. Sized
// for a handful of variables and a few dozen rows.
LpResult lp_solve(const Eigen::MatrixXd& a_le, const Eigen::VectorXd& b_le,
                  const Eigen::MatrixXd& a_eq, const Eigen::VectorXd& b_eq,
                  const Eigen::VectorXd& c, bool maximize = true);

}  // namespace topp3
