#include "topp3/simplex.hpp"

#include <cmath>
#include <vector>

#include "topp3/error.hpp"

namespace topp3 {

namespace {

constexpr double kPivotTol = 1e-9;

// Dense tableau simplex, Bland's rule (no cycling). Standard form built by
// the caller: maximize c.x, Ax = b, x >= 0, b >= 0, starting from the given
// basis of artificial/slack columns.
struct Tableau {
  Eigen::MatrixXd t;        // m x (n+1); last column is the rhs
  std::vector<int> basis;   // basic column per row
  Eigen::VectorXd cost;     // n entries

  int rows() const { return static_cast<int>(t.rows()); }
  int cols() const { return static_cast<int>(t.cols()) - 1; }

  // reduced cost of column j given the current basis
  Eigen::VectorXd reduced_costs() const {
    Eigen::VectorXd cb(rows());
    for (int i = 0; i < rows(); ++i) cb[i] = cost[basis[i]];
    return cost - t.leftCols(cols()).transpose() * cb;
  }

  void pivot(int row, int col) {
    t.row(row) /= t(row, col);
    for (int i = 0; i < rows(); ++i) {
      if (i == row) continue;
      const double f = t(i, col);
      if (f != 0.0) t.row(i) -= f * t.row(row);
    }
    basis[row] = col;
  }

  // Returns false on an unbounded direction.
  bool iterate() {
    while (true) {
      const Eigen::VectorXd rc = reduced_costs();
      int enter = -1;
      for (int j = 0; j < cols(); ++j) {
        if (rc[j] > kPivotTol) { enter = j; break; }  // Bland: smallest index
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = 0;
      for (int i = 0; i < rows(); ++i) {
        if (t(i, enter) > kPivotTol) {
          const double ratio = t(i, cols()) / t(i, enter);
          if (leave < 0 || ratio < best_ratio - 1e-15 ||
              (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }
};

}  // namespace

LpResult lp_solve(const Eigen::MatrixXd& a_le, const Eigen::VectorXd& b_le,
                  const Eigen::MatrixXd& a_eq, const Eigen::VectorXd& b_eq,
                  const Eigen::VectorXd& c, bool maximize) {
  const int nfree = static_cast<int>(c.size());
  const int m_le = static_cast<int>(b_le.size());
  const int m_eq = static_cast<int>(b_eq.size());
  const int m = m_le + m_eq;
  if (a_le.cols() != nfree && m_le > 0)
    raise(ErrorCode::Precondition, "lp_solve: a_le column mismatch");
  if (a_eq.cols() != nfree && m_eq > 0)
    raise(ErrorCode::Precondition, "lp_solve: a_eq column mismatch");

  // Split free variables x = p - q, add slacks for <= rows and artificials
  // for every row (rows are sign-normalized so rhs >= 0).
  const int nsplit = 2 * nfree;
  const int nslack = m_le;
  const int nart = m;
  const int n = nsplit + nslack + nart;

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, n + 1);
  for (int i = 0; i < m; ++i) {
    const bool is_le = i < m_le;
    Eigen::VectorXd row = is_le ? a_le.row(i).transpose()
                                : a_eq.row(i - m_le).transpose();
    double rhs = is_le ? b_le[i] : b_eq[i - m_le];
    double sign = 1.0;
    if (rhs < 0) { sign = -1.0; rhs = -rhs; }
    for (int j = 0; j < nfree; ++j) {
      t(i, 2 * j) = sign * row[j];
      t(i, 2 * j + 1) = -sign * row[j];
    }
    if (is_le) t(i, nsplit + i) = sign;  // slack (surplus when row flipped)
    t(i, nsplit + nslack + i) = 1.0;     // artificial
    t(i, n) = rhs;
  }

  Tableau tab;
  tab.t = std::move(t);
  tab.basis.resize(m);
  for (int i = 0; i < m; ++i) tab.basis[i] = nsplit + nslack + i;

  // Phase 1: maximize -sum(artificials).
  tab.cost = Eigen::VectorXd::Zero(n);
  for (int j = nsplit + nslack; j < n; ++j) tab.cost[j] = -1.0;
  if (!tab.iterate()) raise(ErrorCode::Precondition, "phase-1 unbounded");
  double art_sum = 0;
  for (int i = 0; i < m; ++i)
    if (tab.basis[i] >= nsplit + nslack) art_sum += tab.t(i, n);
  LpResult out;
  if (art_sum > 1e-7) {
    out.status = LpStatus::Infeasible;
    return out;
  }
  // Drive leftover zero-level artificials out of the basis where possible;
  // rows that cannot be pivoted are redundant and get dropped.
  std::vector<int> keep_rows;
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] >= nsplit + nslack) {
      int enter = -1;
      for (int j = 0; j < nsplit + nslack; ++j) {
        if (std::abs(tab.t(i, j)) > kPivotTol) { enter = j; break; }
      }
      if (enter >= 0) tab.pivot(i, enter);
    }
    if (tab.basis[i] < nsplit + nslack) keep_rows.push_back(i);
  }

  // Phase 2 on the tableau with artificial columns removed.
  Tableau t2;
  const int n2 = nsplit + nslack;
  t2.t.resize(static_cast<int>(keep_rows.size()), n2 + 1);
  for (size_t r = 0; r < keep_rows.size(); ++r) {
    t2.t.row(static_cast<int>(r)).head(n2) = tab.t.row(keep_rows[r]).head(n2);
    t2.t(static_cast<int>(r), n2) = tab.t(keep_rows[r], n);
    t2.basis.push_back(tab.basis[keep_rows[r]]);
  }
  t2.cost = Eigen::VectorXd::Zero(n2);
  for (int j = 0; j < nfree; ++j) {
    const double cj = maximize ? c[j] : -c[j];
    t2.cost[2 * j] = cj;
    t2.cost[2 * j + 1] = -cj;
  }
  if (!t2.iterate()) {
    out.status = LpStatus::Unbounded;
    return out;
  }

  Eigen::VectorXd xsplit = Eigen::VectorXd::Zero(n2);
  for (int i = 0; i < t2.rows(); ++i) xsplit[t2.basis[i]] = t2.t(i, t2.cols());
  out.x.resize(nfree);
  for (int j = 0; j < nfree; ++j) out.x[j] = xsplit[2 * j] - xsplit[2 * j + 1];
  out.objective = c.dot(out.x);
  out.status = LpStatus::Optimal;
  return out;
}

}  // namespace topp3
