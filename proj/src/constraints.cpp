#include "topp3/constraints.hpp"

#include <cmath>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

ConstraintSet::ConstraintSet(std::shared_ptr<const PathSpec> path,
                             Vector jerk_min, Vector jerk_max, double eps_a,
                             std::optional<double> jerk_cap)
    : path_(std::move(path)),
      jerk_min_(std::move(jerk_min)),
      jerk_max_(std::move(jerk_max)),
      eps_a_(eps_a) {
  if (!path_) raise(ErrorCode::Precondition, "null path");
  const int n = path_->n_dof();
  if (jerk_min_.size() != n || jerk_max_.size() != n)
    raise(ErrorCode::Precondition, "jerk bounds must have n_dof entries");
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(jerk_min_[j]) || !std::isfinite(jerk_max_[j]))
      raise(ErrorCode::Precondition, "non-finite jerk bound");
    if (!(jerk_min_[j] < 0 && 0 < jerk_max_[j]))
      raise(ErrorCode::Precondition,
            "jerk bounds must satisfy j_min < 0 < j_max per joint");
  }
  if (!(eps_a_ > 0)) raise(ErrorCode::Precondition, "eps_a must be positive");
  const double jmax_abs =
      std::max(jerk_max_.cwiseAbs().maxCoeff(), jerk_min_.cwiseAbs().maxCoeff());
  jerk_cap_ = jerk_cap.value_or(10.0 * jmax_abs);
  if (!(jerk_cap_ > 0)) raise(ErrorCode::Precondition, "jerk_cap must be positive");
}

void ConstraintSet::add_custom_row(CustomRow row) {
  custom_.push_back(std::move(row));
}

ConstraintSet ConstraintSet::scaled_jerk(double factor) const {
  ConstraintSet out(path_, jerk_min_ * factor, jerk_max_ * factor, eps_a_,
                    jerk_cap_ * factor);
  out.custom_ = custom_;
  return out;
}

ConstraintSet ConstraintSet::mirrored() const {
  if (!custom_.empty())
    raise(ErrorCode::Precondition, "cannot mirror custom constraint rows");
  auto mpath = std::make_shared<PathSpec>(path_->mirrored());
  // q~''' = -q''' : bounds negate and swap
  return ConstraintSet(std::move(mpath), -jerk_max_, -jerk_min_, eps_a_,
                       jerk_cap_);
}

ConstraintRowBlock ConstraintSet::coeffs(double s) const {
  const auto d = path_->eval_derivatives(s, 3);
  const int n = path_->n_dof();
  const int m = rows();
  ConstraintRowBlock block;
  block.s = s;
  block.a.resize(m);
  block.b.resize(m);
  block.c.resize(m);
  block.d.resize(m);
  block.kind.resize(m);
  block.joint.resize(m);
  for (int j = 0; j < n; ++j) {
    block.a[j] = d[1][j];
    block.b[j] = 3.0 * d[2][j];
    block.c[j] = d[3][j];
    block.d[j] = -jerk_max_[j];
    block.kind[j] = RowKind::JerkUpper;
    block.joint[j] = j;

    block.a[n + j] = -d[1][j];
    block.b[n + j] = -3.0 * d[2][j];
    block.c[n + j] = -d[3][j];
    block.d[n + j] = jerk_min_[j];
    block.kind[n + j] = RowKind::JerkLower;
    block.joint[n + j] = j;
  }
  for (size_t i = 0; i < custom_.size(); ++i) {
    const auto r = custom_[i].coeffs(s);
    const int k = 2 * n + static_cast<int>(i);
    block.a[k] = r[0];
    block.b[k] = r[1];
    block.c[k] = r[2];
    block.d[k] = r[3];
    block.kind[k] = RowKind::Custom;
    block.joint[k] = -1;
  }
  return block;
}

Controls ConstraintSet::controls(const State& x) const {
  return controls(coeffs(x.s), x);
}

Controls ConstraintSet::controls(const ConstraintRowBlock& block,
                                 const State& x) const {
  Controls out;
  const double thresh = eps_a_ * (1.0 + block.a_scale());
  const double sd3 = x.sd * x.sd * x.sd;
  for (int i = 0; i < block.rows(); ++i) {
    const double bterm = block.b[i] * x.sd * x.sdd;
    const double cterm = block.c[i] * sd3;
    const double rest = bterm + cterm + block.d[i];
    if (std::abs(block.a[i]) <= thresh) {
      const double row_scale =
          1.0 + std::abs(bterm) + std::abs(cterm) + std::abs(block.d[i]);
      out.excluded_violation = std::max(out.excluded_violation, rest / row_scale);
      continue;
    }
    const double bound = -rest / block.a[i];
    if (block.a[i] < 0) {
      out.gamma = std::max(out.gamma, bound);
    } else {
      out.eta = std::min(out.eta, bound);
    }
  }
  return out;
}

std::optional<AccelSurfaces> ConstraintSet::accel_surfaces(double s, double sd,
                                                           double window) const {
  if (!(sd > 0)) raise(ErrorCode::Precondition, "accel_surfaces needs sd > 0");
  if (!(window > 0)) raise(ErrorCode::Precondition, "window must be positive");
  const auto block = coeffs(s);
  const double thresh = eps_a_ * (1.0 + block.a_scale());
  const double sd3 = sd * sd * sd;

  double lo = -window, hi = window;
  bool lo_tight = false, hi_tight = false;
  const auto apply = [&](double coef, double cst) {
    // half-line coef*sdd + cst >= 0
    const double scale = 1.0 + std::abs(coef) * window + std::abs(cst);
    if (std::abs(coef) <= 1e-14 * scale) {
      if (cst < -1e-12 * scale) { lo = 1.0; hi = -1.0; }  // infeasible
      return;
    }
    const double bound = -cst / coef;
    if (coef > 0) {
      if (bound > lo) { lo = bound; lo_tight = true; }
    } else {
      if (bound < hi) { hi = bound; hi_tight = true; }
    }
  };

  std::vector<int> pos, neg;
  for (int i = 0; i < block.rows(); ++i) {
    const double k_i = block.c[i] * sd3 + block.d[i];
    if (std::abs(block.a[i]) <= thresh) {
      // jerk cannot repair the row: direct inequality b_i sd sdd + k_i <= 0
      apply(-block.b[i] * sd, -k_i);
    } else if (block.a[i] > 0) {
      pos.push_back(i);
    } else {
      neg.push_back(i);
    }
  }
  // Eliminate the jerk between every (upper, lower) pair:
  // min_i(-R_i/a_i) >= max_j(-R_j/a_j)  <=>  R_i a_j - R_j a_i >= 0.
  for (int i : pos) {
    for (int j : neg) {
      const double coef = (block.b[i] * block.a[j] - block.b[j] * block.a[i]) * sd;
      const double cst = (block.c[i] * sd3 + block.d[i]) * block.a[j] -
                         (block.c[j] * sd3 + block.d[j]) * block.a[i];
      apply(coef, cst);
    }
  }

  if (lo > hi + 1e-12 * (1.0 + std::abs(lo) + std::abs(hi))) return std::nullopt;
  AccelSurfaces out;
  out.mias = lo;
  out.maas = hi;
  out.mias_unbounded = !lo_tight;
  out.maas_unbounded = !hi_tight;
  return out;
}

}  // namespace topp3
