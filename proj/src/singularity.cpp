#include "topp3/singularity.hpp"

#include <algorithm>
#include <cmath>

#include "topp3/error.hpp"
#include "topp3/log.hpp"
#include "topp3/simplex.hpp"

namespace topp3 {

const char* to_string(CurveSide side) {
  return side == CurveSide::MaxCurve ? "max" : "min";
}

namespace {

constexpr double kRootWidth = 1e-12;
constexpr double kEpsB = 1e-8;

// LP over (jerk, u, w) = (sddd, sd*sdd, sd^3): row-k equality, other rows
// inequality, 0 <= w <= cap^3. Objective +-w.
LpResult curve_lp(const ConstraintRowBlock& block, int row_k, double sd_cap,
                  bool maximize_w) {
  const int m = block.rows();
  Eigen::MatrixXd a_le(m + 1, 3);
  Eigen::VectorXd b_le(m + 1);
  int r = 0;
  for (int i = 0; i < m; ++i) {
    if (i == row_k) continue;
    a_le.row(r) << block.a[i], block.b[i], block.c[i];
    b_le[r] = -block.d[i];
    ++r;
  }
  a_le.row(r) << 0, 0, 1;
  b_le[r] = sd_cap * sd_cap * sd_cap;
  ++r;
  a_le.row(r) << 0, 0, -1;
  b_le[r] = 0;
  ++r;
  a_le.conservativeResize(r, 3);
  b_le.conservativeResize(r);

  Eigen::MatrixXd a_eq(1, 3);
  a_eq << block.a[row_k], block.b[row_k], block.c[row_k];
  Eigen::VectorXd b_eq(1);
  b_eq << -block.d[row_k];

  Eigen::VectorXd c(3);
  c << 0, 0, 1;
  return lp_solve(a_le, b_le, a_eq, b_eq, c, maximize_w);
}

bool sample_feasible(const ConstraintSet& cs, const ConstraintRowBlock& block,
                     double s_star, double sd, double sdd) {
  const State x{s_star, sd, sdd};
  return cs.controls(block, x).feasible(1e-8);
}

}  // namespace

bool curve_nonempty(const ConstraintSet& cs, const Singularity& sing,
                    double sd_cap) {
  const auto block = cs.coeffs(sing.s_star);
  const auto lp = curve_lp(block, sing.row, sd_cap, /*maximize_w=*/true);
  return lp.status == LpStatus::Optimal && lp.x[2] > 0;
}

std::vector<Singularity> find_singularities(const ConstraintSet& cs,
                                            double s_lo, double s_hi,
                                            std::optional<double> scan_step) {
  if (!(s_hi > s_lo)) return {};
  const double step = scan_step.value_or((s_hi - s_lo) / 2000.0);
  if (!(step > 0)) raise(ErrorCode::Precondition, "scan step must be positive");
  const int n_cells = std::max(1, static_cast<int>(std::ceil((s_hi - s_lo) / step)));

  const int m = cs.rows();
  std::vector<Singularity> out;

  // row coefficient values on the grid
  std::vector<double> grid(n_cells + 1);
  for (int j = 0; j <= n_cells; ++j)
    grid[j] = std::min(s_lo + j * step, s_hi);
  std::vector<Eigen::VectorXd> a_vals(n_cells + 1);
  for (int j = 0; j <= n_cells; ++j) a_vals[j] = cs.coeffs(grid[j]).a;

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n_cells; ++j) {
      const double v0 = a_vals[j][i];
      const double v1 = a_vals[j + 1][i];
      if (v0 == 0.0 && v1 == 0.0) continue;  // identically-zero stretch
      if (v0 * v1 > 0.0) continue;
      double root;
      if (v0 == 0.0 || v1 == 0.0) {
        // grid point exactly on a root: accept only a genuine crossing
        const int jl = std::max(0, j - 1);
        const int jr = std::min(n_cells, j + 2);
        if (a_vals[jl][i] * a_vals[jr][i] > 0.0) continue;
        if (v1 == 0.0) continue;  // owned by the next cell
        root = grid[j];
      } else {
        double lo = grid[j], hi = grid[j + 1];
        double flo = v0;
        while (hi - lo > kRootWidth) {
          const double mid = 0.5 * (lo + hi);
          const double fm = cs.coeffs(mid).a[i];
          if ((flo <= 0) == (fm <= 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        root = 0.5 * (lo + hi);
      }
      Singularity sing;
      sing.s_star = root;
      sing.row = i;
      sing.bracket_lo = grid[j];
      sing.bracket_hi = grid[j + 1];
      const auto block = cs.coeffs(sing.s_star);
      const double b_thresh = kEpsB * (1.0 + block.b.cwiseAbs().maxCoeff());
      sing.b_at_star = block.b[i];
      if (std::abs(sing.b_at_star) <= b_thresh)
        raise(ErrorCode::UnsupportedDoubleZero,
              "a_k and b_k both vanish at s*=" + fmt_g12(sing.s_star) +
                  " (row " + std::to_string(i) + ")");
      sing.side = sing.b_at_star > 0 ? CurveSide::MaxCurve : CurveSide::MinCurve;
      if (!curve_nonempty(cs, sing)) continue;
      out.push_back(sing);
    }
  }
  std::sort(out.begin(), out.end(), [](const Singularity& a, const Singularity& b) {
    return a.s_star != b.s_star ? a.s_star < b.s_star : a.row < b.row;
  });
  return out;
}

SingularCurve singular_curve(const ConstraintSet& cs, const Singularity& sing,
                             double sd_cap, int n_samples) {
  const auto block = cs.coeffs(sing.s_star);
  const auto lp_max = curve_lp(block, sing.row, sd_cap, true);
  if (lp_max.status != LpStatus::Optimal || lp_max.x[2] <= 0)
    raise(ErrorCode::EmptySingularCurve,
          "no feasible curve point at s*=" + fmt_g12(sing.s_star));
  const auto lp_min = curve_lp(block, sing.row, sd_cap, false);
  if (lp_min.status != LpStatus::Optimal)
    raise(ErrorCode::EmptySingularCurve, "curve LP lost feasibility");

  SingularCurve curve;
  curve.parent = sing;
  curve.b_k = block.b[sing.row];
  curve.c_k = block.c[sing.row];
  curve.d_k = block.d[sing.row];
  curve.sd_max = std::cbrt(std::min(lp_max.x[2], sd_cap * sd_cap * sd_cap));
  curve.sd_min = std::cbrt(std::max(lp_min.x[2], 0.0));

  // Sample on a uniform sd grid; the equality row gives sdd exactly.
  // Infeasible end samples shrink the interval (the curve is connected).
  for (int pass = 0; pass < 2; ++pass) {
    const double lo = std::max(curve.sd_min, 1e-3 * curve.sd_max);
    const double hi = curve.sd_max;
    if (!(hi > 0) || lo > hi)
      raise(ErrorCode::EmptySingularCurve, "curve sd-interval collapsed");
    std::vector<double> sd(n_samples), sdd(n_samples);
    std::vector<bool> ok(n_samples);
    for (int j = 0; j < n_samples; ++j) {
      sd[j] = n_samples == 1 ? hi : lo + (hi - lo) * j / (n_samples - 1);
      sdd[j] = curve.sdd_of_sd(sd[j]);
      ok[j] = sample_feasible(cs, block, sing.s_star, sd[j], sdd[j]);
    }
    // longest contiguous feasible run
    int best_lo = -1, best_len = 0, run_lo = -1;
    for (int j = 0; j <= n_samples; ++j) {
      if (j < n_samples && ok[j]) {
        if (run_lo < 0) run_lo = j;
      } else if (run_lo >= 0) {
        if (j - run_lo > best_len) { best_len = j - run_lo; best_lo = run_lo; }
        run_lo = -1;
      }
    }
    if (best_len == 0)
      raise(ErrorCode::EmptySingularCurve, "no feasible curve samples");
    if (best_len == n_samples || pass == 1) {
      curve.sd_samples.assign(sd.begin() + best_lo, sd.begin() + best_lo + best_len);
      curve.sdd_samples.assign(sdd.begin() + best_lo, sdd.begin() + best_lo + best_len);
      if (best_len < n_samples) {
        curve.sd_min = curve.sd_samples.front();
        curve.sd_max = curve.sd_samples.back();
      }
      break;
    }
    curve.sd_min = sd[best_lo];
    curve.sd_max = sd[best_lo + best_len - 1];
  }
  return curve;
}

namespace {

struct RowDerivatives {
  double a_p = 0, b_p = 0, c_p = 0, d_p = 0;
};

RowDerivatives row_derivatives(const ConstraintSet& cs,
                               const ConstraintRowBlock& block, int k,
                               double s_star) {
  RowDerivatives rd;
  if (block.kind[k] == RowKind::Custom) {
    const double h = 1e-5;
    const auto bl = cs.coeffs(s_star - h);
    const auto br = cs.coeffs(s_star + h);
    rd.a_p = (br.a[k] - bl.a[k]) / (2 * h);
    rd.b_p = (br.b[k] - bl.b[k]) / (2 * h);
    rd.c_p = (br.c[k] - bl.c[k]) / (2 * h);
    rd.d_p = (br.d[k] - bl.d[k]) / (2 * h);
  } else {
    const double sign = block.kind[k] == RowKind::JerkUpper ? 1.0 : -1.0;
    const auto d = cs.path().eval_derivatives(s_star, 4);
    rd.a_p = sign * d[2][block.joint[k]];
    rd.b_p = sign * 3.0 * d[3][block.joint[k]];
    rd.c_p = sign * d[4][block.joint[k]];
    rd.d_p = 0.0;
  }
  return rd;
}

double singular_denominator(const ConstraintSet& cs, const Singularity& sing,
                            const ConstraintRowBlock& block,
                            const RowDerivatives& rd) {
  const double b = block.b[sing.row];
  const double denom = rd.a_p + b;
  if (std::abs(denom) <= 1e-8 * (1.0 + std::abs(rd.a_p) + std::abs(b)))
    raise(ErrorCode::SingularJerkUndefined,
          "a_k' + b_k vanishes at s*=" + fmt_g12(sing.s_star));
  return denom;
}

}  // namespace

double singular_jerk(const ConstraintSet& cs, const Singularity& sing,
                     double sd, double sdd) {
  if (!(sd > 0)) raise(ErrorCode::Precondition, "singular_jerk needs sd > 0");
  const auto block = cs.coeffs(sing.s_star);
  const int k = sing.row;
  const RowDerivatives rd = row_derivatives(cs, block, k, sing.s_star);
  const double b = block.b[k];
  const double c = block.c[k];
  const double denom = singular_denominator(cs, sing, block, rd);
  const double num = rd.d_p + rd.c_p * sd * sd * sd + 3.0 * c * sd * sdd +
                     b * (sd * sdd + sdd * sdd / sd);
  return -num / denom;
}

double row_tangent_jerk(const ConstraintSet& cs, const Singularity& sing,
                        double sd, double sdd) {
  if (!(sd > 0)) raise(ErrorCode::Precondition, "row_tangent_jerk needs sd > 0");
  const auto block = cs.coeffs(sing.s_star);
  const int k = sing.row;
  const RowDerivatives rd = row_derivatives(cs, block, k, sing.s_star);
  const double b = block.b[k];
  const double c = block.c[k];
  const double denom = singular_denominator(cs, sing, block, rd);
  const double num = rd.d_p + rd.c_p * sd * sd * sd + 3.0 * c * sd * sdd +
                     rd.b_p * sd * sdd + b * sdd * sdd / sd;
  return -num / denom;
}

}  // namespace topp3
