#pragma once

#include <optional>
#include <vector>

#include "topp3/constraints.hpp"

namespace topp3 {

enum class CurveSide { MaxCurve, MinCurve };  // b_k(s*) > 0 / b_k(s*) < 0

const char* to_string(CurveSide side);

// A position s* where row k's jerk coefficient a_k crosses zero and the
// constraint-manifold set C at s* is non-empty.
struct Singularity {
  double s_star = 0;
  int row = -1;
  CurveSide side = CurveSide::MaxCurve;
  double bracket_lo = 0, bracket_hi = 0;  // a_k sign-change bracket
  double b_at_star = 0;                   // b_k(s*)
};

// The singular curve at s*: sd-interval plus sampled (sd, sdd) pairs from the
// row-k equality. sdd_of_sd is exact (the equality row), samples are for
// validation and plotting.
struct SingularCurve {
  Singularity parent;
  double sd_min = 0, sd_max = 0;
  std::vector<double> sd_samples;
  std::vector<double> sdd_samples;
  // row-k coefficients frozen at s*
  double b_k = 0, c_k = 0, d_k = 0;

  double sdd_of_sd(double sd) const {
    return -(c_k * sd * sd * sd + d_k) / (b_k * sd);
  }
};

// Scans each row's a_i(s) for sign changes on a grid of step scan_step
// (default s_range/2000), refines each bracket by bisection to width 1e-12,
// keeps roots whose curve set is LP-feasible, sorted by s*.
// Throws UnsupportedDoubleZero if a root has |b_k(s*)| below threshold.
std::vector<Singularity> find_singularities(
    const ConstraintSet& cs, double s_lo, double s_hi,
    std::optional<double> scan_step = std::nullopt);

// sd-interval of C via the pair of LPs over (sddd, sd*sdd, sd^3) with the
// objective on sd^3, then equality-row sampling (n_samples points); samples
// failing feasibility shrink the interval. Throws EmptySingularCurve.
SingularCurve singular_curve(const ConstraintSet& cs, const Singularity& sing,
                             double sd_cap = 100.0, int n_samples = 64);

// The Eq.-(10) jerk on the singular curve, verbatim:
//   -(d' + c' sd^3 + 3 c sd sdd + b (sd sdd + sdd^2/sd)) / (a' + b),
// with a', c', d' analytic for jerk rows and central-difference (h = 1e-5)
// for custom rows. Throws SingularJerkUndefined when |a' + b| is below
// threshold.
double singular_jerk(const ConstraintSet& cs, const Singularity& sing,
                     double sd, double sdd);

// The jerk that keeps row k active to first order along the flow:
//   -(d' + c' sd^3 + 3 c sd sdd + b' sd sdd + b sdd^2/sd) / (a' + b).
// Differs from singular_jerk by (b_k - b_k') sd sdd / (a' + b); it is the
// variant whose flow stays on the row-k manifold under time reversal, so the
// shooting band uses it.
double row_tangent_jerk(const ConstraintSet& cs, const Singularity& sing,
                        double sd, double sdd);

// Quick feasibility probe of the curve set (used by find_singularities and
// tests): is the LP at s* feasible at all?
bool curve_nonempty(const ConstraintSet& cs, const Singularity& sing,
                    double sd_cap = 100.0);

}  // namespace topp3
