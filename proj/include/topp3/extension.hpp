#pragma once

#include "topp3/shooting.hpp"

namespace topp3 {

struct ExtensionOutcome {
  ShootStatus status = ShootStatus::NonConvergence;
  bool noop = false;          // profile already passes s*
  ProfileChain chain;         // [truncated original | bridge | resumed max]
  double s_attach = 0;
  double sd_curve = 0, sdd_curve = 0;
  double junction_residual = 0;  // worst scaled state gap at the two junctions
  NewtonTrace trace;
  int restarts = 0;
  int iterations = 0;
};

// Extends a diverged profile through the singularity at s*: min-jerk
// connection from a point on the chain onto the singular curve, then resumed
// max-jerk integration from (s*, sd_C, sdd_C) with the singular-jerk window.
// Forward extension requires side == MaxCurve; backward extension mirrors the
// problem (a MinCurve in original coordinates) and runs the same machinery.
ExtensionOutcome extend_profile(const ConstraintSet& cs,
                                const ProfileChain& chain,
                                const Singularity& sing, Direction dir,
                                int segments, const NewtonOptions& opts,
                                const IntegrationLimits& limits,
                                double sd_cap = 100.0);

// The generic feasible-point extension (comparison mode): backward max-jerk
// from a chosen feasible point at s*, bridge onto it, then resume forward
// max-jerk from the point. Always forward-direction.
ExtensionOutcome extend_profile_generic(const ConstraintSet& cs,
                                        const ProfileChain& chain,
                                        const Singularity& sing,
                                        double sd_point, double sdd_point,
                                        int segments, const NewtonOptions& opts,
                                        const IntegrationLimits& limits);

}  // namespace topp3
