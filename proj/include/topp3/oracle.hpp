#pragma once

#include <optional>
#include <string>

#include "topp3/integrator.hpp"
#include "topp3/singularity.hpp"

namespace topp3 {
namespace oracle {

// Brute-force references, independent of the production code paths they
// check (they share only the integrator). Used by tests and `oracle-compare`.

struct ShootingConnection {
  double s_a = 0, s_b = 0;
  double total_time = 0;   // time along A to s_a + bridge + time along B from s_b
  double bridge_time = 0;
  double distance = 0;     // scaled (sd, sdd) miss at the matching point
};

// Tarkiainen-Shiller-style search: step along A, integrate min-jerk, test
// proximity to B at equal s; best grid cell refined by trisection (3 rounds).
std::optional<ShootingConnection> single_shooting_bridge(
    const ConstraintSet& cs, const ProfileChain& a, const ProfileChain& b,
    std::optional<double> step = std::nullopt, double pass_tol = 1e-3,
    const IntegrationLimits& limits = {});

struct SurfaceScan {
  double mias = 0, maas = 0;
  bool mias_unbounded = false, maas_unbounded = false;
};

// Dense sdd-grid feasibility scan (gamma <= eta plus direct excluded-row
// checks); resolution is the cell width.
std::optional<SurfaceScan> dense_surface_scan(const ConstraintSet& cs, double s,
                                              double sd, double window,
                                              double resolution);

struct CurveScan {
  double sd_min = 0, sd_max = 0;
  bool empty = true;
};

// Dense sd-grid scan of the singular-curve interval via equality-row
// back-substitution and feasibility of the remaining rows.
CurveScan dense_curve_scan(const ConstraintSet& cs, const Singularity& sing,
                           double sd_window, double resolution);

}  // namespace oracle
}  // namespace topp3
