#include "topp3/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "topp3/error.hpp"

namespace topp3 {
namespace oracle {

namespace {

struct Scales {
  double sv = 1, sa = 1;
};

Scales scales_of(const ProfileChain& a, const ProfileChain& b) {
  Scales sc;
  double sv = 0, sa = 0;
  for (const ProfileChain* c : {&a, &b}) {
    for (const auto& piece : c->pieces()) {
      for (const auto& n : piece.profile.nodes()) {
        sv = std::max(sv, std::abs(n.state.sd));
        sa = std::max(sa, std::abs(n.state.sdd));
      }
    }
  }
  sc.sv = 1.0 + sv;
  sc.sa = 1.0 + sa;
  return sc;
}

struct RunResult {
  bool connected = false;
  double distance = 1e30;
  double total_time = 1e30;
  double s_b = 0;
  double bridge_time = 0;
};

// One min-jerk run from position s_a on A; proximity to B tested at every
// node at equal s.
RunResult min_jerk_run(const ConstraintSet& cs, const ProfileChain& a,
                       const ProfileChain& b, double s_a, const Scales& sc,
                       double pass_tol, const IntegrationLimits& limits) {
  RunResult out;
  const auto ra = a.at_s(s_a);
  if (!(ra.sd > 0)) return out;
  const Profile run = integrate(cs, State{s_a, ra.sd, ra.sdd},
                                Direction::Forward, JerkPolicy::min_jerk(),
                                std::nullopt, limits);
  const double t_a = a.time_to(s_a, Direction::Forward);
  // nodes in integration order
  std::vector<ProfileNode> nodes = run.nodes();
  if (run.direction() == Direction::Backward)
    std::reverse(nodes.begin(), nodes.end());
  for (const auto& n : nodes) {
    const double s = n.state.s;
    if (s < b.s_min() || s > b.s_max() || s < s_a) continue;
    const auto rb = b.at_s(s);
    const double dist = std::max(std::abs(n.state.sd - rb.sd) / sc.sv,
                                 std::abs(n.state.sdd - rb.sdd) / sc.sa);
    if (dist < out.distance) {
      out.distance = dist;
      out.s_b = s;
      out.bridge_time = n.t;
    }
    if (dist <= pass_tol) {
      const double total = t_a + n.t + b.time_to(s, Direction::Backward);
      if (!out.connected || total < out.total_time) {
        out.connected = true;
        out.total_time = total;
        out.s_b = s;
        out.bridge_time = n.t;
      }
    }
  }
  return out;
}

double score(const RunResult& r) {
  return r.connected ? r.total_time : 1e6 + r.distance;
}

}  // namespace

std::optional<ShootingConnection> single_shooting_bridge(
    const ConstraintSet& cs, const ProfileChain& a, const ProfileChain& b,
    std::optional<double> step, double pass_tol,
    const IntegrationLimits& limits) {
  const double range = a.s_max() - a.s_min();
  if (!(range >= 0)) return std::nullopt;
  const double ds = step.value_or(range / 200.0);
  const Scales sc = scales_of(a, b);

  double best_sa = a.s_min();
  RunResult best;
  const int cells = ds > 0 ? std::max(1, static_cast<int>(range / ds)) : 1;
  for (int i = 0; i <= cells; ++i) {
    const double s_a = a.s_min() + range * i / cells;
    const RunResult r = min_jerk_run(cs, a, b, s_a, sc, pass_tol, limits);
    if (score(r) < score(best)) {
      best = r;
      best_sa = s_a;
    }
  }
  // trisection refinement of the best cell, 3 rounds
  double lo = std::max(a.s_min(), best_sa - ds);
  double hi = std::min(a.s_max(), best_sa + ds);
  for (int round = 0; round < 3; ++round) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    const RunResult r1 = min_jerk_run(cs, a, b, m1, sc, pass_tol, limits);
    const RunResult r2 = min_jerk_run(cs, a, b, m2, sc, pass_tol, limits);
    if (score(r1) < score(best)) { best = r1; best_sa = m1; }
    if (score(r2) < score(best)) { best = r2; best_sa = m2; }
    if (score(r1) <= score(r2)) hi = m2; else lo = m1;
  }
  if (!best.connected) return std::nullopt;
  ShootingConnection conn;
  conn.s_a = best_sa;
  conn.s_b = best.s_b;
  conn.total_time = best.total_time;
  conn.bridge_time = best.bridge_time;
  conn.distance = best.distance;
  return conn;
}

std::optional<SurfaceScan> dense_surface_scan(const ConstraintSet& cs, double s,
                                              double sd, double window,
                                              double resolution) {
  if (!(resolution > 0)) raise(ErrorCode::Precondition, "resolution must be > 0");
  const auto block = cs.coeffs(s);
  const int cells = std::max(1, static_cast<int>(std::ceil(2 * window / resolution)));
  int first = -1, last = -1;
  for (int i = 0; i <= cells; ++i) {
    const double sdd = -window + 2 * window * i / cells;
    if (cs.controls(block, State{s, sd, sdd}).feasible(1e-9)) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return std::nullopt;
  SurfaceScan out;
  out.mias = -window + 2 * window * first / cells;
  out.maas = -window + 2 * window * last / cells;
  out.mias_unbounded = first == 0;
  out.maas_unbounded = last == cells;
  return out;
}

CurveScan dense_curve_scan(const ConstraintSet& cs, const Singularity& sing,
                           double sd_window, double resolution) {
  if (!(resolution > 0)) raise(ErrorCode::Precondition, "resolution must be > 0");
  CurveScan out;
  const auto block = cs.coeffs(sing.s_star);
  const double b_k = block.b[sing.row];
  const double c_k = block.c[sing.row];
  const double d_k = block.d[sing.row];
  const int cells = std::max(1, static_cast<int>(std::ceil(sd_window / resolution)));
  int first = -1, last = -1;
  for (int i = 1; i <= cells; ++i) {
    const double sd = sd_window * i / cells;
    const double sdd = -(c_k * sd * sd * sd + d_k) / (b_k * sd);
    if (cs.controls(block, State{sing.s_star, sd, sdd}).feasible(1e-8)) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return out;
  out.empty = false;
  out.sd_min = sd_window * first / cells;
  out.sd_max = sd_window * last / cells;
  return out;
}

}  // namespace oracle
}  // namespace topp3
