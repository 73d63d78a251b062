#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/scenarios.hpp"
#include "topp3/oracle.hpp"
#include "topp3/shooting.hpp"

using namespace topp3;
using topp3::testing::ConstantJerkFlow;

namespace {

ConstraintSet make_cs(const Scenario& sc) {
  return ConstraintSet(sc.path, sc.jerk_min, sc.jerk_max);
}

struct BridgeFixture {
  ConstraintSet cs;
  ProfileChain a, b;
};

BridgeFixture make_bridge_fixture(const Scenario& sc) {
  ConstraintSet cs = make_cs(sc);
  const PathState b0 = boundary_state(*sc.path, sc.bc, Endpoint::Start);
  const PathState b1 = boundary_state(*sc.path, sc.bc, Endpoint::End);
  IntegrationLimits limits;
  ProfileChain a(integrate(cs, State{b0.s, b0.sd, b0.sdd}, Direction::Forward,
                           JerkPolicy::max_jerk(), std::nullopt, limits),
                 PolicyTag::MaxJerk);
  ProfileChain b(integrate(cs, State{b1.s, b1.sd, b1.sdd}, Direction::Backward,
                           JerkPolicy::max_jerk(), std::nullopt, limits),
                 PolicyTag::MaxJerk);
  return {std::move(cs), std::move(a), std::move(b)};
}

}  // namespace

TEST_CASE("shoot_segment: zero-length segment is the identity") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const auto end = shoot_segment(cs, 0.3, 1.2, -0.4, 0.3,
                                 JerkPolicy::min_jerk(), {});
  CHECK(!end.early_stop);
  CHECK(end.sd == 1.2);
  CHECK(end.sdd == -0.4);
}

TEST_CASE("shoot_segment: constant-jerk closed form, both directions") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const ConstantJerkFlow flow{0.2, 1.0, 2.0, -100.0};
  const double t_end = 0.05;
  const auto fwd = shoot_segment(cs, 0.2, 1.0, 2.0, flow.s(t_end),
                                 JerkPolicy::min_jerk(), {});
  CHECK(!fwd.early_stop);
  CHECK(std::abs(fwd.sd - flow.sd(t_end)) <= 1e-9);
  CHECK(std::abs(fwd.sdd - flow.sdd(t_end)) <= 1e-9);
  // reversed segment: start from the end state and shoot back down in s
  const auto bwd = shoot_segment(cs, flow.s(t_end), flow.sd(t_end),
                                 flow.sdd(t_end), 0.2, JerkPolicy::min_jerk(),
                                 {});
  CHECK(!bwd.early_stop);
  CHECK(std::abs(bwd.sd - 1.0) <= 1e-9);
  CHECK(std::abs(bwd.sdd - 2.0) <= 1e-9);
}

TEST_CASE("shoot_segment: early termination sets the flag") {
  const auto dc = testing::divergence_case();
  const auto cs = make_cs(dc.sc);
  // a min-jerk shoot across s* from a hot fast state dies on the min curve
  const auto end = shoot_segment(cs, 0.15, 5.0, 0.0, 0.9,
                                 JerkPolicy::min_jerk(), {});
  CHECK(end.early_stop);
  CHECK(end.s_reached < 0.9);
  // nonpositive start velocity reports an immediate early stop
  const auto stuck = shoot_segment(cs, 0.2, 0.0, 0.0, 0.4,
                                   JerkPolicy::min_jerk(), {});
  CHECK(stuck.early_stop);
  CHECK(stuck.s_reached == 0.2);
}

TEST_CASE("defect_bridge: vanishes on an exactly-sampled connection") {
  const auto sc = testing::line_1dof(100.0);
  const auto cs = make_cs(sc);
  IntegrationLimits limits;
  // A: forward max profile; M: an actual min-jerk run leaving A at 0.25;
  // B: the max-jerk profile through M's endpoint.
  ProfileChain a(integrate(cs, State{0.0, 0.5, 0.0}, Direction::Forward,
                           JerkPolicy::max_jerk(), std::nullopt, limits),
                 PolicyTag::MaxJerk);
  const auto ra = a.at_s(0.25);
  const Profile m = integrate(cs, State{0.25, ra.sd, ra.sdd},
                              Direction::Forward, JerkPolicy::min_jerk(), 0.6,
                              limits);
  REQUIRE(m.termination() == Termination::ReachedTarget);
  const State mend = m.head().state;
  ProfileChain b(integrate(cs, mend, Direction::Backward,
                           JerkPolicy::max_jerk(), std::nullopt, limits),
                 PolicyTag::MaxJerk);

  const int n = 3;
  Eigen::VectorXd x(2 * n + 4);
  for (int i = 0; i <= n; ++i) {
    const double s = 0.25 + (0.6 - 0.25) * i / n;
    const auto smp = m.at_s(s);
    x[2 * i] = smp.sd;
    x[2 * i + 1] = smp.sdd;
  }
  x[2 * n + 2] = 0.25;
  x[2 * n + 3] = 0.6;
  NewtonOptions opts;
  const Eigen::VectorXd f = defect_bridge(cs, a, b, x, limits, opts);
  CHECK(f.cwiseAbs().maxCoeff() <= 1e-8);

  // locality: perturbing sd_1 touches only segment rows 0 and 1
  Eigen::VectorXd xp = x;
  xp[2] += 1e-3;
  const Eigen::VectorXd fp = defect_bridge(cs, a, b, xp, limits, opts);
  for (int r = 0; r < 2 * n + 4; ++r) {
    const bool may_change = r < 4;  // segment 0 end row, segment 1 start row
    if (!may_change) CHECK(fp[r] == doctest::Approx(f[r]).epsilon(1e-12));
  }
  CHECK((fp.head(4) - f.head(4)).cwiseAbs().maxCoeff() > 1e-5);
}

TEST_CASE("defect_bridge: matches a half-step re-integration oracle") {
  const auto sc = testing::curved_2dof();
  const auto cs = make_cs(sc);
  const auto fix = make_bridge_fixture(sc);
  IntegrationLimits limits;
  NewtonOptions opts;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 3;
  for (int trial = 0; trial < 5; ++trial) {
    const double s_a = 0.1 + 0.2 * unit(rng);
    const double s_b = 0.6 + 0.3 * unit(rng);
    Eigen::VectorXd x(2 * n + 4);
    const auto ra = fix.a.at_s(s_a);
    const auto rb = fix.b.at_s(s_b);
    for (int i = 0; i <= n; ++i) {
      const double w = static_cast<double>(i) / n;
      x[2 * i] = (1 - w) * ra.sd + w * rb.sd;
      x[2 * i + 1] = (1 - w) * ra.sdd + w * rb.sdd;
    }
    x[2 * n + 2] = s_a;
    x[2 * n + 3] = s_b;
    const Eigen::VectorXd f = defect_bridge(cs, fix.a, fix.b, x, limits, opts);

    // independent re-implementation: integrate each segment at dt/2
    IntegrationLimits half = limits;
    half.dt = limits.dt / 2;
    double sv = 0, sa = 0;
    for (const auto& nd : fix.a.pieces().front().profile.nodes()) {
      sv = std::max(sv, std::abs(nd.state.sd));
      sa = std::max(sa, std::abs(nd.state.sdd));
    }
    Eigen::VectorXd g(2 * n + 4);
    for (int i = 0; i < n; ++i) {
      const double lo = s_a + (s_b - s_a) * i / n;
      const double hi = s_a + (s_b - s_a) * (i + 1) / n;
      const Profile seg = integrate(cs, State{lo, x[2 * i], x[2 * i + 1]},
                                    Direction::Forward, JerkPolicy::min_jerk(),
                                    hi, half);
      REQUIRE(seg.termination() == Termination::ReachedTarget);
      g[2 * i] = (seg.head().state.sd - x[2 * (i + 1)]) / (1.0 + sv);
      g[2 * i + 1] = (seg.head().state.sdd - x[2 * (i + 1) + 1]) / (1.0 + sa);
    }
    g[2 * n] = (ra.sd - x[0]) / (1.0 + sv);
    g[2 * n + 1] = (ra.sdd - x[1]) / (1.0 + sa);
    g[2 * n + 2] = (rb.sd - x[2 * n]) / (1.0 + sv);
    g[2 * n + 3] = (rb.sdd - x[2 * n + 1]) / (1.0 + sa);
    CHECK((f - g).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("solve_bridge: converges quickly on the curved scenario") {
  const auto sc = testing::curved_2dof();
  const auto fix = make_bridge_fixture(sc);
  NewtonOptions opts;
  const auto res = solve_bridge(fix.cs, fix.a, fix.b, 3, opts, {});
  REQUIRE(res.status == ShootStatus::Ok);
  CHECK(res.iterations <= 10);
  CHECK(res.restarts == 0);
  CHECK(res.landing_residual <= 10.0 * opts.tol_f);
  CHECK(res.s_a < res.s_b);
  // re-integration consistency: defect small iff single-shot lands on B
  CHECK(res.bridge.termination() == Termination::ReachedTarget);
}

TEST_CASE("solve_bridge: degenerate connection when A's head lies on B") {
  const auto sc = testing::line_1dof(100.0);
  const auto cs = make_cs(sc);
  IntegrationLimits limits;
  ProfileChain a(integrate(cs, State{0.0, 0.5, 0.0}, Direction::Forward,
                           JerkPolicy::max_jerk(), 0.5, limits),
                 PolicyTag::MaxJerk);
  // B passes through A's head state
  ProfileChain b(integrate(cs, a.pieces().back().profile.head().state,
                           Direction::Backward, JerkPolicy::max_jerk(),
                           std::nullopt, limits),
                 PolicyTag::MaxJerk);
  NewtonOptions opts;
  opts.guess_s_a = 0.5;
  opts.guess_s_b = 0.5;
  const auto res = solve_bridge(cs, a, b, 3, opts, limits);
  REQUIRE(res.status == ShootStatus::Ok);
  CHECK(std::abs(res.s_b - res.s_a) <= 1e-6);
  CHECK(res.bridge.duration() <= 1e-6);
}

TEST_CASE("solve_bridge: no overlap window when A lies beyond B") {
  const auto sc = testing::line_1dof(100.0);
  const auto cs = make_cs(sc);
  IntegrationLimits limits;
  ProfileChain a(integrate(cs, State{0.8, 0.5, 0.0}, Direction::Forward,
                           JerkPolicy::max_jerk(), std::nullopt, limits),
                 PolicyTag::MaxJerk);
  ProfileChain b(integrate(cs, State{0.2, 0.5, 0.0}, Direction::Backward,
                           JerkPolicy::max_jerk(), std::nullopt, limits),
                 PolicyTag::MaxJerk);
  const auto res = solve_bridge(cs, a, b, 3, {}, limits);
  CHECK(res.status == ShootStatus::NoOverlapWindow);
}

TEST_CASE("solve_bridge: iteration cap reports non-convergence") {
  const auto sc = testing::curved_2dof();
  const auto fix = make_bridge_fixture(sc);
  NewtonOptions opts;
  opts.max_iters = 1;
  opts.restarts = 1;
  const auto res = solve_bridge(fix.cs, fix.a, fix.b, 3, opts, {});
  CHECK(res.status != ShootStatus::Ok);
}

TEST_CASE("solve_bridge: anchors stay inside their boxes") {
  const auto sc = testing::curved_2dof();
  const auto fix = make_bridge_fixture(sc);
  NewtonOptions opts;
  opts.collect_trace = true;
  const auto res = solve_bridge(fix.cs, fix.a, fix.b, 3, opts, {});
  REQUIRE(res.status == ShootStatus::Ok);
  for (const auto& it : res.trace.iterates) {
    REQUIRE(it.anchors.size() == 2);
    CHECK(it.anchors[0] >= fix.a.s_min() - 1e-12);
    CHECK(it.anchors[0] <= fix.a.s_max() + 1e-12);
    CHECK(it.anchors[1] >= fix.b.s_min() - 1e-12);
    CHECK(it.anchors[1] <= fix.b.s_max() + 1e-12);
  }
}

TEST_CASE("solve_bridge: duration agrees with the single-shooting oracle") {
  int agreements = 0;
  for (std::uint64_t seed : {0ull, 1ull, 2ull, 3ull, 4ull}) {
    const auto sc = testing::seeded_scenario(seed);
    const auto fix = make_bridge_fixture(sc);
    NewtonOptions opts;
    const auto res = solve_bridge(fix.cs, fix.a, fix.b, 3, opts, {});
    REQUIRE(res.status == ShootStatus::Ok);
    const double msm_total = fix.a.time_to(res.s_a, Direction::Forward) +
                             res.bridge.duration() +
                             fix.b.time_to(res.s_b, Direction::Backward);
    const double step = (fix.a.s_max() - fix.a.s_min()) / 2000.0;
    const auto conn =
        oracle::single_shooting_bridge(fix.cs, fix.a, fix.b, step);
    REQUIRE(conn.has_value());
    CHECK(std::abs(conn->total_time - msm_total) <= 0.005 * msm_total);
    ++agreements;
  }
  CHECK(agreements == 5);
}

TEST_CASE("fd_jacobian: two-perturbation consistency at the solution") {
  const auto sc = testing::curved_2dof();
  const auto fix = make_bridge_fixture(sc);
  NewtonOptions opts;
  IntegrationLimits limits;
  const auto res = solve_bridge(fix.cs, fix.a, fix.b, 3, opts, limits);
  REQUIRE(res.status == ShootStatus::Ok);

  // rebuild the solution vector from the converged bridge
  const int n = 3;
  Eigen::VectorXd x(2 * n + 4);
  for (int i = 0; i <= n; ++i) {
    const double s = res.s_a + (res.s_b - res.s_a) * i / n;
    const auto smp = res.bridge.at_s(s);
    x[2 * i] = smp.sd;
    x[2 * i + 1] = smp.sdd;
  }
  x[2 * n + 2] = res.s_a;
  x[2 * n + 3] = res.s_b;

  const auto f = [&](const Eigen::VectorXd& v) {
    return defect_bridge(fix.cs, fix.a, fix.b, v, limits, opts);
  };
  const Eigen::MatrixXd j1 = fd_jacobian(f, x, 1e-6);
  const Eigen::MatrixXd j2 = fd_jacobian(f, x, 3e-7);
  for (int c = 0; c < j1.cols(); ++c) {
    const double scale = 1.0 + j1.col(c).norm();
    CHECK((j1.col(c) - j2.col(c)).norm() <= 1e-3 * scale);
  }
}

TEST_CASE("solve_extension: zero defect at an exactly-sampled solution") {
  const auto sc = testing::one_singularity_2dof();
  const auto cs = make_cs(sc);
  IntegrationLimits limits;
  const PathState b0 = boundary_state(*sc.path, sc.bc, Endpoint::Start);
  const ProfileChain a(integrate(cs, State{b0.s, b0.sd, b0.sdd},
                                 Direction::Forward, JerkPolicy::max_jerk(),
                                 std::nullopt, limits),
                       PolicyTag::MaxJerk);
  const auto sings = find_singularities(cs, 0.0, 1.0);
  const Singularity* max_curve = nullptr;
  for (const auto& s : sings)
    if (s.side == CurveSide::MaxCurve) max_curve = &s;
  REQUIRE(max_curve != nullptr);
  const auto curve = singular_curve(cs, *max_curve, 100.0);

  NewtonOptions opts;
  const auto shot = solve_extension(cs, a, curve, 3, opts, limits);
  REQUIRE(shot.status == ShootStatus::Ok);
  CHECK(shot.landing_residual <= 10.0 * opts.tol_f);

  // assemble x by sampling the converged bridge on the grid; the defect at
  // the solution stays within the convergence tolerance
  const int n = 3;
  Eigen::VectorXd x(2 * n + 4);
  for (int i = 0; i <= n; ++i) {
    const double s = shot.s_a + (curve.parent.s_star - shot.s_a) * i / n;
    const auto smp = shot.bridge.at_s(std::min(s, shot.bridge.s_max()));
    x[2 * i] = smp.sd;
    x[2 * i + 1] = smp.sdd;
  }
  x[2 * n + 2] = shot.s_a;
  x[2 * n + 3] = shot.sd_c;
  const Eigen::VectorXd f = defect_extension(cs, a, curve, x, limits, opts);
  CHECK(f.cwiseAbs().maxCoeff() <= 10.0 * opts.tol_f);
}
