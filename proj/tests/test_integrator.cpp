#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"
#include "support/scenarios.hpp"
#include "topp3/error.hpp"
#include "topp3/integrator.hpp"

using namespace topp3;
using topp3::testing::ConstantJerkFlow;

namespace {

ConstraintSet make_cs(const Scenario& sc) {
  return ConstraintSet(sc.path, sc.jerk_min, sc.jerk_max);
}

// line path plus a custom smooth state-dependent row pair; the jerk rows are
// loose so the custom rows always bind
ConstraintSet smooth_custom_cs() {
  const auto sc = testing::line_1dof(1000.0);
  ConstraintSet cs(sc.path, sc.jerk_min, sc.jerk_max);
  cs.add_custom_row({[](double) {
    return std::array<double, 4>{1.0, 2.0, 1.0, -100.0};
  }});
  cs.add_custom_row({[](double) {
    return std::array<double, 4>{-1.0, -2.0, -1.0, -100.0};
  }});
  return cs;
}

}  // namespace

TEST_CASE("integrate: constant-jerk closed form on the line path") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const Profile p = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  CHECK(p.termination() == Termination::OutOfRange);
  const ConstantJerkFlow flow{0.0, 1.0, 0.0, 100.0};
  for (const auto& n : p.nodes()) {
    CHECK(std::abs(n.state.s - flow.s(n.t)) <= 1e-9);
    CHECK(std::abs(n.state.sd - flow.sd(n.t)) <= 1e-9);
    CHECK(std::abs(n.state.sdd - flow.sdd(n.t)) <= 1e-9);
    CHECK(n.jerk == doctest::Approx(100.0));
    CHECK(n.policy == PolicyTag::MaxJerk);
  }
  CHECK(p.s_max() == doctest::Approx(1.0));  // exact boundary landing
}

TEST_CASE("integrate: forward then backward returns to the start") {
  const auto cs = make_cs(testing::curved_2dof());
  const Profile fwd = integrate(cs, State{0.1, 0.8, 0.5}, Direction::Forward,
                                JerkPolicy::max_jerk(), 0.6, {});
  REQUIRE(fwd.termination() == Termination::ReachedTarget);
  const State end = fwd.head().state;
  const Profile back = integrate(cs, end, Direction::Backward,
                                 JerkPolicy::max_jerk(), 0.1, {});
  REQUIRE(back.termination() == Termination::ReachedTarget);
  const State start = back.head().state;
  CHECK(std::abs(start.s - 0.1) <= 1e-7);
  CHECK(std::abs(start.sd - 0.8) <= 1e-7);
  CHECK(std::abs(start.sdd - 0.5) <= 1e-7);
}

TEST_CASE("integrate: max-jerk profile diverges before the singular position") {
  const auto dc = testing::divergence_case();
  const auto cs = make_cs(dc.sc);
  const Profile p = integrate(cs, dc.fwd_max, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  CHECK(p.termination() == Termination::EmptyJerkInterval);
  CHECK(p.s_max() < dc.s_star);
}

TEST_CASE("integrate: termination taxonomy") {
  const auto cs = make_cs(testing::line_1dof(100.0));

  SUBCASE("reached target with exact landing") {
    const Profile p = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                                JerkPolicy::max_jerk(), 0.37, {});
    CHECK(p.termination() == Termination::ReachedTarget);
    CHECK(p.head().state.s == doctest::Approx(0.37).epsilon(1e-12));
  }
  SUBCASE("velocity reaches zero under min jerk") {
    const Profile p = integrate(cs, State{0.0, 0.5, 0.0}, Direction::Forward,
                                JerkPolicy::min_jerk(), std::nullopt, {});
    CHECK(p.termination() == Termination::VelocityNonpositive);
    CHECK(p.head().state.sd == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("step limit") {
    IntegrationLimits lim;
    lim.step_limit = 10;
    const Profile p = integrate(cs, State{0.0, 0.01, 0.0}, Direction::Forward,
                                JerkPolicy::custom([](const State&) {
                                  return 0.0;
                                }),
                                std::nullopt, lim);
    CHECK(p.termination() == Termination::StepLimit);
    CHECK(p.size() == 11);
  }
  SUBCASE("jerk cap hit by a custom policy") {
    IntegrationLimits lim;
    lim.jerk_cap = 50.0;
    const Profile p = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                                JerkPolicy::custom([](const State& x) {
                                  return x.s > 0.1 ? 60.0 : 10.0;
                                }),
                                std::nullopt, lim);
    CHECK(p.termination() == Termination::JerkCapHit);
  }
  SUBCASE("negative start velocity is a precondition error") {
    CHECK_THROWS_AS(integrate(cs, State{0.0, -0.1, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {}),
                    Error);
  }
  SUBCASE("rest start is allowed") {
    const Profile p = integrate(cs, State{0.0, 0.0, 0.0}, Direction::Forward,
                                JerkPolicy::max_jerk(), 0.5, {});
    CHECK(p.termination() == Termination::ReachedTarget);
  }
}

TEST_CASE("integrate: 1-dof approach to a singularity hits the jerk cap") {
  // with no second joint there is no finite opposing row: eta grows without
  // bound near s* and the cap fires
  const auto cs = make_cs(testing::parabola_1dof(100.0));
  const Profile p = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  CHECK(p.termination() == Termination::JerkCapHit);
  CHECK(p.s_max() < 0.5);
}

TEST_CASE("integrate: stored jerk equals the control bound at every node") {
  const auto cs = make_cs(testing::curved_2dof());
  const Profile p = integrate(cs, State{0.0, 0.5, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  for (const auto& n : p.nodes()) {
    const auto ctl = cs.controls(n.state);
    CHECK(std::abs(n.jerk - ctl.eta) <= 1e-9 * (1.0 + std::abs(ctl.eta)));
  }
}

TEST_CASE("integrate: every stored node satisfies the constraint rows") {
  const auto cs = make_cs(testing::curved_2dof());
  for (const Direction dir : {Direction::Forward, Direction::Backward}) {
    const State start = dir == Direction::Forward ? State{0.0, 0.5, 0.0}
                                                  : State{1.0, 0.5, 0.0};
    const auto policy = dir == Direction::Forward ? JerkPolicy::max_jerk()
                                                  : JerkPolicy::max_jerk();
    const Profile p = integrate(cs, start, dir, policy, std::nullopt, {});
    for (const auto& n : p.nodes()) {
      const auto block = cs.coeffs(n.state.s);
      for (int i = 0; i < block.rows(); ++i) {
        const double scale = 1.0 + std::abs(block.d[i]);
        CHECK(block.value(i, n.state, n.jerk) <= 1e-6 * scale);
      }
    }
  }
}

TEST_CASE("integrate: local cubic consistency between nodes") {
  const auto cs = make_cs(testing::curved_2dof());
  const Profile p = integrate(cs, State{0.0, 0.5, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  const auto& nodes = p.nodes();
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double h = nodes[i + 1].t - nodes[i].t;
    const double ds = nodes[i + 1].state.s - nodes[i].state.s;
    const double pred = nodes[i].state.sd * h + 0.5 * nodes[i].state.sdd * h * h +
                        nodes[i].jerk * h * h * h / 6.0;
    CHECK(std::abs(ds - pred) <= 1e-9 * (1.0 + std::abs(ds)));
  }
}

TEST_CASE("integrate: halving dt converges at fourth order") {
  const auto cs = smooth_custom_cs();
  const State start{0.0, 1.0, 0.0};
  const auto terminal = [&](double dt) {
    IntegrationLimits lim;
    lim.dt = dt;
    const Profile p = integrate(cs, start, Direction::Forward,
                                JerkPolicy::max_jerk(), 0.8, lim);
    REQUIRE(p.termination() == Termination::ReachedTarget);
    return p.head().state;
  };
  const State ref = terminal(1e-3 / 16.0);
  const auto err = [&](double dt) {
    const State x = terminal(dt);
    return std::max(std::abs(x.sd - ref.sd), std::abs(x.sdd - ref.sdd));
  };
  const double e1 = err(4e-3);
  const double e2 = err(2e-3);
  REQUIRE(e1 > 0);
  REQUIRE(e2 > 0);
  const double order = std::log2(e1 / e2);
  CHECK(order >= 3.5);
}

TEST_CASE("interpolate: exact at nodes, closed form between them") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const Profile p = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  // knot exactness
  const auto& n = p.nodes()[5];
  const auto [sd_n, sdd_n] = interpolate(p, n.state.s);
  CHECK(sd_n == n.state.sd);
  CHECK(sdd_n == n.state.sdd);
  // mid-node values against the constant-jerk closed form
  const ConstantJerkFlow flow{0.0, 1.0, 0.0, 100.0};
  for (double t : {0.0155, 0.1042, 0.2008}) {
    const double s = flow.s(t);
    if (s > p.s_max()) continue;
    const auto [sd, sdd] = interpolate(p, s);
    CHECK(std::abs(sd - flow.sd(t)) <= 1e-8);
    CHECK(std::abs(sdd - flow.sdd(t)) <= 1e-8);
  }
  // range errors
  CHECK_THROWS_AS(interpolate(p, -0.01), Error);
  CHECK_THROWS_AS(interpolate(p, p.s_max() + 0.01), Error);
}

TEST_CASE("profile: backward integration is stored normalized") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const Profile p = integrate(cs, State{1.0, 1.0, 0.0}, Direction::Backward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  CHECK(p.direction() == Direction::Backward);
  CHECK(p.termination() == Termination::OutOfRange);
  CHECK(p.s_min() == doctest::Approx(0.0));
  CHECK(p.head().state.s == doctest::Approx(0.0));
  const auto& nodes = p.nodes();
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    CHECK(nodes[i].state.s < nodes[i + 1].state.s);
    CHECK(nodes[i].t < nodes[i + 1].t);
  }
  CHECK(nodes.back().t == 0.0);
}

TEST_CASE("profile: mirroring maps states and times consistently") {
  const auto cs = make_cs(testing::curved_2dof());
  const Profile p = integrate(cs, State{0.2, 0.7, 0.1}, Direction::Forward,
                              JerkPolicy::max_jerk(), 0.8, {});
  const Profile m = p.mirrored(1.0);
  CHECK(m.direction() == Direction::Backward);
  CHECK(m.s_min() == doctest::Approx(1.0 - p.s_max()));
  CHECK(m.s_max() == doctest::Approx(1.0 - p.s_min()));
  const auto smp = p.at_s(0.5);
  const auto msmp = m.at_s(0.5);
  CHECK(msmp.sd == doctest::Approx(smp.sd).epsilon(1e-12));
  CHECK(msmp.sdd == doctest::Approx(-smp.sdd).epsilon(1e-12));
}

TEST_CASE("profile: csv dump carries the termination comment") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const Profile p = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, {});
  std::ostringstream os;
  p.dump_csv(os);
  const std::string text = os.str();
  CHECK(text.find("t,s,sd,sdd,sddd,policy") == 0);
  CHECK(text.find("# termination: OutOfRange") != std::string::npos);
}

TEST_CASE("profile chain: interpolation and time bookkeeping") {
  const auto cs = make_cs(testing::line_1dof(100.0));
  const Profile a = integrate(cs, State{0.0, 1.0, 0.0}, Direction::Forward,
                              JerkPolicy::max_jerk(), 0.5, {});
  const Profile b = integrate(cs, a.head().state, Direction::Forward,
                              JerkPolicy::max_jerk(), 1.0, {});
  ProfileChain chain(a, PolicyTag::MaxJerk);
  ChainPiece second;
  second.profile = b;
  second.tag = PolicyTag::MaxJerk;
  chain.pieces().push_back(second);
  CHECK(chain.s_min() == doctest::Approx(0.0));
  CHECK(chain.s_max() == doctest::Approx(1.0));
  CHECK(chain.total_time() ==
        doctest::Approx(a.duration() + b.duration()).epsilon(1e-12));
  const double t_mid = chain.time_to(0.5, Direction::Forward);
  CHECK(t_mid == doctest::Approx(a.duration()).epsilon(1e-9));
  const auto smp = chain.at_s(0.75);
  const auto ref = b.at_s(0.75);
  CHECK(smp.sd == ref.sd);
}
