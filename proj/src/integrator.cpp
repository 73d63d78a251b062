#include "topp3/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

const char* to_string(Direction d) {
  return d == Direction::Forward ? "forward" : "backward";
}

const char* to_string(PolicyTag t) {
  switch (t) {
    case PolicyTag::MaxJerk: return "max";
    case PolicyTag::MinJerk: return "min";
    case PolicyTag::SingularJerk: return "singular";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::ReachedTarget: return "ReachedTarget";
    case Termination::EmptyJerkInterval: return "EmptyJerkInterval";
    case Termination::VelocityNonpositive: return "VelocityNonpositive";
    case Termination::OutOfRange: return "OutOfRange";
    case Termination::JerkCapHit: return "JerkCapHit";
    case Termination::StepLimit: return "StepLimit";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// JerkPolicy

JerkPolicy JerkPolicy::max_jerk() {
  JerkPolicy p;
  p.base_tag_ = PolicyTag::MaxJerk;
  return p;
}

JerkPolicy JerkPolicy::min_jerk() {
  JerkPolicy p;
  p.base_tag_ = PolicyTag::MinJerk;
  return p;
}

JerkPolicy JerkPolicy::custom(std::function<double(const State&)> fn) {
  JerkPolicy p;
  p.base_tag_ = PolicyTag::MaxJerk;
  p.custom_ = std::move(fn);
  return p;
}

JerkPolicy JerkPolicy::with_band(SingularBand band) const {
  JerkPolicy p = *this;
  p.band_ = std::move(band);
  return p;
}

bool JerkPolicy::in_band(const ConstraintRowBlock& block, double eps_a,
                         double /*s*/) const {
  if (!band_) return false;
  const double window = band_->window_mult * eps_a * (1.0 + block.a_scale());
  return std::abs(block.a[band_->row]) <= window;
}

std::pair<double, PolicyTag> JerkPolicy::evaluate(const ConstraintSet& cs,
                                                  const ConstraintRowBlock& block,
                                                  const State& x,
                                                  double jerk_cap) const {
  if (band_ && in_band(block, cs.eps_a(), x.s))
    return {band_->jerk(x), PolicyTag::SingularJerk};
  if (custom_) return {custom_(x), base_tag_};
  const Controls ctl = cs.controls(block, x);
  if (base_tag_ == PolicyTag::MaxJerk) {
    const double eta = std::isfinite(ctl.eta) ? ctl.eta : jerk_cap;
    return {eta, PolicyTag::MaxJerk};
  }
  const double gamma = std::isfinite(ctl.gamma) ? ctl.gamma : -jerk_cap;
  return {gamma, PolicyTag::MinJerk};
}

// ---------------------------------------------------------------------------
// Profile

namespace {

// Cubic Hermite value/derivative on [0, h] from endpoint values and slopes.
struct Hermite {
  double x0, m0, x1, m1, h;
  double value(double t) const {
    const double u = t / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * x0 + (u3 - 2 * u2 + u) * h * m0 +
           (-2 * u3 + 3 * u2) * x1 + (u3 - u2) * h * m1;
  }
  double deriv(double t) const {
    const double u = t / h;
    const double u2 = u * u;
    return ((6 * u2 - 6 * u) * x0 + (3 * u2 - 4 * u + 1) * h * m0 +
            (-6 * u2 + 6 * u) * x1 + (3 * u2 - 2 * u) * h * m1) / h;
  }
};

// Bisection for f(t) = target, f monotone-ish across [lo, hi], to |hi-lo|<=tol.
template <typename F>
double bisect(F&& f, double lo, double hi, double target, double tol) {
  double flo = f(lo) - target;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid) - target;
    if ((flo <= 0) == (fm <= 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

constexpr double kTimeRootTol = 1e-12;

}  // namespace

Profile::Profile(std::vector<ProfileNode> nodes, Direction dir,
                 Termination term, double dt)
    : nodes_(std::move(nodes)), direction_(dir), termination_(term), dt_(dt) {
  if (direction_ == Direction::Backward)
    std::reverse(nodes_.begin(), nodes_.end());
}

const ProfileNode& Profile::head() const {
  if (nodes_.empty()) raise(ErrorCode::Precondition, "empty profile");
  return direction_ == Direction::Forward ? nodes_.back() : nodes_.front();
}

int Profile::bracket(double s) const {
  if (nodes_.empty()) raise(ErrorCode::RangeError, "empty profile");
  const double tol = 1e-12 * (1.0 + std::abs(s));
  if (s < s_min() - tol || s > s_max() + tol)
    raise(ErrorCode::RangeError,
          "s=" + fmt_g12(s) + " outside profile range [" + fmt_g12(s_min()) +
              ", " + fmt_g12(s_max()) + "]");
  auto it = std::upper_bound(
      nodes_.begin(), nodes_.end(), s,
      [](double v, const ProfileNode& n) { return v < n.state.s; });
  int hi = static_cast<int>(it - nodes_.begin());
  hi = std::clamp(hi, 1, static_cast<int>(nodes_.size()) - 1);
  return hi - 1;
}

Profile::Sample Profile::at_s(double s) const {
  if (nodes_.size() == 1) {
    const auto& n = nodes_.front();
    return {n.t, n.state.sd, n.state.sdd, n.jerk};
  }
  const int i = bracket(s);
  const auto& n0 = nodes_[i];
  const auto& n1 = nodes_[i + 1];
  // exact at knots
  const double tol = 1e-14 * (1.0 + std::abs(s));
  if (std::abs(s - n0.state.s) <= tol) return {n0.t, n0.state.sd, n0.state.sdd, n0.jerk};
  if (std::abs(s - n1.state.s) <= tol) return {n1.t, n1.state.sd, n1.state.sdd, n1.jerk};

  const double h = n1.t - n0.t;
  if (h <= 0) return {n0.t, n0.state.sd, n0.state.sdd, n0.jerk};
  const Hermite hs{n0.state.s, n0.state.sd, n1.state.s, n1.state.sd, h};
  const Hermite hv{n0.state.sd, n0.state.sdd, n1.state.sd, n1.state.sdd, h};
  const Hermite ha{n0.state.sdd, n0.jerk, n1.state.sdd, n1.jerk, h};
  const double tau =
      bisect([&](double t) { return hs.value(t); }, 0.0, h, s, kTimeRootTol);
  return {n0.t + tau, hv.value(tau), ha.value(tau), ha.deriv(tau)};
}

ProfileNode Profile::at_time(double t) const {
  if (nodes_.empty()) raise(ErrorCode::RangeError, "empty profile");
  const double tol = 1e-12 * (1.0 + std::abs(t));
  if (t < t_min() - tol || t > t_max() + tol)
    raise(ErrorCode::RangeError, "t outside profile time range");
  if (nodes_.size() == 1) return nodes_.front();
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                             [](double v, const ProfileNode& n) { return v < n.t; });
  int hi = std::clamp(static_cast<int>(it - nodes_.begin()), 1,
                      static_cast<int>(nodes_.size()) - 1);
  const auto& n0 = nodes_[hi - 1];
  const auto& n1 = nodes_[hi];
  const double h = n1.t - n0.t;
  if (h <= 0) return n0;
  const double tau = std::clamp(t - n0.t, 0.0, h);
  const Hermite hs{n0.state.s, n0.state.sd, n1.state.s, n1.state.sd, h};
  const Hermite hv{n0.state.sd, n0.state.sdd, n1.state.sd, n1.state.sdd, h};
  const Hermite ha{n0.state.sdd, n0.jerk, n1.state.sdd, n1.jerk, h};
  ProfileNode out;
  out.t = t;
  out.state = {hs.value(tau), hv.value(tau), ha.value(tau)};
  out.jerk = ha.deriv(tau);
  out.policy = n0.policy;
  return out;
}

Profile Profile::truncated_above(double s_cut) const {
  const auto cut = at_s(s_cut);
  std::vector<ProfileNode> kept;
  for (const auto& n : nodes_) {
    if (n.state.s < s_cut - 1e-14 * (1.0 + std::abs(s_cut))) kept.push_back(n);
  }
  ProfileNode end;
  end.t = cut.t;
  end.state = {s_cut, cut.sd, cut.sdd};
  end.jerk = cut.jerk;
  end.policy = kept.empty() ? nodes_.front().policy : kept.back().policy;
  kept.push_back(end);
  Profile out;
  out.nodes_ = std::move(kept);
  out.direction_ = direction_;
  out.termination_ = Termination::ReachedTarget;
  out.dt_ = dt_;
  return out;
}

Profile Profile::truncated_below(double s_cut) const {
  const auto cut = at_s(s_cut);
  std::vector<ProfileNode> kept;
  ProfileNode begin;
  begin.t = cut.t;
  begin.state = {s_cut, cut.sd, cut.sdd};
  begin.jerk = cut.jerk;
  kept.push_back(begin);
  for (const auto& n : nodes_) {
    if (n.state.s > s_cut + 1e-14 * (1.0 + std::abs(s_cut))) kept.push_back(n);
  }
  kept.front().policy = kept.size() > 1 ? kept[1].policy : nodes_.back().policy;
  Profile out;
  out.nodes_ = std::move(kept);
  out.direction_ = direction_;
  out.termination_ = termination_;
  out.dt_ = dt_;
  return out;
}

Profile Profile::mirrored(double s_end) const {
  std::vector<ProfileNode> nodes(nodes_.rbegin(), nodes_.rend());
  for (auto& n : nodes) {
    n.t = -n.t;
    n.state.s = s_end - n.state.s;
    n.state.sdd = -n.state.sdd;
  }
  Profile out;
  out.nodes_ = std::move(nodes);
  out.direction_ = direction_ == Direction::Forward ? Direction::Backward
                                                    : Direction::Forward;
  out.termination_ = termination_;
  out.dt_ = dt_;
  return out;
}

void Profile::dump_csv(std::ostream& os) const {
  os << "t,s,sd,sdd,sddd,policy\n";
  for (const auto& n : nodes_) {
    os << fmt_g12(n.t) << ',' << fmt_g12(n.state.s) << ',' << fmt_g12(n.state.sd)
       << ',' << fmt_g12(n.state.sdd) << ',' << fmt_g12(n.jerk) << ','
       << to_string(n.policy) << '\n';
  }
  os << "# direction: " << to_string(direction_) << '\n';
  os << "# termination: " << to_string(termination_) << '\n';
}

std::pair<double, double> interpolate(const Profile& profile, double s) {
  const auto smp = profile.at_s(s);
  return {smp.sd, smp.sdd};
}

// ---------------------------------------------------------------------------
// integrate

namespace {

struct Deriv {
  double s, sd, sdd;
};

struct StageFail {
  bool out_of_domain = false;
  bool empty = false;
  bool cap = false;
  bool any() const { return out_of_domain || empty || cap; }
};

struct Stepper {
  const ConstraintSet& cs;
  const JerkPolicy& policy;
  double dirsign;
  double cap;
  double slack;
  double s_end;

  // Evaluates the policy at x; flags domain exits, empty intervals, cap hits.
  Deriv eval(const State& x, StageFail& fail, double& jerk, PolicyTag& tag) const {
    if (x.s < 0 || x.s > s_end) {
      fail.out_of_domain = true;
      return {0, 0, 0};
    }
    const auto block = cs.coeffs(x.s);
    const bool banded = policy.in_band(block, cs.eps_a(), x.s);
    if (!banded && !cs.controls(block, x).feasible(slack)) {
      fail.empty = true;
      return {0, 0, 0};
    }
    std::tie(jerk, tag) = policy.evaluate(cs, block, x, cap);
    if (std::abs(jerk) > cap) {
      fail.cap = true;
      return {0, 0, 0};
    }
    return {dirsign * x.sd, dirsign * x.sdd, dirsign * jerk};
  }
};

State advance(const State& x, const Deriv& k, double h) {
  return {x.s + h * k.s, x.sd + h * k.sd, x.sdd + h * k.sdd};
}

}  // namespace

Profile integrate(const ConstraintSet& cs, const State& start, Direction dir,
                  const JerkPolicy& policy, std::optional<double> stop_s,
                  const IntegrationLimits& limits) {
  if (!(limits.dt > 0)) raise(ErrorCode::Precondition, "dt must be positive");
  if (start.sd < 0)
    raise(ErrorCode::Precondition, "integration start must have sd >= 0");
  const double s_end = cs.path().s_end();
  if (start.s < -1e-12 || start.s > s_end + 1e-12)
    raise(ErrorCode::Precondition, "integration start outside [0, s_end]");

  const double cap = limits.jerk_cap.value_or(cs.jerk_cap());
  const double dirsign = dir == Direction::Forward ? 1.0 : -1.0;
  const Stepper stepper{cs, policy, dirsign, cap, limits.empty_slack_rel, s_end};
  const double h = limits.dt;
  State start_clamped = start;
  start_clamped.s = std::clamp(start.s, 0.0, s_end);

  std::vector<ProfileNode> nodes;
  Termination term = Termination::StepLimit;

  // First node: evaluate and validate the start state.
  {
    StageFail fail;
    double jerk = 0;
    PolicyTag tag = policy.base_tag();
    (void)stepper.eval(start_clamped, fail, jerk, tag);
    ProfileNode n0;
    n0.t = 0;
    n0.state = start_clamped;
    n0.jerk = jerk;
    n0.policy = tag;
    nodes.push_back(n0);
    if (fail.empty) return Profile(std::move(nodes), dir, Termination::EmptyJerkInterval, h);
    if (fail.cap) return Profile(std::move(nodes), dir, Termination::JerkCapHit, h);
    if (fail.out_of_domain)
      return Profile(std::move(nodes), dir, Termination::OutOfRange, h);
  }

  // Targets in the direction of travel.
  const double boundary = dirsign > 0 ? s_end : 0.0;
  const auto target_hit = [](double s0, double s1, double target) -> bool {
    return (s0 - target) * (s1 - target) <= 0 && s0 != s1;
  };
  if (stop_s) {
    const double tol = 1e-12 * (1.0 + std::abs(*stop_s));
    if (std::abs(start_clamped.s - *stop_s) <= tol) {
      return Profile(std::move(nodes), dir, Termination::ReachedTarget, h);
    }
  }

  long steps = 0;
  while (true) {
    if (++steps > limits.step_limit) {
      term = Termination::StepLimit;
      break;
    }
    const ProfileNode& cur = nodes.back();
    const State x0 = cur.state;
    const double j0 = cur.jerk;

    StageFail fail;
    double js = 0;
    PolicyTag tags = cur.policy;
    const Deriv k1 = {dirsign * x0.sd, dirsign * x0.sdd, dirsign * j0};
    Deriv k2{}, k3{}, k4{};
    State x1{};
    bool have_step = false;
    if (!fail.any()) {
      k2 = stepper.eval(advance(x0, k1, h / 2), fail, js, tags);
      if (!fail.any()) k3 = stepper.eval(advance(x0, k2, h / 2), fail, js, tags);
      if (!fail.any()) k4 = stepper.eval(advance(x0, k3, h), fail, js, tags);
      if (!fail.any()) {
        x1 = {x0.s + h / 6 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s),
              x0.sd + h / 6 * (k1.sd + 2 * k2.sd + 2 * k3.sd + k4.sd),
              x0.sdd + h / 6 * (k1.sdd + 2 * k2.sdd + 2 * k3.sdd + k4.sdd)};
        have_step = true;
      }
    }

    if (!have_step) {
      // A stage failed. Try a Taylor-cubic landing from x0 onto the nearest
      // target within this step before giving up.
      const auto s_of = [&](double tau) {
        return x0.s + dirsign * (x0.sd * tau + 0.5 * x0.sdd * tau * tau +
                                 j0 * tau * tau * tau / 6.0);
      };
      double tau_land = -1;
      double target = 0;
      Termination land_term = Termination::OutOfRange;
      const double s_h = s_of(h);
      if (stop_s && target_hit(x0.s, s_h, *stop_s)) {
        tau_land = bisect(s_of, 0.0, h, *stop_s, kTimeRootTol);
        target = *stop_s;
        land_term = Termination::ReachedTarget;
      } else if (target_hit(x0.s, s_h, boundary)) {
        tau_land = bisect(s_of, 0.0, h, boundary, kTimeRootTol);
        target = boundary;
        land_term = Termination::OutOfRange;
      }
      if (tau_land > 0) {
        State xl{target,
                 x0.sd + x0.sdd * tau_land + 0.5 * j0 * tau_land * tau_land,
                 x0.sdd + j0 * tau_land};
        StageFail lf;
        double jl = j0;
        PolicyTag tl = cur.policy;
        (void)stepper.eval(xl, lf, jl, tl);
        if (!lf.any()) {
          ProfileNode n;
          n.t = dirsign * (std::abs(cur.t) + tau_land);
          n.state = xl;
          n.jerk = jl;
          n.policy = tl;
          nodes.push_back(n);
          term = land_term;
          break;
        }
      }
      term = fail.empty ? Termination::EmptyJerkInterval
             : fail.cap ? Termination::JerkCapHit
                        : Termination::OutOfRange;
      break;
    }

    // End-of-step policy evaluation (the node's stored jerk).
    StageFail endfail;
    double j1 = j0;
    PolicyTag tag1 = cur.policy;
    Deriv m1 = k4;
    const bool end_in_domain = x1.s >= 0 && x1.s <= s_end;
    if (end_in_domain) {
      const Deriv m = stepper.eval(x1, endfail, j1, tag1);
      if (!endfail.any()) m1 = m;
    }

    // Dense output over the step for event location.
    const Hermite hs{x0.s, k1.s, x1.s, m1.s, h};
    const Hermite hv{x0.sd, k1.sd, x1.sd, m1.sd, h};
    const Hermite ha{x0.sdd, k1.sdd, x1.sdd, m1.sdd, h};

    double tau_event = h + 1;
    double s_target = 0;
    Termination ev_term = Termination::StepLimit;
    if (stop_s && target_hit(x0.s, x1.s, *stop_s)) {
      tau_event = bisect([&](double t) { return hs.value(t); }, 0.0, h, *stop_s,
                         kTimeRootTol);
      s_target = *stop_s;
      ev_term = Termination::ReachedTarget;
    }
    if (target_hit(x0.s, x1.s, boundary)) {
      const double tb = bisect([&](double t) { return hs.value(t); }, 0.0, h,
                               boundary, kTimeRootTol);
      if (tb < tau_event) {
        tau_event = tb;
        s_target = boundary;
        ev_term = Termination::OutOfRange;
      }
    }
    if (x1.sd <= 0) {
      const double tv = bisect([&](double t) { return hv.value(t); }, 0.0, h,
                               0.0, kTimeRootTol);
      if (tv < tau_event) {
        tau_event = tv;
        ev_term = Termination::VelocityNonpositive;
      }
    }

    if (tau_event <= h) {
      State xl{hs.value(tau_event), hv.value(tau_event), ha.value(tau_event)};
      if (ev_term != Termination::VelocityNonpositive) xl.s = s_target;
      else xl.sd = 0.0;
      StageFail lf;
      double jl = j0;
      PolicyTag tl = cur.policy;
      if (xl.s >= 0 && xl.s <= s_end) (void)stepper.eval(xl, lf, jl, tl);
      ProfileNode n;
      n.t = dirsign * (std::abs(cur.t) + tau_event);
      n.state = xl;
      n.jerk = jl;
      n.policy = tl;
      nodes.push_back(n);
      term = ev_term;
      break;
    }

    if (endfail.empty || endfail.cap) {
      term = endfail.empty ? Termination::EmptyJerkInterval
                           : Termination::JerkCapHit;
      break;
    }

    ProfileNode n;
    n.t = dirsign * (std::abs(cur.t) + h);
    n.state = x1;
    n.jerk = j1;
    n.policy = tag1;
    nodes.push_back(n);
  }

  return Profile(std::move(nodes), dir, term, h);
}

// ---------------------------------------------------------------------------
// ProfileChain

ProfileChain::ProfileChain(Profile p, PolicyTag tag) {
  ChainPiece piece;
  piece.profile = std::move(p);
  piece.tag = tag;
  pieces_.push_back(std::move(piece));
}

const Profile& ProfileChain::last_integrated(Direction dir) const {
  if (pieces_.empty()) raise(ErrorCode::Precondition, "empty chain");
  return dir == Direction::Forward ? pieces_.back().profile
                                   : pieces_.front().profile;
}

Profile::Sample ProfileChain::at_s(double s) const {
  if (pieces_.empty()) raise(ErrorCode::RangeError, "empty chain");
  const double tol = 1e-12 * (1.0 + std::abs(s));
  if (s < s_min() - tol || s > s_max() + tol)
    raise(ErrorCode::RangeError, "s=" + fmt_g12(s) + " outside chain range");
  for (const auto& p : pieces_) {
    if (s >= p.profile.s_min() - tol && s <= p.profile.s_max() + tol)
      return p.profile.at_s(std::clamp(s, p.profile.s_min(), p.profile.s_max()));
  }
  // Inside a (tiny) junction gap between consecutive pieces: use the nearest
  // piece edge.
  for (size_t i = 0; i + 1 < pieces_.size(); ++i) {
    const double hi = pieces_[i].profile.s_max();
    const double lo = pieces_[i + 1].profile.s_min();
    if (s > hi && s < lo) {
      return s - hi <= lo - s ? pieces_[i].profile.at_s(hi)
                              : pieces_[i + 1].profile.at_s(lo);
    }
  }
  raise(ErrorCode::RangeError, "s=" + fmt_g12(s) + " outside chain range");
}

double ProfileChain::time_to(double s, Direction dir) const {
  if (pieces_.empty()) raise(ErrorCode::RangeError, "empty chain");
  const double tol = 1e-12 * (1.0 + std::abs(s));
  double acc = 0;
  if (dir == Direction::Forward) {
    for (const auto& p : pieces_) {
      if (s > p.profile.s_max() + tol) {
        acc += p.profile.duration();
        continue;
      }
      acc += p.profile.at_s(std::clamp(s, p.profile.s_min(), p.profile.s_max())).t -
             p.profile.t_min();
      return acc;
    }
  } else {
    for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
      const auto& p = it->profile;
      if (s < p.s_min() - tol) {
        acc += p.duration();
        continue;
      }
      acc += p.t_max() - p.at_s(std::clamp(s, p.s_min(), p.s_max())).t;
      return acc;
    }
  }
  raise(ErrorCode::RangeError, "s outside chain range");
}

double ProfileChain::total_time() const {
  double acc = 0;
  for (const auto& p : pieces_) acc += p.profile.duration();
  return acc;
}

ProfileChain ProfileChain::mirrored(double s_end) const {
  ProfileChain out;
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
    ChainPiece p;
    p.profile = it->profile.mirrored(s_end);
    p.tag = it->tag;
    p.singular_band = it->singular_band;
    out.pieces_.push_back(std::move(p));
  }
  return out;
}

}  // namespace topp3
