#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topp3/constraints.hpp"

namespace topp3 {

enum class Direction { Forward, Backward };
enum class PolicyTag { MaxJerk, MinJerk, SingularJerk };
enum class Termination {
  ReachedTarget,        // landed exactly on stop_s
  EmptyJerkInterval,    // gamma > eta at a stage evaluation point
  VelocityNonpositive,  // sd reached 0
  OutOfRange,           // landed on the [0, s_end] boundary
  JerkCapHit,           // |policy jerk| exceeded the cap
  StepLimit,
};

const char* to_string(Direction d);
const char* to_string(PolicyTag t);
const char* to_string(Termination t);

struct ProfileNode {
  double t = 0;        // time relative to the profile start; <= 0 for backward
  State state;
  double jerk = 0;     // applied path jerk at this node
  PolicyTag policy = PolicyTag::MaxJerk;
};

// Near a singular position the Eq.-(3) bounds are 0/0-ill-conditioned; inside
// the |a_row| window the integrator applies `jerk` (the Eq.-(10) value bound
// to a Singularity) instead of gamma/eta.
struct SingularBand {
  int row = -1;
  double s_star = 0;
  double window_mult = 10.0;  // window: |a_row(s)| <= window_mult*eps_a*(1+|a|inf)
  std::function<double(const State&)> jerk;
};

class JerkPolicy {
 public:
  static JerkPolicy max_jerk();
  static JerkPolicy min_jerk();
  static JerkPolicy custom(std::function<double(const State&)> fn);
  JerkPolicy with_band(SingularBand band) const;

  // Applied jerk and tag at a state. Unbounded gamma/eta markers are clamped
  // to +-jerk_cap here; finite values are returned as-is.
  std::pair<double, PolicyTag> evaluate(const ConstraintSet& cs,
                                        const ConstraintRowBlock& block,
                                        const State& x, double jerk_cap) const;
  bool in_band(const ConstraintRowBlock& block, double eps_a, double s) const;
  PolicyTag base_tag() const { return base_tag_; }

 private:
  PolicyTag base_tag_ = PolicyTag::MaxJerk;
  std::function<double(const State&)> custom_;
  std::optional<SingularBand> band_;
};

struct IntegrationLimits {
  double dt = 1e-3;
  std::optional<double> jerk_cap;  // default: the constraint set's cap
  long step_limit = 500000;
  double empty_slack_rel = 1e-6;   // slack on the gamma <= eta test
};

// A profile: states sampled along a max/min/singular-jerk integration, stored
// with s increasing regardless of integration sense. Node times are relative
// to the integration start (nonpositive for backward profiles).
class Profile {
 public:
  Profile() = default;
  Profile(std::vector<ProfileNode> nodes, Direction dir, Termination term,
          double dt);

  const std::vector<ProfileNode>& nodes() const { return nodes_; }
  Direction direction() const { return direction_; }
  Termination termination() const { return termination_; }
  double dt() const { return dt_; }
  bool empty() const { return nodes_.empty(); }
  int size() const { return static_cast<int>(nodes_.size()); }

  double s_min() const { return nodes_.front().state.s; }
  double s_max() const { return nodes_.back().state.s; }
  double t_min() const { return nodes_.front().t; }
  double t_max() const { return nodes_.back().t; }
  double duration() const { return t_max() - t_min(); }
  // The state where integration stopped (last in integration order).
  const ProfileNode& head() const;

  struct Sample {
    double t, sd, sdd, jerk;
  };
  // Cubic-Hermite interpolation in s; exact at nodes. RangeError outside.
  Sample at_s(double s) const;
  // State at a time within [t_min, t_max] (Hermite in t).
  ProfileNode at_time(double t) const;

  // Nodes with s <= s_cut (>= for keep_above), plus an interpolated node
  // exactly at s_cut.
  Profile truncated_above(double s_cut) const;
  Profile truncated_below(double s_cut) const;

  // Mirror map s -> s_end - s, sdd -> -sdd, t -> -t.
  Profile mirrored(double s_end) const;

  void dump_csv(std::ostream& os) const;

 private:
  int bracket(double s) const;

  std::vector<ProfileNode> nodes_;
  Direction direction_ = Direction::Forward;
  Termination termination_ = Termination::StepLimit;
  double dt_ = 0;
};

// interpolate(profile, s) -> (sd, sdd); RangeError outside the s-range.
std::pair<double, double> interpolate(const Profile& profile, double s);

// Fixed-step 4-stage integration of (sd, sdd, policy jerk) in time, forward
// or time-reversed, with the full termination taxonomy. stop_s (and the
// domain boundary) is landed on exactly via a dense-output sub-step.
Profile integrate(const ConstraintSet& cs, const State& start, Direction dir,
                  const JerkPolicy& policy,
                  std::optional<double> stop_s = std::nullopt,
                  const IntegrationLimits& limits = {});

// An ordered, s-contiguous sequence of profile pieces (a profile extended
// through singularities). Interpolation dispatches to the piece containing s.
struct ChainPiece {
  Profile profile;
  PolicyTag tag = PolicyTag::MaxJerk;
  bool singular_band = false;
};

class ProfileChain {
 public:
  ProfileChain() = default;
  explicit ProfileChain(Profile p, PolicyTag tag);

  const std::vector<ChainPiece>& pieces() const { return pieces_; }
  std::vector<ChainPiece>& pieces() { return pieces_; }
  bool empty() const { return pieces_.empty(); }

  double s_min() const { return pieces_.front().profile.s_min(); }
  double s_max() const { return pieces_.back().profile.s_max(); }
  // Termination of the piece integrated last (highest s for forward chains,
  // lowest for backward).
  const Profile& last_integrated(Direction dir) const;

  Profile::Sample at_s(double s) const;
  // Integration time from the chain's start (s_min end for forward chains)
  // accumulated across pieces up to position s.
  double time_to(double s, Direction dir) const;
  double total_time() const;

  ProfileChain mirrored(double s_end) const;

 private:
  std::vector<ChainPiece> pieces_;
};

}  // namespace topp3
