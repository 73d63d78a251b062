#include "topp3/shooting.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

const char* to_string(ShootStatus s) {
  switch (s) {
    case ShootStatus::Ok: return "Ok";
    case ShootStatus::NonConvergence: return "NonConvergence";
    case ShootStatus::NoOverlapWindow: return "NoOverlapWindow";
    case ShootStatus::DefectStalled: return "DefectStalled";
    case ShootStatus::EmptySingularCurve: return "EmptySingularCurve";
  }
  return "?";
}

namespace {

struct DefectScales {
  double sv = 1, sa = 1;
};

DefectScales chain_scales(const ProfileChain& a) {
  DefectScales sc;
  double sv = 0, sa = 0;
  for (const auto& piece : a.pieces()) {
    for (const auto& n : piece.profile.nodes()) {
      sv = std::max(sv, std::abs(n.state.sd));
      sa = std::max(sa, std::abs(n.state.sdd));
    }
  }
  sc.sv = 1.0 + sv;
  sc.sa = 1.0 + sa;
  return sc;
}

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

SegmentEnd shoot_segment(const ConstraintSet& cs, double s_i, double sd_i,
                         double sdd_i, double s_j, const JerkPolicy& policy,
                         const IntegrationLimits& limits) {
  SegmentEnd end;
  if (s_j == s_i) {
    end.sd = sd_i;
    end.sdd = sdd_i;
    end.s_reached = s_i;
    return end;
  }
  if (!(sd_i > 0)) {
    end.sd = sd_i;
    end.sdd = sdd_i;
    end.early_stop = true;
    end.s_reached = s_i;
    return end;
  }
  const Direction dir = s_j > s_i ? Direction::Forward : Direction::Backward;
  const Profile p =
      integrate(cs, State{s_i, sd_i, sdd_i}, dir, policy, s_j, limits);
  const ProfileNode& head = p.head();
  end.sd = head.state.sd;
  end.sdd = head.state.sdd;
  end.s_reached = head.state.s;
  end.early_stop = p.termination() != Termination::ReachedTarget;
  return end;
}

namespace {

// Shared assembly of the 2N+4 defect rows. Bridge mode shoots segments
// forward (i -> i+1); extension mode shoots them reversed (i+1 -> i) and
// anchors the last grid point on the singular curve.
struct DefectSystem {
  const ConstraintSet& cs;
  const ProfileChain& a;
  const ProfileChain* b = nullptr;        // bridge mode
  const SingularCurve* curve = nullptr;   // extension mode
  JerkPolicy policy;
  IntegrationLimits limits;
  DefectScales scales;
  double penalty = 1e3;
  int segments = 1;

  bool extension() const { return curve != nullptr; }

  double grid_end(const Eigen::VectorXd& x) const {
    return extension() ? curve->parent.s_star : x[2 * segments + 3];
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    const int n = segments;
    const double s_a = x[2 * n + 2];
    const double s_end = grid_end(x);
    Eigen::VectorXd f(2 * n + 4);
    for (int i = 0; i < n; ++i) {
      const double s_lo = s_a + (s_end - s_a) * i / n;
      const double s_hi = s_a + (s_end - s_a) * (i + 1) / n;
      SegmentEnd seg;
      double target_sd, target_sdd;
      if (extension()) {
        seg = shoot_segment(cs, s_hi, x[2 * (i + 1)], x[2 * (i + 1) + 1], s_lo,
                            policy, limits);
        target_sd = x[2 * i];
        target_sdd = x[2 * i + 1];
      } else {
        seg = shoot_segment(cs, s_lo, x[2 * i], x[2 * i + 1], s_hi, policy,
                            limits);
        target_sd = x[2 * (i + 1)];
        target_sdd = x[2 * (i + 1) + 1];
      }
      double dv = (seg.sd - target_sd) / scales.sv;
      double da = (seg.sdd - target_sdd) / scales.sa;
      if (seg.early_stop) {
        const double gap =
            penalty * std::abs((extension() ? s_lo : s_hi) - seg.s_reached);
        dv += gap;
        da += gap;
      }
      f[2 * i] = dv;
      f[2 * i + 1] = da;
    }
    const auto ra = a.at_s(s_a);
    f[2 * n] = (ra.sd - x[0]) / scales.sv;
    f[2 * n + 1] = (ra.sdd - x[1]) / scales.sa;
    if (extension()) {
      const double sd_c = x[2 * n + 3];
      f[2 * n + 2] = (sd_c - x[2 * n]) / scales.sv;
      f[2 * n + 3] = (curve->sdd_of_sd(sd_c) - x[2 * n + 1]) / scales.sa;
    } else {
      const auto rb = b->at_s(x[2 * n + 3]);
      f[2 * n + 2] = (rb.sd - x[2 * n]) / scales.sv;
      f[2 * n + 3] = (rb.sdd - x[2 * n + 1]) / scales.sa;
    }
    return f;
  }
};

struct NewtonOutcome {
  bool converged = false;
  ShootStatus fail = ShootStatus::NonConvergence;
  Eigen::VectorXd x;
  int iterations = 0;
};

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
  for (int i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  return x;
}

NewtonOutcome newton_solve(const DefectSystem& sys, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                           const NewtonOptions& opts, NewtonTrace* trace) {
  NewtonOutcome out;
  Eigen::VectorXd x = clamp_box(x0, lo, hi);
  const int dim = static_cast<int>(x.size());
  Eigen::VectorXd f = sys(x);
  // convergence is judged on the infinity norm; the line search descends the
  // smoother 2-norm
  double fn = f.norm();

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (trace) {
      NewtonIterate it;
      it.iteration = iter;
      it.defect_norm = inf_norm(f);
      it.step_scale = 0;
      it.anchors = {x[dim - 2], x[dim - 1]};
      trace->iterates.push_back(it);
    }
    if (inf_norm(f) <= opts.tol_f) {
      out.converged = true;
      out.x = x;
      out.iterations = iter;
      return out;
    }

    const Eigen::MatrixXd jac =
        fd_jacobian([&sys](const Eigen::VectorXd& v) { return sys(v); }, x,
                    opts.fd_step, lo, hi);

    // Newton direction via column-pivoted QR; Levenberg fallback on rank
    // deficiency or a failed line search.
    // Micro-steps make rounding-level "progress" and exhaust the iteration
    // budget; below alpha_min the direction counts as failed and the damped
    // fallback takes over.
    const double alpha_min = std::pow(0.5, opts.max_backtracks);
    const auto try_direction = [&](const Eigen::VectorXd& d) -> bool {
      if (!d.allFinite()) return false;
      double alpha = 1.0;
      for (; alpha >= alpha_min; alpha *= 0.5) {
        const Eigen::VectorXd xn = clamp_box(x + alpha * d, lo, hi);
        const Eigen::VectorXd fnew = sys(xn);
        const double fnn = fnew.norm();
        if (fnn <= (1.0 - opts.armijo * alpha) * fn) {
          x = xn;
          f = fnew;
          fn = fnn;
          if (trace && !trace->iterates.empty())
            trace->iterates.back().step_scale = alpha;
          return true;
        }
      }
      return false;
    };

    bool moved = false;
    const auto qr = jac.colPivHouseholderQr();
    if (qr.rank() == dim) moved = try_direction(qr.solve(-f));
    if (!moved) {
      double lambda = opts.levenberg_lambda0;
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtf = jac.transpose() * f;
      for (int k = 0; k < 10 && !moved; ++k, lambda *= 10.0) {
        Eigen::MatrixXd damped = jtj;
        damped.diagonal().array() += lambda;
        moved = try_direction(damped.ldlt().solve(-jtf));
      }
    }
    if (!moved) {
      out.fail = ShootStatus::DefectStalled;
      out.x = x;
      out.iterations = iter + 1;
      return out;
    }
  }
  out.fail = ShootStatus::NonConvergence;
  out.x = x;
  out.iterations = opts.max_iters;
  return out;
}

}  // namespace

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double fd_step, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi) {
  const Eigen::VectorXd f0 = f(x);
  const int rows = static_cast<int>(f0.size());
  const int cols = static_cast<int>(x.size());
  Eigen::MatrixXd jac(rows, cols);
  for (int j = 0; j < cols; ++j) {
    double h = fd_step * (1.0 + std::abs(x[j]));
    if (hi.size() == cols && x[j] + h > hi[j] && lo.size() == cols &&
        x[j] - h >= lo[j])
      h = -h;  // step inward at the upper box edge
    Eigen::VectorXd xp = x;
    xp[j] += h;
    jac.col(j) = (f(xp) - f0) / h;
  }
  return jac;
}

Eigen::VectorXd defect_bridge(const ConstraintSet& cs, const ProfileChain& a,
                              const ProfileChain& b, const Eigen::VectorXd& x,
                              const IntegrationLimits& limits,
                              const NewtonOptions& opts) {
  const int n = (static_cast<int>(x.size()) - 4) / 2;
  DefectSystem sys{cs, a, &b, nullptr, JerkPolicy::min_jerk(), limits,
                   chain_scales(a), opts.penalty_stiffness, n};
  return sys(x);
}

namespace {

// Min-jerk with the singular window: gamma is 0/0-ill-conditioned at s*
// itself, where the reversed extension segments start. The row-tangent
// variant keeps the flow on the row-k manifold under time reversal.
JerkPolicy extension_policy(const ConstraintSet& cs, const Singularity& sing) {
  const ConstraintSet* csp = &cs;
  return JerkPolicy::min_jerk().with_band(SingularBand{
      sing.row, sing.s_star, 10.0, [csp, sing](const State& x) {
        return row_tangent_jerk(*csp, sing, std::max(x.sd, 1e-9), x.sdd);
      }});
}

}  // namespace

Eigen::VectorXd defect_extension(const ConstraintSet& cs,
                                 const ProfileChain& a,
                                 const SingularCurve& curve,
                                 const Eigen::VectorXd& x,
                                 const IntegrationLimits& limits,
                                 const NewtonOptions& opts) {
  const int n = (static_cast<int>(x.size()) - 4) / 2;
  DefectSystem sys{cs, a, nullptr, &curve, extension_policy(cs, curve.parent),
                   limits, chain_scales(a), opts.penalty_stiffness, n};
  return sys(x);
}

namespace {

// Interior unknowns from a single min-jerk shot along the grid; grid points
// past the shot's reach fall back to linear interpolation between the anchor
// states. A plain two-anchor interpolation puts the interior states far off
// any min-jerk flow, which leaves every segment early-stopped and the Newton
// iteration stuck on the penalty plateau. The shot leaves from `shot_start`
// (the A anchor for bridges; the curve point for extensions, whose connection
// is only stable backward in time).
Eigen::VectorXd initial_guess(const ConstraintSet& cs, const JerkPolicy& policy,
                              const IntegrationLimits& limits, int n,
                              double s_a, double sd_a, double sdd_a,
                              double s_grid_end, double anchor2, double sd_b,
                              double sdd_b, const State& shot_start,
                              double shot_target) {
  Eigen::VectorXd x(2 * n + 4);
  Profile shot;
  if (shot_start.sd > 0 && std::abs(shot_target - shot_start.s) > 1e-12) {
    shot = integrate(cs, shot_start,
                     shot_target > shot_start.s ? Direction::Forward
                                                : Direction::Backward,
                     policy, shot_target, limits);
  }
  for (int i = 0; i <= n; ++i) {
    const double w = n == 0 ? 0.0 : static_cast<double>(i) / n;
    const double s_i = s_a + w * (s_grid_end - s_a);
    bool from_shot = false;
    if (!shot.empty() && shot.size() >= 2 && s_i >= shot.s_min() &&
        s_i <= shot.s_max()) {
      const auto smp = shot.at_s(s_i);
      if (smp.sd > 0) {
        x[2 * i] = smp.sd;
        x[2 * i + 1] = smp.sdd;
        from_shot = true;
      }
    }
    if (!from_shot) {
      x[2 * i] = (1 - w) * sd_a + w * sd_b;
      x[2 * i + 1] = (1 - w) * sdd_a + w * sdd_b;
    }
  }
  x[2 * n + 2] = s_a;
  x[2 * n + 3] = anchor2;
  return x;
}

Profile single_node_profile(const State& x, double dt) {
  ProfileNode n;
  n.state = x;
  n.policy = PolicyTag::MinJerk;
  return Profile({n}, Direction::Forward, Termination::ReachedTarget, dt);
}

}  // namespace

BridgeResult solve_bridge(const ConstraintSet& cs, const ProfileChain& a,
                          const ProfileChain& b, int segments,
                          const NewtonOptions& opts,
                          const IntegrationLimits& limits) {
  BridgeResult res;
  if (segments < 1) raise(ErrorCode::Precondition, "segments must be >= 1");
  if (a.s_min() > b.s_max()) {
    res.status = ShootStatus::NoOverlapWindow;
    return res;
  }

  double a_lo = a.s_min(), a_hi = a.s_max();
  double b_lo = b.s_min(), b_hi = b.s_max();
  // If the chains overlap and one dominates pointwise, pull the search
  // window toward the overlap: s_a from above, s_b from below. (Clamping
  // both ends would forbid connections reaching past the slower chain.)
  const double ov_lo = std::max(a_lo, b_lo);
  const double ov_hi = std::min(a_hi, b_hi);
  if (ov_hi > ov_lo) {
    bool a_above = true, b_above = true;
    for (int i = 0; i <= 64; ++i) {
      const double s = ov_lo + (ov_hi - ov_lo) * i / 64.0;
      const double va = a.at_s(s).sd;
      const double vb = b.at_s(s).sd;
      if (va < vb - 1e-12) a_above = false;
      if (vb < va - 1e-12) b_above = false;
    }
    if (a_above || b_above) {
      a_hi = ov_hi;
      b_lo = ov_lo;
    }
  }

  const int dim = 2 * segments + 4;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -1e30);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, 1e30);
  lo[dim - 2] = a_lo;
  hi[dim - 2] = a_hi;
  lo[dim - 1] = b_lo;
  hi[dim - 1] = b_hi;

  DefectSystem sys{cs, a, &b, nullptr, JerkPolicy::min_jerk(), limits,
                   chain_scales(a), opts.penalty_stiffness, segments};

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Default anchors: where the two profiles cross in sd (the connection
  // necessarily swings across that point); 0.7/0.3 range points otherwise.
  double base_a = a_lo + 0.7 * (a_hi - a_lo);
  double base_b = b_lo + 0.3 * (b_hi - b_lo);
  if (ov_hi > ov_lo) {
    double prev = a.at_s(ov_lo).sd - b.at_s(ov_lo).sd;
    for (int i = 1; i <= 128; ++i) {
      const double s = ov_lo + (ov_hi - ov_lo) * i / 128.0;
      const double diff = a.at_s(s).sd - b.at_s(s).sd;
      if (prev * diff <= 0.0) {
        base_a = std::clamp(s - 0.02 * (a_hi - a_lo), a_lo, a_hi);
        base_b = std::clamp(s + 0.02 * (b_hi - b_lo), b_lo, b_hi);
        break;
      }
      prev = diff;
    }
  }

  ShootStatus last_fail = ShootStatus::NonConvergence;
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    double guess_a = opts.guess_s_a.value_or(base_a);
    double guess_b = opts.guess_s_b.value_or(base_b);
    if (attempt > 0) {
      guess_a = std::clamp(
          guess_a + unit(rng) * opts.restart_jitter * (a_hi - a_lo), a_lo, a_hi);
      guess_b = std::clamp(
          guess_b + unit(rng) * opts.restart_jitter * (b_hi - b_lo), b_lo, b_hi);
    }
    const auto ra = a.at_s(guess_a);
    const auto rb = b.at_s(guess_b);
    const Eigen::VectorXd x0 = initial_guess(
        cs, JerkPolicy::min_jerk(), limits, segments, guess_a, ra.sd, ra.sdd,
        guess_b, guess_b, rb.sd, rb.sdd, State{guess_a, ra.sd, ra.sdd},
        guess_b);

    NewtonTrace trace;
    NewtonTrace* tr = opts.collect_trace ? &trace : nullptr;
    const NewtonOutcome nt = newton_solve(sys, x0, lo, hi, opts, tr);
    if (opts.collect_trace) {
      res.trace.iterates.insert(res.trace.iterates.end(),
                                trace.iterates.begin(), trace.iterates.end());
      res.trace.restarts = attempt;
    }
    if (!nt.converged) {
      last_fail = nt.fail;
      continue;
    }

    const double s_a = nt.x[dim - 2];
    const double s_b = nt.x[dim - 1];
    const auto ra_fin = a.at_s(s_a);
    Profile bridge;
    if (std::abs(s_b - s_a) <= 1e-12 * (1.0 + std::abs(s_a))) {
      bridge = single_node_profile({s_a, ra_fin.sd, ra_fin.sdd}, limits.dt);
    } else {
      bridge = integrate(cs, State{s_a, ra_fin.sd, ra_fin.sdd},
                         Direction::Forward, JerkPolicy::min_jerk(), s_b, limits);
    }
    // Verify the single-shot re-integration lands on B.
    const DefectScales sc = sys.scales;
    double resid = 1e30;
    if (!bridge.empty()) {
      const auto& head = bridge.head();
      if (head.state.s >= b.s_min() - 1e-9 && head.state.s <= b.s_max() + 1e-9) {
        const auto rb_fin = b.at_s(std::clamp(head.state.s, b.s_min(), b.s_max()));
        resid = std::max(std::abs(head.state.sd - rb_fin.sd) / sc.sv,
                         std::abs(head.state.sdd - rb_fin.sdd) / sc.sa);
        resid = std::max(resid, std::abs(head.state.s - s_b));
      }
    }
    if (resid <= 10.0 * opts.tol_f) {
      res.status = ShootStatus::Ok;
      res.bridge = std::move(bridge);
      res.s_a = s_a;
      res.s_b = s_b;
      res.landing_residual = resid;
      res.iterations = nt.iterations;
      res.restarts = attempt;
      return res;
    }
    last_fail = ShootStatus::NonConvergence;
  }
  res.status = last_fail;
  res.restarts = opts.restarts;
  return res;
}

ExtensionShootResult solve_extension(const ConstraintSet& cs,
                                     const ProfileChain& a,
                                     const SingularCurve& curve, int segments,
                                     const NewtonOptions& opts,
                                     const IntegrationLimits& limits) {
  ExtensionShootResult res;
  if (segments < 1) raise(ErrorCode::Precondition, "segments must be >= 1");
  if (!(curve.sd_max > 0)) {
    res.status = ShootStatus::EmptySingularCurve;
    return res;
  }

  const double a_lo = a.s_min(), a_hi = a.s_max();
  const double c_lo = std::max(curve.sd_min, 1e-3 * curve.sd_max);
  const double c_hi = curve.sd_max;

  const int dim = 2 * segments + 4;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -1e30);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, 1e30);
  lo[dim - 2] = a_lo;
  hi[dim - 2] = a_hi;
  lo[dim - 1] = c_lo;
  hi[dim - 1] = c_hi;

  const JerkPolicy policy = extension_policy(cs, curve.parent);

  DefectSystem sys{cs, a, nullptr, &curve, policy, limits,
                   chain_scales(a), opts.penalty_stiffness, segments};

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Landing-velocity guess: extrapolate the diverged head along the row-k
  // manifold, on which sd^3 grows at rate -3 d_k / b_k per unit s. The curve
  // interval often runs all the way to the sd cap, which makes its midpoint a
  // far-off-scale start.
  const State head = a.pieces().back().profile.head().state;
  const double ride_rate = -3.0 * curve.d_k / curve.b_k;
  const double head_sd3 = std::max(head.sd, 0.0) * head.sd * head.sd;
  const double extrapolated = std::cbrt(std::max(
      head_sd3 + ride_rate * (curve.parent.s_star - head.s), 1e-12));

  ShootStatus last_fail = ShootStatus::NonConvergence;
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    double guess_a = opts.guess_s_a.value_or(a_lo + 0.7 * (a_hi - a_lo));
    double guess_c =
        opts.guess_sd_c.value_or(std::clamp(extrapolated, c_lo, c_hi));
    if (attempt > 0) {
      guess_a = std::clamp(guess_a + unit(rng) * opts.restart_jitter * (a_hi - a_lo),
                           a_lo, a_hi);
      guess_c = std::clamp(guess_c + unit(rng) * opts.restart_jitter * (c_hi - c_lo),
                           c_lo, c_hi);
    }
    const auto ra = a.at_s(guess_a);
    const double sdd_c0 = curve.sdd_of_sd(guess_c);
    const Eigen::VectorXd x0 = initial_guess(
        cs, policy, limits, segments, guess_a, ra.sd, ra.sdd,
        curve.parent.s_star, guess_c, guess_c, sdd_c0,
        State{curve.parent.s_star, guess_c, sdd_c0}, guess_a);

    NewtonTrace trace;
    NewtonTrace* tr = opts.collect_trace ? &trace : nullptr;
    const NewtonOutcome nt = newton_solve(sys, x0, lo, hi, opts, tr);
    if (opts.collect_trace) {
      res.trace.iterates.insert(res.trace.iterates.end(),
                                trace.iterates.begin(), trace.iterates.end());
      res.trace.restarts = attempt;
    }
    if (!nt.converged) {
      last_fail = nt.fail;
      continue;
    }

    const double s_a = nt.x[dim - 2];
    const double sd_c = nt.x[dim - 1];
    // The connection is only stable backward in time (forward min-jerk flows
    // are repelled from the max singular curve), so the single-run
    // re-integration leaves the curve point and lands on A.
    Profile bridge =
        integrate(cs, State{curve.parent.s_star, sd_c, curve.sdd_of_sd(sd_c)},
                  Direction::Backward, policy, s_a, limits);
    const DefectScales sc = sys.scales;
    double resid = 1e30;
    if (!bridge.empty()) {
      const auto ra_fin = a.at_s(s_a);
      const State landing = bridge.head().state;
      resid = std::max(std::abs(landing.sd - ra_fin.sd) / sc.sv,
                       std::abs(landing.sdd - ra_fin.sdd) / sc.sa);
      resid = std::max(resid, std::abs(landing.s - s_a));
    }
    if (resid <= 10.0 * opts.tol_f) {
      res.status = ShootStatus::Ok;
      res.bridge = std::move(bridge);
      res.s_a = s_a;
      res.sd_c = sd_c;
      res.landing_residual = resid;
      res.iterations = nt.iterations;
      res.restarts = attempt;
      return res;
    }
    last_fail = ShootStatus::NonConvergence;
  }
  res.status = last_fail;
  res.restarts = opts.restarts;
  return res;
}

}  // namespace topp3
