#include "topp3/solver.hpp"

#include <algorithm>
#include <cmath>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Ok: return "ok";
    case SolveStatus::InfeasibleBoundary: return "InfeasibleBoundary";
    case SolveStatus::NoConnection: return "NoConnection";
    case SolveStatus::ExtensionFailed: return "ExtensionFailed";
  }
  return "?";
}

std::vector<std::string> Topp3Solution::structure_tags() const {
  std::vector<std::string> tags;
  tags.reserve(pieces.size());
  for (const auto& p : pieces) tags.emplace_back(to_string(p.tag));
  return tags;
}

namespace {

bool divergent(Termination t) {
  return t == Termination::EmptyJerkInterval || t == Termination::JerkCapHit;
}

// Smallest s* strictly greater than last_s - scan_cell on the preferred
// side (forward case; mirrored comparison for backward).
const Singularity* next_singularity(const std::vector<Singularity>& sings,
                                    double last_s, double scan_cell,
                                    Direction dir, CurveSide wanted) {
  const Singularity* best = nullptr;
  for (const auto& sing : sings) {
    const bool ahead = dir == Direction::Forward
                           ? sing.s_star > last_s - scan_cell
                           : sing.s_star < last_s + scan_cell;
    if (!ahead) continue;
    if (best == nullptr ||
        (dir == Direction::Forward ? sing.s_star < best->s_star
                                   : sing.s_star > best->s_star)) {
      best = &sing;
    } else if (sing.s_star == best->s_star && sing.side == wanted &&
               best->side != wanted) {
      best = &sing;
    }
  }
  if (best && best->side != wanted) {
    // another row at the same position may carry the wanted side
    for (const auto& sing : sings) {
      if (sing.s_star == best->s_star && sing.side == wanted) return &sing;
    }
  }
  return best;
}

// Shooting grids to try in order: the configured N, then refinements up to
// the practical cap of 8 (hot short profiles with a long gap occasionally
// need shorter segments to tame the forward-shoot sensitivity).
std::vector<int> segment_ladder(int n) {
  std::vector<int> out{n};
  if (2 * n > n && 2 * n < 8) out.push_back(2 * n);
  if (n < 8) out.push_back(8);
  return out;
}

struct ChainBuildResult {
  ProfileChain chain;
  int extensions = 0;
  bool failed = false;
  double failed_s_star = 0;
  std::string message;
};

ChainBuildResult build_chain(const ConstraintSet& cs, const State& start,
                             Direction dir,
                             const std::vector<Singularity>& sings,
                             const SolverOptions& opts) {
  ChainBuildResult out;
  out.chain = ProfileChain(
      integrate(cs, start, dir, JerkPolicy::max_jerk(), std::nullopt,
                opts.limits),
      PolicyTag::MaxJerk);
  const double scan_cell =
      opts.scan_step.value_or(cs.path().s_end() / 2000.0);
  const CurveSide wanted =
      dir == Direction::Forward ? CurveSide::MaxCurve : CurveSide::MinCurve;

  while (out.extensions < opts.max_extensions) {
    const Profile& last = out.chain.last_integrated(dir);
    if (!divergent(last.termination())) break;
    const double last_s =
        dir == Direction::Forward ? out.chain.s_max() : out.chain.s_min();
    const Singularity* sing =
        next_singularity(sings, last_s, scan_cell, dir, wanted);
    if (sing == nullptr) break;
    if (sing->side != wanted) {
      out.failed = true;
      out.failed_s_star = sing->s_star;
      out.message = "no " + std::string(to_string(wanted)) +
                    " singular curve at s*=" + fmt_g12(sing->s_star);
      return out;
    }
    ExtensionOutcome ext;
    for (const int n : segment_ladder(opts.segments)) {
      ext = extend_profile(cs, out.chain, *sing, dir, n, opts.newton,
                           opts.limits, opts.sd_cap);
      if (ext.status == ShootStatus::Ok || ext.noop) break;
    }
    if (ext.noop) break;
    if (ext.status != ShootStatus::Ok) {
      out.failed = true;
      out.failed_s_star = sing->s_star;
      out.message = "extension at s*=" + fmt_g12(sing->s_star) +
                    " failed: " + to_string(ext.status);
      return out;
    }
    out.chain = std::move(ext.chain);
    ++out.extensions;
  }
  if (out.extensions >= opts.max_extensions) {
    out.failed = true;
    out.failed_s_star =
        dir == Direction::Forward ? out.chain.s_max() : out.chain.s_min();
    out.message = "extension budget exhausted";
  }
  return out;
}

void append_piece(std::vector<SolutionPiece>& pieces, const ChainPiece& src,
                  double& t_acc) {
  if (src.profile.size() < 2) return;  // degenerate slice
  if (!pieces.empty() && pieces.back().tag == src.tag &&
      pieces.back().singular_band == src.singular_band) {
    // two adjacent pieces of the same policy are one piece (e.g. the final
    // bridge attaching onto an extension bridge); keep the max-min
    // alternation of the solution structure
    SolutionPiece& prev = pieces.back();
    std::vector<ProfileNode> nodes = prev.profile.nodes();
    const double t_shift = nodes.back().t - src.profile.t_min();
    const double s_join = nodes.back().state.s;
    for (const auto& n : src.profile.nodes()) {
      if (n.state.s <= s_join + 1e-14 * (1.0 + std::abs(s_join))) continue;
      ProfileNode shifted = n;
      shifted.t += t_shift;
      nodes.push_back(shifted);
    }
    prev.profile = Profile(std::move(nodes), Direction::Forward,
                           src.profile.termination(), prev.profile.dt());
    prev.t_end = prev.t_begin + prev.profile.duration();
    t_acc = prev.t_end;
    return;
  }
  SolutionPiece p;
  p.profile = src.profile;
  p.tag = src.tag;
  p.singular_band = src.singular_band;
  p.t_begin = t_acc;
  p.t_end = t_acc + src.profile.duration();
  t_acc = p.t_end;
  pieces.push_back(std::move(p));
}

}  // namespace

Topp3Solution solve(const Topp3Problem& problem) {
  Topp3Solution sol;
  const ConstraintSet& cs = problem.cs;
  const PathSpec& path = *problem.path;
  const SolverOptions& opts = problem.opts;

  const PathState b0 = boundary_state(path, problem.bc, Endpoint::Start);
  const PathState b1 = boundary_state(path, problem.bc, Endpoint::End);
  const State x0{b0.s, b0.sd, b0.sdd};
  const State x1{b1.s, b1.sd, b1.sdd};
  if (!cs.controls(x0).feasible() || !cs.controls(x1).feasible()) {
    sol.status = SolveStatus::InfeasibleBoundary;
    sol.message = "empty jerk interval at a boundary state";
    return sol;
  }

  const auto sings = find_singularities(cs, 0.0, path.s_end(), opts.scan_step);
  log_info("solve: " + std::to_string(sings.size()) + " singularit" +
           (sings.size() == 1 ? "y" : "ies") + " on [0, " +
           fmt_g12(path.s_end()) + "]");

  ChainBuildResult fwd = build_chain(cs, x0, Direction::Forward, sings, opts);
  if (fwd.failed) {
    sol.status = SolveStatus::ExtensionFailed;
    sol.failed_s_star = fwd.failed_s_star;
    sol.message = "forward: " + fwd.message;
    return sol;
  }
  ChainBuildResult bwd = build_chain(cs, x1, Direction::Backward, sings, opts);
  if (bwd.failed) {
    sol.status = SolveStatus::ExtensionFailed;
    sol.failed_s_star = bwd.failed_s_star;
    sol.message = "backward: " + bwd.message;
    return sol;
  }
  sol.extensions_forward = fwd.extensions;
  sol.extensions_backward = bwd.extensions;

  // The bridge searches the full composite ranges first, escalating the
  // shooting grid on failure; if that still fails (the defect is noisy for
  // anchors inside a singular band at a piece junction), retry anchored on
  // the outermost pieces only.
  BridgeResult br;
  for (const int n : segment_ladder(opts.segments)) {
    br = solve_bridge(cs, fwd.chain, bwd.chain, n, opts.newton, opts.limits);
    if (br.status == ShootStatus::Ok) break;
  }
  if (br.status != ShootStatus::Ok &&
      (fwd.chain.pieces().size() > 1 || bwd.chain.pieces().size() > 1)) {
    ProfileChain fwd_tail;
    fwd_tail.pieces() = {fwd.chain.pieces().back()};
    ProfileChain bwd_head;
    bwd_head.pieces() = {bwd.chain.pieces().front()};
    for (const int n : segment_ladder(opts.segments)) {
      br = solve_bridge(cs, fwd_tail, bwd_head, n, opts.newton, opts.limits);
      if (br.status == ShootStatus::Ok) break;
    }
  }
  sol.bridge_trace = br.trace;
  if (br.status != ShootStatus::Ok) {
    sol.status = SolveStatus::NoConnection;
    sol.message = std::string("bridge failed: ") + to_string(br.status);
    return sol;
  }
  sol.bridge_iterations = br.iterations;
  sol.bridge_restarts = br.restarts;
  log_info("solve: bridge s_A=" + fmt_g12(br.s_a) + " s_B=" + fmt_g12(br.s_b) +
           " in " + std::to_string(br.iterations) + " iterations, " +
           std::to_string(br.restarts) + " restarts");

  // Assemble: forward chain up to s_A, the bridge, backward chain from s_B.
  double t_acc = 0;
  const double tol_a = 1e-12 * (1.0 + std::abs(br.s_a));
  for (const auto& piece : fwd.chain.pieces()) {
    if (piece.profile.s_max() <= br.s_a + tol_a) {
      append_piece(sol.pieces, piece, t_acc);
      if (piece.profile.s_max() >= br.s_a - tol_a) break;
      continue;
    }
    if (piece.profile.s_min() < br.s_a - tol_a) {
      ChainPiece cut = piece;
      cut.profile = piece.profile.truncated_above(br.s_a);
      append_piece(sol.pieces, cut, t_acc);
    }
    break;
  }
  if (br.bridge.size() >= 2) {
    ChainPiece bp;
    bp.profile = br.bridge;
    bp.tag = PolicyTag::MinJerk;
    append_piece(sol.pieces, bp, t_acc);
  }
  const double tol_b = 1e-12 * (1.0 + std::abs(br.s_b));
  for (const auto& piece : bwd.chain.pieces()) {
    if (piece.profile.s_max() <= br.s_b + tol_b) continue;
    if (piece.profile.s_min() < br.s_b - tol_b) {
      ChainPiece cut = piece;
      cut.profile = piece.profile.truncated_below(br.s_b);
      append_piece(sol.pieces, cut, t_acc);
      continue;
    }
    append_piece(sol.pieces, piece, t_acc);
  }

  sol.duration = t_acc;
  for (size_t i = 0; i + 1 < sol.pieces.size(); ++i)
    sol.switch_positions.push_back(sol.pieces[i].profile.s_max());
  sol.status = SolveStatus::Ok;
  return sol;
}

std::vector<TrajectorySample> to_trajectory(const Topp3Solution& solution,
                                            const PathSpec& path,
                                            double sample_dt) {
  if (!(sample_dt > 0)) raise(ErrorCode::Precondition, "sample_dt must be > 0");
  if (!solution.ok()) raise(ErrorCode::Precondition, "solution is not Ok");
  std::vector<TrajectorySample> out;
  const double total = solution.duration;
  size_t piece_idx = 0;
  const long n = static_cast<long>(std::floor(total / sample_dt));
  for (long k = 0;; ++k) {
    double t = k * sample_dt;
    if (k > n) t = total;
    while (piece_idx + 1 < solution.pieces.size() &&
           t > solution.pieces[piece_idx].t_end + 1e-15)
      ++piece_idx;
    const SolutionPiece& piece = solution.pieces[piece_idx];
    const double local =
        std::clamp(piece.profile.t_min() + (t - piece.t_begin),
                   piece.profile.t_min(), piece.profile.t_max());
    const ProfileNode node = piece.profile.at_time(local);

    TrajectorySample smp;
    smp.t = t;
    smp.s = node.state.s;
    smp.sd = node.state.sd;
    smp.sdd = node.state.sdd;
    smp.sddd = node.jerk;
    const auto d = path.eval_derivatives(smp.s, 3);
    const double sd2 = smp.sd * smp.sd;
    smp.q = d[0];
    smp.qd = d[1] * smp.sd;
    smp.qdd = d[2] * sd2 + d[1] * smp.sdd;
    smp.qddd = d[3] * (sd2 * smp.sd) + 3.0 * d[2] * smp.sd * smp.sdd +
               d[1] * smp.sddd;
    out.push_back(std::move(smp));
    if (k > n) break;
  }
  return out;
}

ValidationReport validate(const std::vector<TrajectorySample>& samples,
                          const ConstraintSet& cs) {
  ValidationReport rep;
  rep.per_row_max_relative.assign(cs.rows(), -1e30);
  rep.n_samples = static_cast<int>(samples.size());
  rep.worst_relative = -1e30;
  for (size_t k = 0; k < samples.size(); ++k) {
    const auto& smp = samples[k];
    const auto block = cs.coeffs(smp.s);
    const double sd3 = smp.sd * smp.sd * smp.sd;
    for (int i = 0; i < block.rows(); ++i) {
      const double aj = block.a[i] * smp.sddd;
      const double bv = block.b[i] * smp.sd * smp.sdd;
      const double cv = block.c[i] * sd3;
      const double value = aj + bv + cv + block.d[i];
      const double scale =
          1.0 + std::abs(aj) + std::abs(bv) + std::abs(cv) + std::abs(block.d[i]);
      const double rel = value / scale;
      rep.per_row_max_relative[i] = std::max(rep.per_row_max_relative[i], rel);
      if (rel > rep.worst_relative) {
        rep.worst_relative = rel;
        rep.worst = {i, value, rel, static_cast<int>(k)};
      }
    }
  }
  if (samples.empty()) rep.worst_relative = 0;
  return rep;
}

}  // namespace topp3
