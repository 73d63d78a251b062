#include "topp3/extension.hpp"

#include <cmath>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

namespace {

double junction_gap(const State& a, const State& b, double sv, double sa) {
  return std::max({std::abs(a.s - b.s), std::abs(a.sd - b.sd) / sv,
                   std::abs(a.sdd - b.sdd) / sa});
}

ProfileChain truncate_chain_above(const ProfileChain& chain, double s_cut) {
  ProfileChain out;
  const double tol = 1e-12 * (1.0 + std::abs(s_cut));
  for (const auto& piece : chain.pieces()) {
    if (piece.profile.s_max() <= s_cut + tol) {
      out.pieces().push_back(piece);
      if (piece.profile.s_max() >= s_cut - tol) break;
      continue;
    }
    if (piece.profile.s_min() < s_cut - tol) {
      ChainPiece cut = piece;
      cut.profile = piece.profile.truncated_above(s_cut);
      out.pieces().push_back(std::move(cut));
    }
    break;
  }
  return out;
}

ProfileChain truncate_chain_below(const ProfileChain& chain, double s_cut) {
  ProfileChain out;
  const double tol = 1e-12 * (1.0 + std::abs(s_cut));
  for (const auto& piece : chain.pieces()) {
    if (piece.profile.s_min() >= s_cut - tol) {
      out.pieces().push_back(piece);
      continue;
    }
    if (piece.profile.s_max() > s_cut + tol) {
      ChainPiece cut = piece;
      cut.profile = piece.profile.truncated_below(s_cut);
      out.pieces().push_back(std::move(cut));
    }
  }
  return out;
}

Singularity mirror_singularity(const ConstraintSet& mirrored_cs,
                               const Singularity& sing, double s_end,
                               int n_dof) {
  // An upper jerk row's curve maps to the mirrored lower row's and vice
  // versa; the side flips with the sign of b.
  Singularity m;
  m.s_star = s_end - sing.s_star;
  m.row = sing.row < n_dof ? sing.row + n_dof : sing.row - n_dof;
  m.bracket_lo = s_end - sing.bracket_hi;
  m.bracket_hi = s_end - sing.bracket_lo;
  m.b_at_star = mirrored_cs.coeffs(m.s_star).b[m.row];
  m.side = m.b_at_star > 0 ? CurveSide::MaxCurve : CurveSide::MinCurve;
  return m;
}

}  // namespace

ExtensionOutcome extend_profile(const ConstraintSet& cs,
                                const ProfileChain& chain,
                                const Singularity& sing, Direction dir,
                                int segments, const NewtonOptions& opts,
                                const IntegrationLimits& limits,
                                double sd_cap) {
  ExtensionOutcome out;
  const double s_end = cs.path().s_end();

  if (dir == Direction::Backward) {
    if (sing.side != CurveSide::MinCurve)
      raise(ErrorCode::Precondition,
            "backward extension requires a minimum singular curve");
    const ConstraintSet mcs = cs.mirrored();
    const Singularity msing =
        mirror_singularity(mcs, sing, s_end, cs.path().n_dof());
    ExtensionOutcome m = extend_profile(mcs, chain.mirrored(s_end), msing,
                                        Direction::Forward, segments, opts,
                                        limits, sd_cap);
    m.chain = m.chain.mirrored(s_end);
    m.s_attach = s_end - m.s_attach;
    m.sdd_curve = -m.sdd_curve;
    return m;
  }

  if (sing.side != CurveSide::MaxCurve)
    raise(ErrorCode::Precondition,
          "forward extension requires a maximum singular curve");

  const double tol = 1e-9 * (1.0 + std::abs(sing.s_star));
  if (chain.s_max() >= sing.s_star + tol) {
    out.noop = true;
    out.status = ShootStatus::Ok;
    out.chain = chain;
    return out;
  }

  SingularCurve curve;
  try {
    curve = singular_curve(cs, sing, sd_cap);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptySingularCurve) {
      out.status = ShootStatus::EmptySingularCurve;
      return out;
    }
    throw;
  }

  ExtensionShootResult shot =
      solve_extension(cs, chain, curve, segments, opts, limits);
  out.status = shot.status;
  out.trace = shot.trace;
  out.restarts = shot.restarts;
  out.iterations = shot.iterations;
  if (shot.status != ShootStatus::Ok) return out;

  const double sdd_c = curve.sdd_of_sd(shot.sd_c);
  const ConstraintSet* csp = &cs;
  const Singularity sing_copy = sing;
  const JerkPolicy resumed_policy =
      JerkPolicy::max_jerk().with_band(SingularBand{
          sing.row, sing.s_star, 10.0, [csp, sing_copy](const State& x) {
            return singular_jerk(*csp, sing_copy, std::max(x.sd, 1e-9), x.sdd);
          }});
  Profile resumed =
      integrate(cs, State{sing.s_star, shot.sd_c, sdd_c}, Direction::Forward,
                resumed_policy, std::nullopt, limits);

  // Junction residuals: the bridge leaves the curve point exactly (it is
  // integrated backward from it), so the residual lives at the A junction.
  double sv = 0, sa = 0;
  for (const auto& p : chain.pieces())
    for (const auto& n : p.profile.nodes()) {
      sv = std::max(sv, std::abs(n.state.sd));
      sa = std::max(sa, std::abs(n.state.sdd));
    }
  const auto ra = chain.at_s(shot.s_a);
  out.junction_residual =
      junction_gap(shot.bridge.head().state,
                   State{shot.s_a, ra.sd, ra.sdd}, 1.0 + sv, 1.0 + sa);

  out.chain = truncate_chain_above(chain, shot.s_a);
  ChainPiece bridge_piece;
  bridge_piece.profile = std::move(shot.bridge);
  bridge_piece.tag = PolicyTag::MinJerk;
  out.chain.pieces().push_back(std::move(bridge_piece));
  ChainPiece resumed_piece;
  resumed_piece.profile = std::move(resumed);
  resumed_piece.tag = PolicyTag::MaxJerk;
  resumed_piece.singular_band = true;
  out.chain.pieces().push_back(std::move(resumed_piece));
  out.s_attach = shot.s_a;
  out.sd_curve = shot.sd_c;
  out.sdd_curve = sdd_c;
  log_info("extend: s*=" + fmt_g12(sing.s_star) + " attach s_A=" +
           fmt_g12(out.s_attach) + " landing sd_C=" + fmt_g12(out.sd_curve));
  return out;
}

ExtensionOutcome extend_profile_generic(const ConstraintSet& cs,
                                        const ProfileChain& chain,
                                        const Singularity& sing,
                                        double sd_point, double sdd_point,
                                        int segments, const NewtonOptions& opts,
                                        const IntegrationLimits& limits) {
  ExtensionOutcome out;
  const State point{sing.s_star, sd_point, sdd_point};
  if (!cs.controls(point).feasible())
    raise(ErrorCode::Precondition, "generic extension point is infeasible");

  Profile back = integrate(cs, point, Direction::Backward,
                           JerkPolicy::max_jerk(), std::nullopt, limits);
  if (back.size() < 2) {
    out.status = ShootStatus::NonConvergence;
    return out;
  }
  ProfileChain back_chain(back, PolicyTag::MaxJerk);
  BridgeResult br = solve_bridge(cs, chain, back_chain, segments, opts, limits);
  out.status = br.status;
  out.restarts = br.restarts;
  out.iterations = br.iterations;
  if (br.status != ShootStatus::Ok) return out;

  Profile resumed = integrate(cs, point, Direction::Forward,
                              JerkPolicy::max_jerk(), std::nullopt, limits);

  out.chain = truncate_chain_above(chain, br.s_a);
  ChainPiece bridge_piece;
  bridge_piece.profile = std::move(br.bridge);
  bridge_piece.tag = PolicyTag::MinJerk;
  out.chain.pieces().push_back(std::move(bridge_piece));
  if (br.s_b < sing.s_star - 1e-12) {
    ChainPiece tail;
    tail.profile = back.truncated_below(br.s_b);
    tail.tag = PolicyTag::MaxJerk;
    out.chain.pieces().push_back(std::move(tail));
  }
  ChainPiece resumed_piece;
  resumed_piece.profile = std::move(resumed);
  resumed_piece.tag = PolicyTag::MaxJerk;
  out.chain.pieces().push_back(std::move(resumed_piece));
  out.s_attach = br.s_a;
  out.sd_curve = sd_point;
  out.sdd_curve = sdd_point;
  return out;
}

}  // namespace topp3
