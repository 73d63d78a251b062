#include "topp3/path.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "topp3/error.hpp"
#include "topp3/log.hpp"

namespace topp3 {

namespace {

constexpr int kMaxDegree = 7;
constexpr double kContinuityTol = 1e-9;

// Value and derivatives of a monomial polynomial at local coordinate x.
// out[k] receives d^k p / dx^k, k = 0..max_order.
void poly_derivatives(const std::vector<double>& coeffs, double x,
                      int max_order, double* out) {
  const int n = static_cast<int>(coeffs.size());
  for (int k = 0; k <= max_order; ++k) {
    double acc = 0.0;
    for (int i = n - 1; i >= k; --i) {
      double fact = 1.0;
      for (int j = 0; j < k; ++j) fact *= static_cast<double>(i - j);
      acc = acc * x + coeffs[i] * fact;
    }
    out[k] = acc;
  }
}

int locate_piece(const JointPolynomial& joint, double s, double s_end) {
  const auto& b = joint.breakpoints;
  if (s >= s_end) return static_cast<int>(joint.pieces.size()) - 1;
  // right piece at breakpoints
  auto it = std::upper_bound(b.begin(), b.end(), s);
  int idx = static_cast<int>(it - b.begin()) - 1;
  if (idx < 0) idx = 0;
  if (idx >= static_cast<int>(joint.pieces.size()))
    idx = static_cast<int>(joint.pieces.size()) - 1;
  return idx;
}

}  // namespace

PathSpec::PathSpec(std::vector<JointPolynomial> joints, double s_end,
                   int continuity)
    : joints_(std::move(joints)), s_end_(s_end), continuity_(continuity) {
  if (joints_.empty()) raise(ErrorCode::InvalidPathSpec, "path has no joints");
  if (!(s_end_ > 0)) raise(ErrorCode::InvalidPathSpec, "s_end must be positive");
  if (continuity_ < 0 || continuity_ > 4)
    raise(ErrorCode::InvalidPathSpec, "continuity class must be C0..C4");

  for (const auto& joint : joints_) {
    const auto& b = joint.breakpoints;
    if (b.size() < 2 || joint.pieces.size() != b.size() - 1)
      raise(ErrorCode::InvalidPathSpec, "breakpoints/pieces size mismatch");
    if (std::abs(b.front()) > 0 || std::abs(b.back() - s_end_) > 1e-12)
      raise(ErrorCode::InvalidPathSpec,
            "breakpoints must span [0, s_end] exactly");
    for (size_t i = 0; i + 1 < b.size(); ++i)
      if (!(b[i] < b[i + 1]))
        raise(ErrorCode::InvalidPathSpec, "breakpoints must strictly increase");
    for (const auto& piece : joint.pieces) {
      if (piece.empty() || piece.size() > kMaxDegree + 1)
        raise(ErrorCode::InvalidPathSpec, "piece degree must be 0..7");
      for (double c : piece)
        if (!std::isfinite(c))
          raise(ErrorCode::InvalidPathSpec, "non-finite coefficient");
    }
    // Derivative continuity at interior breakpoints up to the declared class.
    double left[5], right[5];
    for (size_t i = 1; i + 1 < b.size(); ++i) {
      const double h = b[i] - b[i - 1];
      poly_derivatives(joint.pieces[i - 1], h, continuity_, left);
      poly_derivatives(joint.pieces[i], 0.0, continuity_, right);
      for (int k = 0; k <= continuity_; ++k) {
        if (std::abs(left[k] - right[k]) > kContinuityTol)
          raise(ErrorCode::InvalidPathSpec,
                "derivative order " + std::to_string(k) +
                    " discontinuous at breakpoint s=" + fmt_g12(b[i]));
      }
    }
  }
}

std::vector<Vector> PathSpec::eval_derivatives(double s, int max_order) const {
  if (max_order < 0 || max_order > 4)
    raise(ErrorCode::Precondition, "max_order must be 0..4");
  if (s < -1e-12 || s > s_end_ + 1e-12)
    raise(ErrorCode::DomainError, "s=" + fmt_g12(s) + " outside [0, " +
                                      fmt_g12(s_end_) + "]");
  s = std::clamp(s, 0.0, s_end_);

  std::vector<Vector> out(max_order + 1, Vector(n_dof()));
  double d[5];
  for (int j = 0; j < n_dof(); ++j) {
    const auto& joint = joints_[j];
    const int p = locate_piece(joint, s, s_end_);
    poly_derivatives(joint.pieces[p], s - joint.breakpoints[p], max_order, d);
    for (int k = 0; k <= max_order; ++k) out[k][j] = d[k];
  }
  return out;
}

Vector PathSpec::derivative(double s, int order) const {
  return eval_derivatives(s, order)[order];
}

PathSpec PathSpec::mirrored() const {
  std::vector<JointPolynomial> mirrored_joints;
  mirrored_joints.reserve(joints_.size());
  for (const auto& joint : joints_) {
    JointPolynomial m;
    const int np = static_cast<int>(joint.pieces.size());
    m.breakpoints.resize(joint.breakpoints.size());
    for (size_t i = 0; i < joint.breakpoints.size(); ++i)
      m.breakpoints[i] = s_end_ - joint.breakpoints[joint.breakpoints.size() - 1 - i];
    m.breakpoints.front() = 0.0;
    m.breakpoints.back() = s_end_;
    m.pieces.resize(np);
    for (int p = 0; p < np; ++p) {
      // Original piece p on [b_p, b_{p+1}], local x; mirrored piece sits at
      // index np-1-p with local y = h - x, h the piece width.
      const auto& c = joint.pieces[p];
      const double h = joint.breakpoints[p + 1] - joint.breakpoints[p];
      const int n = static_cast<int>(c.size());
      std::vector<double> out(n, 0.0);
      // p~(y) = p(h - y) = sum_k c_k (h - y)^k
      for (int k = 0; k < n; ++k) {
        double binom = 1.0;  // C(k, j) h^(k-j) (-1)^j, built incrementally
        double hp = std::pow(h, k);
        for (int j = 0; j <= k; ++j) {
          out[j] += c[k] * binom * hp;
          binom *= -static_cast<double>(k - j) / static_cast<double>(j + 1);
          if (h != 0.0) hp /= h;
        }
      }
      m.pieces[np - 1 - p] = std::move(out);
    }
    mirrored_joints.push_back(std::move(m));
  }
  return PathSpec(std::move(mirrored_joints), s_end_, continuity_);
}

PathSpec PathSpec::single_piece(
    const std::vector<std::vector<double>>& coeffs, double s_end) {
  std::vector<JointPolynomial> joints;
  joints.reserve(coeffs.size());
  for (const auto& c : coeffs) {
    JointPolynomial j;
    j.breakpoints = {0.0, s_end};
    j.pieces = {c};
    joints.push_back(std::move(j));
  }
  return PathSpec(std::move(joints), s_end, 4);
}

PathSpec PathSpec::fit_cubic(const std::vector<Vector>& waypoints,
                             double s_end) {
  const int n = static_cast<int>(waypoints.size());
  if (n < 2) raise(ErrorCode::Precondition, "need at least two waypoints");
  const int dof = static_cast<int>(waypoints.front().size());
  const double h = s_end / (n - 1);

  std::vector<JointPolynomial> joints(dof);
  for (int j = 0; j < dof; ++j) {
    // Clamped cubic spline (zero end slopes): solve the tridiagonal system
    // for interior second derivatives.
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = waypoints[i][j];
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    m(0, 0) = 2 * h; m(0, 1) = h;
    rhs[0] = 6 * ((y[1] - y[0]) / h);
    for (int i = 1; i + 1 < n; ++i) {
      m(i, i - 1) = h; m(i, i) = 4 * h; m(i, i + 1) = h;
      rhs[i] = 6 * ((y[i + 1] - y[i]) / h - (y[i] - y[i - 1]) / h);
    }
    m(n - 1, n - 2) = h; m(n - 1, n - 1) = 2 * h;
    rhs[n - 1] = 6 * (-(y[n - 1] - y[n - 2]) / h);
    Eigen::VectorXd m2 = m.fullPivLu().solve(rhs);

    JointPolynomial jp;
    jp.breakpoints.resize(n);
    for (int i = 0; i < n; ++i) jp.breakpoints[i] = i * h;
    jp.breakpoints.back() = s_end;
    jp.pieces.resize(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
      const double a0 = y[i];
      const double a2 = m2[i] / 2.0;
      const double a3 = (m2[i + 1] - m2[i]) / (6.0 * h);
      const double a1 = (y[i + 1] - y[i]) / h - h * (2 * m2[i] + m2[i + 1]) / 6.0;
      jp.pieces[i] = {a0, a1, a2, a3};
    }
    joints[j] = std::move(jp);
  }
  log_warn(
      "fit_cubic: piecewise-cubic path has piecewise-constant q_sss and zero "
      "q_ssss; prefer single-piece polynomials of degree >= 4 for solving");
  return PathSpec(std::move(joints), s_end, 2);
}

PathState boundary_state(const PathSpec& path, const BoundaryCondition& bc,
                         Endpoint endpoint) {
  const double s = endpoint == Endpoint::Start ? 0.0 : path.s_end();
  const Vector& v = endpoint == Endpoint::Start ? bc.v_beg : bc.v_end;
  const Vector& a = endpoint == Endpoint::Start ? bc.a_beg : bc.a_end;
  if (v.size() != path.n_dof() || a.size() != path.n_dof())
    raise(ErrorCode::Precondition, "boundary vectors must have n_dof entries");

  const auto d = path.eval_derivatives(s, 2);
  const Vector& qs = d[1];
  const Vector& qss = d[2];
  const double qs_norm = qs.norm();
  if (qs_norm <= 0)
    raise(ErrorCode::DegeneratePath,
          "||q_s|| = 0 at the " +
              std::string(endpoint == Endpoint::Start ? "start" : "end"));

  const double v_norm = v.norm();
  const double sd = v_norm / qs_norm;
  if (v_norm > 0) {
    // angle between v and q_s must be within 1e-6 rad, same direction
    const double cosang = v.dot(qs) / (v_norm * qs_norm);
    const double sinang = (v - v.dot(qs) / (qs_norm * qs_norm) * qs).norm() / v_norm;
    if (cosang <= 0 || std::atan2(sinang, cosang) > 1e-6)
      raise(ErrorCode::InconsistentBoundary,
            "boundary velocity is not parallel to the path tangent");
  }
  // signed tangential component; the norm form would lose the sign when the
  // residual opposes q_s
  const Vector resid = a - qss * (sd * sd);
  const double sdd = resid.dot(qs) / (qs_norm * qs_norm);
  return {s, sd, sdd};
}

}  // namespace topp3
