#pragma once

// Problem model:
//
//   min  p1(x_1) + f(x_1..x_m) + q1(y_1) + g(y_1..y_n)
//   s.t. A x + B y = c
//
// A (z_dim x dim X) and B (z_dim x dim Y) are the constraint matrices, i.e.
// the matrices of the adjoint maps Z <- X and Z <- Y. The x-side normal
// operator is therefore A'A and the multiplier enters the x-stationarity as
// A'z.

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/prox.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace sgsadmm {

enum class MajorizerMode { tight, loose };
enum class MinorizerMode { zero, min_eig };

inline const char* to_string(MajorizerMode m) {
  return m == MajorizerMode::tight ? "tight" : "loose";
}
inline const char* to_string(MinorizerMode m) {
  return m == MinorizerMode::zero ? "zero" : "mineig";
}

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Convex quadratic 1/2<x,Qx> + <l,x> + const with a majorizer curvature
/// sigma_hat (Q <= sigma_hat) and a minorizer curvature sigma_low (sigma_low <= Q).
class SmoothConvexFunction {
 public:
  SmoothConvexFunction() = default;

  static SmoothConvexFunction quadratic(const BlockStructure& s, const Mat& q, Vec lin,
                                        double constant,
                                        MajorizerMode major = MajorizerMode::tight,
                                        MinorizerMode minor = MinorizerMode::zero) {
    SmoothConvexFunction fn;
    fn.q_ = BlockOperator::self_adjoint(s, q);
    if (lin.size() != s.total_dim()) throw DimensionMismatch("linear term has wrong length");
    fn.lin_ = std::move(lin);
    fn.constant_ = constant;
    fn.major_ = major;
    fn.minor_ = minor;
    const double qnorm = spectral_norm(fn.q_.matrix());
    const double qmin = min_eig(fn.q_.matrix());
    if (qmin < -kPsdTol * std::max(1.0, qnorm)) {
      throw ModelError("quadratic form is not positive semidefinite (min eigenvalue " +
                       std::to_string(qmin) + ")");
    }
    fn.sigma_hat_ = major == MajorizerMode::tight
                        ? fn.q_
                        : BlockOperator::identity(s, qnorm);
    fn.sigma_low_ = minor == MinorizerMode::zero
                        ? BlockOperator::zero(s)
                        : BlockOperator::identity(s, std::max(0.0, qmin));
    fn.check_sandwich();
    return fn;
  }

  const BlockStructure& structure() const { return q_.rows(); }
  const BlockOperator& hessian() const { return q_; }
  const Vec& linear() const { return lin_; }
  double constant() const { return constant_; }
  const BlockOperator& majorizer() const { return sigma_hat_; }
  const BlockOperator& minorizer() const { return sigma_low_; }
  MajorizerMode majorizer_mode() const { return major_; }
  MinorizerMode minorizer_mode() const { return minor_; }

  double value(const Vec& x) const {
    return 0.5 * x.dot(q_.matrix() * x) + lin_.dot(x) + constant_;
  }
  Vec gradient(const Vec& x) const { return q_.matrix() * x + lin_; }

  /// f(x') + <grad f(x'), x - x'> + 1/2 ||x - x'||^2_{sigma_hat}
  double majorizer_value(const Vec& x, const Vec& anchor) const {
    const Vec dx = x - anchor;
    return value(anchor) + gradient(anchor).dot(dx) + 0.5 * sq_norm(dx, sigma_hat_.matrix());
  }

  /// f(x') + <grad f(x'), x - x'> + 1/2 ||x - x'||^2_{sigma_low}
  double minorizer_value(const Vec& x, const Vec& anchor) const {
    const Vec dx = x - anchor;
    return value(anchor) + gradient(anchor).dot(dx) + 0.5 * sq_norm(dx, sigma_low_.matrix());
  }

  bool operator==(const SmoothConvexFunction& o) const {
    return q_.matrix() == o.q_.matrix() && lin_ == o.lin_ && constant_ == o.constant_ &&
           major_ == o.major_ && minor_ == o.minor_ && structure() == o.structure();
  }

 private:
  void check_sandwich() const {
    const double scale = std::max(1.0, spectral_norm(q_.matrix()));
    if (min_eig(Mat(sigma_hat_.matrix() - q_.matrix())) < -kPsdTol * scale) {
      throw ModelError("majorizer does not dominate the quadratic form");
    }
    if (min_eig(Mat(q_.matrix() - sigma_low_.matrix())) < -kPsdTol * scale) {
      throw ModelError("minorizer exceeds the quadratic form");
    }
  }

  BlockOperator q_;
  Vec lin_;
  double constant_ = 0.0;
  BlockOperator sigma_hat_;
  BlockOperator sigma_low_;
  MajorizerMode major_ = MajorizerMode::tight;
  MinorizerMode minor_ = MinorizerMode::zero;
};

struct ProblemSpec {
  BlockStructure x_structure;
  BlockStructure y_structure;
  Index z_dim = 0;
  ProxFriendlyFunction p1;
  ProxFriendlyFunction q1;
  SmoothConvexFunction f;
  SmoothConvexFunction g;
  Mat A;  // z_dim x dim X
  Mat B;  // z_dim x dim Y
  Vec c;

  Index x_dim() const { return x_structure.total_dim(); }
  Index y_dim() const { return y_structure.total_dim(); }
  Index x1_dim() const { return x_structure.dim(0); }
  Index y1_dim() const { return y_structure.dim(0); }

  void validate() const {
    auto fail = [](const std::string& msg) { throw ModelError("problem: " + msg); };
    if (x_structure.num_blocks() < 1 || y_structure.num_blocks() < 1) fail("empty block structure");
    if (z_dim < 1) fail("z_dim must be positive");
    if (A.rows() != z_dim || A.cols() != x_dim()) fail("A must be z_dim x dim X");
    if (B.rows() != z_dim || B.cols() != y_dim()) fail("B must be z_dim x dim Y");
    if (c.size() != z_dim) fail("c must have length z_dim");
    if (p1.dim() != x1_dim()) fail("p1 dimension differs from x block 1");
    if (q1.dim() != y1_dim()) fail("q1 dimension differs from y block 1");
    if (!(f.structure() == x_structure)) fail("f block structure differs from x");
    if (!(g.structure() == y_structure)) fail("g block structure differs from y");
    if (!A.allFinite() || !B.allFinite() || !c.allFinite()) fail("non-finite constraint data");
  }

  /// p(x) := p1(x_1)
  double p_value(const Vec& x) const { return p1.value(x.head(x1_dim())); }
  double q_value(const Vec& y) const { return q1.value(y.head(y1_dim())); }

  Vec residual(const Vec& x, const Vec& y) const { return A * x + B * y - c; }

  double objective(const Vec& x, const Vec& y) const {
    return p_value(x) + f.value(x) + q_value(y) + g.value(y);
  }

  bool operator==(const ProblemSpec& o) const {
    return x_structure == o.x_structure && y_structure == o.y_structure && z_dim == o.z_dim &&
           p1 == o.p1 && q1 == o.q1 && f == o.f && g == o.g && A == o.A && B == o.B && c == o.c;
  }
};

struct KKTResidual {
  double primal = 0.0;
  double dual_x = 0.0;
  double dual_y = 0.0;
  double total = 0.0;
};

/// Relative natural-map KKT residual:
///   primal = ||Ax + By - c|| / (1 + ||c||)
///   dual_x = ||x - prox_p(x - (grad f(x) + A'z))|| / (1 + ||x||)
///   dual_y analogous, total = max of the three.
inline KKTResidual kkt_residual(const ProblemSpec& spec, const Vec& x, const Vec& y,
                                const Vec& z) {
  KKTResidual r;
  r.primal = spec.residual(x, y).norm() / (1.0 + spec.c.norm());

  auto dual = [](const ProxFriendlyFunction& first, Index d1, const Vec& v, const Vec& grad) {
    Vec w = v - grad;
    w.head(d1) = prox(first, 1.0, w.head(d1));
    return (v - w).norm() / (1.0 + v.norm());
  };
  r.dual_x = dual(spec.p1, spec.x1_dim(), x, spec.f.gradient(x) + spec.A.transpose() * z);
  r.dual_y = dual(spec.q1, spec.y1_dim(), y, spec.g.gradient(y) + spec.B.transpose() * z);
  r.total = std::max({r.primal, r.dual_x, r.dual_y});
  return r;
}

struct Anchor {
  Vec x;
  Vec y;
  Vec z;
};

/// Optional proximal terms 1/2||x - x'||^2_S + 1/2||y - y'||^2_T added to the
/// majorized augmented Lagrangian.
struct ProximalTerms {
  const Mat* S = nullptr;
  const Mat* T = nullptr;
};

inline double majorized_aug_lagrangian(const ProblemSpec& spec, double sigma, const Vec& x,
                                       const Vec& y, const Anchor& anchor,
                                       ProximalTerms prox_terms = {}) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const double pv = spec.p_value(x);
  const double qv = spec.q_value(y);
  if (!std::isfinite(pv) || !std::isfinite(qv)) return std::numeric_limits<double>::infinity();
  const Vec r = spec.residual(x, y);
  double v = pv + spec.f.majorizer_value(x, anchor.x) + qv + spec.g.majorizer_value(y, anchor.y) +
             anchor.z.dot(r) + 0.5 * sigma * r.squaredNorm();
  if (prox_terms.S) v += 0.5 * sq_norm(Vec(x - anchor.x), *prox_terms.S);
  if (prox_terms.T) v += 0.5 * sq_norm(Vec(y - anchor.y), *prox_terms.T);
  return v;
}

}  // namespace sgsadmm
