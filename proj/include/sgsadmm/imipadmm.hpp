#pragma once

// Two-block inexact majorized indefinite-proximal ADMM.
//
// Each iteration minimizes, up to a certified subgradient, the majorized
// augmented Lagrangian in x (plus 1/2||x - x^k||^2_S), then in y given the new
// x (plus 1/2||y - y^k||^2_T), and finishes with the dual step
// z^{k+1} = z^k + tau * sigma * (A x^{k+1} + B y^{k+1} - c).

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/model.hpp"
#include "sgsadmm/prox.hpp"
#include "sgsadmm/schedule.hpp"
#include "sgsadmm/trace.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace sgsadmm {

/// Upper end of the admissible dual step-length interval, (1 + sqrt 5) / 2.
inline const double kGoldenRatio = (1.0 + std::sqrt(5.0)) / 2.0;

class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TwoBlockConfig {
  double sigma = 1.0;
  double tau = 1.618;
  BlockOperator S;
  BlockOperator T;
  ToleranceSchedule eps = ToleranceSchedule::geometric(1e-2, 0.5);
  long max_iter = 10000;
  double stop_tol = 1e-8;
  InexactMode mode = InexactMode::exact;
  std::uint64_t seed = 0;
};

namespace detail {

inline double op_scale(std::initializer_list<const Mat*> mats) {
  double s = 1.0;
  for (const Mat* m : mats) s = std::max(s, spectral_norm(*m));
  return s;
}

inline void require_psd(const Mat& h, double scale, const std::string& what) {
  const double lo = min_eig(h);
  if (lo < -kPsdTol * scale) {
    throw AdmissibilityError(what + " violated (min eigenvalue " + std::to_string(lo) + ")");
  }
}

inline void require_pd(const Mat& h, double scale, const std::string& what) {
  const double lo = min_eig(h);
  if (!(lo > kPsdTol * scale)) {
    throw AdmissibilityError(what + " violated (min eigenvalue " + std::to_string(lo) + ")");
  }
}

inline void require_step_params(double sigma, double tau) {
  if (!(sigma > 0.0)) throw AdmissibilityError("sigma > 0 violated");
  if (!(tau > 0.0 && tau < kGoldenRatio)) {
    throw AdmissibilityError("tau in (0, (1+sqrt5)/2) violated (tau = " + std::to_string(tau) + ")");
  }
}

}  // namespace detail

/// Throws AdmissibilityError naming the first violated condition among
///   S >= -1/2 Sf,  T >= -1/2 Sg,  1/2 Sf + sigma A'A + S > 0,  1/2 Sg + sigma B'B + T > 0.
inline void check_two_block_admissible(const ProblemSpec& spec, double sigma, double tau,
                                       const BlockOperator& S, const BlockOperator& T) {
  detail::require_step_params(sigma, tau);
  if (S.matrix().rows() != spec.x_dim() || T.matrix().rows() != spec.y_dim()) {
    throw DimensionMismatch("proximal terms have the wrong dimension");
  }
  const Mat& sf = spec.f.majorizer().matrix();
  const Mat& sg = spec.g.majorizer().matrix();
  const Mat ata = sigma * spec.A.transpose() * spec.A;
  const Mat btb = sigma * spec.B.transpose() * spec.B;
  const double sx = detail::op_scale({&sf, &ata, &S.matrix()});
  const double sy = detail::op_scale({&sg, &btb, &T.matrix()});
  detail::require_psd(S.matrix() + 0.5 * sf, sx, "S >= -1/2 Sigma_f");
  detail::require_psd(T.matrix() + 0.5 * sg, sy, "T >= -1/2 Sigma_g");
  detail::require_pd(0.5 * sf + ata + S.matrix(), sx, "1/2 Sigma_f + sigma A*A' + S > 0");
  detail::require_pd(0.5 * sg + btb + T.matrix(), sy, "1/2 Sigma_g + sigma B*B' + T > 0");
}

struct DerivedConstants {
  double alpha = 0.0;
  double alpha_hat = 0.0;
  double beta = 0.0;
  BlockOperator F;
  BlockOperator G;
  BlockOperator M;
  BlockOperator N;
};

struct StepConstants {
  double alpha;
  double alpha_hat;
  double beta;
};

inline StepConstants step_constants(double tau) {
  StepConstants c{};
  c.alpha = (1.0 + tau / std::min(1.0 + tau, 1.0 + 1.0 / tau)) / 2.0;
  c.alpha_hat = 1.0 - c.alpha * std::min(tau, 1.0 / tau);
  c.beta = std::min(1.0, 1.0 - tau + 1.0 / tau) * c.alpha - (1.0 - c.alpha) * tau;
  return c;
}

inline DerivedConstants derive_constants(const ProblemSpec& spec, const TwoBlockView& view) {
  check_two_block_admissible(spec, view.sigma, view.tau, view.S, view.T);
  const double sigma = view.sigma, tau = view.tau;
  const StepConstants sc = step_constants(tau);
  DerivedConstants d;
  d.alpha = sc.alpha;
  d.alpha_hat = sc.alpha_hat;
  d.beta = sc.beta;
  if (!(d.alpha > 0.0 && d.alpha < 1.0)) throw AdmissibilityError("0 < alpha < 1 violated");
  if (!(d.alpha_hat > 0.0 && d.alpha_hat < 1.0)) throw AdmissibilityError("0 < alpha_hat < 1 violated");
  if (!(d.beta > 0.0)) throw AdmissibilityError("beta > 0 violated");

  const Mat& sf = spec.f.majorizer().matrix();
  const Mat& sg = spec.g.majorizer().matrix();
  const Mat ata = spec.A.transpose() * spec.A;
  const Mat btb = spec.B.transpose() * spec.B;
  const double rho = std::min(tau, 1.0 + tau - tau * tau);
  const auto& xs = spec.x_structure;
  const auto& ys = spec.y_structure;
  d.F = BlockOperator::self_adjoint(xs, 0.5 * sf + view.S.matrix() + ((1.0 - d.alpha) * sigma / 2.0) * ata);
  d.G = BlockOperator::self_adjoint(ys, 0.5 * sg + view.T.matrix() + rho * d.alpha * sigma * btb);
  d.M = BlockOperator::self_adjoint(xs, sf + sigma * ata + view.S.matrix());
  d.N = BlockOperator::self_adjoint(ys, sg + sigma * btb + view.T.matrix());
  const double sx = detail::op_scale({&sf, &view.S.matrix()}) * (1.0 + sigma * spectral_norm(ata));
  const double sy = detail::op_scale({&sg, &view.T.matrix()}) * (1.0 + sigma * spectral_norm(btb));
  detail::require_pd(d.F.matrix(), sx, "F > 0");
  detail::require_pd(d.G.matrix(), sy, "G > 0");
  detail::require_pd(d.M.matrix(), sx, "M > 0");
  detail::require_pd(d.N.matrix(), sy, "N > 0");
  return d;
}

/// phi_k(anchor) evaluated at w^k with previous y^{k-1}. The term
/// A x_bar + B y^k - c is formed as B(y^k - y_bar) + (A x_bar + B y_bar - c),
/// which avoids cancellation once y^k is close to the anchor.
inline double phi_value(const ProblemSpec& spec, const TwoBlockView& view, const StepConstants& sc,
                        const Iterate& anchor, const Iterate& wk, const Vec& y_prev) {
  const Mat sfS = spec.f.majorizer().matrix() + view.S.matrix();
  const Mat sgT = spec.g.majorizer().matrix() + view.T.matrix();
  const double ts = view.tau * view.sigma;
  const Vec rk = spec.residual(wk.x, wk.y);
  return (anchor.z - wk.z).squaredNorm() / ts + sq_norm(Vec(anchor.x - wk.x), sfS) +
         sq_norm(Vec(anchor.y - wk.y), sgT) +
         view.sigma * Vec(spec.B * (wk.y - anchor.y) + spec.residual(anchor.x, anchor.y)).squaredNorm() +
         sc.alpha_hat * view.sigma * rk.squaredNorm() + sc.alpha * sq_norm(Vec(y_prev - wk.y), sgT);
}

/// min p1(u_0) + 1/2 u'Mu - q'u over a block-partitioned u, by eliminating the
/// non-first blocks in closed form and solving one metric prox on block 0.
class SchurProxSolver {
 public:
  SchurProxSolver() = default;
  SchurProxSolver(const Mat& m, Index first_dim, ProxFriendlyFunction theta)
      : n_(m.rows()), d1_(first_dim), theta_(std::move(theta)), full_(m) {
    const Index nr = n_ - d1_;
    if (nr > 0) {
      rest_ = SpdFactor(Mat(m.bottomRightCorner(nr, nr)));
      coupling_ = rest_.solve(Mat(m.bottomLeftCorner(nr, d1_))).transpose();  // M_1r M_rr^{-1}
      Mat p = m.topLeftCorner(d1_, d1_) - coupling_ * m.bottomLeftCorner(nr, d1_);
      schur_ = 0.5 * (p + p.transpose());
    } else {
      schur_ = m;
    }
    if (!is_positive_definite(schur_, kSpdTol)) {
      throw NotPositiveDefinite("block-0 Schur complement is not positive definite");
    }
  }

  Vec solve(const Vec& q) const {
    const Index nr = n_ - d1_;
    Vec u(n_);
    if (nr == 0) {
      u = prox_quadratic(theta_, schur_, q);
      return u;
    }
    const Vec qr = q.tail(nr);
    u.head(d1_) = prox_quadratic(theta_, schur_, Vec(q.head(d1_) - coupling_ * qr));
    u.tail(nr) = rest_.solve(Vec(qr - full_.bottomLeftCorner(nr, d1_) * u.head(d1_)));
    return u;
  }

 private:
  Index n_ = 0;
  Index d1_ = 0;
  ProxFriendlyFunction theta_;
  Mat full_;
  SpdFactor rest_;
  Mat coupling_;
  Mat schur_;
};

struct StepOutput {
  Iterate next;
  Vec d_x;
  Vec d_y;
  double eps = 0.0;
  double cert_x = 0.0;
  double cert_y = 0.0;
};

class TwoBlockSolver {
 public:
  TwoBlockSolver(const ProblemSpec& spec, TwoBlockConfig cfg)
      : spec_(spec), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    spec_.validate();
    if (cfg_.mode == InexactMode::cg) {
      throw std::invalid_argument("the residual-driven inner mode applies to the multi-block method only");
    }
    view_ = TwoBlockView{cfg_.sigma, cfg_.tau, cfg_.S, cfg_.T,
                         cfg_.mode == InexactMode::exact ? ToleranceSchedule::zero() : cfg_.eps};
    constants_ = derive_constants(spec_, view_);
    const Mat& sf = spec_.f.majorizer().matrix();
    const Mat& sg = spec_.g.majorizer().matrix();
    sfS_ = sf + cfg_.S.matrix();
    sgT_ = sg + cfg_.T.matrix();
    m_factor_ = SpdFactor(constants_.M.matrix());
    n_factor_ = SpdFactor(constants_.N.matrix());
    x_solver_ = SchurProxSolver(constants_.M.matrix(), spec_.x1_dim(), spec_.p1);
    y_solver_ = SchurProxSolver(constants_.N.matrix(), spec_.y1_dim(), spec_.q1);
  }

  const ProblemSpec& spec() const { return spec_; }
  const TwoBlockConfig& config() const { return cfg_; }
  const TwoBlockView& view() const { return view_; }
  const DerivedConstants& constants() const { return constants_; }

  /// Linear term q_x with psi_k(x) = p(x) + 1/2 x'Mx - q_x'x + const.
  Vec x_linear_term(const Iterate& w) const {
    return sfS_ * w.x - spec_.f.gradient(w.x) - spec_.A.transpose() * w.z -
           cfg_.sigma * spec_.A.transpose() * (spec_.B * w.y - spec_.c);
  }

  /// Linear term q_y of the y-subproblem given the new x.
  Vec y_linear_term(const Iterate& w, const Vec& x_next) const {
    return sgT_ * w.y - spec_.g.gradient(w.y) - spec_.B.transpose() * w.z -
           cfg_.sigma * spec_.B.transpose() * (spec_.A * x_next - spec_.c);
  }

  /// Exact minimizer of psi_k(x) - <d_x, x>.
  Vec solve_x(const Iterate& w, const Vec& d_x) const { return x_solver_.solve(x_linear_term(w) + d_x); }

  /// Exact minimizer of the y-subproblem (given x_next) minus <d_y, y>.
  Vec solve_y(const Iterate& w, const Vec& x_next, const Vec& d_y) const {
    return y_solver_.solve(y_linear_term(w, x_next) + d_y);
  }

  double cert_x(const Vec& d) const { return m_factor_.inv_norm(d); }
  double cert_y(const Vec& d) const { return n_factor_.inv_norm(d); }

  /// Step with externally supplied certificates; no bound is enforced.
  StepOutput step_with_certificates(const Iterate& w, const Vec& d_x, const Vec& d_y) const {
    StepOutput out;
    out.d_x = d_x;
    out.d_y = d_y;
    out.next.x = solve_x(w, d_x);
    out.next.y = solve_y(w, out.next.x, d_y);
    out.next.z = w.z + cfg_.tau * cfg_.sigma * spec_.residual(out.next.x, out.next.y);
    out.cert_x = cert_x(d_x);
    out.cert_y = cert_y(d_y);
    return out;
  }

  /// One iteration from w^k. In tilted mode the certificates are random
  /// directions scaled to 0.9 * eps_k in the M^{-1/2} (resp. N^{-1/2}) norm.
  StepOutput step(const Iterate& w, long k) {
    const double eps = cfg_.mode == InexactMode::exact ? 0.0 : cfg_.eps(k);
    Vec d_x = Vec::Zero(spec_.x_dim());
    Vec d_y = Vec::Zero(spec_.y_dim());
    if (cfg_.mode == InexactMode::tilted && eps > 0.0) {
      d_x = scaled_direction(spec_.x_dim(), m_factor_, 0.9 * eps);
      d_y = scaled_direction(spec_.y_dim(), n_factor_, 0.9 * eps);
    }
    StepOutput out = step_with_certificates(w, d_x, d_y);
    out.eps = cfg_.mode == InexactMode::exact ? 0.0 : cfg_.eps(k);
    const double slack = 1e-12 * (1.0 + out.eps);
    if (out.cert_x > out.eps + slack || out.cert_y > out.eps + slack) {
      throw std::logic_error("certificate bound violated at iteration " + std::to_string(k));
    }
    return out;
  }

  SolveResult solve(const Iterate& init, const std::optional<Iterate>& anchor = std::nullopt) {
    if (!spec_.p1.in_domain(init.x.head(spec_.x1_dim())) ||
        !spec_.q1.in_domain(init.y.head(spec_.y1_dim()))) {
      throw std::invalid_argument("initial point outside dom p x dom q");
    }
    SolveResult res;
    res.trace.view = view_;
    res.trace.initial = init;
    const StepConstants sc = step_constants(cfg_.tau);
    Iterate w = init;
    res.final_kkt = kkt_residual(spec_, w.x, w.y, w.z);
    for (long k = 0; k < cfg_.max_iter; ++k) {
      StepOutput out = step(w, k);
      IterationRecord rec;
      rec.k = k;
      rec.kkt = kkt_residual(spec_, out.next.x, out.next.y, out.next.z);
      rec.eps = out.eps;
      rec.cert_x = out.cert_x;
      rec.cert_y = out.cert_y;
      rec.bound_x = out.eps;
      rec.bound_y = out.eps;
      if (anchor) rec.phi = phi_value(spec_, view_, sc, *anchor, out.next, w.y);
      rec.d_x = std::move(out.d_x);
      rec.d_y = std::move(out.d_y);
      rec.w = std::move(out.next);
      w = rec.w;
      res.final_kkt = rec.kkt;
      res.trace.records.push_back(std::move(rec));
      res.iterations = k + 1;
      if (res.final_kkt.total <= cfg_.stop_tol) {
        res.converged = true;
        break;
      }
    }
    res.final_state = w;
    return res;
  }

 private:
  Vec scaled_direction(Index n, const SpdFactor& metric, double target) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = gauss(rng_);
    const double nrm = metric.inv_norm(v);
    if (nrm == 0.0) return Vec::Zero(n);
    return v * (target / nrm);
  }

  ProblemSpec spec_;
  TwoBlockConfig cfg_;
  TwoBlockView view_;
  DerivedConstants constants_;
  Mat sfS_;
  Mat sgT_;
  SpdFactor m_factor_;
  SpdFactor n_factor_;
  SchurProxSolver x_solver_;
  SchurProxSolver y_solver_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Proximal-term selection

enum class ProxTermKind { automatic, zero, shift, stress };

struct ProxTermChoice {
  ProxTermKind kind = ProxTermKind::automatic;
  double shift = 0.0;

  /// "auto" | "zero" | "shift:lambda" | "stress"
  static ProxTermChoice parse(const std::string& text) {
    if (text == "auto") return {ProxTermKind::automatic, 0.0};
    if (text == "zero") return {ProxTermKind::zero, 0.0};
    if (text == "stress") return {ProxTermKind::stress, 0.0};
    if (text.rfind("shift:", 0) == 0) return {ProxTermKind::shift, std::stod(text.substr(6))};
    throw std::invalid_argument("unknown proximal mode '" + text + "' (auto | zero | shift:l | stress)");
  }
};

namespace detail {

/// Smallest lambda >= 0 (to 1e-8) with ok(lambda) true, assuming ok is
/// monotone in lambda.
inline double minimal_shift(const std::function<bool(double)>& ok) {
  if (ok(0.0)) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (!ok(hi)) {
    hi *= 2.0;
    if (++guard > 80) throw AdmissibilityError("no admissible diagonal shift found");
  }
  double lo = 0.0;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

inline bool admissible_two_block_x(const ProblemSpec& spec, double sigma, const Mat& S) {
  try {
    const Mat& sf = spec.f.majorizer().matrix();
    const Mat ata = sigma * spec.A.transpose() * spec.A;
    const double sx = op_scale({&sf, &ata, &S});
    require_psd(S + 0.5 * sf, sx, "S");
    require_pd(0.5 * sf + ata + S, sx, "S");
    return true;
  } catch (const AdmissibilityError&) {
    return false;
  }
}

}  // namespace detail

/// Proximal terms (S, T) for the two-block method. "auto" uses zero when
/// admissible and otherwise the minimal admissible multiple of the identity;
/// "stress" uses -0.49 * Sigma_hat plus the minimal identity shift.
inline std::pair<BlockOperator, BlockOperator> choose_two_block_terms(const ProblemSpec& spec,
                                                                      double sigma,
                                                                      const ProxTermChoice& choice) {
  const auto& xs = spec.x_structure;
  const auto& ys = spec.y_structure;
  const Mat ix = Mat::Identity(spec.x_dim(), spec.x_dim());
  const Mat iy = Mat::Identity(spec.y_dim(), spec.y_dim());
  const Mat ax = ProxTermKind::stress == choice.kind ? Mat(-0.49 * spec.f.majorizer().matrix())
                                                     : Mat(Mat::Zero(spec.x_dim(), spec.x_dim()));
  const Mat ay = ProxTermKind::stress == choice.kind ? Mat(-0.49 * spec.g.majorizer().matrix())
                                                     : Mat(Mat::Zero(spec.y_dim(), spec.y_dim()));
  switch (choice.kind) {
    case ProxTermKind::zero:
      return {BlockOperator::zero(xs), BlockOperator::zero(ys)};
    case ProxTermKind::shift:
      return {BlockOperator::identity(xs, choice.shift), BlockOperator::identity(ys, choice.shift)};
    case ProxTermKind::automatic:
    case ProxTermKind::stress: {
      // The y side has the same form as the x side with (g, B) in place of (f, A).
      ProblemSpec mirrored = spec;
      mirrored.f = spec.g;
      mirrored.A = spec.B;
      const double lx = detail::minimal_shift(
          [&](double l) { return detail::admissible_two_block_x(spec, sigma, ax + l * ix); });
      const double ly = detail::minimal_shift(
          [&](double l) { return detail::admissible_two_block_x(mirrored, sigma, ay + l * iy); });
      return {BlockOperator::self_adjoint(xs, ax + lx * ix), BlockOperator::self_adjoint(ys, ay + ly * iy)};
    }
  }
  return {};
}

}  // namespace sgsadmm
