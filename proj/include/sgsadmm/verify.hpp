#pragma once

// Post-hoc verification of solver trajectories against the convergence
// theory of the two-block method. Every trace (from either solver) carries
// its two-block reading (sigma, tau, S, T, eps), so one ledger serves both.

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/imipadmm.hpp"
#include "sgsadmm/model.hpp"
#include "sgsadmm/trace.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgsadmm {

inline constexpr double kLedgerSlack = 1e-8;

struct LedgerRow {
  std::string check;
  long k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool pass = false;
};

/// lhs <= rhs + rel * (1 + max(|lhs|, |rhs|))
inline LedgerRow le_row(std::string check, long k, double lhs, double rhs, double rel = kLedgerSlack) {
  LedgerRow r{std::move(check), k, lhs, rhs, rel * (1.0 + std::max(std::abs(lhs), std::abs(rhs))), false};
  r.pass = lhs <= rhs + r.slack;
  return r;
}

/// lhs >= rhs - rel * (1 + max(|lhs|, |rhs|))
inline LedgerRow ge_row(std::string check, long k, double lhs, double rhs, double rel = kLedgerSlack) {
  LedgerRow r{std::move(check), k, lhs, rhs, rel * (1.0 + std::max(std::abs(lhs), std::abs(rhs))), false};
  r.pass = lhs >= rhs - r.slack;
  return r;
}

struct ShadowIterate {
  Vec x_bar;
  Vec y_bar;
  Vec r_bar;
  Vec z_bar;
};

struct VerificationRecord {
  long k = 0;
  double phi = 0.0;
  double xi_norm = 0.0;
  double xi_bar_norm = 0.0;
  double key_lhs = kNaN;
  double key_rhs = kNaN;
  double rr_lhs = kNaN;
  double rr_rhs = kNaN;
  double varrho = 0.0;
  double fejer_bound = 0.0;
};

struct VerificationReport {
  std::vector<LedgerRow> rows;
  std::vector<VerificationRecord> records;  // index j holds k = j + 1

  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.pass ? 0 : 1;
    return n;
  }
};

/// Everything the ledger needs about one trace, precomputed once.
class TraceLedger {
 public:
  TraceLedger(const ProblemSpec& spec, const Trace& trace)
      : spec_(spec), trace_(trace), solver_(spec, shadow_config(trace.view)) {
    const TwoBlockView& v = trace_.view;
    const DerivedConstants& dc = solver_.constants();
    sc_ = step_constants(v.tau);
    M_ = dc.M.matrix();
    N_ = dc.N.matrix();
    F_ = dc.F.matrix();
    G_ = dc.G.matrix();
    sfS_ = spec_.f.majorizer().matrix() + v.S.matrix();
    sgT_ = spec_.g.majorizer().matrix() + v.T.matrix();
    sqrt_sfS_ = sqrt_psd(sfS_);
    sqrt_sgT_ = sqrt_psd(sgT_);
    sqrt_N_ = sqrt_psd(N_);
    m_factor_ = SpdFactor(M_);
    n_factor_ = SpdFactor(N_);
    coupling_ = spectral_norm(Mat(inv_sqrt_pd(N_) * spec_.B.transpose() * spec_.A * inv_sqrt_pd(M_)));
    const double c1 = 1.0 + v.sigma * coupling_;
    varrho_ = std::sqrt(5.0 * (1.0 + c1 * c1));
    g_n_ = spectral_norm(Mat(inv_sqrt_pd(G_) * sqrt_N_));
    total_eps_ = v.eps.total();
  }

  const TwoBlockSolver& shadow_solver() const { return solver_; }
  double varrho() const { return varrho_; }
  double coupling_norm() const { return coupling_; }
  double g_n_norm() const { return g_n_; }
  double total_eps() const { return total_eps_; }
  const StepConstants& constants() const { return sc_; }

  /// Exact subproblem solutions from w^k; the y shadow uses the x shadow.
  ShadowIterate shadow(std::size_t k) const {
    const Iterate& w = trace_.state(k);
    const TwoBlockView& v = trace_.view;
    ShadowIterate s;
    s.x_bar = solver_.solve_x(w, Vec::Zero(spec_.x_dim()));
    s.y_bar = solver_.solve_y(w, s.x_bar, Vec::Zero(spec_.y_dim()));
    s.r_bar = spec_.residual(s.x_bar, s.y_bar);
    s.z_bar = w.z + v.tau * v.sigma * s.r_bar;
    return s;
  }

  /// phi_k(anchor) for k >= 1.
  double phi(std::size_t k, const Iterate& anchor) const {
    return phi_value(spec_, trace_.view, sc_, anchor, trace_.state(k), trace_.state(k - 1).y);
  }

  /// xi^k stacked, for k >= 1; its squared norm equals phi_k at a KKT anchor.
  Vec xi(std::size_t k, const Iterate& anchor) const {
    const Iterate& w = trace_.state(k);
    return xi_of(w.x, w.y, w.z, spec_.residual(w.x, w.y), trace_.state(k - 1).y, anchor);
  }

  /// The same map evaluated at the shadow (x_bar^k, y_bar^k, z_bar^k), k >= 1.
  Vec xi_bar(std::size_t k, const Iterate& anchor) const {
    const ShadowIterate s = shadow(k - 1);
    return xi_of(s.x_bar, s.y_bar, s.z_bar, s.r_bar, trace_.state(k - 1).y, anchor);
  }

  VerificationReport run(const Iterate& anchor) const {
    const double anchor_kkt = kkt_residual(spec_, anchor.x, anchor.y, anchor.z).total;
    if (!(anchor_kkt <= 1e-10)) {
      throw std::invalid_argument("ledger anchor is not a KKT point (residual " +
                                  std::to_string(anchor_kkt) + ")");
    }
    VerificationReport rep;
    const std::size_t K = trace_.records.size();
    const TwoBlockView& v = trace_.view;
    const double sigma = v.sigma, tau = v.tau;
    const double rho = std::min(tau, 1.0 + tau - tau * tau);
    const Mat ata = spec_.A.transpose() * spec_.A;
    const Mat btb = spec_.B.transpose() * spec_.B;
    const Mat rr_x = ((1.0 - sc_.alpha) * sigma / 2.0) * ata;
    const Mat rr_y = sc_.alpha * sgT_ + rho * sc_.alpha * sigma * btb;

    const double anchor_res = spec_.residual(anchor.x, anchor.y).norm();
    std::vector<double> phis(K + 1, 0.0), xis(K + 1, 0.0);
    for (std::size_t k = 1; k <= K; ++k) {
      phis[k] = phi(k, anchor);
      const Vec x = xi(k, anchor);
      xis[k] = x.norm();
      // ||xi||^2 = phi needs A x_bar + B y_bar = c; a floating-point anchor
      // misses it by r_bar, which shifts phi by sigma(2<B e, r_bar> + ||r_bar||^2).
      const double be = (spec_.B * Vec(trace_.state(k).y - anchor.y)).norm();
      const double infeas = v.sigma * (2.0 * be * anchor_res + anchor_res * anchor_res);
      rep.rows.push_back(xi_phi_row(static_cast<long>(k), x.squaredNorm(), phis[k], infeas));
    }

    for (std::size_t k = 0; k < K; ++k) {
      const IterationRecord& rec = trace_.records[k];
      const Iterate& wk = trace_.state(k);
      const Iterate& wn = trace_.state(k + 1);
      const long kk = static_cast<long>(k);

      // Certificates, recomputed in the M and N norms of the two-block reading.
      rep.rows.push_back(le_row("cert_x", kk, m_factor_.inv_norm(rec.d_x), rec.bound_x));
      rep.rows.push_back(le_row("cert_y", kk, n_factor_.inv_norm(rec.d_y), rec.bound_y));
      rep.rows.push_back(subgradient_row("subgrad_x", kk, spec_.p1, spec_.x1_dim(), M_, wn.x,
                                         solver_.x_linear_term(wk), rec.d_x));
      rep.rows.push_back(subgradient_row("subgrad_y", kk, spec_.q1, spec_.y1_dim(), N_, wn.y,
                                         solver_.y_linear_term(wk, wn.x), rec.d_y));

      const ShadowIterate s = shadow(k);
      const double ek = v.eps(kk);
      rep.rows.push_back(le_row("err_x", kk, std::sqrt(std::max(0.0, sq_norm(Vec(wn.x - s.x_bar), M_))), ek));
      rep.rows.push_back(le_row("err_y", kk, std::sqrt(std::max(0.0, sq_norm(Vec(wn.y - s.y_bar), N_))),
                                (1.0 + sigma * coupling_) * ek));
      const Vec xb = xi_of(s.x_bar, s.y_bar, s.z_bar, s.r_bar, wk.y, anchor);
      const Vec xa = xi_of(wn.x, wn.y, wn.z, spec_.residual(wn.x, wn.y), wk.y, anchor);
      rep.rows.push_back(le_row("xi_shadow", kk, (xb - xa).norm(), varrho_ * ek));

      if (!std::isnan(rec.reduction_gap)) {
        LedgerRow r{"reduction", kk, rec.reduction_gap, 1e-9, 0.0, rec.reduction_gap <= 1e-9};
        rep.rows.push_back(r);
      }

      // xi^{k+1} against the accumulated budget, and step by step.
      const double bound = xis[1] + (varrho_ + g_n_) * total_eps_;
      rep.rows.push_back(le_row("fejer", kk, xis[k + 1], bound));
      if (k >= 1) {
        const double step = xis[k] + varrho_ * ek + g_n_ * v.eps(kk - 1);
        rep.rows.push_back(le_row("fejer_step", kk, xis[k + 1], step));
        if (total_eps_ == 0.0) {
          LedgerRow r{"fejer_mono", kk, xis[k + 1], xis[k], 1e-10 * (1.0 + xis[k]), false};
          r.pass = r.lhs <= r.rhs + r.slack;
          rep.rows.push_back(r);
        }
      }

      VerificationRecord vr;
      vr.k = kk + 1;
      vr.phi = phis[k + 1];
      vr.xi_norm = xis[k + 1];
      vr.xi_bar_norm = xb.norm();
      vr.varrho = varrho_;
      vr.fejer_bound = bound;

      if (k >= 1) {
        const IterationRecord& prev = trace_.records[k - 1];
        const Vec dx = wk.x - wn.x;
        const Vec dy = wk.y - wn.y;
        const Vec rn = spec_.residual(wn.x, wn.y);
        const Vec rk = spec_.residual(wk.x, wk.y);

        const double key_lhs = 2.0 * sc_.alpha * Vec(rec.d_y - prev.d_y).dot(dy) -
                               2.0 * rec.d_x.dot(wn.x - anchor.x) - 2.0 * rec.d_y.dot(wn.y - anchor.y) +
                               sq_norm(dx, F_) + sq_norm(dy, G_) + sc_.beta * sigma * rn.squaredNorm();
        const double key_rhs = phis[k] - phis[k + 1];
        rep.rows.push_back(le_row("key", kk, key_lhs, key_rhs));

        const Iterate& wp = trace_.state(k - 1);
        const double rr_lhs = (1.0 - tau) * sigma * rn.squaredNorm() +
                              sigma * spec_.residual(wn.x, wk.y).squaredNorm() +
                              2.0 * sc_.alpha * Vec(prev.d_y - rec.d_y).dot(dy);
        const double rr_rhs = sc_.alpha_hat * sigma * (rn.squaredNorm() - rk.squaredNorm()) +
                              sc_.beta * sigma * rn.squaredNorm() + sq_norm(dx, rr_x) -
                              sc_.alpha * sq_norm(Vec(wp.y - wk.y), sgT_) + sq_norm(dy, rr_y);
        rep.rows.push_back(ge_row("rr", kk, rr_lhs, rr_rhs));
        vr.key_lhs = key_lhs;
        vr.key_rhs = key_rhs;
        vr.rr_lhs = rr_lhs;
        vr.rr_rhs = rr_rhs;
      }
      rep.records.push_back(vr);
    }
    return rep;
  }

  /// phi at the last state with the last state itself as anchor, against
  /// 10 * stop_tol^2 * scale with scale = (1 + sigma)(1 + ||Sg + T||)(1 + ||c|| + ||w||)^2.
  LedgerRow limit_anchor_row(double stop_tol) const {
    const std::size_t K = trace_.records.size();
    if (K == 0) throw std::invalid_argument("limit check needs at least one iteration");
    const Iterate& last = trace_.state(K);
    const double val = phi(K, last);
    const double wn = std::sqrt(last.x.squaredNorm() + last.y.squaredNorm() + last.z.squaredNorm());
    const double scale = (1.0 + trace_.view.sigma) * (1.0 + spectral_norm(sgT_)) *
                         std::pow(1.0 + spec_.c.norm() + wn, 2);
    LedgerRow r{"limit_phi", static_cast<long>(K), val, 10.0 * stop_tol * stop_tol * scale, 0.0, false};
    r.pass = r.lhs <= r.rhs;
    return r;
  }

 private:
  static TwoBlockConfig shadow_config(const TwoBlockView& v) {
    TwoBlockConfig c;
    c.sigma = v.sigma;
    c.tau = v.tau;
    c.S = v.S;
    c.T = v.T;
    c.eps = v.eps;
    c.mode = InexactMode::exact;
    return c;
  }

  Vec xi_of(const Vec& x, const Vec& y, const Vec& z, const Vec& r, const Vec& y_prev,
            const Iterate& anchor) const {
    const TwoBlockView& v = trace_.view;
    const Index nx = x.size(), ny = y.size(), nz = z.size();
    Vec out(nz + nx + ny + r.size() + ny);
    Index o = 0;
    // 1/sqrt(tau sigma) so that the squared norm reproduces phi.
    out.segment(o, nz) = (anchor.z - z) / std::sqrt(v.tau * v.sigma);
    o += nz;
    out.segment(o, nx) = sqrt_sfS_ * (anchor.x - x);
    o += nx;
    out.segment(o, ny) = sqrt_N_ * (anchor.y - y);
    o += ny;
    out.segment(o, r.size()) = std::sqrt(sc_.alpha_hat * v.sigma) * r;
    o += r.size();
    out.segment(o, ny) = std::sqrt(sc_.alpha) * (sqrt_sgT_ * (y_prev - y));
    return out;
  }

  static LedgerRow xi_phi_row(long k, double xi_sq, double phi, double infeas) {
    LedgerRow r{"xi_phi", k, xi_sq, phi, 1e-10 * std::max(std::abs(xi_sq), std::abs(phi)) + infeas, false};
    r.pass = std::abs(xi_sq - phi) <= r.slack;
    return r;
  }

  /// d - (H u - q) must lie in the subdifferential of the first-block term at
  /// u; lhs measures the violation through the prox characterization.
  static LedgerRow subgradient_row(std::string name, long k, const ProxFriendlyFunction& theta,
                                   Index d1, const Mat& h, const Vec& u, const Vec& q, const Vec& d) {
    const Vec g = h * u - q - d;  // must be in -subdiff(theta)(u) on block 0, zero elsewhere
    Vec viol(u.size());
    viol.head(d1) = u.head(d1) - prox(theta, 1.0, Vec(u.head(d1) - g.head(d1)));
    viol.tail(u.size() - d1) = g.tail(u.size() - d1);
    const double scale = 1.0 + q.norm() + d.norm() + spectral_norm(h) * u.norm();
    LedgerRow r{std::move(name), k, viol.norm(), 0.0, kLedgerSlack * scale, false};
    r.pass = r.lhs <= r.slack;
    return r;
  }

  const ProblemSpec& spec_;
  const Trace& trace_;
  TwoBlockSolver solver_;
  StepConstants sc_{};
  Mat M_, N_, F_, G_, sfS_, sgT_, sqrt_sfS_, sqrt_sgT_, sqrt_N_;
  SpdFactor m_factor_, n_factor_;
  double coupling_ = 0.0;
  double varrho_ = 0.0;
  double g_n_ = 0.0;
  double total_eps_ = 0.0;
};

inline VerificationReport verify_trace(const ProblemSpec& spec, const Trace& trace, const Iterate& anchor) {
  return TraceLedger(spec, trace).run(anchor);
}

struct LemmaA1Result {
  long trials = 0;
  long failures = 0;
  double worst_margin = std::numeric_limits<double>::infinity();  // min of lhs - rhs + slack
};

/// <grad h(u) - grad h(u'), v - u'> >= -1/4 ||v - u||^2_{Sigma_hat} on random triples.
inline LemmaA1Result check_lemma_a1(const SmoothConvexFunction& fn, long trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index n = fn.structure().total_dim();
  auto draw = [&] {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = 3.0 * gauss(rng);
    return v;
  };
  LemmaA1Result out;
  for (long t = 0; t < trials; ++t) {
    const Vec u = draw(), up = draw(), v = draw();
    const double lhs = Vec(fn.gradient(u) - fn.gradient(up)).dot(v - up);
    const double rhs = -0.25 * sq_norm(Vec(v - u), fn.majorizer().matrix());
    const double slack = 1e-10 * (1.0 + std::max(std::abs(lhs), std::abs(rhs)));
    ++out.trials;
    out.worst_margin = std::min(out.worst_margin, lhs - rhs + slack);
    if (lhs < rhs - slack) ++out.failures;
  }
  return out;
}

}  // namespace sgsadmm
