#pragma once

// Multi-block sGS-imiPADMM. Each iteration performs a backward and a forward
// block sweep in x on the operator M~ = Sf + sigma A'A + S~, the same in y on
// N~ = Sg + sigma B'B + T~ (given the new x), and the dual step. Through the
// sGS decomposition the iteration is the two-block method with proximal terms
// S_sGS = S~ + sGS(M~), T_sGS = T~ + sGS(N~) and certificates
// d = delta + M~_u M~_d^{-1}(delta - delta~).

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/imipadmm.hpp"
#include "sgsadmm/model.hpp"
#include "sgsadmm/schedule.hpp"
#include "sgsadmm/sgs.hpp"
#include "sgsadmm/trace.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace sgsadmm {

struct MultiBlockConfig {
  double sigma = 1.0;
  double tau = 1.618;
  BlockOperator S_tilde;
  BlockOperator T_tilde;
  ToleranceSchedule eps_tilde = ToleranceSchedule::geometric(1e-2, 0.5);
  long max_iter = 10000;
  double stop_tol = 1e-8;
  InexactMode mode = InexactMode::exact;
  std::uint64_t seed = 0;
  bool cross_check = false;
};

struct ConstructedOperators {
  BlockOperator M_tilde;
  BlockOperator N_tilde;
  BlockOperator S_sgs;
  BlockOperator T_sgs;
  BlockOperator M_sgs;
  BlockOperator N_sgs;
  double kappa = 0.0;
  double kappa_prime = 0.0;
};

namespace detail {

/// 2 sqrt(s-1) ||H_d^{-1/2}|| + sqrt(s) ||H_d^{1/2} (H_d + H_u)^{-1}||
inline double transport_constant(const OperatorSplit& sp) {
  const Mat& hd = sp.diag.matrix();
  const double s = static_cast<double>(sp.diag.rows().num_blocks());
  const double first = 2.0 * std::sqrt(s - 1.0) / std::sqrt(min_eig(hd));
  const Mat tri = hd + sp.upper.matrix();
  const Mat second = sqrt_psd(hd) * tri.partialPivLu().inverse();
  return first + std::sqrt(s) * spectral_norm(second);
}

struct SideData {
  const BlockStructure* structure;
  const Mat* sigma_hat;
  const Mat* coupling;  // A or B
};

/// Per-block positive definiteness of Sf_ii + sigma A_i'A_i + S~_ii; returns
/// the first failing block or -1.
inline Index first_singular_block(const SideData& side, double sigma, const Mat& prox) {
  const BlockStructure& s = *side.structure;
  const Mat h = *side.sigma_hat + sigma * side.coupling->transpose() * *side.coupling + prox;
  for (Index i = 0; i < s.num_blocks(); ++i) {
    if (!is_positive_definite(Mat(h.block(s.offset(i), s.offset(i), s.dim(i), s.dim(i))), kPsdTol)) {
      return i;
    }
  }
  return -1;
}

inline bool multi_block_side_ok(const SideData& side, double sigma, const Mat& prox) {
  const Mat& sh = *side.sigma_hat;
  const Mat ata = sigma * side.coupling->transpose() * *side.coupling;
  const double scale = op_scale({&sh, &ata, &prox});
  if (min_eig(Mat(prox + 0.5 * sh)) < -kPsdTol * scale) return false;
  if (first_singular_block(side, sigma, prox) >= 0) return false;
  const BlockOperator mt = BlockOperator::self_adjoint(*side.structure, sh + ata + prox);
  const Mat cond = 0.5 * sh + ata + prox + sgs_operator(mt).matrix();
  return min_eig(cond) > kPsdTol * scale;
}

}  // namespace detail

/// Checks the proximal-term conditions and assembles every operator the
/// multi-block method and its two-block reading need. Failures throw
/// AdmissibilityError naming the condition (and block index where relevant).
inline ConstructedOperators construct_operators(const ProblemSpec& spec, double sigma,
                                                const BlockOperator& S_tilde,
                                                const BlockOperator& T_tilde) {
  spec.validate();
  if (!(sigma > 0.0)) throw AdmissibilityError("sigma > 0 violated");
  if (!(S_tilde.rows() == spec.x_structure) || !(T_tilde.rows() == spec.y_structure)) {
    throw DimensionMismatch("proximal terms must share the block structure of x and y");
  }
  const Mat& sf = spec.f.majorizer().matrix();
  const Mat& sg = spec.g.majorizer().matrix();
  const Mat ata = sigma * spec.A.transpose() * spec.A;
  const Mat btb = sigma * spec.B.transpose() * spec.B;
  const double sx = detail::op_scale({&sf, &ata, &S_tilde.matrix()});
  const double sy = detail::op_scale({&sg, &btb, &T_tilde.matrix()});

  detail::require_psd(S_tilde.matrix() + 0.5 * sf, sx, "S~ >= -1/2 Sigma_f");
  detail::require_psd(T_tilde.matrix() + 0.5 * sg, sy, "T~ >= -1/2 Sigma_g");
  const detail::SideData xside{&spec.x_structure, &sf, &spec.A};
  const detail::SideData yside{&spec.y_structure, &sg, &spec.B};
  if (const Index i = detail::first_singular_block(xside, sigma, S_tilde.matrix()); i >= 0) {
    throw AdmissibilityError("(Sigma_f)_ii + sigma A_i A_i' + S~_ii > 0 violated at x block " +
                             std::to_string(i));
  }
  if (const Index j = detail::first_singular_block(yside, sigma, T_tilde.matrix()); j >= 0) {
    throw AdmissibilityError("(Sigma_g)_jj + sigma B_j B_j' + T~_jj > 0 violated at y block " +
                             std::to_string(j));
  }

  ConstructedOperators ops;
  ops.M_tilde = BlockOperator::self_adjoint(spec.x_structure, sf + ata + S_tilde.matrix());
  ops.N_tilde = BlockOperator::self_adjoint(spec.y_structure, sg + btb + T_tilde.matrix());
  ops.S_sgs = BlockOperator::self_adjoint(spec.x_structure,
                                          S_tilde.matrix() + sgs_operator(ops.M_tilde).matrix());
  ops.T_sgs = BlockOperator::self_adjoint(spec.y_structure,
                                          T_tilde.matrix() + sgs_operator(ops.N_tilde).matrix());
  ops.M_sgs = hat_operator(ops.M_tilde);
  ops.N_sgs = hat_operator(ops.N_tilde);
  detail::require_pd(0.5 * sf + ata + ops.S_sgs.matrix(), sx, "1/2 Sigma_f + sigma A*A' + S_sGS > 0");
  detail::require_pd(0.5 * sg + btb + ops.T_sgs.matrix(), sy, "1/2 Sigma_g + sigma B*B' + T_sGS > 0");
  ops.kappa = detail::transport_constant(split(ops.M_tilde));
  ops.kappa_prime = detail::transport_constant(split(ops.N_tilde));
  return ops;
}

/// Proximal terms (S~, T~) for the multi-block method; see choose_two_block_terms.
inline std::pair<BlockOperator, BlockOperator> choose_multi_block_terms(const ProblemSpec& spec,
                                                                        double sigma,
                                                                        const ProxTermChoice& choice) {
  const auto& xs = spec.x_structure;
  const auto& ys = spec.y_structure;
  switch (choice.kind) {
    case ProxTermKind::zero:
      return {BlockOperator::zero(xs), BlockOperator::zero(ys)};
    case ProxTermKind::shift:
      return {BlockOperator::identity(xs, choice.shift), BlockOperator::identity(ys, choice.shift)};
    case ProxTermKind::automatic:
    case ProxTermKind::stress: {
      const bool stress = choice.kind == ProxTermKind::stress;
      const Mat& sf = spec.f.majorizer().matrix();
      const Mat& sg = spec.g.majorizer().matrix();
      const Mat bx = stress ? Mat(-0.49 * sf) : Mat(Mat::Zero(sf.rows(), sf.cols()));
      const Mat by = stress ? Mat(-0.49 * sg) : Mat(Mat::Zero(sg.rows(), sg.cols()));
      const Mat ix = Mat::Identity(sf.rows(), sf.cols());
      const Mat iy = Mat::Identity(sg.rows(), sg.cols());
      const detail::SideData xside{&xs, &sf, &spec.A};
      const detail::SideData yside{&ys, &sg, &spec.B};
      auto guarded = [sigma](const detail::SideData& side, const Mat& prox) {
        try {
          return detail::multi_block_side_ok(side, sigma, prox);
        } catch (const LinalgError&) {
          return false;
        }
      };
      const double lx = detail::minimal_shift([&](double l) { return guarded(xside, bx + l * ix); });
      const double ly = detail::minimal_shift([&](double l) { return guarded(yside, by + l * iy); });
      return {BlockOperator::self_adjoint(xs, bx + lx * ix), BlockOperator::self_adjoint(ys, by + ly * iy)};
    }
  }
  return {};
}

class MultiBlockSolver {
 public:
  MultiBlockSolver(const ProblemSpec& spec, MultiBlockConfig cfg)
      : spec_(spec), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    spec_.validate();
    detail::require_step_params(cfg_.sigma, cfg_.tau);
    ops_ = construct_operators(spec_, cfg_.sigma, cfg_.S_tilde, cfg_.T_tilde);
    view_ = TwoBlockView{cfg_.sigma, cfg_.tau, ops_.S_sgs, ops_.T_sgs,
                         cfg_.mode == InexactMode::exact
                             ? ToleranceSchedule::zero()
                             : cfg_.eps_tilde.scaled(std::max(ops_.kappa, ops_.kappa_prime))};
    sfS_ = spec_.f.majorizer().matrix() + cfg_.S_tilde.matrix();
    sgT_ = spec_.g.majorizer().matrix() + cfg_.T_tilde.matrix();
    x_sweeper_.emplace(ops_.M_tilde, spec_.p1);
    y_sweeper_.emplace(ops_.N_tilde, spec_.q1);
    x_tilt_ = tilt_map(ops_.M_tilde);
    y_tilt_ = tilt_map(ops_.N_tilde);
    m_sgs_ = SpdFactor(ops_.M_sgs.matrix());
    n_sgs_ = SpdFactor(ops_.N_sgs.matrix());
    if (cfg_.cross_check) {
      TwoBlockConfig tb;
      tb.sigma = cfg_.sigma;
      tb.tau = cfg_.tau;
      tb.S = ops_.S_sgs;
      tb.T = ops_.T_sgs;
      tb.eps = view_.eps;
      tb.mode = InexactMode::exact;
      reference_.emplace(spec_, tb);
    }
  }

  const ProblemSpec& spec() const { return spec_; }
  const MultiBlockConfig& config() const { return cfg_; }
  const ConstructedOperators& operators() const { return ops_; }
  const TwoBlockView& view() const { return view_; }

  struct IterateOutput {
    Iterate next;
    Vec d_x;
    Vec d_y;
    double eps_tilde = 0.0;
    double cert_x = 0.0;  // ||M_sGS^{-1/2} d_x||
    double cert_y = 0.0;  // ||N_sGS^{-1/2} d_y||
    double sweep_cert_max = 0.0;
    double reduction_gap = kNaN;
  };

  IterateOutput iterate(const Iterate& w, long k) {
    IterateOutput out;
    out.eps_tilde = cfg_.mode == InexactMode::exact ? 0.0 : cfg_.eps_tilde(k);
    const double et = out.eps_tilde;

    const Vec bx = sfS_ * w.x - spec_.f.gradient(w.x) - spec_.A.transpose() * w.z -
                   cfg_.sigma * spec_.A.transpose() * (spec_.B * w.y - spec_.c);
    const SweepResult sx = run_sweep(*x_sweeper_, bx, w.x, et);
    out.next.x = sx.u_plus.data;
    out.d_x = sx.delta.data + x_tilt_ * (sx.delta.data - sx.delta_tilde.data);

    const Vec by = sgT_ * w.y - spec_.g.gradient(w.y) - spec_.B.transpose() * w.z -
                   cfg_.sigma * spec_.B.transpose() * (spec_.A * out.next.x - spec_.c);
    const SweepResult sy = run_sweep(*y_sweeper_, by, w.y, et);
    out.next.y = sy.u_plus.data;
    out.d_y = sy.delta.data + y_tilt_ * (sy.delta.data - sy.delta_tilde.data);

    out.next.z = w.z + cfg_.tau * cfg_.sigma * spec_.residual(out.next.x, out.next.y);

    out.sweep_cert_max = std::max(max_block_norm(sx), max_block_norm(sy));
    out.cert_x = m_sgs_.inv_norm(out.d_x);
    out.cert_y = n_sgs_.inv_norm(out.d_y);
    // The residual-driven mode can only reach the accuracy of a direct solve,
    // so its bound carries a rounding floor.
    const double floor_x = cfg_.mode == InexactMode::cg ? 1e-12 * (1.0 + bx.norm()) : 0.0;
    const double floor_y = cfg_.mode == InexactMode::cg ? 1e-12 * (1.0 + by.norm()) : 0.0;
    const double slack = 1e-12 * (1.0 + et);
    if (out.cert_x > ops_.kappa * et + slack + floor_x ||
        out.cert_y > ops_.kappa_prime * et + slack + floor_y) {
      throw std::logic_error("certificate transport bound violated at iteration " + std::to_string(k));
    }

    if (reference_) {
      const StepOutput ref = reference_->step_with_certificates(w, out.d_x, out.d_y);
      out.reduction_gap = std::max({(ref.next.x - out.next.x).cwiseAbs().maxCoeff(),
                                    (ref.next.y - out.next.y).cwiseAbs().maxCoeff(),
                                    (ref.next.z - out.next.z).cwiseAbs().maxCoeff()});
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
    const double kmax = std::max(ops_.kappa, ops_.kappa_prime);
    Iterate w = init;
    res.final_kkt = kkt_residual(spec_, w.x, w.y, w.z);
    for (long k = 0; k < cfg_.max_iter; ++k) {
      IterateOutput out = iterate(w, k);
      IterationRecord rec;
      rec.k = k;
      rec.kkt = kkt_residual(spec_, out.next.x, out.next.y, out.next.z);
      rec.eps = kmax * out.eps_tilde;
      rec.cert_x = out.cert_x;
      rec.cert_y = out.cert_y;
      rec.bound_x = ops_.kappa * out.eps_tilde;
      rec.bound_y = ops_.kappa_prime * out.eps_tilde;
      rec.sweep_cert_max = out.sweep_cert_max;
      rec.reduction_gap = out.reduction_gap;
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
  static Mat tilt_map(const BlockOperator& h) {
    const OperatorSplit sp = split(h);
    // M_u M_d^{-1}, using symmetry of M_d.
    return detail::diag_solve(sp, sp.upper.matrix().transpose()).transpose();
  }

  static double max_block_norm(const SweepResult& r) {
    double m = 0.0;
    const BlockStructure& s = r.delta.structure;
    for (Index i = 0; i < s.num_blocks(); ++i) {
      m = std::max({m, r.delta.block(i).norm(), r.delta_tilde.block(i).norm()});
    }
    return m;
  }

  Vec random_on_sphere(Index n, double radius) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = gauss(rng_);
    const double nrm = v.norm();
    return nrm == 0.0 ? Vec::Zero(n) : Vec(v * (radius / nrm));
  }

  SweepResult run_sweep(const SgsSweeper& sw, const Vec& b, const Vec& u_prev, double et) {
    const BlockStructure& s = sw.structure();
    if (cfg_.mode == InexactMode::cg) return sw.sweep_cg(b, u_prev, et);
    Vec delta = Vec::Zero(s.total_dim());
    Vec delta_tilde = Vec::Zero(s.total_dim());
    if (cfg_.mode == InexactMode::tilted && et > 0.0) {
      for (Index i = 0; i < s.num_blocks(); ++i) {
        delta.segment(s.offset(i), s.dim(i)) = random_on_sphere(s.dim(i), 0.9 * et);
      }
      for (Index i = 1; i < s.num_blocks(); ++i) {
        delta_tilde.segment(s.offset(i), s.dim(i)) = random_on_sphere(s.dim(i), 0.9 * et);
      }
      delta_tilde.head(s.dim(0)) = delta.head(s.dim(0));
    }
    return sw.sweep(b, u_prev, delta_tilde, delta);
  }

  ProblemSpec spec_;
  MultiBlockConfig cfg_;
  ConstructedOperators ops_;
  TwoBlockView view_;
  Mat sfS_;
  Mat sgT_;
  std::optional<SgsSweeper> x_sweeper_;
  std::optional<SgsSweeper> y_sweeper_;
  Mat x_tilt_;
  Mat y_tilt_;
  SpdFactor m_sgs_;
  SpdFactor n_sgs_;
  std::optional<TwoBlockSolver> reference_;
  std::mt19937_64 rng_;
};

}  // namespace sgsadmm
