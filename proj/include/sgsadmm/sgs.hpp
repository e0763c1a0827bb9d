#pragma once

// Inexact block symmetric Gauss-Seidel decomposition.
//
// For h(u) = 1/2<u,Hu> - <b,u> and a prox-friendly theta on block 0, one
// backward pass (blocks s-1..1) followed by one forward pass (blocks 0..s-1)
// returns the unique minimizer of
//
//   theta(u_0) + h(u) + 1/2||u - u_prev||^2_{sGS(H)} - <d(dt, d), u>
//
// with sGS(H) = H_u H_d^{-1} H_u' and d(dt, d) = d + H_u H_d^{-1}(d - dt).
// Block indices are 0-based.

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/prox.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sgsadmm {

struct QuadraticBlockObjective {
  BlockOperator H;
  BlockVector b;
  ProxFriendlyFunction theta;  // acts on block 0
};

/// Per-block tolerance vectors; block 0 of delta_tilde always equals block 0
/// of delta.
class SweepTolerances {
 public:
  SweepTolerances() = default;

  SweepTolerances(BlockVector delta_tilde, BlockVector delta)
      : delta_tilde_(std::move(delta_tilde)), delta_(std::move(delta)) {
    if (!(delta_tilde_.structure == delta_.structure)) {
      throw DimensionMismatch("sweep tolerances: structures differ");
    }
    delta_tilde_.block(0) = delta_.block(0);
  }

  static SweepTolerances zero(const BlockStructure& s) {
    return SweepTolerances(BlockVector(s), BlockVector(s));
  }

  const BlockVector& delta_tilde() const { return delta_tilde_; }
  const BlockVector& delta() const { return delta_; }

 private:
  BlockVector delta_tilde_;
  BlockVector delta_;
};

namespace detail {

inline void require_pd_diag(const OperatorSplit& sp) {
  const BlockStructure& s = sp.diag.rows();
  for (Index i = 0; i < s.num_blocks(); ++i) {
    if (!is_positive_definite(Mat(sp.diag.block(i, i)), kSpdTol)) {
      throw NotPositiveDefinite("diagonal block " + std::to_string(i) +
                                " is not positive definite");
    }
  }
}

/// H_d^{-1} applied block by block.
inline Mat diag_solve(const OperatorSplit& sp, const Mat& rhs) {
  const BlockStructure& s = sp.diag.rows();
  Mat out(rhs.rows(), rhs.cols());
  for (Index i = 0; i < s.num_blocks(); ++i) {
    SpdFactor f{Mat(sp.diag.block(i, i))};
    out.middleRows(s.offset(i), s.dim(i)) = f.solve(rhs.middleRows(s.offset(i), s.dim(i)));
  }
  return out;
}

}  // namespace detail

/// sGS(H) = H_u H_d^{-1} H_u'.
inline BlockOperator sgs_operator(const BlockOperator& h) {
  const OperatorSplit sp = split(h);
  detail::require_pd_diag(sp);
  const Mat& hu = sp.upper.matrix();
  Mat r = hu * detail::diag_solve(sp, hu.transpose());
  return BlockOperator::self_adjoint(h.rows(), 0.5 * (r + r.transpose()));
}

/// (H_d + H_u) H_d^{-1} (H_d + H_u'), which equals H + sGS(H).
inline BlockOperator hat_operator(const BlockOperator& h) {
  const OperatorSplit sp = split(h);
  detail::require_pd_diag(sp);
  const Mat left = sp.diag.matrix() + sp.upper.matrix();
  Mat r = left * detail::diag_solve(sp, left.transpose());
  return BlockOperator::self_adjoint(h.rows(), 0.5 * (r + r.transpose()));
}

/// d(dt, d) = d + H_u H_d^{-1} (d - dt).
inline BlockVector tilt_vector(const SweepTolerances& tols, const OperatorSplit& split_h) {
  detail::require_pd_diag(split_h);
  const Vec diff = tols.delta().data - tols.delta_tilde().data;
  Vec d = tols.delta().data + split_h.upper.matrix() * detail::diag_solve(split_h, diff);
  return BlockVector(tols.delta().structure, std::move(d));
}

struct SweepResult {
  BlockVector u_tilde;  // block 0 is a copy of u_prev and is not used
  BlockVector u_plus;
  BlockVector delta_tilde;  // realized per-block certificates (backward pass)
  BlockVector delta;        // realized per-block certificates (forward pass)
};

/// Precomputed sweep machinery for a fixed H: block Cholesky factors and the
/// block-0 curvature for the prox solve.
class SgsSweeper {
 public:
  SgsSweeper(const BlockOperator& h, ProxFriendlyFunction theta)
      : h_(h), theta_(std::move(theta)) {
    require_self_adjoint(h, "sgs sweep");
    const BlockStructure& s = h.rows();
    if (theta_.dim() != s.dim(0)) {
      throw DimensionMismatch("theta dimension differs from block 0");
    }
    factors_.reserve(static_cast<std::size_t>(s.num_blocks()));
    for (Index i = 0; i < s.num_blocks(); ++i) {
      Mat hii = h.block(i, i);
      if (!is_positive_definite(hii, kSpdTol)) {
        throw NotPositiveDefinite("diagonal block " + std::to_string(i) +
                                  " is not positive definite");
      }
      factors_.emplace_back(hii);
    }
  }

  const BlockStructure& structure() const { return h_.rows(); }

  /// Exact sweep of the tilted subproblems: every block subproblem minus
  /// <tolerance_i, u_i> is minimized exactly, so tolerance_i is an exact
  /// subgradient of the untilted subproblem at the returned block.
  SweepResult sweep(const Vec& b, const Vec& u_prev, const Vec& delta_tilde,
                    const Vec& delta) const {
    const BlockStructure& s = structure();
    const Index nb = s.num_blocks();
    const Mat& H = h_.matrix();
    Vec ut = u_prev;
    for (Index i = nb - 1; i >= 1; --i) {
      ut.segment(s.offset(i), s.dim(i)) =
          factors_[static_cast<std::size_t>(i)].solve(Vec(block_rhs(H, b, ut, i) +
                                                          delta_tilde.segment(s.offset(i), s.dim(i))));
    }
    Vec up = ut;
    {
      Vec q = block_rhs(H, b, up, 0) + delta.head(s.dim(0));
      up.head(s.dim(0)) = prox_quadratic(theta_, Mat(h_.block(0, 0)), q);
    }
    for (Index i = 1; i < nb; ++i) {
      up.segment(s.offset(i), s.dim(i)) = factors_[static_cast<std::size_t>(i)].solve(
          Vec(block_rhs(H, b, up, i) + delta.segment(s.offset(i), s.dim(i))));
    }
    Vec dt = delta_tilde;
    dt.head(s.dim(0)) = delta.head(s.dim(0));
    return {BlockVector(s, std::move(ut)), BlockVector(s, std::move(up)), BlockVector(s, dt),
            BlockVector(s, delta)};
  }

  /// Residual-driven inner mode: blocks 1..s-1 are solved by conjugate
  /// gradients stopped once the subproblem gradient norm is <= tol, and that
  /// gradient is reported as the block certificate. Block 0 is exact.
  SweepResult sweep_cg(const Vec& b, const Vec& u_prev, double tol) const {
    const BlockStructure& s = structure();
    const Index nb = s.num_blocks();
    const Mat& H = h_.matrix();
    Vec ut = u_prev;
    Vec dt = Vec::Zero(u_prev.size());
    for (Index i = nb - 1; i >= 1; --i) {
      const Vec rhs = block_rhs(H, b, ut, i);
      auto seg = ut.segment(s.offset(i), s.dim(i));
      Vec ui = cg(Mat(h_.block(i, i)), rhs, Vec(seg), tol, i);
      seg = ui;
      dt.segment(s.offset(i), s.dim(i)) = Mat(h_.block(i, i)) * ui - rhs;
    }
    Vec up = ut;
    Vec d = Vec::Zero(u_prev.size());
    up.head(s.dim(0)) = prox_quadratic(theta_, Mat(h_.block(0, 0)), block_rhs(H, b, up, 0));
    for (Index i = 1; i < nb; ++i) {
      const Vec rhs = block_rhs(H, b, up, i);
      Vec ui = cg(Mat(h_.block(i, i)), rhs, Vec(up.segment(s.offset(i), s.dim(i))), tol, i);
      up.segment(s.offset(i), s.dim(i)) = ui;
      d.segment(s.offset(i), s.dim(i)) = Mat(h_.block(i, i)) * ui - rhs;
    }
    return {BlockVector(s, std::move(ut)), BlockVector(s, std::move(up)), BlockVector(s, dt),
            BlockVector(s, d)};
  }

 private:
  /// b_i - sum_{j != i} H_ij u_j
  Vec block_rhs(const Mat& H, const Vec& b, const Vec& u, Index i) const {
    const BlockStructure& s = structure();
    const Index oi = s.offset(i), di = s.dim(i);
    Vec r = b.segment(oi, di);
    if (oi > 0) r.noalias() -= H.block(oi, 0, di, oi) * u.head(oi);
    const Index tail = s.total_dim() - oi - di;
    if (tail > 0) r.noalias() -= H.block(oi, oi + di, di, tail) * u.tail(tail);
    return r;
  }

  Vec cg(const Mat& a, const Vec& rhs, Vec u, double tol, Index block) const {
    Vec r = rhs - a * u;
    if (r.norm() <= tol) return u;
    Vec p = r;
    double rr = r.squaredNorm();
    const int max_it = 10 * static_cast<int>(rhs.size()) + 10;
    for (int it = 0; it < max_it; ++it) {
      const Vec ap = a * p;
      const double alpha = rr / p.dot(ap);
      u += alpha * p;
      r -= alpha * ap;
      const double rr_new = r.squaredNorm();
      if (std::sqrt(rr_new) <= tol) return u;
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
    // Stagnation in floating point: fall back to the direct solve.
    return factors_[static_cast<std::size_t>(block)].solve(rhs);
  }

  BlockOperator h_;
  ProxFriendlyFunction theta_;
  std::vector<SpdFactor> factors_;
};

/// One backward + forward sweep on obj with the prescribed tolerance vectors.
inline SweepResult sgs_sweep(const QuadraticBlockObjective& obj, const BlockVector& u_prev,
                             const SweepTolerances& tols) {
  if (!(u_prev.structure == obj.H.rows()) || !(obj.b.structure == obj.H.rows())) {
    throw DimensionMismatch("sgs_sweep: structure mismatch");
  }
  SgsSweeper sw(obj.H, obj.theta);
  return sw.sweep(obj.b.data, u_prev.data, tols.delta_tilde().data, tols.delta().data);
}

struct BoundSides {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Both sides of
///   ||hatH^{-1/2} d(dt,d)|| <= ||H_d^{-1/2}(d - dt)|| + ||H_d^{1/2}(H_d + H_u)^{-1} dt||.
inline BoundSides theorem_iv_bound(const SweepTolerances& tols, const OperatorSplit& split_h,
                                   const BlockOperator& hat_h) {
  const BlockVector d = tilt_vector(tols, split_h);
  const Mat& hd = split_h.diag.matrix();
  const Vec diff = tols.delta().data - tols.delta_tilde().data;
  BoundSides out;
  out.lhs = SpdFactor(hat_h.matrix()).inv_norm(d.data);
  out.rhs = (inv_sqrt_pd(hd) * diff).norm();
  const Mat upper_tri = hd + split_h.upper.matrix();
  const Vec w = upper_tri.partialPivLu().solve(tols.delta_tilde().data);
  out.rhs += (sqrt_psd(hd) * w).norm();
  return out;
}

}  // namespace sgsadmm
