#pragma once

// Prox-friendly nonsmooth terms (zero, weighted l1, box indicator) and the
// two proximal solves the algorithms need: the scaled Euclidean prox and the
// metric prox  argmin theta(u) + 1/2 u'Pu - q'u  for a positive definite P.

#include "sgsadmm/blockalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sgsadmm {

enum class ProxKind { zero, l1, box };

inline const char* to_string(ProxKind k) {
  switch (k) {
    case ProxKind::zero: return "zero";
    case ProxKind::l1: return "l1";
    case ProxKind::box: return "box";
  }
  return "?";
}

class ProxFriendlyFunction {
 public:
  ProxFriendlyFunction() = default;

  static ProxFriendlyFunction zero(Index dim) {
    ProxFriendlyFunction fn;
    fn.kind_ = ProxKind::zero;
    fn.dim_ = dim;
    return fn;
  }

  static ProxFriendlyFunction l1(Index dim, double weight) {
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
      throw std::invalid_argument("l1 weight must be finite and >= 0");
    }
    ProxFriendlyFunction fn;
    fn.kind_ = ProxKind::l1;
    fn.dim_ = dim;
    fn.weight_ = weight;
    return fn;
  }

  static ProxFriendlyFunction box(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw DimensionMismatch("box bounds differ in length");
    for (Index i = 0; i < lo.size(); ++i) {
      if (!(lo(i) <= hi(i))) {
        throw std::invalid_argument("box bound " + std::to_string(i) + ": lo > hi");
      }
    }
    ProxFriendlyFunction fn;
    fn.kind_ = ProxKind::box;
    fn.dim_ = lo.size();
    fn.lo_ = std::move(lo);
    fn.hi_ = std::move(hi);
    return fn;
  }

  ProxKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double weight() const { return weight_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

  bool in_domain(const Vec& u) const {
    if (kind_ != ProxKind::box) return true;
    return (u.array() >= lo_.array()).all() && (u.array() <= hi_.array()).all();
  }

  /// +infinity outside the box.
  double value(const Vec& u) const {
    check_dim(u);
    switch (kind_) {
      case ProxKind::zero: return 0.0;
      case ProxKind::l1: return weight_ * u.lpNorm<1>();
      case ProxKind::box:
        return in_domain(u) ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  void check_dim(const Vec& u) const {
    if (u.size() != dim_) {
      throw DimensionMismatch("prox-friendly function of dimension " + std::to_string(dim_) +
                              " applied to vector of length " + std::to_string(u.size()));
    }
  }

  bool operator==(const ProxFriendlyFunction& o) const {
    return kind_ == o.kind_ && dim_ == o.dim_ && weight_ == o.weight_ && lo_ == o.lo_ &&
           hi_ == o.hi_;
  }

 private:
  ProxKind kind_ = ProxKind::zero;
  Index dim_ = 0;
  double weight_ = 0.0;
  Vec lo_;
  Vec hi_;
};

/// argmin_u { fn(u) + 1/(2t) ||u - v||^2 }.
inline Vec prox(const ProxFriendlyFunction& fn, double t, const Vec& v) {
  if (!(t > 0.0)) throw std::invalid_argument("prox step must be positive");
  fn.check_dim(v);
  switch (fn.kind()) {
    case ProxKind::zero: return v;
    case ProxKind::l1: {
      const double thr = t * fn.weight();
      return v.unaryExpr([thr](double a) {
        return a > thr ? a - thr : (a < -thr ? a + thr : 0.0);
      });
    }
    case ProxKind::box: return v.cwiseMax(fn.lo()).cwiseMin(fn.hi());
  }
  return v;
}

/// Natural-map residual ||u - prox_fn(u - g)||_inf; zero exactly when
/// -g is a subgradient of fn at u.
inline double natural_residual(const ProxFriendlyFunction& fn, const Vec& u, const Vec& g) {
  if (u.size() == 0) return 0.0;
  return (u - prox(fn, 1.0, u - g)).lpNorm<Eigen::Infinity>();
}

namespace detail {

// Coordinate state of a candidate active pattern:
//   l1:  -1 negative, 0 pinned at zero, +1 positive
//   box: -1 at lower bound, 0 free, +1 at upper bound
using Pattern = std::vector<int>;

inline Vec solve_pattern(const ProxFriendlyFunction& fn, const Mat& p, const Vec& q,
                         const Pattern& pat) {
  const Index n = q.size();
  Vec u = Vec::Zero(n);
  std::vector<Index> free_idx;
  Vec rhs = q;
  for (Index i = 0; i < n; ++i) {
    const int s = pat[static_cast<std::size_t>(i)];
    if (fn.kind() == ProxKind::l1) {
      if (s == 0) continue;
      rhs(i) -= fn.weight() * s;
      free_idx.push_back(i);
    } else {
      if (s == 0) {
        free_idx.push_back(i);
      } else {
        u(i) = s < 0 ? fn.lo()(i) : fn.hi()(i);
      }
    }
  }
  if (fn.kind() == ProxKind::box) {
    for (Index i = 0; i < n; ++i) {
      if (pat[static_cast<std::size_t>(i)] != 0) rhs -= p.col(i) * u(i);
    }
  }
  const Index nf = static_cast<Index>(free_idx.size());
  if (nf == 0) return u;
  Mat pf(nf, nf);
  Vec qf(nf);
  for (Index a = 0; a < nf; ++a) {
    qf(a) = rhs(free_idx[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < nf; ++b) {
      pf(a, b) = p(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
    }
  }
  Vec uf = pf.llt().solve(qf);
  for (Index a = 0; a < nf; ++a) u(free_idx[static_cast<std::size_t>(a)]) = uf(a);
  return u;
}

inline Pattern pattern_of(const ProxFriendlyFunction& fn, const Vec& u, const Vec& g) {
  const Index n = u.size();
  Pattern pat(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    if (fn.kind() == ProxKind::l1) {
      // Stationarity at the prox point decides the sign.
      const double w = u(i) - g(i);
      pat[static_cast<std::size_t>(i)] = w > fn.weight() ? 1 : (w < -fn.weight() ? -1 : 0);
    } else {
      const double w = u(i) - g(i);
      pat[static_cast<std::size_t>(i)] = w <= fn.lo()(i) ? -1 : (w >= fn.hi()(i) ? 1 : 0);
    }
  }
  return pat;
}

}  // namespace detail

/// argmin_u { fn(u) + 1/2 u'Pu - q'u } for positive definite P.
///
/// Zero functions and 1-dimensional problems are solved in closed form.
/// Otherwise a primal-dual active-set iteration is run; if it does not settle
/// on an optimal pattern the full pattern space (3^dim) is enumerated, which
/// terminates finitely. The returned point is the pattern solution with the
/// smallest natural-map residual.
inline Vec prox_quadratic(const ProxFriendlyFunction& fn, const Mat& p, const Vec& q) {
  fn.check_dim(q);
  const Index n = q.size();
  if (n == 0) return q;
  if (fn.kind() == ProxKind::zero) return p.llt().solve(q);
  if (n == 1) {
    const double a = p(0, 0);
    if (!(a > 0.0)) throw NotPositiveDefinite("prox_quadratic: non-positive curvature");
    Vec v(1);
    v(0) = q(0) / a;
    return prox(fn, 1.0 / a, v);
  }

  const double scale = 1.0 + q.lpNorm<Eigen::Infinity>() + p.lpNorm<Eigen::Infinity>();
  const double accept = 1e-13 * scale;
  auto residual = [&](const Vec& u) { return natural_residual(fn, u, p * u - q); };

  Vec best;
  double best_res = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec& u) {
    const double r = residual(u);
    if (r < best_res) {
      best_res = r;
      best = u;
    }
    return r;
  };

  // Start from the pattern of the unconstrained minimizer.
  Vec u = p.llt().solve(q);
  detail::Pattern pat = detail::pattern_of(fn, u, p * u - q);
  std::vector<detail::Pattern> seen;
  for (int it = 0; it < 4 * static_cast<int>(n) + 8; ++it) {
    if (std::find(seen.begin(), seen.end(), pat) != seen.end()) break;
    seen.push_back(pat);
    u = detail::solve_pattern(fn, p, q, pat);
    if (consider(u) <= accept) return best;
    pat = detail::pattern_of(fn, u, p * u - q);
  }

  if (n > 12) {
    throw std::runtime_error("prox_quadratic: active-set iteration stalled and dimension " +
                             std::to_string(n) + " is too large to enumerate");
  }
  detail::Pattern cur(static_cast<std::size_t>(n), -1);
  while (true) {
    Vec cand = detail::solve_pattern(fn, p, q, cur);
    if (consider(cand) <= accept) return best;
    std::size_t i = 0;
    while (i < cur.size() && cur[i] == 1) cur[i++] = -1;
    if (i == cur.size()) break;
    ++cur[i];
  }
  return best;
}

}  // namespace sgsadmm
