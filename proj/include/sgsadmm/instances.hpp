#pragma once

// Deterministic test problems and an active-set enumeration oracle.

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/model.hpp"
#include "sgsadmm/prox.hpp"
#include "sgsadmm/trace.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgsadmm {

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InstancePreset {
  std::string name;
  std::vector<Index> x_dims;
  std::vector<Index> y_dims;
  Index z_dim = 1;
  ProxKind p1_kind = ProxKind::zero;
  ProxKind q1_kind = ProxKind::zero;
  double l1_weight = 1.0;
  double box_radius = 0.3;  // box on the first block is [-r, r]
  double eig_lo = 0.5;      // spectrum of Q_f, Q_g is log-uniform in [eig_lo, eig_hi]
  double eig_hi = 5.0;
  MajorizerMode majorizer = MajorizerMode::tight;
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"tiny", "l1tiny", "boxtiny", "threeby2", "stress"};
  return names;
}

/// Random presets; the hand-written ones (tiny, l1tiny, boxtiny) are built
/// directly by make_preset.
inline InstancePreset random_preset(const std::string& name) {
  InstancePreset p;
  p.name = name;
  if (name == "threeby2") {
    p.x_dims = {2, 2, 1};
    p.y_dims = {2, 1};
    p.z_dim = 3;
    p.p1_kind = ProxKind::l1;
    p.q1_kind = ProxKind::box;
    p.l1_weight = 0.3;
    p.seed = 20240611;
    return p;
  }
  if (name == "stress") {
    p.x_dims = {2, 1, 2};
    p.y_dims = {1, 2};
    p.z_dim = 3;
    p.p1_kind = ProxKind::l1;
    p.q1_kind = ProxKind::box;
    p.l1_weight = 0.2;
    p.majorizer = MajorizerMode::loose;
    p.seed = 777;
    return p;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

namespace detail {

inline Mat random_spd(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mat g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = gauss(rng);
  const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
  Vec ev(n);
  for (Index i = 0; i < n; ++i) ev(i) = std::exp(std::log(lo) + unif(rng) * (std::log(hi) - std::log(lo)));
  Mat h = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (h + h.transpose());
}

inline Mat random_gauss(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = gauss(rng);
  return m;
}

inline ProxFriendlyFunction make_prox(ProxKind kind, Index dim, const InstancePreset& p) {
  switch (kind) {
    case ProxKind::zero: return ProxFriendlyFunction::zero(dim);
    case ProxKind::l1: return ProxFriendlyFunction::l1(dim, p.l1_weight);
    case ProxKind::box:
      return ProxFriendlyFunction::box(Vec::Constant(dim, -p.box_radius), Vec::Constant(dim, p.box_radius));
  }
  return ProxFriendlyFunction::zero(dim);
}

inline ProblemSpec scalar_problem(double qf, double lf, double cf, double qg, ProxFriendlyFunction p1,
                                  double rhs) {
  ProblemSpec s;
  s.x_structure = BlockStructure({1});
  s.y_structure = BlockStructure({1});
  s.z_dim = 1;
  s.p1 = std::move(p1);
  s.q1 = ProxFriendlyFunction::zero(1);
  s.f = SmoothConvexFunction::quadratic(s.x_structure, Mat::Constant(1, 1, qf), Vec::Constant(1, lf), cf);
  s.g = SmoothConvexFunction::quadratic(s.y_structure, Mat::Constant(1, 1, qg), Vec::Zero(1), 0.0);
  s.A = Mat::Ones(1, 1);
  s.B = Mat::Ones(1, 1);
  s.c = Vec::Constant(1, rhs);
  return s;
}

}  // namespace detail

/// Builds a spec from a random preset. c = A x* + B y* for a sampled point
/// x*, y* with first blocks inside dom p1, dom q1, so the problem is feasible;
/// strongly convex f, g and full-row-rank [A B] make the solution unique.
inline ProblemSpec generate(const InstancePreset& p) {
  if (p.x_dims.empty() || p.y_dims.empty()) throw std::invalid_argument("preset needs blocks");
  if (!(p.eig_lo > 0.0 && p.eig_hi >= p.eig_lo)) throw std::invalid_argument("bad eigenvalue range");
  if (p.p1_kind == ProxKind::box || p.q1_kind == ProxKind::box) {
    if (!(p.box_radius > 0.0)) throw std::invalid_argument("box radius must be positive");
  }
  std::mt19937_64 rng(p.seed);
  ProblemSpec s;
  s.x_structure = BlockStructure(p.x_dims);
  s.y_structure = BlockStructure(p.y_dims);
  s.z_dim = p.z_dim;
  const Index nx = s.x_dim(), ny = s.y_dim();
  s.p1 = detail::make_prox(p.p1_kind, s.x1_dim(), p);
  s.q1 = detail::make_prox(p.q1_kind, s.y1_dim(), p);
  const Mat qf = detail::random_spd(rng, nx, p.eig_lo, p.eig_hi);
  const Mat qg = detail::random_spd(rng, ny, p.eig_lo, p.eig_hi);
  const Vec lf = detail::random_gauss(rng, nx, 1);
  const Vec lg = detail::random_gauss(rng, ny, 1);
  s.f = SmoothConvexFunction::quadratic(s.x_structure, qf, lf, 0.0, p.majorizer);
  s.g = SmoothConvexFunction::quadratic(s.y_structure, qg, lg, 0.0, p.majorizer);
  s.A = detail::random_gauss(rng, p.z_dim, nx);
  s.B = detail::random_gauss(rng, p.z_dim, ny);
  Vec xs = detail::random_gauss(rng, nx, 1);
  Vec ys = detail::random_gauss(rng, ny, 1);
  if (p.p1_kind == ProxKind::box) xs.head(s.x1_dim()) *= 0.5 * p.box_radius / (1.0 + xs.head(s.x1_dim()).cwiseAbs().maxCoeff());
  if (p.q1_kind == ProxKind::box) ys.head(s.y1_dim()) *= 0.5 * p.box_radius / (1.0 + ys.head(s.y1_dim()).cwiseAbs().maxCoeff());
  s.c = s.A * xs + s.B * ys;
  s.validate();
  Mat ab(p.z_dim, nx + ny);
  ab << s.A, s.B;
  if (Eigen::FullPivLU<Mat>(ab).rank() < p.z_dim) {
    throw std::invalid_argument("preset '" + p.name + "' produced rank-deficient constraints");
  }
  return s;
}

/// tiny:    min 1/2 x^2 + 1/2 y^2          s.t. x + y = 1
/// l1tiny:  min |x| + 1/2 (x-2)^2 + 1/2 y^2 s.t. x + y = 2
/// boxtiny: min 1/2 (x-2)^2 + 1/2 y^2       s.t. x + y = 1, x in [0, 0.5]
inline ProblemSpec make_preset(const std::string& name) {
  if (name == "tiny") return detail::scalar_problem(1.0, 0.0, 0.0, 1.0, ProxFriendlyFunction::zero(1), 1.0);
  if (name == "l1tiny") return detail::scalar_problem(1.0, -2.0, 2.0, 1.0, ProxFriendlyFunction::l1(1, 1.0), 2.0);
  if (name == "boxtiny") {
    return detail::scalar_problem(1.0, -2.0, 2.0, 1.0,
                                  ProxFriendlyFunction::box(Vec::Zero(1), Vec::Constant(1, 0.5)), 1.0);
  }
  return generate(random_preset(name));
}

/// KKT point by enumeration of the first-block activity patterns. For every
/// pattern the stationarity equations plus the pattern's fixed coordinates
/// form a square linear system; its solutions are screened by kkt_residual
/// and the best one is returned if its residual is <= tol.
inline Iterate oracle_solve(const ProblemSpec& spec, double tol = 1e-10) {
  spec.validate();
  const Index nx = spec.x_dim(), ny = spec.y_dim(), nz = spec.z_dim;
  const Index n = nx + ny;
  const Index d1x = spec.x1_dim(), d1y = spec.y1_dim();
  struct Coord {
    Index index;  // into (x, y)
    const ProxFriendlyFunction* fn;
    Index local;
  };
  std::vector<Coord> coords;
  if (spec.p1.kind() != ProxKind::zero)
    for (Index j = 0; j < d1x; ++j) coords.push_back({j, &spec.p1, j});
  if (spec.q1.kind() != ProxKind::zero)
    for (Index j = 0; j < d1y; ++j) coords.push_back({nx + j, &spec.q1, j});
  if (coords.size() > 12) throw UnsupportedError("oracle: more than 12 nonsmooth coordinates");

  Mat h = Mat::Zero(n, n);
  h.topLeftCorner(nx, nx) = spec.f.hessian().matrix();
  h.bottomRightCorner(ny, ny) = spec.g.hessian().matrix();
  Vec lin(n);
  lin << spec.f.linear(), spec.g.linear();
  Mat cmat(nz, n);
  cmat << spec.A, spec.B;

  const std::size_t nc = coords.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < nc; ++i) total *= 3;

  Iterate best;
  double best_res = std::numeric_limits<double>::infinity();
  std::vector<int> pat(nc);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    Index nfixed = 0;
    for (std::size_t i = 0; i < nc; ++i) {
      pat[i] = static_cast<int>(c % 3) - 1;
      c /= 3;
      const bool fixed = coords[i].fn->kind() == ProxKind::l1 ? pat[i] == 0 : pat[i] != 0;
      if (fixed) ++nfixed;
    }
    // Unknowns (u, z, s_fixed); rows: stationarity, constraints, fixings.
    const Index dim = n + nz + nfixed;
    Mat k = Mat::Zero(dim, dim);
    Vec rhs = Vec::Zero(dim);
    k.topLeftCorner(n, n) = h;
    k.block(0, n, n, nz) = cmat.transpose();
    k.block(n, 0, nz, n) = cmat;
    rhs.head(n) = -lin;
    rhs.segment(n, nz) = spec.c;
    Index f = 0;
    for (std::size_t i = 0; i < nc; ++i) {
      const Coord& cd = coords[i];
      const ProxFriendlyFunction& fn = *cd.fn;
      if (fn.kind() == ProxKind::l1) {
        if (pat[i] == 0) {
          k(cd.index, n + nz + f) = 1.0;
          k(n + nz + f, cd.index) = 1.0;
          ++f;
        } else {
          rhs(cd.index) -= pat[i] * fn.weight();
        }
      } else if (pat[i] != 0) {
        k(cd.index, n + nz + f) = 1.0;
        k(n + nz + f, cd.index) = 1.0;
        rhs(n + nz + f) = pat[i] < 0 ? fn.lo()(cd.local) : fn.hi()(cd.local);
        ++f;
      }
    }
    const Eigen::CompleteOrthogonalDecomposition<Mat> cod(k);
    Vec sol = cod.solve(rhs);
    sol += cod.solve(Vec(rhs - k * sol));
    if (!sol.allFinite() || (k * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
    Iterate cand{sol.head(nx), sol.segment(nx, ny), sol.segment(n, nz)};
    if (!spec.p1.in_domain(cand.x.head(d1x)) || !spec.q1.in_domain(cand.y.head(d1y))) continue;
    const double res = kkt_residual(spec, cand.x, cand.y, cand.z).total;
    if (res < best_res) {
      best_res = res;
      best = std::move(cand);
    }
  }
  if (!(best_res <= tol)) {
    throw std::runtime_error("oracle: no activity pattern reached KKT residual " + std::to_string(tol) +
                             " (best " + std::to_string(best_res) + ")");
  }
  return best;
}

}  // namespace sgsadmm
