#pragma once

// Test-side helpers. The oracles here deliberately avoid the library's own
// split/sgs/prox_quadratic code paths so that agreement means something.

#include "sgsadmm/cli.hpp"
#include "sgsadmm/imipadmm.hpp"
#include "sgsadmm/instances.hpp"
#include "sgsadmm/sgs.hpp"
#include "sgsadmm/sgsadmm.hpp"
#include "sgsadmm/verify.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using sgsadmm::Index;
using sgsadmm::Mat;
using sgsadmm::Vec;

inline Vec gauss_vec(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * g(rng);
  return v;
}

inline Mat gauss_mat(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

inline std::vector<Index> random_dims(std::mt19937_64& rng, int blocks, int max_dim) {
  std::uniform_int_distribution<int> d(1, max_dim);
  std::vector<Index> dims;
  for (int i = 0; i < blocks; ++i) dims.push_back(d(rng));
  return dims;
}

/// PSD matrix G'G (possibly singular) plus a positive definite block-diagonal
/// part, so the diagonal blocks are positive definite.
inline Mat random_psd_pd_diag(std::mt19937_64& rng, const std::vector<Index>& dims) {
  Index n = 0;
  for (Index d : dims) n += d;
  std::uniform_int_distribution<int> rk(1, static_cast<int>(n));
  const Mat g = gauss_mat(rng, rk(rng), n);
  Mat h = g.transpose() * g;
  Index o = 0;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (Index d : dims) {
    const Mat b = gauss_mat(rng, d, d);
    h.block(o, o, d, d) += 0.2 * b * b.transpose() + u(rng) * Mat::Identity(d, d);
    o += d;
  }
  return 0.5 * (h + h.transpose());
}

/// Block index ranges computed directly from the dimension list.
struct Blocks {
  std::vector<Index> off;
  std::vector<Index> dim;
  explicit Blocks(const std::vector<Index>& dims) {
    Index o = 0;
    for (Index d : dims) {
      off.push_back(o);
      dim.push_back(d);
      o += d;
    }
  }
  Index block_of(Index i) const {
    for (std::size_t b = 0; b + 1 < off.size(); ++b)
      if (i < off[b + 1]) return static_cast<Index>(b);
    return static_cast<Index>(off.size()) - 1;
  }
};

/// H_u H_d^{-1} H_u' by entrywise partition and a dense inverse.
inline Mat oracle_sgs(const Mat& h, const std::vector<Index>& dims) {
  const Blocks b(dims);
  const Index n = h.rows();
  Mat hd = Mat::Zero(n, n), hu = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Index bi = b.block_of(i), bj = b.block_of(j);
      if (bi == bj) hd(i, j) = h(i, j);
      else if (bi < bj) hu(i, j) = h(i, j);
    }
  return hu * Eigen::FullPivLU<Mat>(hd).inverse() * hu.transpose();
}

/// delta + H_u H_d^{-1}(delta - delta_tilde), with delta_tilde's first block
/// replaced by delta's.
inline Vec oracle_tilt(const Mat& h, const std::vector<Index>& dims, const Vec& delta, Vec delta_tilde) {
  const Blocks b(dims);
  const Index n = h.rows();
  delta_tilde.head(dims[0]) = delta.head(dims[0]);
  Mat hd = Mat::Zero(n, n), hu = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Index bi = b.block_of(i), bj = b.block_of(j);
      if (bi == bj) hd(i, j) = h(i, j);
      else if (bi < bj) hu(i, j) = h(i, j);
    }
  return delta + hu * Eigen::FullPivLU<Mat>(hd).solve(Vec(delta - delta_tilde));
}

/// First-block nonsmooth term described by plain data.
struct Theta {
  sgsadmm::ProxKind kind = sgsadmm::ProxKind::zero;
  double weight = 0.0;
  Vec lo, hi;
};

inline Theta theta_of(const sgsadmm::ProxFriendlyFunction& fn) {
  Theta t;
  t.kind = fn.kind();
  t.weight = fn.weight();
  if (fn.kind() == sgsadmm::ProxKind::box) {
    t.lo = fn.lo();
    t.hi = fn.hi();
  }
  return t;
}

/// argmin theta(u_0) + 1/2 u'Pu - q'u by enumerating every activity pattern of
/// the first-block coordinates and checking the optimality conditions of each
/// candidate by hand.
inline Vec oracle_prox_quadratic(const Theta& th, Index d1, const Mat& p, const Vec& q) {
  using sgsadmm::ProxKind;
  const Index n = q.size();
  if (th.kind == ProxKind::zero || d1 == 0) return Eigen::FullPivLU<Mat>(p).solve(q);
  std::size_t total = 1;
  for (Index i = 0; i < d1; ++i) total *= 3;
  Vec best;
  double best_viol = std::numeric_limits<double>::infinity();
  const double scale = 1.0 + p.cwiseAbs().maxCoeff() + q.cwiseAbs().maxCoeff() + th.weight;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> pat(static_cast<std::size_t>(d1));
    std::size_t c = code;
    for (Index i = 0; i < d1; ++i) {
      pat[static_cast<std::size_t>(i)] = static_cast<int>(c % 3) - 1;
      c /= 3;
    }
    Vec u = Vec::Zero(n);
    Vec rhs = q;
    std::vector<Index> free;
    for (Index i = 0; i < n; ++i) {
      if (i >= d1) {
        free.push_back(i);
        continue;
      }
      const int s = pat[static_cast<std::size_t>(i)];
      if (th.kind == ProxKind::l1) {
        if (s == 0) u(i) = 0.0;
        else {
          free.push_back(i);
          rhs(i) -= s * th.weight;
        }
      } else {
        if (s == -1) u(i) = th.lo(i);
        else if (s == 1) u(i) = th.hi(i);
        else free.push_back(i);
      }
    }
    const Index nf = static_cast<Index>(free.size());
    if (nf > 0) {
      Mat pf(nf, nf);
      Vec qf(nf);
      for (Index a = 0; a < nf; ++a) {
        qf(a) = rhs(free[a]);
        for (Index j = 0; j < n; ++j) {
          bool is_free = false;
          for (Index b2 = 0; b2 < nf; ++b2) is_free = is_free || free[b2] == j;
          if (!is_free) qf(a) -= p(free[a], j) * u(j);
        }
        for (Index b2 = 0; b2 < nf; ++b2) pf(a, b2) = p(free[a], free[b2]);
      }
      const Vec uf = Eigen::FullPivLU<Mat>(pf).solve(qf);
      for (Index a = 0; a < nf; ++a) u(free[a]) = uf(a);
    }
    // Smooth gradient g = Pu - q; check -g in the subdifferential coordinatewise.
    const Vec g = p * u - q;
    double viol = 0.0;
    for (Index i = 0; i < d1; ++i) {
      const int s = pat[static_cast<std::size_t>(i)];
      if (th.kind == ProxKind::l1) {
        if (s == 0) viol = std::max(viol, std::abs(g(i)) - th.weight);
        else viol = std::max({viol, -s * u(i), std::abs(g(i) + s * th.weight)});
      } else {
        if (s == -1) viol = std::max(viol, -g(i));
        else if (s == 1) viol = std::max(viol, g(i));
        else viol = std::max({viol, th.lo(i) - u(i), u(i) - th.hi(i), std::abs(g(i))});
      }
    }
    for (Index i = d1; i < n; ++i) viol = std::max(viol, std::abs(g(i)));
    if (viol < best_viol) {
      best_viol = viol;
      best = u;
    }
  }
  if (!(best_viol <= 1e-9 * scale)) return Vec();
  return best;
}

/// Minimizer of theta(u_0) + 1/2<u,Hu> - <b,u> + 1/2||u - u_prev||^2_{sGS(H)} - <d,u>.
inline Vec oracle_wplus(const Mat& h, const std::vector<Index>& dims, const Theta& th, const Vec& b,
                        const Vec& u_prev, const Vec& d) {
  const Mat sgs = oracle_sgs(h, dims);
  const Mat p = h + sgs;
  const Vec q = b + sgs * u_prev + d;
  return oracle_prox_quadratic(th, dims[0], 0.5 * (p + p.transpose()), q);
}

/// Classic two-block ADMM for smooth quadratic f, g with p = q = 0.
inline std::vector<sgsadmm::Iterate> textbook_admm(const sgsadmm::ProblemSpec& s, double sigma, double tau,
                                                   sgsadmm::Iterate w, int iters) {
  const Mat qf = s.f.hessian().matrix(), qg = s.g.hessian().matrix();
  const Mat kx = qf + sigma * s.A.transpose() * s.A;
  const Mat ky = qg + sigma * s.B.transpose() * s.B;
  std::vector<sgsadmm::Iterate> out;
  for (int k = 0; k < iters; ++k) {
    const Vec x = kx.ldlt().solve(Vec(-s.f.linear() - s.A.transpose() * w.z -
                                      sigma * s.A.transpose() * (s.B * w.y - s.c)));
    const Vec y = ky.ldlt().solve(Vec(-s.g.linear() - s.B.transpose() * w.z -
                                      sigma * s.B.transpose() * (s.A * x - s.c)));
    const Vec z = w.z + tau * sigma * (s.A * x + s.B * y - s.c);
    w = {x, y, z};
    out.push_back(w);
  }
  return out;
}

inline double max_abs_diff(const sgsadmm::Iterate& a, const sgsadmm::Iterate& b) {
  return std::max({(a.x - b.x).cwiseAbs().maxCoeff(), (a.y - b.y).cwiseAbs().maxCoeff(),
                   (a.z - b.z).cwiseAbs().maxCoeff()});
}

// --- solver construction shared by the unit tests and the acceptance runner

struct RunSpec {
  std::string preset;
  bool multi = true;
  double sigma = 1.0;
  double tau = 1.0;
  bool tilted = false;
  std::uint64_t seed = 7;
  long max_iter = 10000;
  double stop_tol = 1e-8;
  bool cross_check = false;
  sgsadmm::ToleranceSchedule eps = sgsadmm::ToleranceSchedule::geometric(1e-2, 0.5);
};

/// Default proximal choice per preset: the indefinite construction for
/// "stress", the automatic one elsewhere.
inline sgsadmm::ProxTermChoice prox_choice_for(const std::string& preset) {
  return sgsadmm::ProxTermChoice::parse(preset == "stress" ? "stress" : "auto");
}

struct RunOutput {
  sgsadmm::ProblemSpec spec;
  sgsadmm::SolveResult result;
  double kappa = 0.0;
  double kappa_prime = 0.0;
  double min_eig_s_tilde = 0.0;
};

inline RunOutput run(const RunSpec& r, const std::optional<sgsadmm::Iterate>& anchor = std::nullopt) {
  using namespace sgsadmm;
  RunOutput out;
  out.spec = make_preset(r.preset);
  const Iterate init = cli::default_start(out.spec);
  const ProxTermChoice pc = prox_choice_for(r.preset);
  if (r.multi) {
    auto [S, T] = choose_multi_block_terms(out.spec, r.sigma, pc);
    MultiBlockConfig c;
    c.sigma = r.sigma;
    c.tau = r.tau;
    c.S_tilde = S;
    c.T_tilde = T;
    c.eps_tilde = r.eps;
    c.max_iter = r.max_iter;
    c.stop_tol = r.stop_tol;
    c.mode = r.tilted ? InexactMode::tilted : InexactMode::exact;
    c.seed = r.seed;
    c.cross_check = r.cross_check;
    out.min_eig_s_tilde = min_eig(S.matrix());
    MultiBlockSolver solver(out.spec, c);
    out.kappa = solver.operators().kappa;
    out.kappa_prime = solver.operators().kappa_prime;
    out.result = solver.solve(init, anchor);
  } else {
    auto [S, T] = choose_two_block_terms(out.spec, r.sigma, pc);
    TwoBlockConfig c;
    c.sigma = r.sigma;
    c.tau = r.tau;
    c.S = S;
    c.T = T;
    c.eps = r.eps;
    c.max_iter = r.max_iter;
    c.stop_tol = r.stop_tol;
    c.mode = r.tilted ? InexactMode::tilted : InexactMode::exact;
    c.seed = r.seed;
    out.min_eig_s_tilde = min_eig(S.matrix());
    TwoBlockSolver solver(out.spec, c);
    out.result = solver.solve(init, anchor);
  }
  return out;
}

}  // namespace testing_support
