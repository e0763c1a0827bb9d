#pragma once

// Dense block-structured linear algebra used by every other part of the
// library: block partitions, block vectors, self-adjoint block operators and
// their diagonal / strictly-upper splitting, plus the spectral helpers
// (square roots, extreme eigenvalues, SPD solves).

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgsadmm {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Relative Frobenius tolerance for accepting a claimed-self-adjoint matrix.
inline constexpr double kSymmetryTol = 1e-12;
/// Eigenvalues down to -kPsdTol * ||H|| are treated as zero.
inline constexpr double kPsdTol = 1e-10;
/// spd_solve requires min_eig(H) > kSpdTol * ||H||.
inline constexpr double kSpdTol = 1e-12;

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

class NotSelfAdjoint : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

class NotPositiveDefinite : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

class NotPositiveSemidefinite : public LinalgError {
 public:
  using LinalgError::LinalgError;
};

/// Ordered partition of a coordinate space into blocks U_1 x ... x U_s.
class BlockStructure {
 public:
  BlockStructure() = default;

  explicit BlockStructure(std::vector<Index> dims) : dims_(std::move(dims)) {
    offsets_.assign(dims_.size() + 1, 0);
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] < 1) {
        throw DimensionMismatch("block " + std::to_string(i) +
                                " has non-positive dimension " +
                                std::to_string(dims_[i]));
      }
      offsets_[i + 1] = offsets_[i] + dims_[i];
    }
  }

  static BlockStructure single(Index dim) { return BlockStructure({dim}); }

  Index num_blocks() const { return static_cast<Index>(dims_.size()); }
  Index dim(Index i) const { return dims_.at(static_cast<std::size_t>(i)); }
  Index offset(Index i) const { return offsets_.at(static_cast<std::size_t>(i)); }
  Index total_dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  const std::vector<Index>& dims() const { return dims_; }

  bool operator==(const BlockStructure& other) const { return dims_ == other.dims_; }

 private:
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
};

/// A vector together with the block partition of its coordinates.
struct BlockVector {
  BlockStructure structure;
  Vec data;

  BlockVector() = default;
  explicit BlockVector(BlockStructure s)
      : structure(std::move(s)), data(Vec::Zero(structure.total_dim())) {}
  BlockVector(BlockStructure s, Vec v) : structure(std::move(s)), data(std::move(v)) {
    if (data.size() != structure.total_dim()) {
      throw DimensionMismatch("block vector has " + std::to_string(data.size()) +
                              " coordinates, structure expects " +
                              std::to_string(structure.total_dim()));
    }
  }

  auto block(Index i) { return data.segment(structure.offset(i), structure.dim(i)); }
  auto block(Index i) const { return data.segment(structure.offset(i), structure.dim(i)); }
};

/// Dense linear map between two block-partitioned spaces.
class BlockOperator {
 public:
  BlockOperator() = default;

  BlockOperator(BlockStructure rows, BlockStructure cols, Mat m)
      : rows_(std::move(rows)), cols_(std::move(cols)), m_(std::move(m)) {
    if (m_.rows() != rows_.total_dim() || m_.cols() != cols_.total_dim()) {
      throw DimensionMismatch("operator matrix is " + std::to_string(m_.rows()) + "x" +
                              std::to_string(m_.cols()) + ", structures expect " +
                              std::to_string(rows_.total_dim()) + "x" +
                              std::to_string(cols_.total_dim()));
    }
  }

  /// Validates symmetry to kSymmetryTol (relative Frobenius) and stores the
  /// exactly symmetrized matrix.
  static BlockOperator self_adjoint(const BlockStructure& s, const Mat& m) {
    BlockOperator op(s, s, m);
    const double scale = m.norm();
    const double asym = (m - m.transpose()).norm();
    if (asym > kSymmetryTol * scale) {
      throw NotSelfAdjoint("matrix claimed self-adjoint has relative asymmetry " +
                           std::to_string(scale > 0 ? asym / scale : asym));
    }
    op.m_ = 0.5 * (m + m.transpose());
    op.self_adjoint_ = true;
    return op;
  }

  static BlockOperator zero(const BlockStructure& s) {
    return self_adjoint(s, Mat::Zero(s.total_dim(), s.total_dim()));
  }

  static BlockOperator identity(const BlockStructure& s, double scale = 1.0) {
    return self_adjoint(s, scale * Mat::Identity(s.total_dim(), s.total_dim()));
  }

  const BlockStructure& rows() const { return rows_; }
  const BlockStructure& cols() const { return cols_; }
  const Mat& matrix() const { return m_; }
  bool is_self_adjoint() const { return self_adjoint_; }

  auto block(Index i, Index j) const {
    return m_.block(rows_.offset(i), cols_.offset(j), rows_.dim(i), cols_.dim(j));
  }

  BlockVector apply(const BlockVector& v) const {
    if (!(v.structure == cols_)) throw DimensionMismatch("apply: column structure mismatch");
    return BlockVector(rows_, m_ * v.data);
  }

  BlockOperator adjoint() const {
    BlockOperator t(cols_, rows_, m_.transpose());
    t.self_adjoint_ = self_adjoint_;
    return t;
  }

 private:
  BlockStructure rows_;
  BlockStructure cols_;
  Mat m_;
  bool self_adjoint_ = false;
};

/// H = diag + upper + upper^T.
struct OperatorSplit {
  BlockOperator diag;
  BlockOperator upper;
};

inline void require_self_adjoint(const BlockOperator& h, const char* what) {
  if (!h.is_self_adjoint()) {
    throw NotSelfAdjoint(std::string(what) + ": operator is not marked self-adjoint");
  }
}

inline OperatorSplit split(const BlockOperator& h) {
  require_self_adjoint(h, "split");
  const BlockStructure& s = h.rows();
  const Index n = s.total_dim();
  Mat d = Mat::Zero(n, n);
  Mat u = Mat::Zero(n, n);
  for (Index i = 0; i < s.num_blocks(); ++i) {
    d.block(s.offset(i), s.offset(i), s.dim(i), s.dim(i)) = h.block(i, i);
    for (Index j = i + 1; j < s.num_blocks(); ++j) {
      u.block(s.offset(i), s.offset(j), s.dim(i), s.dim(j)) = h.block(i, j);
    }
  }
  return {BlockOperator::self_adjoint(s, d), BlockOperator(s, s, std::move(u))};
}

inline double weighted_inner(const BlockVector& u, const BlockVector& v, const BlockOperator& h) {
  if (u.data.size() != h.rows().total_dim() || v.data.size() != h.cols().total_dim()) {
    throw DimensionMismatch("weighted_inner: dimension mismatch");
  }
  return u.data.dot(h.matrix() * v.data);
}

inline double weighted_norm(const BlockVector& u, const BlockOperator& h) {
  return std::sqrt(std::max(0.0, weighted_inner(u, u, h)));
}

/// Squared H-norm on raw coordinates; may be slightly negative for an
/// indefinite H, which callers use deliberately.
inline double sq_norm(const Vec& u, const Mat& h) { return u.dot(h * u); }

inline Eigen::SelfAdjointEigenSolver<Mat> eigen_of(const BlockOperator& h) {
  require_self_adjoint(h, "eigendecomposition");
  return Eigen::SelfAdjointEigenSolver<Mat>(h.matrix());
}

inline double min_eig(const Mat& h) {
  if (h.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Mat>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline double min_eig(const BlockOperator& h) {
  require_self_adjoint(h, "min_eig");
  return min_eig(h.matrix());
}

inline double spectral_norm(const Mat& h) {
  if (h.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(h).singularValues()(0);
}

inline double spectral_norm(const BlockOperator& h) { return spectral_norm(h.matrix()); }

namespace detail {

/// Eigenvalues of a self-adjoint PSD matrix with the tolerance-window
/// negatives clamped to zero; throws when one lies below the window.
inline Eigen::SelfAdjointEigenSolver<Mat> psd_eigen(const Mat& h, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -kPsdTol * norm) {
    throw NotPositiveSemidefinite(std::string(what) + ": eigenvalue " + std::to_string(lo) +
                                  " below -1e-10*||H|| = " + std::to_string(-kPsdTol * norm));
  }
  return es;
}

}  // namespace detail

/// Symmetric PSD square root; negative eigenvalues inside the tolerance
/// window are clamped to zero.
inline Mat sqrt_psd(const Mat& h) {
  if (h.size() == 0) return h;
  auto es = detail::psd_eigen(h, "operator_sqrt");
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Mat s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

inline BlockOperator operator_sqrt(const BlockOperator& h) {
  require_self_adjoint(h, "operator_sqrt");
  return BlockOperator::self_adjoint(h.rows(), sqrt_psd(h.matrix()));
}

/// H^{-1/2} for a positive definite H.
inline Mat inv_sqrt_pd(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > kSpdTol * norm)) {
    throw NotPositiveDefinite("inverse square root: min eigenvalue " + std::to_string(lo));
  }
  Vec ev = es.eigenvalues().cwiseSqrt().cwiseInverse();
  Mat s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

inline BlockOperator operator_inv_sqrt(const BlockOperator& h) {
  require_self_adjoint(h, "operator_inv_sqrt");
  return BlockOperator::self_adjoint(h.rows(), inv_sqrt_pd(h.matrix()));
}

/// min_eig(H) > rel_tol * max(1, ||H||).
inline bool is_positive_definite(const Mat& h, double rel_tol = kPsdTol) {
  if (h.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() > rel_tol * std::max(1.0, norm);
}

/// min_eig(H) >= -rel_tol * max(1, ||H||).
inline bool is_positive_semidefinite(const Mat& h, double rel_tol = kPsdTol) {
  if (h.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() >= -rel_tol * std::max(1.0, norm);
}

/// Cholesky factor of an operator verified positive definite up front, for
/// repeated solves in iteration loops.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const Mat& h) : n_(h.rows()) {
    if (h.rows() != h.cols()) throw DimensionMismatch("SpdFactor: matrix not square");
    if (n_ == 0) return;
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > kSpdTol * norm) || norm == 0.0) {
      throw NotPositiveDefinite("operator is not positive definite (min eigenvalue " +
                                std::to_string(lo) + ", norm " + std::to_string(norm) + ")");
    }
    llt_.compute(h);
    if (llt_.info() != Eigen::Success) {
      throw NotPositiveDefinite("Cholesky factorization failed");
    }
  }

  Index dim() const { return n_; }

  template <typename Rhs>
  Mat solve(const Eigen::MatrixBase<Rhs>& b) const {
    if (n_ == 0) return Mat(0, b.cols());
    return llt_.solve(b);
  }

  Vec solve(const Vec& b) const {
    if (n_ == 0) return Vec(0);
    return llt_.solve(b);
  }

  /// ||H^{-1/2} b|| = sqrt(b' H^{-1} b).
  double inv_norm(const Vec& b) const {
    if (n_ == 0) return 0.0;
    Vec w = llt_.matrixL().solve(b);
    return w.norm();
  }

 private:
  Index n_ = 0;
  Eigen::LLT<Mat> llt_;
};

inline BlockVector spd_solve(const BlockOperator& h, const BlockVector& b) {
  require_self_adjoint(h, "spd_solve");
  if (!(b.structure == h.cols())) throw DimensionMismatch("spd_solve: structure mismatch");
  SpdFactor f(h.matrix());
  Vec u = f.solve(b.data);
  // One step of iterative refinement keeps the residual at the 1e-10 level on
  // moderately conditioned operators.
  u += f.solve(Vec(b.data - h.matrix() * u));
  return BlockVector(h.cols(), std::move(u));
}

}  // namespace sgsadmm
