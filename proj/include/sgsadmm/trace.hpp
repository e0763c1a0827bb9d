#pragma once

// Iteration records shared by both solvers and consumed by the verification
// ledger and the CLI logs.

#include "sgsadmm/blockalg.hpp"
#include "sgsadmm/model.hpp"
#include "sgsadmm/schedule.hpp"

#include <limits>
#include <string>
#include <vector>

namespace sgsadmm {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class InexactMode { exact, tilted, cg };

inline const char* to_string(InexactMode m) {
  switch (m) {
    case InexactMode::exact: return "exact";
    case InexactMode::tilted: return "tilted";
    case InexactMode::cg: return "cg";
  }
  return "?";
}

struct Iterate {
  Vec x;
  Vec y;
  Vec z;
};

/// The two-block data a trajectory is certified against: proximal terms S, T
/// and the tolerance sequence bounding ||M^{-1/2} d_x^k|| and ||N^{-1/2} d_y^k||.
/// For the multi-block method these are S_sGS, T_sGS and max(kappa, kappa') * eps~.
struct TwoBlockView {
  double sigma = 1.0;
  double tau = 1.0;
  BlockOperator S;
  BlockOperator T;
  ToleranceSchedule eps;
};

/// Record k holds the iterate w^{k+1} produced from w^k together with the
/// certificates d_x^k, d_y^k and eps_k used in that step.
struct IterationRecord {
  long k = 0;
  Iterate w;
  Vec d_x;
  Vec d_y;
  double eps = 0.0;
  double cert_x = 0.0;  // ||M^{-1/2} d_x^k||
  double cert_y = 0.0;  // ||N^{-1/2} d_y^k||
  double bound_x = 0.0;  // bound enforced on cert_x (eps_k, or kappa * eps~_k)
  double bound_y = 0.0;
  KKTResidual kkt;
  double phi = kNaN;              // phi_{k+1}(anchor) when an anchor is supplied
  double sweep_cert_max = kNaN;   // max per-block certificate norm (multi-block only)
  double reduction_gap = kNaN;    // cross-check: max |w_sGS - w_2block| (multi-block only)
};

struct Trace {
  TwoBlockView view;
  Iterate initial;
  std::vector<IterationRecord> records;

  /// w^k for k = 0..records.size().
  const Iterate& state(std::size_t k) const { return k == 0 ? initial : records[k - 1].w; }
  std::size_t num_states() const { return records.size() + 1; }
};

struct SolveResult {
  Trace trace;
  Iterate final_state;
  bool converged = false;
  long iterations = 0;
  KKTResidual final_kkt;
};

}  // namespace sgsadmm
