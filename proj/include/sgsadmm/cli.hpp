#pragma once

// Command-line front end: solve, verify and gen subcommands. The entry point
// takes explicit streams so the whole CLI can be driven in-process.

#include "sgsadmm/imipadmm.hpp"
#include "sgsadmm/instances.hpp"
#include "sgsadmm/io.hpp"
#include "sgsadmm/sgsadmm.hpp"
#include "sgsadmm/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sgsadmm::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2 };

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string preset;
  std::optional<std::uint64_t> seed;  // overrides the seed of random presets
  std::string algorithm = "sgs";
  double sigma = 1.0;
  double tau = 1.618;
  double stop_tol = 1e-8;
  long max_iter = 10000;
  std::string eps = "geom:1e-2:0.5";
  std::string prox = "auto";
  std::string inexact = "exact";
  bool cross_check = false;
  std::string log = "-";
  std::string report = "-";
  std::string out = "-";
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InexactChoice {
  InexactMode mode = InexactMode::exact;
  std::uint64_t seed = 0;
};

/// "exact" | "tilt:SEED" | "cg"
inline InexactChoice parse_inexact(const std::string& s) {
  if (s == "exact") return {InexactMode::exact, 0};
  if (s == "cg") return {InexactMode::cg, 0};
  if (s.rfind("tilt:", 0) == 0) {
    const std::string num = s.substr(5);
    std::uint64_t seed = 0;
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), seed);
    if (ec != std::errc() || p != num.data() + num.size() || num.empty()) {
      throw InputError("bad seed in '" + s + "'");
    }
    return {InexactMode::tilted, seed};
  }
  throw InputError("unknown inexact mode '" + s + "' (exact | tilt:SEED | cg)");
}

inline ProblemSpec load_problem(const RunConfig& cfg) {
  if (cfg.input.empty() == cfg.preset.empty()) throw InputError("give exactly one of --input and --preset");
  if (!cfg.input.empty()) return read_problem_file(cfg.input);
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), cfg.preset) == names.end()) {
    throw InputError("unknown preset '" + cfg.preset + "'");
  }
  if (cfg.seed) {
    if (cfg.preset == "tiny" || cfg.preset == "l1tiny" || cfg.preset == "boxtiny") {
      throw InputError("preset '" + cfg.preset + "' is not random; --seed does not apply");
    }
    InstancePreset p = random_preset(cfg.preset);
    p.seed = *cfg.seed;
    return generate(p);
  }
  return make_preset(cfg.preset);
}

/// Zero, with the first blocks projected into dom p1 and dom q1.
inline Iterate default_start(const ProblemSpec& spec) {
  Iterate w{Vec::Zero(spec.x_dim()), Vec::Zero(spec.y_dim()), Vec::Zero(spec.z_dim)};
  w.x.head(spec.x1_dim()) = prox(spec.p1, 1.0, Vec::Zero(spec.x1_dim()));
  w.y.head(spec.y1_dim()) = prox(spec.q1, 1.0, Vec::Zero(spec.y1_dim()));
  return w;
}

inline SolveResult run_solver(const ProblemSpec& spec, const RunConfig& cfg, bool cross_check,
                              const std::optional<Iterate>& anchor) {
  if (!(cfg.tau > 0.0 && cfg.tau < kGoldenRatio)) throw InputError("--tau must lie in (0, (1+sqrt5)/2)");
  if (!(cfg.sigma > 0.0)) throw InputError("--sigma must be positive");
  if (!(cfg.stop_tol > 0.0)) throw InputError("--stop-tol must be positive");
  if (cfg.max_iter < 1) throw InputError("--max-iter must be positive");
  const ToleranceSchedule eps = ToleranceSchedule::parse(cfg.eps);
  const ProxTermChoice prox_choice = ProxTermChoice::parse(cfg.prox);
  const InexactChoice ic = parse_inexact(cfg.inexact);
  const Iterate init = default_start(spec);
  if (cfg.algorithm == "twoblock") {
    if (ic.mode == InexactMode::cg) throw InputError("inexact mode cg needs --algorithm sgs");
    if (cross_check) throw InputError("--cross-check needs --algorithm sgs");
    auto [S, T] = choose_two_block_terms(spec, cfg.sigma, prox_choice);
    TwoBlockConfig tc;
    tc.sigma = cfg.sigma;
    tc.tau = cfg.tau;
    tc.S = S;
    tc.T = T;
    tc.eps = eps;
    tc.max_iter = cfg.max_iter;
    tc.stop_tol = cfg.stop_tol;
    tc.mode = ic.mode;
    tc.seed = ic.seed;
    TwoBlockSolver solver(spec, tc);
    return solver.solve(init, anchor);
  }
  if (cfg.algorithm != "sgs") throw InputError("unknown algorithm '" + cfg.algorithm + "' (sgs | twoblock)");
  auto [S, T] = choose_multi_block_terms(spec, cfg.sigma, prox_choice);
  MultiBlockConfig mc;
  mc.sigma = cfg.sigma;
  mc.tau = cfg.tau;
  mc.S_tilde = S;
  mc.T_tilde = T;
  mc.eps_tilde = eps;
  mc.max_iter = cfg.max_iter;
  mc.stop_tol = cfg.stop_tol;
  mc.mode = ic.mode;
  mc.seed = ic.seed;
  mc.cross_check = cross_check;
  MultiBlockSolver solver(spec, mc);
  return solver.solve(init, anchor);
}

/// Opens path for writing, or returns the fallback stream for "-".
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path != "-") {
      file_.open(path);
      if (!file_) throw InputError("cannot write '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  bool is_file() const { return stream_ == &file_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

inline void write_report(std::ostream& os, const std::vector<LedgerRow>& rows) {
  os << "check,k,lhs,rhs,slack,pass\n";
  for (const auto& r : rows) {
    os << r.check << ',' << r.k << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
       << format_double(r.slack) << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

inline int run_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ProblemSpec spec = load_problem(cfg);
  std::optional<Iterate> anchor;
  try {
    anchor = oracle_solve(spec, 1e-10);
  } catch (const std::exception&) {
    // phi_k needs a KKT point; without one the column stays nan.
  }
  const auto t0 = std::chrono::steady_clock::now();
  const SolveResult res = run_solver(spec, cfg, cfg.cross_check, anchor);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  OutputTarget log(cfg.log, out);
  write_solve_log(log.get(), res.trace);
  std::ostream& summary = log.is_file() ? out : err;
  summary << "iterations=" << res.iterations << " converged=" << (res.converged ? "yes" : "no")
          << " kkt_total=" << format_double(res.final_kkt.total) << " wall_time_s=" << wall << '\n';
  return res.converged ? kOk : kNotConverged;
}

inline int run_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ProblemSpec spec = load_problem(cfg);
  Iterate anchor;
  try {
    anchor = oracle_solve(spec, 1e-12);
  } catch (const std::exception& e) {
    throw InputError(std::string("verify needs an oracle KKT point: ") + e.what());
  }
  const bool cross = cfg.algorithm == "sgs";
  const SolveResult res = run_solver(spec, cfg, cross, anchor);
  const TraceLedger ledger(spec, res.trace);
  VerificationReport rep = ledger.run(anchor);
  if (!res.trace.records.empty()) rep.rows.push_back(ledger.limit_anchor_row(cfg.stop_tol));
  for (const auto& [name, fn] : {std::pair<const char*, const SmoothConvexFunction*>{"lemma_a1_f", &spec.f},
                                 std::pair<const char*, const SmoothConvexFunction*>{"lemma_a1_g", &spec.g}}) {
    const LemmaA1Result la = check_lemma_a1(*fn, 10000, 0);
    rep.rows.push_back({name, la.trials, static_cast<double>(la.failures), 0.0, 0.0, la.failures == 0});
  }
  OutputTarget target(cfg.report, out);
  write_report(target.get(), rep.rows);
  std::ostream& summary = target.is_file() ? out : err;
  summary << "iterations=" << res.iterations << " converged=" << (res.converged ? "yes" : "no")
          << " rows=" << rep.rows.size() << " failures=" << rep.failures() << '\n';
  return res.converged && rep.all_pass() ? kOk : kNotConverged;
}

inline int run_gen(const RunConfig& cfg, std::ostream& out) {
  if (cfg.preset.empty()) throw InputError("gen needs --preset");
  if (!cfg.input.empty()) throw InputError("gen takes no --input");
  const ProblemSpec spec = load_problem(cfg);
  OutputTarget target(cfg.out, out);
  write_problem(target.get(), spec);
  return kOk;
}

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.subcommand == "solve") return run_solve(cfg, out, err);
    if (cfg.subcommand == "verify") return run_verify(cfg, out, err);
    if (cfg.subcommand == "gen") return run_gen(cfg, out);
    throw InputError("unknown subcommand '" + cfg.subcommand + "'");
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const AdmissibilityError& e) {
    err << "error: inadmissible configuration: " << e.what() << '\n';
  } catch (const ModelError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const LinalgError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::out_of_range& e) {
    err << "error: value out of range: " << e.what() << '\n';
  }
  return kInputError;
}

/// Parses argv and runs. Returns the process exit code.
inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sGS-decomposition based inexact majorized indefinite-proximal ADMM"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::uint64_t seed = 0;

  auto add_problem = [&](CLI::App* sc) {
    sc->add_option("--input", cfg.input, "problem file");
    sc->add_option("--preset", cfg.preset, "preset name (tiny, l1tiny, boxtiny, threeby2, stress)");
    sc->add_option("--seed", seed, "seed for random presets");
  };
  auto add_solver = [&](CLI::App* sc) {
    sc->add_option("--algorithm", cfg.algorithm, "sgs | twoblock")->capture_default_str();
    sc->add_option("--sigma", cfg.sigma, "penalty parameter")->capture_default_str();
    sc->add_option("--tau", cfg.tau, "dual step length in (0, 1.618...)")->capture_default_str();
    sc->add_option("--stop-tol", cfg.stop_tol, "relative KKT tolerance")->capture_default_str();
    sc->add_option("--max-iter", cfg.max_iter, "iteration limit")->capture_default_str();
    sc->add_option("--eps", cfg.eps, "zero | geom:e0:r | pow:e0:p")->capture_default_str();
    sc->add_option("--prox", cfg.prox, "auto | zero | shift:l | stress")->capture_default_str();
    sc->add_option("--inexact", cfg.inexact, "exact | tilt:SEED | cg")->capture_default_str();
  };

  CLI::App* solve = app.add_subcommand("solve", "run a solver and write the iteration log");
  add_problem(solve);
  add_solver(solve);
  solve->add_flag("--cross-check", cfg.cross_check, "run the two-block method in lockstep (sgs only)");
  solve->add_option("--log", cfg.log, "CSV log path, - for stdout")->capture_default_str();

  CLI::App* verify = app.add_subcommand("verify", "solve, then check the convergence theory along the trajectory");
  add_problem(verify);
  add_solver(verify);
  verify->add_option("--report", cfg.report, "CSV report path, - for stdout")->capture_default_str();

  CLI::App* gen = app.add_subcommand("gen", "write a preset as a problem file");
  add_problem(gen);
  gen->add_option("--out", cfg.out, "output path, - for stdout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }
  for (CLI::App* sc : {solve, verify, gen}) {
    if (sc->parsed()) {
      cfg.subcommand = sc->get_name();
      if (sc->count("--seed")) cfg.seed = seed;
    }
  }
  return run(cfg, out, err);
}

}  // namespace sgsadmm::cli
