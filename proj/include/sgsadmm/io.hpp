#pragma once

// Problem files and CSV output.
//
// A problem file is line oriented UTF-8 text. Blank lines and lines starting
// with '#' are ignored; every other line is `key: value` where value is an
// integer, a word, a float or a bracketed comma-separated list of numbers.
// Matrices are row-major lists. Keys:
//
//   x_blocks, y_blocks                 [ints]
//   z_dim                              int
//   A, B                               [floats], z_dim rows
//   c                                  [floats]
//   f.Q, g.Q                           [floats], row-major square
//   f.l, g.l                           [floats]
//   f.const, g.const                   float
//   f.sigma_hat_mode, g.sigma_hat_mode tight | loose
//   f.sigma_low_mode, g.sigma_low_mode zero | mineig      (optional, default zero)
//   p1.kind, q1.kind                   zero | l1 | box
//   p1.params, q1.params               [] | [weight] | [lo..., hi...]
//
// Floats are written with 17 significant digits so a write/read round trip
// reproduces every coordinate exactly.

#include "sgsadmm/model.hpp"
#include "sgsadmm/prox.hpp"
#include "sgsadmm/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgsadmm {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& field, long line, const std::string& msg)
      : std::runtime_error(format(field, line, msg)), field_(field), line_(line) {}

  const std::string& field() const { return field_; }
  long line() const { return line_; }

 private:
  static std::string format(const std::string& field, long line, const std::string& msg) {
    std::string out = "problem file";
    if (line > 0) out += ", line " + std::to_string(line);
    if (!field.empty()) out += ", field '" + field + "'";
    return out + ": " + msg;
  }

  std::string field_;
  long line_;
};

/// 17 significant digits; "nan" and "inf" spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string list_of(const double* v, Index n) {
  std::string out = "[";
  for (Index i = 0; i < n; ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out + "]";
}

inline std::string list_of(const Vec& v) { return list_of(v.data(), v.size()); }

/// Row-major flattening.
inline std::string list_of(const Mat& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return list_of(flat.data(), static_cast<Index>(flat.size()));
}

inline std::string list_of(const std::vector<Index>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out + "]";
}

struct Entry {
  std::string value;
  long line;
};

class Fields {
 public:
  explicit Fields(std::map<std::string, Entry> m) : m_(std::move(m)) {}

  const Entry& get(const std::string& key) const {
    auto it = m_.find(key);
    if (it == m_.end()) throw ParseError(key, 0, "missing required field");
    return it->second;
  }

  bool has(const std::string& key) const { return m_.count(key) > 0; }

  double number(const std::string& key) const {
    const Entry& e = get(key);
    return parse_double(key, e.line, e.value);
  }

  long integer(const std::string& key) const {
    const Entry& e = get(key);
    long v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end) throw ParseError(key, e.line, "expected an integer, got '" + e.value + "'");
    return v;
  }

  std::vector<double> numbers(const std::string& key) const {
    const Entry& e = get(key);
    const std::string& s = e.value;
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
      throw ParseError(key, e.line, "expected a bracketed list");
    }
    std::vector<double> out;
    const std::string inner = trim(s.substr(1, s.size() - 2));
    if (inner.empty()) return out;
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_double(key, e.line, trim(tok)));
    return out;
  }

  std::vector<Index> integers(const std::string& key) const {
    const Entry& e = get(key);
    std::vector<Index> out;
    for (double d : numbers(key)) {
      if (d != std::floor(d) || d < 1) throw ParseError(key, e.line, "block dimensions must be positive integers");
      out.push_back(static_cast<Index>(d));
    }
    return out;
  }

  std::string word(const std::string& key) const { return get(key).value; }

  long line(const std::string& key) const { return has(key) ? m_.at(key).line : 0; }

 private:
  static double parse_double(const std::string& key, long line, const std::string& tok) {
    if (tok == "nan" || tok == "inf" || tok == "-inf") {
      throw ParseError(key, line, "non-finite value '" + tok + "'");
    }
    double v = 0.0;
    const char* b = tok.data();
    const char* end = b + tok.size();
    if (b != end && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end || tok.empty()) {
      throw ParseError(key, line, "expected a number, got '" + tok + "'");
    }
    return v;
  }

  std::map<std::string, Entry> m_;
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "x_blocks", "y_blocks", "z_dim", "A", "B", "c",
      "f.Q", "f.l", "f.const", "f.sigma_hat_mode", "f.sigma_low_mode",
      "g.Q", "g.l", "g.const", "g.sigma_hat_mode", "g.sigma_low_mode",
      "p1.kind", "p1.params", "q1.kind", "q1.params"};
  return keys;
}

inline Mat reshape(const Fields& f, const std::string& key, const std::vector<double>& v, Index rows,
                   Index cols) {
  if (static_cast<Index>(v.size()) != rows * cols) {
    throw ParseError(key, f.line(key), "expected " + std::to_string(rows * cols) + " entries (" +
                                           std::to_string(rows) + "x" + std::to_string(cols) + "), got " +
                                           std::to_string(v.size()));
  }
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
  return m;
}

inline Vec vector_of(const Fields& f, const std::string& key, Index n) {
  const auto v = f.numbers(key);
  if (static_cast<Index>(v.size()) != n) {
    throw ParseError(key, f.line(key), "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Vec>(v.data(), n);
}

inline SmoothConvexFunction smooth_of(const Fields& f, const std::string& p, const BlockStructure& s) {
  const Index n = s.total_dim();
  const Mat q = reshape(f, p + ".Q", f.numbers(p + ".Q"), n, n);
  const Vec l = vector_of(f, p + ".l", n);
  const double cst = f.number(p + ".const");
  const std::string mm = f.word(p + ".sigma_hat_mode");
  if (mm != "tight" && mm != "loose") {
    throw ParseError(p + ".sigma_hat_mode", f.line(p + ".sigma_hat_mode"), "expected tight or loose");
  }
  MinorizerMode low = MinorizerMode::zero;
  if (f.has(p + ".sigma_low_mode")) {
    const std::string lm = f.word(p + ".sigma_low_mode");
    if (lm == "mineig") {
      low = MinorizerMode::min_eig;
    } else if (lm != "zero") {
      throw ParseError(p + ".sigma_low_mode", f.line(p + ".sigma_low_mode"), "expected zero or mineig");
    }
  }
  try {
    return SmoothConvexFunction::quadratic(s, q, l, cst, mm == "tight" ? MajorizerMode::tight : MajorizerMode::loose,
                                           low);
  } catch (const std::exception& e) {
    throw ParseError(p + ".Q", f.line(p + ".Q"), e.what());
  }
}

inline ProxFriendlyFunction prox_of(const Fields& f, const std::string& p, Index dim) {
  const std::string kind = f.word(p + ".kind");
  const auto params = f.numbers(p + ".params");
  const long ln = f.line(p + ".params");
  try {
    if (kind == "zero") {
      if (!params.empty()) throw ParseError(p + ".params", ln, "zero takes no parameters");
      return ProxFriendlyFunction::zero(dim);
    }
    if (kind == "l1") {
      if (params.size() != 1) throw ParseError(p + ".params", ln, "l1 takes one parameter [weight]");
      return ProxFriendlyFunction::l1(dim, params[0]);
    }
    if (kind == "box") {
      if (static_cast<Index>(params.size()) != 2 * dim) {
        throw ParseError(p + ".params", ln, "box takes " + std::to_string(2 * dim) + " parameters [lo..., hi...]");
      }
      return ProxFriendlyFunction::box(Eigen::Map<const Vec>(params.data(), dim),
                                       Eigen::Map<const Vec>(params.data() + dim, dim));
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(p + ".params", ln, e.what());
  }
  throw ParseError(p + ".kind", f.line(p + ".kind"), "expected zero, l1 or box, got '" + kind + "'");
}

inline std::string prox_params(const ProxFriendlyFunction& fn) {
  switch (fn.kind()) {
    case ProxKind::zero: return "[]";
    case ProxKind::l1: {
      const double w = fn.weight();
      return list_of(&w, 1);
    }
    case ProxKind::box: {
      Vec both(2 * fn.dim());
      both << fn.lo(), fn.hi();
      return list_of(both);
    }
  }
  return "[]";
}

}  // namespace detail

inline void write_problem(std::ostream& os, const ProblemSpec& s) {
  auto smooth = [&](const char* p, const SmoothConvexFunction& fn) {
    os << p << ".Q: " << detail::list_of(fn.hessian().matrix()) << '\n';
    os << p << ".l: " << detail::list_of(fn.linear()) << '\n';
    os << p << ".const: " << format_double(fn.constant()) << '\n';
    os << p << ".sigma_hat_mode: " << to_string(fn.majorizer_mode()) << '\n';
    os << p << ".sigma_low_mode: " << to_string(fn.minorizer_mode()) << '\n';
  };
  os << "# sgsadmm problem\n";
  os << "x_blocks: " << detail::list_of(s.x_structure.dims()) << '\n';
  os << "y_blocks: " << detail::list_of(s.y_structure.dims()) << '\n';
  os << "z_dim: " << s.z_dim << '\n';
  os << "A: " << detail::list_of(s.A) << '\n';
  os << "B: " << detail::list_of(s.B) << '\n';
  os << "c: " << detail::list_of(s.c) << '\n';
  smooth("f", s.f);
  smooth("g", s.g);
  os << "p1.kind: " << to_string(s.p1.kind()) << '\n';
  os << "p1.params: " << detail::prox_params(s.p1) << '\n';
  os << "q1.kind: " << to_string(s.q1.kind()) << '\n';
  os << "q1.params: " << detail::prox_params(s.q1) << '\n';
}

inline ProblemSpec read_problem(std::istream& is) {
  std::map<std::string, detail::Entry> entries;
  std::string raw;
  long ln = 0;
  const auto& keys = detail::known_keys();
  while (std::getline(is, raw)) {
    ++ln;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError("", ln, "expected 'key: value'");
    const std::string key = detail::trim(line.substr(0, colon));
    const std::string value = detail::trim(line.substr(colon + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ParseError(key, ln, "unknown field");
    if (entries.count(key)) throw ParseError(key, ln, "duplicate field (first on line " + std::to_string(entries[key].line) + ")");
    entries[key] = {value, ln};
  }
  const detail::Fields f(std::move(entries));
  ProblemSpec s;
  try {
    s.x_structure = BlockStructure(f.integers("x_blocks"));
    s.y_structure = BlockStructure(f.integers("y_blocks"));
  } catch (const LinalgError& e) {
    throw ParseError("x_blocks", f.line("x_blocks"), e.what());
  }
  if (s.x_structure.num_blocks() == 0) throw ParseError("x_blocks", f.line("x_blocks"), "need at least one block");
  if (s.y_structure.num_blocks() == 0) throw ParseError("y_blocks", f.line("y_blocks"), "need at least one block");
  const long zd = f.integer("z_dim");
  if (zd < 1) throw ParseError("z_dim", f.line("z_dim"), "must be positive");
  s.z_dim = zd;
  s.A = detail::reshape(f, "A", f.numbers("A"), s.z_dim, s.x_dim());
  s.B = detail::reshape(f, "B", f.numbers("B"), s.z_dim, s.y_dim());
  s.c = detail::vector_of(f, "c", s.z_dim);
  s.f = detail::smooth_of(f, "f", s.x_structure);
  s.g = detail::smooth_of(f, "g", s.y_structure);
  s.p1 = detail::prox_of(f, "p1", s.x1_dim());
  s.q1 = detail::prox_of(f, "q1", s.y1_dim());
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ParseError("", 0, e.what());
  }
  return s;
}

inline ProblemSpec read_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("", 0, "cannot open '" + path + "'");
  return read_problem(in);
}

inline void write_solve_log(std::ostream& os, const Trace& trace) {
  os << "k,primal_res,dual_x_res,dual_y_res,kkt_total,eps_k,cert_x,cert_y,phi_k\n";
  for (const auto& r : trace.records) {
    os << r.k << ',' << format_double(r.kkt.primal) << ',' << format_double(r.kkt.dual_x) << ','
       << format_double(r.kkt.dual_y) << ',' << format_double(r.kkt.total) << ',' << format_double(r.eps) << ','
       << format_double(r.cert_x) << ',' << format_double(r.cert_y) << ',' << format_double(r.phi) << '\n';
  }
}

}  // namespace sgsadmm
