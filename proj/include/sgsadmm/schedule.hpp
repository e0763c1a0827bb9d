#pragma once

// Summable tolerance sequences {eps_k} with closed-form totals
// E = sum eps_k and E' = sum eps_k^2.

#include <cmath>
#include <stdexcept>
#include <string>

namespace sgsadmm {

class ToleranceSchedule {
 public:
  enum class Kind { zero, geometric, power };

  ToleranceSchedule() = default;

  static ToleranceSchedule zero() { return {}; }

  /// eps_k = eps0 * ratio^k, ratio in (0,1).
  static ToleranceSchedule geometric(double eps0, double ratio) {
    if (!(eps0 >= 0.0) || !(ratio > 0.0 && ratio < 1.0)) {
      throw std::invalid_argument("geometric schedule needs eps0 >= 0 and ratio in (0,1)");
    }
    return ToleranceSchedule(Kind::geometric, eps0, ratio);
  }

  /// eps_k = eps0 / (k+1)^p, p > 1.
  static ToleranceSchedule power(double eps0, double exponent) {
    if (!(eps0 >= 0.0) || !(exponent > 1.0)) {
      throw std::invalid_argument("power schedule needs eps0 >= 0 and exponent > 1");
    }
    return ToleranceSchedule(Kind::power, eps0, exponent);
  }

  /// Parses "zero", "geom:eps0:ratio" or "pow:eps0:p".
  static ToleranceSchedule parse(const std::string& text) {
    if (text == "zero") return zero();
    auto fields = [&](std::size_t start) {
      const auto colon = text.find(':', start);
      if (colon == std::string::npos) throw std::invalid_argument("bad schedule: " + text);
      return std::pair<double, double>(std::stod(text.substr(start, colon - start)),
                                       std::stod(text.substr(colon + 1)));
    };
    if (text.rfind("geom:", 0) == 0) {
      auto [e, r] = fields(5);
      return geometric(e, r);
    }
    if (text.rfind("pow:", 0) == 0) {
      auto [e, p] = fields(4);
      return power(e, p);
    }
    throw std::invalid_argument("unknown schedule '" + text + "' (zero | geom:e0:r | pow:e0:p)");
  }

  Kind kind() const { return kind_; }
  double eps0() const { return eps0_; }
  double param() const { return param_; }

  double operator()(long k) const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::geometric: return eps0_ * std::pow(param_, static_cast<double>(k));
      case Kind::power: return eps0_ / std::pow(static_cast<double>(k + 1), param_);
    }
    return 0.0;
  }

  /// E = sum_{k>=0} eps_k.
  double total() const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::geometric: return eps0_ / (1.0 - param_);
      case Kind::power: return eps0_ * std::riemann_zeta(param_);
    }
    return 0.0;
  }

  /// E' = sum_{k>=0} eps_k^2.
  double total_squares() const {
    switch (kind_) {
      case Kind::zero: return 0.0;
      case Kind::geometric: return eps0_ * eps0_ / (1.0 - param_ * param_);
      case Kind::power: return eps0_ * eps0_ * std::riemann_zeta(2.0 * param_);
    }
    return 0.0;
  }

  /// Same sequence multiplied by a nonnegative factor.
  ToleranceSchedule scaled(double factor) const {
    ToleranceSchedule s = *this;
    s.eps0_ *= factor;
    return s;
  }

  std::string to_string() const;

 private:
  ToleranceSchedule(Kind k, double e, double p) : kind_(k), eps0_(e), param_(p) {}

  Kind kind_ = Kind::zero;
  double eps0_ = 0.0;
  double param_ = 0.0;
};

inline std::string ToleranceSchedule::to_string() const {
  switch (kind_) {
    case Kind::zero: return "zero";
    case Kind::geometric: return "geom:" + std::to_string(eps0_) + ":" + std::to_string(param_);
    case Kind::power: return "pow:" + std::to_string(eps0_) + ":" + std::to_string(param_);
  }
  return "?";
}

}  // namespace sgsadmm
