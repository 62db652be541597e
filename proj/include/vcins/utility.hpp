#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vcins/errors.hpp"

namespace vcins {

/// U(x) = -exp(-a x)/a.
struct Cara {
  double a = 1.0;
  friend bool operator==(const Cara&, const Cara&) = default;
};

/// U(x) = x^(1-gamma)/(1-gamma), gamma != 1.
struct Crra {
  double gamma = 2.0;
  friend bool operator==(const Crra&, const Crra&) = default;
};

struct Log {
  friend bool operator==(const Log&, const Log&) = default;
};

/// Absolute risk tolerance p x + q. p = 0 is CARA with a = 1/q.
struct Hara {
  double p = 0.5;
  double q = 1.0;
  friend bool operator==(const Hara&, const Hara&) = default;
};

/// U(x) = -(sat - x)^2 / 2 on x < sat. Not prudent (U''' = 0).
struct Quadratic {
  double sat = 10.0;
  friend bool operator==(const Quadratic&, const Quadratic&) = default;
};

/// Insured's von Neumann-Morgenstern utility with its derivative stack.
///
/// Every evaluation checks the wealth domain and throws DomainError rather than
/// clamping, so a root-finder probing an infeasible wealth level fails loudly.
class UtilityModel {
 public:
  using Family = std::variant<Cara, Crra, Log, Hara, Quadratic>;

  UtilityModel() : family_(Log{}) {}
  UtilityModel(Family family) : family_(std::move(family)) {  // NOLINT(google-explicit-constructor)
    if (auto problems = validate(); !problems.empty()) throw ValidationError(std::move(problems));
  }
  template <class F>
    requires std::is_constructible_v<Family, F> && (!std::is_same_v<std::decay_t<F>, Family>) &&
             (!std::is_same_v<std::decay_t<F>, UtilityModel>)
  UtilityModel(F&& f) : UtilityModel(Family(std::forward<F>(f))) {}  // NOLINT(google-explicit-constructor)

  const Family& family() const noexcept { return family_; }

  std::vector<std::string> validate() const {
    std::vector<std::string> problems;
    std::visit(
        [&problems](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            if (!(f.a > 0.0) || !std::isfinite(f.a)) problems.push_back("CARA a must be positive");
          } else if constexpr (std::is_same_v<F, Crra>) {
            if (!(f.gamma > 0.0) || !std::isfinite(f.gamma))
              problems.push_back("CRRA gamma must be positive");
            if (f.gamma == 1.0) problems.push_back("CRRA gamma = 1 is the log utility; use Log");
          } else if constexpr (std::is_same_v<F, Hara>) {
            if (!(f.p >= 0.0) || !std::isfinite(f.p)) problems.push_back("HARA p must be >= 0");
            if (!std::isfinite(f.q)) problems.push_back("HARA q must be finite");
            if (f.p == 0.0 && !(f.q > 0.0)) problems.push_back("HARA with p = 0 needs q > 0");
          } else if constexpr (std::is_same_v<F, Quadratic>) {
            if (!std::isfinite(f.sat)) problems.push_back("quadratic saturation must be finite");
          }
        },
        family_);
    return problems;
  }

  /// True when x lies in the open evaluation domain.
  bool in_domain(double x) const {
    return std::visit(
        [x](const auto& f) -> bool {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            return std::isfinite(x);
          } else if constexpr (std::is_same_v<F, Crra> || std::is_same_v<F, Log>) {
            return x > 0.0 && std::isfinite(x);
          } else if constexpr (std::is_same_v<F, Hara>) {
            return f.p * x + f.q > 0.0 && std::isfinite(x);
          } else {
            return x < f.sat;
          }
        },
        family_);
  }

  double u(double x) const {
    check(x);
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            return -std::exp(-f.a * x) / f.a;
          } else if constexpr (std::is_same_v<F, Crra>) {
            return std::pow(x, 1.0 - f.gamma) / (1.0 - f.gamma);
          } else if constexpr (std::is_same_v<F, Log>) {
            return std::log(x);
          } else if constexpr (std::is_same_v<F, Hara>) {
            if (f.p == 0.0) return -f.q * std::exp(-x / f.q);
            if (f.p == 1.0) return std::log(x + f.q);
            return std::pow(f.p * x + f.q, (f.p - 1.0) / f.p) / (f.p - 1.0);
          } else {
            return -0.5 * (f.sat - x) * (f.sat - x);
          }
        },
        family_);
  }

  double mu(double x) const {
    check(x);
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            return std::exp(-f.a * x);
          } else if constexpr (std::is_same_v<F, Crra>) {
            return std::pow(x, -f.gamma);
          } else if constexpr (std::is_same_v<F, Log>) {
            return 1.0 / x;
          } else if constexpr (std::is_same_v<F, Hara>) {
            if (f.p == 0.0) return std::exp(-x / f.q);
            return std::pow(f.p * x + f.q, -1.0 / f.p);
          } else {
            return f.sat - x;
          }
        },
        family_);
  }

  double ddu(double x) const {
    check(x);
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            return -f.a * std::exp(-f.a * x);
          } else if constexpr (std::is_same_v<F, Crra>) {
            return -f.gamma * std::pow(x, -f.gamma - 1.0);
          } else if constexpr (std::is_same_v<F, Log>) {
            return -1.0 / (x * x);
          } else if constexpr (std::is_same_v<F, Hara>) {
            if (f.p == 0.0) return -std::exp(-x / f.q) / f.q;
            return -std::pow(f.p * x + f.q, -1.0 / f.p - 1.0);
          } else {
            return -1.0;
          }
        },
        family_);
  }

  double dddu(double x) const {
    check(x);
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            return f.a * f.a * std::exp(-f.a * x);
          } else if constexpr (std::is_same_v<F, Crra>) {
            return f.gamma * (f.gamma + 1.0) * std::pow(x, -f.gamma - 2.0);
          } else if constexpr (std::is_same_v<F, Log>) {
            return 2.0 / (x * x * x);
          } else if constexpr (std::is_same_v<F, Hara>) {
            if (f.p == 0.0) return std::exp(-x / f.q) / (f.q * f.q);
            return (1.0 + f.p) * std::pow(f.p * x + f.q, -1.0 / f.p - 2.0);
          } else {
            return 0.0;
          }
        },
        family_);
  }

  /// (U')^{-1}(y).
  double inv_mu(double y) const {
    if (!(y > 0.0) || !std::isfinite(y))
      throw RangeError("marginal utility " + std::to_string(y) + " outside the range of U'");
    const double x = std::visit(
        [y](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) {
            return -std::log(y) / f.a;
          } else if constexpr (std::is_same_v<F, Crra>) {
            return std::pow(y, -1.0 / f.gamma);
          } else if constexpr (std::is_same_v<F, Log>) {
            return 1.0 / y;
          } else if constexpr (std::is_same_v<F, Hara>) {
            if (f.p == 0.0) return -f.q * std::log(y);
            return (std::pow(y, -f.p) - f.q) / f.p;
          } else {
            return f.sat - y;
          }
        },
        family_);
    if (!in_domain(x))
      throw RangeError("marginal utility " + std::to_string(y) + " outside the range of U'");
    return x;
  }

  /// Arrow-Pratt absolute risk aversion -U''/U'.
  double ara(double x) const { return -ddu(x) / mu(x); }

  /// Absolute prudence -U'''/U''.
  double prudence(double x) const { return -dddu(x) / ddu(x); }

  /// U''' > 0 everywhere on the domain.
  bool is_prudent() const { return !std::holds_alternative<Quadratic>(family_); }

  /// Strictly decreasing absolute prudence on [lo, hi], decided per family.
  bool is_strictly_dap(double lo, double hi) const {
    check(lo);
    check(hi);
    return std::visit(
        [](const auto& f) -> bool {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Crra> || std::is_same_v<F, Log>) {
            return true;
          } else if constexpr (std::is_same_v<F, Hara>) {
            return f.p > 0.0;
          } else {
            return false;
          }
        },
        family_);
  }

  std::string name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Cara>) return "cara";
          else if constexpr (std::is_same_v<F, Crra>) return "crra";
          else if constexpr (std::is_same_v<F, Log>) return "log";
          else if constexpr (std::is_same_v<F, Hara>) return "hara";
          else return "quadratic";
        },
        family_);
  }

  friend bool operator==(const UtilityModel&, const UtilityModel&) = default;

 private:
  void check(double x) const {
    if (!in_domain(x))
      throw DomainError("wealth level " + std::to_string(x) + " outside the " + name() +
                            " utility domain",
                        x);
  }

  Family family_;
};

}  // namespace vcins
