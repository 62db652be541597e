#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "vcins/errors.hpp"

namespace vcins {

inline constexpr std::size_t kDefaultGridSize = 401;

// ---------------------------------------------------------------------------
// Loss models
// ---------------------------------------------------------------------------

struct Atom {
  double value = 0.0;
  double prob = 0.0;

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct DiscreteLoss {
  std::vector<Atom> atoms;

  friend bool operator==(const DiscreteLoss&, const DiscreteLoss&) = default;
};

struct UniformFamily {
  friend bool operator==(const UniformFamily&, const UniformFamily&) = default;
};

struct ExponentialFamily {
  double rate = 1.0;
  friend bool operator==(const ExponentialFamily&, const ExponentialFamily&) = default;
};

struct LognormalFamily {
  double mu = 0.0;
  double sigma = 1.0;
  friend bool operator==(const LognormalFamily&, const LognormalFamily&) = default;
};

/// Pareto type II (Lomax): F(x) = 1 - (1 + x/scale)^(-alpha). The density is
/// positive on all of (0, inf), unlike the classical Pareto.
struct ParetoFamily {
  double alpha = 2.0;
  double scale = 1.0;
  friend bool operator==(const ParetoFamily&, const ParetoFamily&) = default;
};

using ContinuousFamily = std::variant<UniformFamily, ExponentialFamily, LognormalFamily, ParetoFamily>;

/// A continuous law truncated to [0, support_max] and renormalized, mixed with
/// an optional atom at zero.
struct ContinuousTruncatedLoss {
  ContinuousFamily family = UniformFamily{};
  double support_max = 1.0;
  double atom_at_zero = 0.0;

  friend bool operator==(const ContinuousTruncatedLoss&, const ContinuousTruncatedLoss&) = default;
};

using LossModel = std::variant<DiscreteLoss, ContinuousTruncatedLoss>;

namespace detail {

/// Untruncated c.d.f. of the family; only differences matter.
inline double family_cdf(const ContinuousFamily& family, double x) {
  if (x <= 0.0) return 0.0;
  return std::visit(
      [x](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, UniformFamily>) {
          return x;
        } else if constexpr (std::is_same_v<F, ExponentialFamily>) {
          return -std::expm1(-f.rate * x);
        } else if constexpr (std::is_same_v<F, LognormalFamily>) {
          return 0.5 * std::erfc(-(std::log(x) - f.mu) / (f.sigma * std::sqrt(2.0)));
        } else {
          return -std::expm1(-f.alpha * std::log1p(x / f.scale));
        }
      },
      family);
}

inline void check_family(const ContinuousFamily& family, std::vector<std::string>& problems) {
  std::visit(
      [&problems](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ExponentialFamily>) {
          if (!(f.rate > 0.0) || !std::isfinite(f.rate))
            problems.push_back("exponential rate must be a positive finite number");
        } else if constexpr (std::is_same_v<F, LognormalFamily>) {
          if (!std::isfinite(f.mu)) problems.push_back("lognormal mu must be finite");
          if (!(f.sigma > 0.0) || !std::isfinite(f.sigma))
            problems.push_back("lognormal sigma must be a positive finite number");
        } else if constexpr (std::is_same_v<F, ParetoFamily>) {
          if (!(f.alpha > 0.0) || !std::isfinite(f.alpha))
            problems.push_back("pareto alpha must be a positive finite number");
          if (!(f.scale > 0.0) || !std::isfinite(f.scale))
            problems.push_back("pareto scale must be a positive finite number");
        }
      },
      family);
}

}  // namespace detail

/// Returns every violated invariant of the model; empty when the model is valid.
inline std::vector<std::string> validate(const LossModel& model) {
  std::vector<std::string> problems;
  if (const auto* d = std::get_if<DiscreteLoss>(&model)) {
    if (d->atoms.empty()) problems.push_back("discrete loss needs at least one atom");
    double total = 0.0;
    for (const auto& a : d->atoms) {
      if (!std::isfinite(a.value) || a.value < 0.0)
        problems.push_back("atom value " + std::to_string(a.value) + " must be finite and >= 0");
      if (!(a.prob > 0.0 && a.prob <= 1.0))
        problems.push_back("atom probability " + std::to_string(a.prob) + " must lie in (0, 1]");
      total += a.prob;
    }
    if (!d->atoms.empty() && std::abs(total - 1.0) > 1e-12)
      problems.push_back("atom probabilities sum to " + std::to_string(total) + ", expected 1");
  } else {
    const auto& c = std::get<ContinuousTruncatedLoss>(model);
    if (!(c.support_max > 0.0) || !std::isfinite(c.support_max))
      problems.push_back("support_max must be a positive finite number");
    if (!(c.atom_at_zero >= 0.0 && c.atom_at_zero < 1.0))
      problems.push_back("atom_at_zero must lie in [0, 1)");
    detail::check_family(c.family, problems);
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Grid measure
// ---------------------------------------------------------------------------

/// Discretized law of the loss: ascending nodes with probability weights.
///
/// All integrals in the library are weighted sums over this grid. The
/// `continuous` flag records whether the measure came from a law whose c.d.f.
/// is strictly increasing on (0, M), which the interior solver requires.
class GridMeasure {
 public:
  /// Point mass at zero.
  GridMeasure() : GridMeasure({0.0}, {1.0}, 0.0) {}

  GridMeasure(std::vector<double> nodes, std::vector<double> weights, double support_max,
              bool continuous = false)
      : nodes_(std::move(nodes)),
        weights_(std::move(weights)),
        support_max_(support_max),
        continuous_(continuous) {
    std::vector<std::string> problems;
    if (nodes_.empty()) problems.push_back("grid measure needs at least one node");
    if (nodes_.size() != weights_.size()) problems.push_back("nodes and weights differ in length");
    if (!(support_max_ >= 0.0) || !std::isfinite(support_max_))
      problems.push_back("support maximum must be finite and >= 0");
    double total = 0.0;
    for (std::size_t i = 0; i < nodes_.size() && i < weights_.size(); ++i) {
      if (weights_[i] < 0.0) problems.push_back("negative weight at node " + std::to_string(i));
      if (nodes_[i] < 0.0 || nodes_[i] > support_max_)
        problems.push_back("node " + std::to_string(nodes_[i]) + " outside [0, M]");
      if (i > 0 && !(nodes_[i] > nodes_[i - 1])) problems.push_back("nodes must be strictly ascending");
      total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
      problems.push_back("weights sum to " + std::to_string(total) + ", expected 1");
    if (!problems.empty()) throw ValidationError(std::move(problems));
  }

  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double support_max() const noexcept { return support_max_; }
  bool continuous() const noexcept { return continuous_; }

  template <class F>
  double expectation(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(nodes_[i]);
    return s;
  }

  /// Mean of a function given by its values at the nodes.
  double mean_of(std::span<const double> g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * g[i];
    return s;
  }

  /// Two-pass variance of a function given by its values at the nodes.
  double variance_of(std::span<const double> g) const {
    const double m = mean_of(g);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * (g[i] - m) * (g[i] - m);
    return s;
  }

  double mean() const { return mean_of(nodes_); }
  double variance() const { return variance_of(nodes_); }
  double second_moment() const {
    return expectation([](double x) { return x * x; });
  }

  /// Right-continuous step c.d.f.
  double cdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size() && nodes_[i] <= x; ++i) s += weights_[i];
    return std::min(s, 1.0);
  }

  /// inf{x in [0, M] : F(x) >= rho/(1+rho)}, or M when the set is empty.
  double var_threshold(double rho) const {
    const double level = rho / (1.0 + rho);
    if (level <= 0.0) return 0.0;
    double cum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      cum += weights_[i];
      if (cum >= level - 1e-12) return nodes_[i];
    }
    return support_max_;
  }

  double stop_loss_mean(double d) const {
    return expectation([d](double x) { return std::max(x - d, 0.0); });
  }

  double cap_mean(double k) const {
    return expectation([k](double x) { return std::min(x, k); });
  }

  double stop_loss_var(double d) const {
    const double m = stop_loss_mean(d);
    return expectation([d, m](double x) {
      const double y = std::max(x - d, 0.0) - m;
      return y * y;
    });
  }

  double cap_var(double k) const {
    const double m = cap_mean(k);
    return expectation([k, m](double x) {
      const double y = std::min(x, k) - m;
      return y * y;
    });
  }

  /// E[g(X) | X > t] for g given at the nodes.
  double tail_expectation(std::span<const double> g, double t) const {
    double num = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i] > t) {
        num += weights_[i] * g[i];
        mass += weights_[i];
      }
    }
    if (!(mass > 0.0))
      throw PreconditionError("no probability mass above " + std::to_string(t) +
                              " (threshold at or beyond the essential supremum)");
    return num / mass;
  }

  friend bool operator==(const GridMeasure&, const GridMeasure&) = default;

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
  double support_max_;
  bool continuous_;
};

/// Discrete models pass through unchanged; continuous models use the midpoint
/// rule with exact cell masses, the zero atom (if any) prepended.
inline GridMeasure discretize(const LossModel& model, std::size_t n = kDefaultGridSize) {
  if (auto problems = validate(model); !problems.empty()) throw ValidationError(std::move(problems));
  if (n < 2) throw ValidationError({"grid size must be at least 2"});

  if (const auto* d = std::get_if<DiscreteLoss>(&model)) {
    std::vector<Atom> atoms = d->atoms;
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    std::vector<double> nodes;
    std::vector<double> weights;
    for (const auto& a : atoms) {
      if (!nodes.empty() && nodes.back() == a.value) {
        weights.back() += a.prob;
      } else {
        nodes.push_back(a.value);
        weights.push_back(a.prob);
      }
    }
    const double top = nodes.back();
    return GridMeasure(std::move(nodes), std::move(weights), top, false);
  }

  const auto& c = std::get<ContinuousTruncatedLoss>(model);
  const double m = c.support_max;
  const double h = m / static_cast<double>(n);
  const double total = detail::family_cdf(c.family, m);
  if (!(total > 0.0)) throw ValidationError({"continuous family has no mass on (0, M]"});

  std::vector<double> nodes;
  std::vector<double> weights;
  nodes.reserve(n + 1);
  weights.reserve(n + 1);
  if (c.atom_at_zero > 0.0) {
    nodes.push_back(0.0);
    weights.push_back(c.atom_at_zero);
  }
  double prev = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double right = (i == n) ? m : h * static_cast<double>(i);
    const double cur = detail::family_cdf(c.family, right);
    nodes.push_back((static_cast<double>(i) - 0.5) * h);
    weights.push_back((1.0 - c.atom_at_zero) * (cur - prev) / total);
    prev = cur;
  }
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= sum;
  return GridMeasure(std::move(nodes), std::move(weights), m, true);
}

}  // namespace vcins
