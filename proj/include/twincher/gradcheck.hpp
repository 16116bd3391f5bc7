#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "twincher/types.hpp"

namespace twincher {

struct GradientCheck {
  std::string name;
  int config = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradientReport {
  std::vector<GradientCheck> checks;
  double tolerance = 0.0;
  bool all_passed() const;
};

/// ||analytic - numeric||_inf / max(||numeric||_inf, ||analytic||_inf, floor).
double relative_error(const Vec& analytic, const Vec& numeric, double floor = 1e-8);

/// Central differences of a scalar function of x with step h.
Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h);

inline constexpr double kGradientTolerance = 1e-4;
inline constexpr double kGradientStep = 1e-6;

/// Flow backprop (theta and input), MLP backprop and MSE, and the three
/// Twincher losses against central differences on `n_configs` seeded
/// random configurations.
GradientReport run_gradient_checks(std::uint64_t seed, int n_configs = 20);

}  // namespace twincher
