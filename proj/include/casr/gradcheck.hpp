#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "casr/tensor.hpp"

namespace casr {

struct GradCheckResult {
  std::string name;
  Index checked = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  Index required = 1;  // minimum number of comparisons for a valid check

  bool passed() const { return checked >= required && max_rel_error < tolerance; }
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

/// Central difference (f(x+eps) - f(x-eps)) / 2eps; restores x afterwards.
template <typename F>
double central_difference(F&& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double up = f();
  x = saved - eps;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * eps);
}

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kOpTolerance = 1e-6;
inline constexpr double kNetworkTolerance = 1e-5;

/// Finite-difference checks for every differentiable op: conv, Self-ONN for
/// q in {1,3,5,7}, tanh/relu/sigmoid, avgpool, upsample, concat, the BCE and
/// Dice losses, and the assembled default network on an 8x8 input.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed);

}  // namespace casr
