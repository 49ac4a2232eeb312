#pragma once

#include "wgcn/autodiff.hpp"
#include "wgcn/graph_conv.hpp"

#include <functional>
#include <string>
#include <vector>

namespace wgcn {

/// Central-difference gradient check. `loss` must build a scalar from the
/// parameters' current values; it is evaluated once on a tape for the
/// analytic gradient and 2 * numel times without recording.
struct GradCheckResult {
  double max_relative_error = 0;  // max over parameters of |g_ad - g_fd| / max(1e-8, |g_fd|), 2-norms
  std::string worst_parameter;
};

GradCheckResult check_gradients(const std::function<Var()>& loss, const std::vector<Parameter*>& params, double step);

/// Scalar that weights every entry of `x` by a fixed random coefficient.
Var random_projection(const Var& x, std::uint64_t seed);

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfTestOptions {
  TransformOptions transform;  // overridden only for fault injection
  int random_points = 10;
};

/// Gradient checks for every differentiable op and the full tiny model,
/// adjacency-transform oracle, window count, first Adam step, gamma
/// equivalence.
std::vector<PropertyResult> run_property_suite(const SelfTestOptions& opts = {});

}  // namespace wgcn
