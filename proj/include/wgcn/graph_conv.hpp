#pragma once

#include "wgcn/autodiff.hpp"

#include <optional>
#include <string>

namespace wgcn {

/// Raw learnable adjacency of one ST-block: an unconstrained (and generally
/// asymmetric) V x V matrix, plus the self-loop strength gamma in the gamma
/// variant of the model.
struct LearnableAdjacency {
  Parameter weights;
  std::optional<Parameter> gamma;

  Index vertices() const { return weights.value().dim(0); }

  /// Entries drawn uniformly from [0, 1); gamma starts at 1 so the gamma
  /// variant initially computes exactly what the base model does.
  static LearnableAdjacency random(Index vertices, bool with_gamma, Rng& rng, const std::string& prefix);
  static LearnableAdjacency from_matrix(Tensor weights, std::optional<Scalar> gamma, const std::string& prefix);
};

/// Guards used by the transform. Exposed so tests can inject faults.
struct TransformOptions {
  Scalar scale_epsilon = 1e-12;   // floor of (max - min) in the min-max scaling
  Scalar degree_epsilon = 1e-12;  // degrees below this get d^(-1/2) = 0
};

struct TransformedAdjacency {
  Var matrix;  // V x V, entries >= 0
};

/// A + I, or A + gamma * I when gamma is given.
Var add_self_loop(const Var& a, const std::optional<Var>& gamma = std::nullopt);

/// Global min-max scaling to [0, 1]; a constant matrix maps to zeros.
Var minmax_scale(const Var& a, Scalar epsilon = TransformOptions{}.scale_epsilon);

/// Row sums.
Var degree(const Var& a);

/// a_ij * d_i^(-1/2) * d_j^(-1/2), with d^(-1/2) := 0 for d < epsilon.
Var sym_normalize(const Var& a, const Var& d, Scalar epsilon = TransformOptions{}.degree_epsilon);

/// Self-loop, min-max scaling, degree, symmetric normalization.
TransformedAdjacency transform_adjacency(const LearnableAdjacency& adj, const TransformOptions& opts = {});

/// Same pipeline evaluated outside any tape.
Tensor transformed_matrix(const LearnableAdjacency& adj, const TransformOptions& opts = {});

/// Folds x (N x C x T x V) into rows of V, right-multiplies by m (V x V) and
/// unfolds. Row i of m is the source vertex, column j the destination.
Var propagate_vertices(const Var& x, const Var& m);

/// Vertex propagation through the transformed adjacency followed by a 1x1
/// convolution mapping C -> C_out.
Var spatial_graph_conv(const Var& x, const LearnableAdjacency& adj, const Var& weight, const Var& bias,
                       const TransformOptions& opts = {});

}  // namespace wgcn
