#include "wgcn/graph_conv.hpp"

#include "wgcn/errors.hpp"

namespace wgcn {

LearnableAdjacency LearnableAdjacency::random(Index vertices, bool with_gamma, Rng& rng,
                                              const std::string& prefix) {
  LearnableAdjacency adj;
  adj.weights = Parameter(prefix + ".adjacency", random_uniform({vertices, vertices}, rng));
  if (with_gamma) adj.gamma = Parameter(prefix + ".gamma", Tensor::scalar(1.0));
  return adj;
}

LearnableAdjacency LearnableAdjacency::from_matrix(Tensor weights, std::optional<Scalar> gamma,
                                                   const std::string& prefix) {
  if (weights.rank() != 2 || weights.dim(0) != weights.dim(1))
    throw DimensionError("adjacency must be square, got " + to_string(weights.shape()));
  LearnableAdjacency adj;
  adj.weights = Parameter(prefix + ".adjacency", std::move(weights));
  if (gamma) adj.gamma = Parameter(prefix + ".gamma", Tensor::scalar(*gamma));
  return adj;
}

Var add_self_loop(const Var& a, const std::optional<Var>& gamma) {
  if (a.value().rank() != 2 || a.dim(0) != a.dim(1))
    throw DimensionError("add_self_loop needs a square matrix, got " + to_string(a.shape()));
  Var eye = constant(Tensor::identity(a.dim(0)));
  if (!gamma) return add(a, eye);
  if (gamma->size() != 1) throw DimensionError("self-loop gamma must be a scalar");
  return add(a, mul(eye, *gamma));
}

Var minmax_scale(const Var& a, Scalar epsilon) {
  Var lo = reduce_min(a);
  Var hi = reduce_max(a);
  return div(sub(a, lo), clamp_min(sub(hi, lo), epsilon));
}

Var degree(const Var& a) {
  if (a.value().rank() != 2) throw DimensionError("degree needs a matrix, got " + to_string(a.shape()));
  return reduce_sum(a, 1);
}

Var sym_normalize(const Var& a, const Var& d, Scalar epsilon) {
  if (a.value().rank() != 2 || d.value().rank() != 1 || d.size() != a.dim(0) || a.dim(0) != a.dim(1))
    throw DimensionError("sym_normalize: matrix " + to_string(a.shape()) + " with degrees " +
                         to_string(d.shape()));
  Var d_inv_sqrt = inv_sqrt_or_zero(d, epsilon);
  return mul(a, outer(d_inv_sqrt, d_inv_sqrt));
}

TransformedAdjacency transform_adjacency(const LearnableAdjacency& adj, const TransformOptions& opts) {
  std::optional<Var> gamma;
  if (adj.gamma) gamma = adj.gamma->var();
  Var scaled = minmax_scale(add_self_loop(adj.weights.var(), gamma), opts.scale_epsilon);
  return {sym_normalize(scaled, degree(scaled), opts.degree_epsilon)};
}

Tensor transformed_matrix(const LearnableAdjacency& adj, const TransformOptions& opts) {
  NoRecordScope no_record;
  return transform_adjacency(adj, opts).matrix.value();
}

Var propagate_vertices(const Var& x, const Var& m) {
  if (x.value().rank() != 4)
    throw DimensionError("graph convolution input must be N x C x T x V, got " + to_string(x.shape()));
  const Index v = x.dim(3);
  if (m.value().rank() != 2 || m.dim(0) != v || m.dim(1) != v)
    throw DimensionError("vertex count mismatch: input has " + std::to_string(v) + " vertices, adjacency is " +
                         to_string(m.shape()));
  Var rows = reshape(x, {x.size() / v, v});
  return reshape(matmul(rows, m), x.shape());
}

Var spatial_graph_conv(const Var& x, const LearnableAdjacency& adj, const Var& weight, const Var& bias,
                       const TransformOptions& opts) {
  if (x.value().rank() == 4 && x.dim(3) != adj.vertices())
    throw DimensionError("vertex count mismatch: input has " + std::to_string(x.dim(3)) +
                         " vertices, adjacency has " + std::to_string(adj.vertices()));
  Var mixed = propagate_vertices(x, transform_adjacency(adj, opts).matrix);
  return conv2d(mixed, weight, bias);
}

}  // namespace wgcn
