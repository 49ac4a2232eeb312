#include "wgcn/autodiff.hpp"

#include "op_support.hpp"

#include <cmath>

namespace wgcn {

using detail::make_result;
using detail::Node;
using detail::require;

namespace {

struct BnGeometry {
  Index batch, channels, spatial;
  Index count() const { return batch * spatial; }
  Index at(Index n, Index c, Index s) const { return (n * channels + c) * spatial + s; }
};

BnGeometry check_bn(const Var& x, const Var& scale, const Var& shift) {
  require(x.value().rank() == 4, "batchnorm2d input must be N x C x H x W, got " + to_string(x.shape()));
  const Index c = x.dim(1);
  require(scale.value().rank() == 1 && scale.size() == c && shift.value().rank() == 1 && shift.size() == c,
          "batchnorm2d scale/shift must have " + std::to_string(c) + " entries");
  return {x.dim(0), c, x.dim(2) * x.dim(3)};
}

Var bn_eval(const Var& x, const Var& scale, const Var& shift, const RunningStats& stats,
            const BatchNormOptions& opts, const BnGeometry& g) {
  if (!stats.initialized) throw StateError("batchnorm2d eval mode with uninitialized running statistics");
  require(stats.mean.size() == g.channels && stats.var.size() == g.channels,
          "batchnorm2d running statistics have the wrong channel count");
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (Index c = 0; c < g.channels; ++c) {
    const Scalar inv_std = 1.0 / std::sqrt(stats.var[c] + opts.epsilon);
    const Scalar a = scale.value()[c] * inv_std;
    const Scalar b = shift.value()[c] - a * stats.mean[c];
    for (Index n = 0; n < g.batch; ++n)
      for (Index s = 0; s < g.spatial; ++s) out[g.at(n, c, s)] = a * xv[g.at(n, c, s)] + b;
  }
  // No backward in eval mode.
  return constant(std::move(out));
}

}  // namespace

Var batchnorm2d(const Var& x, const Var& scale, const Var& shift, const RunningStats& stats,
                const BatchNormOptions& opts) {
  return bn_eval(x, scale, shift, stats, opts, check_bn(x, scale, shift));
}

Var batchnorm2d(const Var& x, const Var& scale, const Var& shift, RunningStats& stats, Mode mode,
                const BatchNormOptions& opts) {
  const BnGeometry g = check_bn(x, scale, shift);
  if (mode == Mode::eval) return bn_eval(x, scale, shift, stats, opts, g);

  const Tensor& xv = x.value();
  const auto m = static_cast<Scalar>(g.count());
  Vector mean = Vector::Zero(g.channels);
  Vector var = Vector::Zero(g.channels);
  for (Index c = 0; c < g.channels; ++c) {
    Scalar sum = 0.0;
    for (Index n = 0; n < g.batch; ++n)
      for (Index s = 0; s < g.spatial; ++s) sum += xv[g.at(n, c, s)];
    mean[c] = sum / m;
    Scalar sq = 0.0;
    for (Index n = 0; n < g.batch; ++n)
      for (Index s = 0; s < g.spatial; ++s) {
        const Scalar d = xv[g.at(n, c, s)] - mean[c];
        sq += d * d;
      }
    var[c] = sq / m;
  }
  Vector inv_std = (var.array() + opts.epsilon).rsqrt().matrix();

  auto xhat = std::make_shared<Tensor>(x.shape());
  Tensor out(x.shape());
  for (Index c = 0; c < g.channels; ++c)
    for (Index n = 0; n < g.batch; ++n)
      for (Index s = 0; s < g.spatial; ++s) {
        const Index i = g.at(n, c, s);
        (*xhat)[i] = (xv[i] - mean[c]) * inv_std[c];
        out[i] = scale.value()[c] * (*xhat)[i] + shift.value()[c];
      }

  // Running statistics: momentum update, unbiased variance as in the usual
  // framework convention. Uninitialized stats start from mean 0, variance 1.
  if (!stats.initialized) {
    stats.mean = Tensor({g.channels}, 0.0);
    stats.var = Tensor({g.channels}, 1.0);
    stats.initialized = true;
  }
  const Scalar unbias = g.count() > 1 ? m / (m - 1.0) : 1.0;
  stats.mean.data() = (1.0 - opts.momentum) * stats.mean.data() + opts.momentum * mean;
  stats.var.data() = (1.0 - opts.momentum) * stats.var.data() + opts.momentum * unbias * var;

  return make_result("batchnorm2d", std::move(out), {x.node(), scale.node(), shift.node()},
                     [g, xhat, inv_std](Node& self) {
                       auto& X = *self.inputs[0];
                       auto& S = *self.inputs[1];
                       auto& B = *self.inputs[2];
                       const auto m = static_cast<Scalar>(g.count());
                       const Tensor& dy = self.grad;
                       for (Index c = 0; c < g.channels; ++c) {
                         Scalar sum_dy = 0.0, sum_dy_xhat = 0.0;
                         for (Index n = 0; n < g.batch; ++n)
                           for (Index s = 0; s < g.spatial; ++s) {
                             const Index i = g.at(n, c, s);
                             sum_dy += dy[i];
                             sum_dy_xhat += dy[i] * (*xhat)[i];
                           }
                         if (S.requires_grad) S.grad_buffer()[c] += sum_dy_xhat;
                         if (B.requires_grad) B.grad_buffer()[c] += sum_dy;
                         if (X.requires_grad) {
                           auto& dx = X.grad_buffer();
                           const Scalar gamma = S.value[c];
                           const Scalar k = gamma * inv_std[c] / m;
                           for (Index n = 0; n < g.batch; ++n)
                             for (Index s = 0; s < g.spatial; ++s) {
                               const Index i = g.at(n, c, s);
                               dx[i] += k * (m * dy[i] - sum_dy - (*xhat)[i] * sum_dy_xhat);
                             }
                         }
                       }
                     });
}

}  // namespace wgcn
