#include "wgcn/autodiff.hpp"

#include "op_support.hpp"

#include <cmath>
#include <numeric>

namespace wgcn {

using detail::make_result;
using detail::Node;
using detail::require;

namespace {

// Value of `t` stretched to n elements (t holds n elements or exactly one).
Vector expand(const Tensor& t, Index n) {
  if (t.size() == n) return t.data();
  return Vector::Constant(n, t[0]);
}

// Gradient folded back onto an operand of `n` elements.
Vector fold(const Vector& g, Index n) {
  if (g.size() == n) return g;
  return Vector::Constant(1, g.sum());
}

Shape broadcast_shape(const Var& x, const Var& y, const char* op) {
  if (x.shape() == y.shape()) return x.shape();
  if (y.size() == 1) return x.shape();
  if (x.size() == 1) return y.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(x.shape()) + " and " +
                       to_string(y.shape()));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a.value().rank() == 2 && b.value().rank() == 2,
          "matmul needs rank-2 operands, got " + to_string(a.shape()) + " and " + to_string(b.shape()));
  require(a.dim(1) == b.dim(0),
          "matmul inner dimensions differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  Tensor out({a.dim(0), b.dim(1)});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return make_result("matmul", std::move(out), {a.node(), b.node()}, [](Node& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    const auto G = self.grad.matrix();
    if (A.requires_grad) A.grad_buffer().matrix().noalias() += G * B.value.matrix().transpose();
    if (B.requires_grad) B.grad_buffer().matrix().noalias() += A.value.matrix().transpose() * G;
  });
}

Var reshape(const Var& x, Shape new_shape) {
  Tensor out = x.value().reshaped(std::move(new_shape));
  return make_result("reshape", std::move(out), {x.node()},
                     [](Node& self) { self.inputs[0]->accumulate(self.grad.data()); });
}

Var permute(const Var& x, const std::vector<Index>& axis_order) {
  const Shape& in_shape = x.shape();
  const auto rank = in_shape.size();
  require(axis_order.size() == rank, "permute: axis order has wrong length");
  std::vector<bool> seen(rank, false);
  for (Index a : axis_order) {
    require(a >= 0 && static_cast<std::size_t>(a) < rank && !seen[a], "permute: axis order is not a permutation");
    seen[a] = true;
  }
  Shape out_shape(rank);
  std::vector<Index> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[axis_order[i]];

  const Index n = x.size();
  auto source = std::make_shared<std::vector<Index>>(n);
  std::vector<Index> idx(rank, 0);
  for (Index o = 0; o < n; ++o) {
    Index src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += idx[i] * in_strides[axis_order[i]];
    (*source)[o] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor out(out_shape);
  for (Index o = 0; o < n; ++o) out[o] = x.value()[(*source)[o]];
  return make_result("permute", std::move(out), {x.node()}, [source](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (Index o = 0; o < self.grad.size(); ++o) g[(*source)[o]] += self.grad[o];
  });
}

Var add(const Var& x, const Var& y) {
  Tensor out(broadcast_shape(x, y, "add"));
  out.data() = expand(x.value(), out.size()) + expand(y.value(), out.size());
  return make_result("add", std::move(out), {x.node(), y.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    auto& Y = *self.inputs[1];
    X.accumulate(fold(self.grad.data(), X.value.size()));
    Y.accumulate(fold(self.grad.data(), Y.value.size()));
  });
}

Var sub(const Var& x, const Var& y) {
  Tensor out(broadcast_shape(x, y, "sub"));
  out.data() = expand(x.value(), out.size()) - expand(y.value(), out.size());
  return make_result("sub", std::move(out), {x.node(), y.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    auto& Y = *self.inputs[1];
    X.accumulate(fold(self.grad.data(), X.value.size()));
    Y.accumulate(fold(-self.grad.data(), Y.value.size()));
  });
}

Var mul(const Var& x, const Var& y) {
  Tensor out(broadcast_shape(x, y, "mul"));
  out.data() = expand(x.value(), out.size()).cwiseProduct(expand(y.value(), out.size()));
  return make_result("mul", std::move(out), {x.node(), y.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    auto& Y = *self.inputs[1];
    const Index n = self.value.size();
    const Vector& g = self.grad.data();
    if (X.requires_grad) X.accumulate(fold(g.cwiseProduct(expand(Y.value, n)), X.value.size()));
    if (Y.requires_grad) Y.accumulate(fold(g.cwiseProduct(expand(X.value, n)), Y.value.size()));
  });
}

Var div(const Var& x, const Var& y) {
  Tensor out(broadcast_shape(x, y, "div"));
  out.data() = expand(x.value(), out.size()).cwiseQuotient(expand(y.value(), out.size()));
  return make_result("div", std::move(out), {x.node(), y.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    auto& Y = *self.inputs[1];
    const Index n = self.value.size();
    const Vector& g = self.grad.data();
    const Vector yv = expand(Y.value, n);
    if (X.requires_grad) X.accumulate(fold(g.cwiseQuotient(yv), X.value.size()));
    if (Y.requires_grad) {
      const Vector xv = expand(X.value, n);
      Vector gy = -(g.array() * xv.array() / (yv.array() * yv.array())).matrix();
      Y.accumulate(fold(gy, Y.value.size()));
    }
  });
}

Var scale(const Var& x, Scalar s) {
  Tensor out(x.shape());
  out.data() = x.value().data() * s;
  return make_result("scale", std::move(out), {x.node()},
                     [s](Node& self) { self.inputs[0]->accumulate(self.grad.data() * s); });
}

Var add_scalar(const Var& x, Scalar s) {
  Tensor out(x.shape());
  out.data() = x.value().data().array() + s;
  return make_result("add_scalar", std::move(out), {x.node()},
                     [](Node& self) { self.inputs[0]->accumulate(self.grad.data()); });
}

Var sub_scalar(const Var& x, Scalar s) { return add_scalar(x, -s); }

Var div_scalar(const Var& x, Scalar s) {
  if (s == 0.0) throw ContractError("div_scalar by zero");
  Tensor out(x.shape());
  out.data() = x.value().data() / s;
  return make_result("div_scalar", std::move(out), {x.node()},
                     [s](Node& self) { self.inputs[0]->accumulate(self.grad.data() / s); });
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  out.data() = x.value().data().cwiseMax(0.0);
  return make_result("relu", std::move(out), {x.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate((X.value.data().array() > 0.0).select(self.grad.data(), 0.0));
  });
}

Var square(const Var& x) {
  Tensor out(x.shape());
  out.data() = x.value().data().array().square();
  return make_result("square", std::move(out), {x.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate(2.0 * self.grad.data().cwiseProduct(X.value.data()));
  });
}

Var abs(const Var& x) {
  Tensor out(x.shape());
  out.data() = x.value().data().cwiseAbs();
  return make_result("abs", std::move(out), {x.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    const auto& xv = X.value.data().array();
    Vector sign = ((xv > 0.0).cast<Scalar>() - (xv < 0.0).cast<Scalar>()).matrix();
    X.accumulate(self.grad.data().cwiseProduct(sign));
  });
}

Var clamp_min(const Var& x, Scalar floor) {
  Tensor out(x.shape());
  out.data() = x.value().data().cwiseMax(floor);
  return make_result("clamp_min", std::move(out), {x.node()}, [floor](Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate((X.value.data().array() >= floor).select(self.grad.data(), 0.0));
  });
}

Var inv_sqrt_or_zero(const Var& x, Scalar threshold) {
  Tensor out(x.shape());
  for (Index i = 0; i < out.size(); ++i) {
    const Scalar v = x.value()[i];
    out[i] = v >= threshold ? 1.0 / std::sqrt(v) : 0.0;
  }
  return make_result("inv_sqrt_or_zero", std::move(out), {x.node()}, [threshold](Node& self) {
    auto& X = *self.inputs[0];
    if (!X.requires_grad) return;
    auto& g = X.grad_buffer();
    for (Index i = 0; i < g.size(); ++i) {
      const Scalar v = X.value[i];
      if (v >= threshold) g[i] += -0.5 * self.grad[i] * self.value[i] / v;
    }
  });
}

Var outer(const Var& u, const Var& v) {
  require(u.value().rank() == 1 && v.value().rank() == 1, "outer needs rank-1 operands");
  Tensor out({u.size(), v.size()});
  out.matrix().noalias() = u.value().data() * v.value().data().transpose();
  return make_result("outer", std::move(out), {u.node(), v.node()}, [](Node& self) {
    auto& U = *self.inputs[0];
    auto& V = *self.inputs[1];
    const auto G = self.grad.matrix();
    if (U.requires_grad) U.accumulate(G * V.value.data());
    if (V.requires_grad) V.accumulate(G.transpose() * U.value.data());
  });
}

Var reduce_sum(const Var& x) {
  return make_result("reduce_sum", Tensor::scalar(x.value().data().sum()), {x.node()}, [](Node& self) {
    auto& X = *self.inputs[0];
    X.accumulate(Vector::Constant(X.value.size(), self.grad[0]));
  });
}

Var reduce_mean(const Var& x) {
  const auto n = static_cast<Scalar>(x.size());
  return make_result("reduce_mean", Tensor::scalar(x.value().data().sum() / n), {x.node()},
                     [n](Node& self) {
                       auto& X = *self.inputs[0];
                       X.accumulate(Vector::Constant(X.value.size(), self.grad[0] / n));
                     });
}

namespace {

template <typename Better>
Var reduce_extremum(const Var& x, const char* op, Better better) {
  const Vector& d = x.value().data();
  Index best = 0;
  for (Index i = 1; i < d.size(); ++i)
    if (better(d[i], d[best])) best = i;
  return make_result(op, Tensor::scalar(d[best]), {x.node()}, [best](Node& self) {
    auto& X = *self.inputs[0];
    if (X.requires_grad) X.grad_buffer()[best] += self.grad[0];
  });
}

}  // namespace

Var reduce_min(const Var& x) {
  return reduce_extremum(x, "reduce_min", [](Scalar a, Scalar b) { return a < b; });
}

Var reduce_max(const Var& x) {
  return reduce_extremum(x, "reduce_max", [](Scalar a, Scalar b) { return a > b; });
}

Var reduce_sum(const Var& x, Index axis) {
  const Shape& s = x.shape();
  require(axis >= 0 && axis < x.value().rank(), "reduce_sum: axis out of range for " + to_string(s));
  Index outer_n = 1, inner_n = 1;
  for (Index i = 0; i < axis; ++i) outer_n *= s[i];
  for (Index i = axis + 1; i < x.value().rank(); ++i) inner_n *= s[i];
  const Index len = s[axis];
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + axis);
  Tensor out(out_shape);
  const Vector& d = x.value().data();
  for (Index o = 0; o < outer_n; ++o)
    for (Index k = 0; k < len; ++k)
      for (Index i = 0; i < inner_n; ++i) out[o * inner_n + i] += d[(o * len + k) * inner_n + i];
  return make_result("reduce_sum_axis", std::move(out), {x.node()}, [outer_n, inner_n, len](Node& self) {
    auto& X = *self.inputs[0];
    if (!X.requires_grad) return;
    auto& g = X.grad_buffer();
    for (Index o = 0; o < outer_n; ++o)
      for (Index k = 0; k < len; ++k)
        for (Index i = 0; i < inner_n; ++i) g[(o * len + k) * inner_n + i] += self.grad[o * inner_n + i];
  });
}

Var add_row_bias(const Var& x, const Var& b) {
  require(x.value().rank() == 2 && b.value().rank() == 1 && b.size() == x.dim(1),
          "add_row_bias: shapes " + to_string(x.shape()) + " and " + to_string(b.shape()));
  Tensor out = x.value();
  out.matrix().rowwise() += b.value().data().transpose();
  return make_result("add_row_bias", std::move(out), {x.node(), b.node()}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad.data());
    auto& B = *self.inputs[1];
    if (B.requires_grad) B.accumulate(self.grad.matrix().colwise().sum().transpose());
  });
}

}  // namespace wgcn
