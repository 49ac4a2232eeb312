#include "wgcn/autodiff.hpp"

#include "op_support.hpp"

namespace wgcn {

using detail::make_result;
using detail::Node;
using detail::require;

namespace {

struct ConvGeometry {
  Index batch, c_in, h, w;
  Index c_out, kh, kw;
  Index ph, pw;
  Index ho, wo;

  Index patch() const { return c_in * kh * kw; }
  bool pointwise() const { return kh == 1 && kw == 1 && ph == 0 && pw == 0; }
};

// Unfolds sample n into a (C_in*kH*kW) x (H'*W') matrix.
void im2col(const Scalar* x, const ConvGeometry& g, RowMatrix& cols) {
  cols.setZero(g.patch(), g.ho * g.wo);
  for (Index c = 0; c < g.c_in; ++c)
    for (Index i = 0; i < g.kh; ++i)
      for (Index j = 0; j < g.kw; ++j) {
        const Index row = (c * g.kh + i) * g.kw + j;
        for (Index oh = 0; oh < g.ho; ++oh) {
          const Index ih = oh + i - g.ph;
          if (ih < 0 || ih >= g.h) continue;
          for (Index ow = 0; ow < g.wo; ++ow) {
            const Index iw = ow + j - g.pw;
            if (iw < 0 || iw >= g.w) continue;
            cols(row, oh * g.wo + ow) = x[(c * g.h + ih) * g.w + iw];
          }
        }
      }
}

void col2im_add(const RowMatrix& cols, const ConvGeometry& g, Scalar* dx) {
  for (Index c = 0; c < g.c_in; ++c)
    for (Index i = 0; i < g.kh; ++i)
      for (Index j = 0; j < g.kw; ++j) {
        const Index row = (c * g.kh + i) * g.kw + j;
        for (Index oh = 0; oh < g.ho; ++oh) {
          const Index ih = oh + i - g.ph;
          if (ih < 0 || ih >= g.h) continue;
          for (Index ow = 0; ow < g.wo; ++ow) {
            const Index iw = ow + j - g.pw;
            if (iw < 0 || iw >= g.w) continue;
            dx[(c * g.h + ih) * g.w + iw] += cols(row, oh * g.wo + ow);
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& bias, Padding pad) {
  require(x.value().rank() == 4, "conv2d input must be N x C x H x W, got " + to_string(x.shape()));
  require(w.value().rank() == 4, "conv2d weight must be C_out x C_in x kH x kW, got " + to_string(w.shape()));
  require(bias.value().rank() == 1 && bias.size() == w.dim(0),
          "conv2d bias must have C_out entries, got " + to_string(bias.shape()));
  require(x.dim(1) == w.dim(1), "conv2d channel mismatch: input " + to_string(x.shape()) + ", weight " +
                                    to_string(w.shape()));
  require(pad.h >= 0 && pad.w >= 0, "conv2d padding must be non-negative");

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), pad.h, pad.w, 0, 0};
  require(g.kh <= g.h + 2 * g.ph && g.kw <= g.w + 2 * g.pw,
          "conv2d kernel " + to_string(w.shape()) + " larger than padded input " + to_string(x.shape()));
  g.ho = g.h + 2 * g.ph - g.kh + 1;
  g.wo = g.w + 2 * g.pw - g.kw + 1;

  Tensor out({g.batch, g.c_out, g.ho, g.wo});
  const auto W = w.value().matrix(g.c_out, g.patch());
  const Vector& b = bias.value().data();
  RowMatrix cols;
  for (Index n = 0; n < g.batch; ++n) {
    const Scalar* xn = x.value().ptr() + n * g.c_in * g.h * g.w;
    MatrixMap yn(out.ptr() + n * g.c_out * g.ho * g.wo, g.c_out, g.ho * g.wo);
    if (g.pointwise()) {
      yn.noalias() = W * ConstMatrixMap(xn, g.c_in, g.h * g.w);
    } else {
      im2col(xn, g, cols);
      yn.noalias() = W * cols;
    }
    yn.colwise() += b;
  }

  return make_result("conv2d", std::move(out), {x.node(), w.node(), bias.node()}, [g](Node& self) {
    auto& X = *self.inputs[0];
    auto& Wt = *self.inputs[1];
    auto& B = *self.inputs[2];
    const auto Wm = Wt.value.matrix(g.c_out, g.patch());
    RowMatrix cols, dcols;
    for (Index n = 0; n < g.batch; ++n) {
      const Scalar* xn = X.value.ptr() + n * g.c_in * g.h * g.w;
      ConstMatrixMap gn(self.grad.ptr() + n * g.c_out * g.ho * g.wo, g.c_out, g.ho * g.wo);
      if (B.requires_grad) B.grad_buffer().data() += gn.rowwise().sum();
      if (Wt.requires_grad) {
        auto dW = Wt.grad_buffer().matrix(g.c_out, g.patch());
        if (g.pointwise())
          dW.noalias() += gn * ConstMatrixMap(xn, g.c_in, g.h * g.w).transpose();
        else {
          im2col(xn, g, cols);
          dW.noalias() += gn * cols.transpose();
        }
      }
      if (X.requires_grad) {
        Scalar* dxn = X.grad_buffer().ptr() + n * g.c_in * g.h * g.w;
        if (g.pointwise()) {
          MatrixMap(dxn, g.c_in, g.h * g.w).noalias() += Wm.transpose() * gn;
        } else {
          dcols.noalias() = Wm.transpose() * gn;
          col2im_add(dcols, g, dxn);
        }
      }
    }
  });
}

}  // namespace wgcn
