#pragma once

#include "wgcn/autodiff.hpp"
#include "wgcn/graph_conv.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wgcn {

struct ModelConfig {
  Index input_channels = 4;  // weather variables
  Index window = 30;         // input time steps T
  Index vertices = 5;        // stations V
  Index outputs = 3;         // predicted stations V_out
  std::vector<Index> block_channels{16, 32, 64};
  Index reduce_channels = 4;
  Index temporal_kernel = 3;
  bool gamma_variant = false;

  Index flatten_width() const { return reduce_channels * window * vertices; }
  void validate() const;
};

struct ConvParams {
  Parameter weight;  // C_out x C_in x kH x kW
  Parameter bias;    // C_out

  static ConvParams init(const std::string& prefix, Index c_out, Index c_in, Index kh, Index kw, Rng& rng);
};

struct BatchNormParams {
  Parameter scale;
  Parameter shift;
  RunningStats stats;

  static BatchNormParams init(const std::string& prefix, Index channels);
};

struct STBlockParams {
  Index in_channels = 0;
  Index out_channels = 0;
  LearnableAdjacency adjacency;
  ConvParams spatial;
  BatchNormParams spatial_bn;
  ConvParams temporal;
  BatchNormParams temporal_bn;
  std::optional<ConvParams> residual;  // present iff in_channels != out_channels

  static STBlockParams init(const std::string& prefix, Index c_in, Index c_out, Index vertices,
                            Index temporal_kernel, bool gamma_variant, Rng& rng);
};

struct ModelParams {
  ModelConfig config;
  std::vector<STBlockParams> blocks;
  ConvParams reduce;
  Parameter fc_weight;  // flatten_width x outputs
  Parameter fc_bias;    // outputs

  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  // Canonical order; names are unique and stable (used by checkpoints).
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<std::pair<std::string, RunningStats*>> running_stats();
  std::vector<std::pair<std::string, const RunningStats*>> running_stats() const;
  void zero_grad();
};

/// k x 1 convolution along time with (k-1)/2 zero padding: T and V preserved.
Var temporal_conv(const Var& x, const Var& weight, const Var& bias);

/// ReLU(BN_t(TemporalConv(ReLU(BN_s(SpatialGraphConv(x))))) + R(x)).
Var st_block_forward(const Var& x, STBlockParams& block, Mode mode, const TransformOptions& opts = {});
Var st_block_forward(const Var& x, const STBlockParams& block, const TransformOptions& opts = {});

/// N x C x T x V -> N x V_out (normalized units).
Var model_forward(const Var& x, ModelParams& model, Mode mode, const TransformOptions& opts = {});
Var model_forward(const Var& x, const ModelParams& model, const TransformOptions& opts = {});

/// Eval-mode forward without recording; never touches model state.
Tensor predict(const ModelParams& model, const Tensor& x);

}  // namespace wgcn
