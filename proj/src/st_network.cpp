#include "wgcn/st_network.hpp"

#include "wgcn/errors.hpp"

#include <cmath>
#include <type_traits>

namespace wgcn {

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* what) {
    if (v <= 0) throw ConfigError(std::string("model ") + what + " must be positive");
  };
  positive(input_channels, "input_channels");
  positive(window, "window");
  positive(vertices, "vertices");
  positive(outputs, "outputs");
  positive(reduce_channels, "reduce_channels");
  if (block_channels.empty()) throw ConfigError("model needs at least one ST-block");
  for (Index c : block_channels) positive(c, "block channel count");
  if (temporal_kernel <= 0 || temporal_kernel % 2 == 0)
    throw ConfigError("temporal kernel must be a positive odd number");
}

ConvParams ConvParams::init(const std::string& prefix, Index c_out, Index c_in, Index kh, Index kw, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * kh * kw));
  ConvParams p;
  p.weight = Parameter(prefix + ".weight", random_uniform({c_out, c_in, kh, kw}, rng, -bound, bound));
  p.bias = Parameter(prefix + ".bias", random_uniform({c_out}, rng, -bound, bound));
  return p;
}

BatchNormParams BatchNormParams::init(const std::string& prefix, Index channels) {
  return {Parameter(prefix + ".scale", Tensor({channels}, 1.0)), Parameter(prefix + ".shift", Tensor({channels}, 0.0)),
          RunningStats{}};
}

STBlockParams STBlockParams::init(const std::string& prefix, Index c_in, Index c_out, Index vertices,
                                  Index temporal_kernel, bool gamma_variant, Rng& rng) {
  STBlockParams b;
  b.in_channels = c_in;
  b.out_channels = c_out;
  b.adjacency = LearnableAdjacency::random(vertices, gamma_variant, rng, prefix);
  b.spatial = ConvParams::init(prefix + ".spatial", c_out, c_in, 1, 1, rng);
  b.spatial_bn = BatchNormParams::init(prefix + ".spatial_bn", c_out);
  b.temporal = ConvParams::init(prefix + ".temporal", c_out, c_out, temporal_kernel, 1, rng);
  b.temporal_bn = BatchNormParams::init(prefix + ".temporal_bn", c_out);
  if (c_in != c_out) b.residual = ConvParams::init(prefix + ".residual", c_out, c_in, 1, 1, rng);
  return b;
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams m;
  m.config = config;
  Index c_in = config.input_channels;
  for (std::size_t i = 0; i < config.block_channels.size(); ++i) {
    const Index c_out = config.block_channels[i];
    m.blocks.push_back(STBlockParams::init("block" + std::to_string(i + 1), c_in, c_out, config.vertices,
                                           config.temporal_kernel, config.gamma_variant, rng));
    c_in = c_out;
  }
  m.reduce = ConvParams::init("reduce", config.reduce_channels, c_in, 1, 1, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.flatten_width()));
  m.fc_weight = Parameter("fc.weight", random_uniform({config.flatten_width(), config.outputs}, rng, -bound, bound));
  m.fc_bias = Parameter("fc.bias", random_uniform({config.outputs}, rng, -bound, bound));
  return m;
}

namespace {

template <typename Model, typename P>
std::vector<P*> collect_parameters(Model& m) {
  std::vector<P*> out;
  for (auto& b : m.blocks) {
    out.push_back(&b.adjacency.weights);
    if (b.adjacency.gamma) out.push_back(&*b.adjacency.gamma);
    out.push_back(&b.spatial.weight);
    out.push_back(&b.spatial.bias);
    out.push_back(&b.spatial_bn.scale);
    out.push_back(&b.spatial_bn.shift);
    out.push_back(&b.temporal.weight);
    out.push_back(&b.temporal.bias);
    out.push_back(&b.temporal_bn.scale);
    out.push_back(&b.temporal_bn.shift);
    if (b.residual) {
      out.push_back(&b.residual->weight);
      out.push_back(&b.residual->bias);
    }
  }
  out.push_back(&m.reduce.weight);
  out.push_back(&m.reduce.bias);
  out.push_back(&m.fc_weight);
  out.push_back(&m.fc_bias);
  return out;
}

template <typename Model, typename S>
std::vector<std::pair<std::string, S*>> collect_stats(Model& m) {
  std::vector<std::pair<std::string, S*>> out;
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i + 1);
    out.emplace_back(prefix + ".spatial_bn", &m.blocks[i].spatial_bn.stats);
    out.emplace_back(prefix + ".temporal_bn", &m.blocks[i].temporal_bn.stats);
  }
  return out;
}

}  // namespace

std::vector<Parameter*> ModelParams::parameters() { return collect_parameters<ModelParams, Parameter>(*this); }

std::vector<const Parameter*> ModelParams::parameters() const {
  return collect_parameters<const ModelParams, const Parameter>(*this);
}

std::vector<std::pair<std::string, RunningStats*>> ModelParams::running_stats() {
  return collect_stats<ModelParams, RunningStats>(*this);
}

std::vector<std::pair<std::string, const RunningStats*>> ModelParams::running_stats() const {
  return collect_stats<const ModelParams, const RunningStats>(*this);
}

void ModelParams::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Var temporal_conv(const Var& x, const Var& weight, const Var& bias) {
  if (weight.value().rank() == 4 && weight.dim(3) != 1)
    throw DimensionError("temporal kernel must be k x 1, got " + to_string(weight.shape()));
  const Index k = weight.value().rank() == 4 ? weight.dim(2) : 1;
  return conv2d(x, weight, bias, Padding{(k - 1) / 2, 0});
}

namespace {

// Shared body of the train and eval block forwards. `Block` is either
// STBlockParams (train or eval) or const STBlockParams (eval only).
template <typename Block>
Var block_forward(const Var& x, Block& p, Mode mode, const TransformOptions& opts) {
  auto bn = [mode](const Var& in, auto& bnp) {
    if constexpr (std::is_const_v<std::remove_reference_t<decltype(bnp)>>)
      return batchnorm2d(in, bnp.scale.var(), bnp.shift.var(), bnp.stats);
    else
      return batchnorm2d(in, bnp.scale.var(), bnp.shift.var(), bnp.stats, mode);
  };
  if (x.value().rank() != 4 || x.dim(1) != p.in_channels)
    throw DimensionError("ST-block expects N x " + std::to_string(p.in_channels) + " x T x V input, got " +
                         to_string(x.shape()));
  Var h = spatial_graph_conv(x, p.adjacency, p.spatial.weight.var(), p.spatial.bias.var(), opts);
  h = relu(bn(h, p.spatial_bn));
  h = bn(temporal_conv(h, p.temporal.weight.var(), p.temporal.bias.var()), p.temporal_bn);
  Var shortcut = p.residual ? conv2d(x, p.residual->weight.var(), p.residual->bias.var()) : x;
  return relu(add(h, shortcut));
}

template <typename Model>
Var forward_impl(const Var& x, Model& m, Mode mode, const TransformOptions& opts) {
  const ModelConfig& c = m.config;
  if (x.value().rank() != 4 || x.dim(1) != c.input_channels || x.dim(2) != c.window || x.dim(3) != c.vertices)
    throw ConfigError("model configured for N x " + std::to_string(c.input_channels) + " x " +
                      std::to_string(c.window) + " x " + std::to_string(c.vertices) + " input, got " +
                      to_string(x.shape()));
  Var h = x;
  for (auto& block : m.blocks) h = block_forward(h, block, mode, opts);
  h = conv2d(h, m.reduce.weight.var(), m.reduce.bias.var());
  h = reshape(h, {x.dim(0), c.flatten_width()});
  return add_row_bias(matmul(h, m.fc_weight.var()), m.fc_bias.var());
}

}  // namespace

Var st_block_forward(const Var& x, STBlockParams& block, Mode mode, const TransformOptions& opts) {
  return block_forward(x, block, mode, opts);
}

Var st_block_forward(const Var& x, const STBlockParams& block, const TransformOptions& opts) {
  return block_forward(x, block, Mode::eval, opts);
}

Var model_forward(const Var& x, ModelParams& model, Mode mode, const TransformOptions& opts) {
  return forward_impl(x, model, mode, opts);
}

Var model_forward(const Var& x, const ModelParams& model, const TransformOptions& opts) {
  return forward_impl(x, model, Mode::eval, opts);
}

Tensor predict(const ModelParams& model, const Tensor& x) {
  NoRecordScope no_record;
  return model_forward(constant(x), model).value();
}

}  // namespace wgcn
