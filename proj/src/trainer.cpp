#include "wgcn/trainer.hpp"

#include "wgcn/evaluation.hpp"

#include <cmath>
#include <limits>

namespace wgcn {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(static_cast<double>(horizon), "horizon");
  positive(static_cast<double>(window), "window");
  positive(learning_rate, "learning_rate");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(max_epochs), "max_epochs");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  if (temporal_kernel != 3) throw ConfigError("temporal kernel height is fixed at 3");
}

ModelConfig TrainConfig::model_config(const DatasetSchema& schema) const {
  ModelConfig m;
  m.input_channels = static_cast<Index>(schema.variables.size());
  m.window = window;
  m.vertices = static_cast<Index>(schema.cities.size());
  m.outputs = static_cast<Index>(schema.target_cities.size());
  m.block_channels = block_channels;
  m.reduce_channels = reduce_channels;
  m.temporal_kernel = temporal_kernel;
  m.gamma_variant = gamma_variant;
  m.validate();
  return m;
}

AdamState AdamState::for_parameters(const std::vector<Parameter*>& params) {
  AdamState s;
  for (const Parameter* p : params) {
    s.first_moment.push_back(Tensor::zeros_like(p->value()));
    s.second_moment.push_back(Tensor::zeros_like(p->value()));
  }
  return s;
}

Var mse_loss(const Var& prediction, const Var& target) {
  if (prediction.shape() != target.shape())
    throw DimensionError("mse_loss: prediction " + to_string(prediction.shape()) + " vs target " +
                         to_string(target.shape()));
  return reduce_mean(square(sub(prediction, target)));
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state, double learning_rate,
               const AdamOptions& opts) {
  if (state.first_moment.size() != params.size()) throw ContractError("Adam state does not match the parameter list");
  for (const Parameter* p : params)
    if (!p->grad().all_finite()) throw NumericError("non-finite gradient in parameter " + p->name());

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(opts.beta1, t);
  const double correction2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto g = p.grad().data().array();
    auto m = state.first_moment[i].data().array();
    auto v = state.second_moment[i].data().array();
    m = opts.beta1 * m + (1.0 - opts.beta1) * g;
    v = opts.beta2 * v + (1.0 - opts.beta2) * g * g;
    p.value().data().array() -= learning_rate * (m / correction1) / ((v / correction2).sqrt() + opts.epsilon);
  }
}

namespace {

// Shuffle stream is decoupled from the initialization stream.
constexpr std::uint64_t shuffle_stream = 0x53485546464c45ULL;

}  // namespace

Checkpoint train(const TrainConfig& config, const PreparedData& data, const EpochObserver& observer) {
  config.validate();
  const auto& train_set = data.samples.train;
  const auto& val_set = data.samples.val;
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (val_set.empty()) throw ConfigError("validation split is empty");

  Checkpoint best;
  best.config = config;
  best.schema = data.schema;
  best.split = data.split;
  best.norm = data.norm;
  best.model = ModelParams::initialize(config.model_config(data.schema), config.seed);

  ModelParams model = best.model;
  std::vector<Parameter*> params = model.parameters();
  AdamState adam = AdamState::for_parameters(params);
  BatchIterator batches(train_set, config.batch_size, config.seed ^ shuffle_stream);

  double best_mae = std::numeric_limits<double>::infinity();
  std::vector<EpochRecord> history;
  best.status = "max_epochs";

  auto aborted = [&](const std::string& why) {
    best.history = history;
    best.status = "diverged";
    return TrainingAborted(why, best);
  };

  for (Index epoch = 0; epoch < config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& indices : batches.next_epoch()) {
      const Batch b = make_batch(train_set, indices);
      Tape tape;
      double loss_value = 0.0;
      try {
        auto scope = tape.activate();
        Var loss = mse_loss(model_forward(constant(b.x), model, Mode::train), constant(b.y));
        loss_value = loss.value().item();
        model.zero_grad();
        tape.backward(loss);
        adam_step(params, adam, config.learning_rate);
      } catch (const NumericError& e) {
        throw aborted("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += loss_value * static_cast<double>(indices.size());
      seen += indices.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    const Predictions val_pred = predict_samples(model, val_set, data.norm);
    const MetricsReport val = compute_report(val_pred, data.schema.target_cities, data.schema.kind, config.horizon,
                                             data.schema.wind_unit());
    rec.val_mae = val.mae;
    rec.val_mse = val.mse;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_mae))
      throw aborted("non-finite loss in epoch " + std::to_string(epoch));
    history.push_back(rec);
    if (observer) observer(rec);

    if (rec.val_mae < best_mae) {
      best_mae = rec.val_mae;
      best.best_epoch = epoch;
      best.model = model;
    }
    if (epoch - best.best_epoch >= config.patience) {
      best.status = "early_stopped";
      break;
    }
  }
  best.history = std::move(history);
  return best;
}

}  // namespace wgcn
