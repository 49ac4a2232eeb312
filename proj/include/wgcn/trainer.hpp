#pragma once

#include "wgcn/autodiff.hpp"
#include "wgcn/data.hpp"
#include "wgcn/errors.hpp"
#include "wgcn/st_network.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace wgcn {

struct TrainConfig {
  DatasetKind dataset = DatasetKind::danish;
  Index horizon = 6;
  Index window = 30;
  Index temporal_kernel = 3;
  bool gamma_variant = false;
  double learning_rate = 1e-3;
  Index batch_size = 64;
  Index max_epochs = 100;
  Index patience = 10;
  std::uint64_t seed = 0;
  std::vector<Index> block_channels{16, 32, 64};
  Index reduce_channels = 4;

  void validate() const;
  ModelConfig model_config(const DatasetSchema& schema) const;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;

  static AdamState for_parameters(const std::vector<Parameter*>& params);
};

/// Mean of squared differences over all entries.
Var mse_loss(const Var& prediction, const Var& target);

/// One bias-corrected Adam update. Gradients are left untouched.
void adam_step(const std::vector<Parameter*>& params, AdamState& state, double learning_rate,
               const AdamOptions& opts = {});

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0;  // MSE, normalized units
  double val_mae = 0;     // source units
  double val_mse = 0;
};

struct Checkpoint {
  static constexpr int format_version = 1;

  TrainConfig config;
  DatasetSchema schema;
  SplitSpec split;
  NormStats norm;
  ModelParams model;
  std::vector<EpochRecord> history;
  Index best_epoch = -1;
  std::string status;                          // "max_epochs", "early_stopped", "diverged"
  std::map<std::string, std::string> run;      // the run configuration as given
};

/// Training stopped on a non-finite loss or gradient; `partial` holds the
/// best snapshot and the finite history up to the failure.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, Checkpoint partial)
      : NumericError(what), partial_(std::move(partial)) {}
  const Checkpoint& partial() const { return partial_; }

 private:
  Checkpoint partial_;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Shuffled mini-batch Adam on MSE, validation MAE after each epoch, best
/// snapshot kept, early stop once `patience` epochs pass without improvement.
Checkpoint train(const TrainConfig& config, const PreparedData& data, const EpochObserver& observer = {});

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& text, const std::string& source);

}  // namespace wgcn
