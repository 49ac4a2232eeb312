#pragma once

#include "wgcn/data.hpp"
#include "wgcn/st_network.hpp"
#include "wgcn/trainer.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace wgcn {

double mae(const Vector& y, const Vector& yhat);
double mse(const Vector& y, const Vector& yhat);

struct CityMetrics {
  std::string city;
  double mae = 0;
  double mse = 0;
};

struct MetricsReport {
  DatasetKind dataset = DatasetKind::danish;
  Index horizon = 0;
  std::size_t samples = 0;
  std::string unit;
  std::vector<CityMetrics> cities;
  double mae = 0;  // mean of per-city values
  double mse = 0;

  // MSE >= MAE^2 per city, averages equal the per-city means, expected city
  // count for the dataset. Throws StateError on violation.
  void check_invariants() const;
};

/// Predictions and ground truth in source units, one row per sample.
struct Predictions {
  std::vector<Hour> target_times;
  RowMatrix truth;
  RowMatrix predicted;
};

Predictions predict_samples(const ModelParams& model, const std::vector<WindowedSample>& samples, const NormStats& norm,
                            Index batch_size = 256);

MetricsReport compute_report(const Predictions& p, const std::vector<std::string>& cities, DatasetKind dataset,
                             Index horizon, const std::string& unit);

/// Throws ConfigError when the checkpoint does not fit the data (vertex,
/// variable, or target counts).
void check_compatible(const Checkpoint& ckpt, const DatasetSchema& schema);

MetricsReport evaluate(const Checkpoint& ckpt, const PreparedData& data);

void write_report_text(const MetricsReport& report, std::ostream& out);
void write_report_csv(const MetricsReport& report, std::ostream& out);

/// `timestamp,city,ground_truth,prediction` in source units; timestamp is the
/// hour being predicted.
void export_predictions(const Checkpoint& ckpt, const PreparedData& data, const std::filesystem::path& path);
void write_predictions_csv(const Predictions& p, const std::vector<std::string>& cities, std::ostream& out);

enum class AdjacencyView { raw, transformed };

/// V x V CSV with city names heading rows and columns. Row i is the source
/// station, column j the destination (x_out[..., j] = sum_i x_in[..., i] * M[i, j]).
void export_adjacency(const Checkpoint& ckpt, int layer, AdjacencyView view, const std::filesystem::path& path);
void write_adjacency_csv(const Tensor& matrix, const std::vector<std::string>& cities, std::ostream& out);
Tensor adjacency_matrix(const ModelParams& model, int layer, AdjacencyView view);

}  // namespace wgcn
