#include "wgcn/evaluation.hpp"

#include "wgcn/errors.hpp"
#include "wgcn/keyvalue.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace wgcn {

double mae(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size()) throw DimensionError("mae: length mismatch");
  if (y.size() == 0) throw DimensionError("mae: no samples");
  return (y - yhat).cwiseAbs().sum() / static_cast<double>(y.size());
}

double mse(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size()) throw DimensionError("mse: length mismatch");
  if (y.size() == 0) throw DimensionError("mse: no samples");
  return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

void MetricsReport::check_invariants() const {
  const std::size_t expected = dataset == DatasetKind::danish ? 3 : 7;
  if (cities.size() != expected)
    throw StateError("report has " + std::to_string(cities.size()) + " cities, expected " + std::to_string(expected));
  double sum_mae = 0, sum_mse = 0;
  for (const auto& c : cities) {
    if (c.mae < 0 || c.mse < 0) throw StateError("negative metric for " + c.city);
    // Jensen: mean(e^2) >= mean(|e|)^2; allow only last-bit rounding.
    if (c.mse < c.mae * c.mae * (1.0 - 1e-12)) throw StateError("MSE < MAE^2 for " + c.city);
    sum_mae += c.mae;
    sum_mse += c.mse;
  }
  const auto n = static_cast<double>(cities.size());
  if (std::abs(mae - sum_mae / n) > 1e-12 || std::abs(mse - sum_mse / n) > 1e-12)
    throw StateError("averaged metrics differ from the per-city mean");
}

Predictions predict_samples(const ModelParams& model, const std::vector<WindowedSample>& samples, const NormStats& norm,
                            Index batch_size) {
  Predictions p;
  if (samples.empty()) return p;
  const Index outputs = samples.front().y.size();
  p.truth.resize(static_cast<Index>(samples.size()), outputs);
  p.predicted.resize(static_cast<Index>(samples.size()), outputs);
  p.target_times.reserve(samples.size());
  BatchIterator it(samples, batch_size);
  for (const auto& indices : it.next_epoch()) {
    const Batch b = make_batch(samples, indices);
    const Tensor yhat = predict(model, b.x);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto row = static_cast<Index>(indices[k]);
      const auto kk = static_cast<Index>(k);
      p.truth.row(row) = denormalize_wind(b.y.matrix().row(kk).transpose(), norm).transpose();
      p.predicted.row(row) = denormalize_wind(yhat.matrix().row(kk).transpose(), norm).transpose();
    }
  }
  for (const auto& s : samples) p.target_times.push_back(s.target_time());
  return p;
}

MetricsReport compute_report(const Predictions& p, const std::vector<std::string>& cities, DatasetKind dataset,
                             Index horizon, const std::string& unit) {
  if (static_cast<Index>(cities.size()) != p.truth.cols()) throw DimensionError("city list does not match predictions");
  MetricsReport r;
  r.dataset = dataset;
  r.horizon = horizon;
  r.samples = static_cast<std::size_t>(p.truth.rows());
  r.unit = unit;
  for (Index c = 0; c < p.truth.cols(); ++c) {
    const Vector y = p.truth.col(c), yhat = p.predicted.col(c);
    r.cities.push_back({cities[static_cast<std::size_t>(c)], mae(y, yhat), mse(y, yhat)});
  }
  for (const auto& c : r.cities) {
    r.mae += c.mae;
    r.mse += c.mse;
  }
  r.mae /= static_cast<double>(r.cities.size());
  r.mse /= static_cast<double>(r.cities.size());
  return r;
}

void check_compatible(const Checkpoint& ckpt, const DatasetSchema& schema) {
  const ModelConfig& m = ckpt.model.config;
  const auto v = static_cast<Index>(schema.cities.size());
  if (m.vertices != v)
    throw ConfigError("V mismatch: checkpoint was trained on " + std::to_string(m.vertices) + " stations (" +
                      to_string(ckpt.schema.kind) + "), data has " + std::to_string(v) + " (" +
                      to_string(schema.kind) + ")");
  if (m.input_channels != static_cast<Index>(schema.variables.size()))
    throw ConfigError("variable count mismatch: checkpoint expects " + std::to_string(m.input_channels) +
                      ", data has " + std::to_string(schema.variables.size()));
  if (m.outputs != static_cast<Index>(schema.target_cities.size()))
    throw ConfigError("target count mismatch: checkpoint predicts " + std::to_string(m.outputs) + " cities, data has " +
                      std::to_string(schema.target_cities.size()));
  if (ckpt.schema.kind != schema.kind)
    throw ConfigError("dataset mismatch: checkpoint is " + to_string(ckpt.schema.kind) + ", data is " +
                      to_string(schema.kind));
}

MetricsReport evaluate(const Checkpoint& ckpt, const PreparedData& data) {
  check_compatible(ckpt, data.schema);
  if (data.samples.test.empty()) throw ConfigError("test split is empty");
  const Predictions p = predict_samples(ckpt.model, data.samples.test, data.norm);
  MetricsReport r =
      compute_report(p, data.schema.target_cities, data.schema.kind, ckpt.config.horizon, data.schema.wind_unit());
  r.check_invariants();
  return r;
}

void write_report_text(const MetricsReport& r, std::ostream& out) {
  out << "dataset " << to_string(r.dataset) << ", horizon " << r.horizon << "h, " << r.samples
      << " test samples, unit " << r.unit << "\n";
  out << std::left << std::setw(14) << "city" << std::right << std::setw(12) << "MAE" << std::setw(12) << "MSE" << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& c : r.cities)
    out << std::left << std::setw(14) << c.city << std::right << std::setw(12) << c.mae << std::setw(12) << c.mse << "\n";
  out << std::left << std::setw(14) << "average" << std::right << std::setw(12) << r.mae << std::setw(12) << r.mse
      << "\n";
  out.unsetf(std::ios::floatfield);
}

void write_report_csv(const MetricsReport& r, std::ostream& out) {
  out << "city,mae,mse,samples,horizon,dataset,unit\n";
  auto line = [&](const std::string& city, double a, double s) {
    out << city << ',' << format_double(a) << ',' << format_double(s) << ',' << r.samples << ',' << r.horizon << ','
        << to_string(r.dataset) << ',' << r.unit << '\n';
  };
  for (const auto& c : r.cities) line(c.city, c.mae, c.mse);
  line("average", r.mae, r.mse);
}

void write_predictions_csv(const Predictions& p, const std::vector<std::string>& cities, std::ostream& out) {
  out << "timestamp,city,ground_truth,prediction\n";
  for (Index i = 0; i < p.truth.rows(); ++i) {
    const std::string ts = format_timestamp(p.target_times[static_cast<std::size_t>(i)]);
    for (Index c = 0; c < p.truth.cols(); ++c)
      out << ts << ',' << cities[static_cast<std::size_t>(c)] << ',' << format_double(p.truth(i, c)) << ','
          << format_double(p.predicted(i, c)) << '\n';
  }
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  return out;
}

}  // namespace

void export_predictions(const Checkpoint& ckpt, const PreparedData& data, const std::filesystem::path& path) {
  check_compatible(ckpt, data.schema);
  const Predictions p = predict_samples(ckpt.model, data.samples.test, data.norm);
  std::ofstream out = open_output(path);
  write_predictions_csv(p, data.schema.target_cities, out);
  if (!out) throw LoadError("failed writing " + path.string());
}

Tensor adjacency_matrix(const ModelParams& model, int layer, AdjacencyView view) {
  if (layer < 1 || layer > static_cast<int>(model.blocks.size()))
    throw std::invalid_argument("layer must be in 1.." + std::to_string(model.blocks.size()) + ", got " +
                                std::to_string(layer));
  const LearnableAdjacency& adj = model.blocks[static_cast<std::size_t>(layer - 1)].adjacency;
  return view == AdjacencyView::raw ? adj.weights.value() : transformed_matrix(adj);
}

void write_adjacency_csv(const Tensor& m, const std::vector<std::string>& cities, std::ostream& out) {
  const Index v = m.dim(0);
  if (static_cast<Index>(cities.size()) != v) throw DimensionError("city list does not match adjacency size");
  out << "source\\destination";
  for (const auto& c : cities) out << ',' << c;
  out << '\n';
  for (Index i = 0; i < v; ++i) {
    out << cities[static_cast<std::size_t>(i)];
    for (Index j = 0; j < v; ++j) out << ',' << format_double(m.at({i, j}));
    out << '\n';
  }
}

void export_adjacency(const Checkpoint& ckpt, int layer, AdjacencyView view, const std::filesystem::path& path) {
  const Tensor m = adjacency_matrix(ckpt.model, layer, view);
  std::ofstream out = open_output(path);
  write_adjacency_csv(m, ckpt.schema.cities, out);
  if (!out) throw LoadError("failed writing " + path.string());
}

}  // namespace wgcn
