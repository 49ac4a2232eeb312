#pragma once

#include "wgcn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wgcn {

enum class DatasetKind { danish, dutch };

DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);

// Whole hours since 1970-01-01T00:00 UTC.
using Hour = std::int64_t;

// Accepts `YYYY-MM-DD[T| ]HH:MM[:SS][Z]`; minutes and seconds must be zero.
Hour parse_timestamp(std::string_view text);
// `YYYY-MM-DDTHH:00:00`
std::string format_timestamp(Hour h);

/// Column naming of one dataset in the canonical wide CSV layout
/// (`timestamp,<city>.<variable>,...`).
struct DatasetSchema {
  DatasetKind kind = DatasetKind::danish;
  std::vector<std::string> cities;
  std::vector<std::string> variables;
  std::vector<std::string> units;
  std::string wind_variable;
  std::vector<std::string> target_cities;

  static DatasetSchema danish();
  static DatasetSchema dutch();
  static DatasetSchema for_kind(DatasetKind kind);
  static DatasetSchema load(const std::filesystem::path& path);

  Index wind_index() const;
  std::vector<Index> target_indices() const;
  const std::string& wind_unit() const { return units.at(static_cast<std::size_t>(wind_index())); }
  // City and variable counts must match the dataset kind (5x4 Danish, 7x6 Dutch).
  void validate() const;
};

struct GapPolicy {
  int max_forward_fill = 3;  // consecutive missing hours filled from the previous row
};

/// Hourly multi-station measurements.
struct RawSeries {
  std::vector<Hour> timestamps;  // strictly increasing, hourly
  Tensor values;                 // T_total x V x C_vars
  std::vector<std::string> cities;
  std::vector<std::string> variables;
  std::vector<std::string> units;
  Index filled_hours = 0;

  Index length() const { return static_cast<Index>(timestamps.size()); }
  Index vertex_count() const { return static_cast<Index>(cities.size()); }
  Index variable_count() const { return static_cast<Index>(variables.size()); }
  Scalar at(Index t, Index v, Index c) const { return values[(t * vertex_count() + v) * variable_count() + c]; }
  Scalar& at(Index t, Index v, Index c) { return values[(t * vertex_count() + v) * variable_count() + c]; }
};

RawSeries load_csv(const std::filesystem::path& path, const DatasetSchema& schema, const GapPolicy& gaps = {});
RawSeries parse_csv(std::istream& in, const DatasetSchema& schema, const std::string& source,
                    const GapPolicy& gaps = {});

/// Chronological protocol: pre-test period [train_start, test_start) feeds
/// train and validation, [test_start, test_end) is the test period.
struct SplitSpec {
  DatasetKind kind = DatasetKind::danish;
  Hour train_start = 0;
  Hour test_start = 0;
  Hour test_end = 0;
  double validation_fraction = 0.1;

  static SplitSpec danish();  // 2000-2009 / 2010
  static SplitSpec dutch();   // 2011-01..2018-12 / 2019-01..2020-03
  static SplitSpec for_kind(DatasetKind kind);
};

/// Per-variable min/max over all cities in the pre-test period.
struct NormStats {
  std::vector<std::string> variables;
  std::vector<Scalar> min;
  std::vector<Scalar> max;
  Index wind_index = 0;

  static constexpr Scalar epsilon = 1e-12;
  Scalar range(Index var) const;
  Scalar wind_range() const { return range(wind_index); }
};

NormStats compute_norm_stats(const RawSeries& series, const SplitSpec& split, const std::string& wind_variable);
RawSeries normalize(const RawSeries& series, const NormStats& stats);
Vector denormalize_wind(const Vector& normalized, const NormStats& stats);
Scalar normalize_wind(Scalar value, const NormStats& stats);

/// One input window (C x T x V, materialized on demand from the shared
/// normalized series) and its horizon target.
struct WindowedSample {
  std::shared_ptr<const RawSeries> series;
  Index start = 0;   // row of the first input hour
  Index window = 0;  // T
  Index horizon = 0;
  Vector y;  // normalized wind speed at the target cities, h hours after the anchor

  Hour window_start() const { return series->timestamps[static_cast<std::size_t>(start)]; }
  Hour anchor() const { return series->timestamps[static_cast<std::size_t>(start + window - 1)]; }
  Hour target_time() const { return series->timestamps[static_cast<std::size_t>(start + window - 1 + horizon)]; }
  Tensor x() const;
  void write_x(Scalar* dst) const;  // C*T*V values
};

/// One sample per anchor; T_total - T - h + 1 of them (none if the series is
/// too short).
std::vector<WindowedSample> make_windows(std::shared_ptr<const RawSeries> series, Index window, Index horizon,
                                         const std::vector<Index>& target_vertices, Index wind_variable);

struct SampleSplits {
  std::vector<WindowedSample> train;
  std::vector<WindowedSample> val;
  std::vector<WindowedSample> test;
  std::size_t discarded = 0;
};

SampleSplits split_samples(std::vector<WindowedSample> samples, const SplitSpec& spec);

struct Batch {
  Tensor x;  // N x C x T x V
  Tensor y;  // N x V_out
  std::vector<std::size_t> indices;
};

Batch make_batch(const std::vector<WindowedSample>& samples, const std::vector<std::size_t>& indices);

/// Epoch-wise batching. With a seed every epoch draws a fresh permutation
/// from one seeded stream; without one the order is stable.
class BatchIterator {
 public:
  BatchIterator(const std::vector<WindowedSample>& samples, Index batch_size,
                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

  std::vector<std::vector<std::size_t>> next_epoch();

 private:
  std::size_t count_;
  Index batch_size_;
  std::optional<Rng> rng_;
};

/// Fully prepared dataset for one horizon.
struct PreparedData {
  DatasetSchema schema;
  SplitSpec split;
  NormStats norm;
  std::shared_ptr<const RawSeries> normalized;
  SampleSplits samples;
};

PreparedData prepare_data(const RawSeries& raw, const DatasetSchema& schema, const SplitSpec& split, Index window,
                          Index horizon);

}  // namespace wgcn
