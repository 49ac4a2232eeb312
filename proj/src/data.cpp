#include "wgcn/data.hpp"

#include "wgcn/errors.hpp"
#include "wgcn/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace wgcn {

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "danish") return DatasetKind::danish;
  if (name == "dutch") return DatasetKind::dutch;
  throw ConfigError("unknown dataset `" + std::string(name) + "` (expected danish or dutch)");
}

std::string to_string(DatasetKind kind) { return kind == DatasetKind::danish ? "danish" : "dutch"; }

// --- timestamps ----------------------------------------------------------------

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) throw LoadError("malformed timestamp `" + std::string(text) + "`");
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
  if (ec != std::errc() || ptr != text.data() + pos + len)
    throw LoadError("malformed timestamp `" + std::string(text) + "`");
  return v;
}

}  // namespace

Hour parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  std::string_view s = text;
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw LoadError("malformed timestamp `" + std::string(text) + "`");
  const int y = parse_field(s, 0, 4), mo = parse_field(s, 5, 2), d = parse_field(s, 8, 2);
  const int h = parse_field(s, 11, 2), mi = parse_field(s, 14, 2);
  int sec = 0;
  if (s.size() == 19 && s[16] == ':')
    sec = parse_field(s, 17, 2);
  else if (s.size() != 16)
    throw LoadError("malformed timestamp `" + std::string(text) + "`");
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23) throw LoadError("invalid date in timestamp `" + std::string(text) + "`");
  if (mi != 0 || sec != 0) throw LoadError("timestamp `" + std::string(text) + "` is not on the hour");
  return static_cast<Hour>(sys_days{ymd}.time_since_epoch().count()) * 24 + h;
}

std::string format_timestamp(Hour h) {
  using namespace std::chrono;
  const Hour days = h >= 0 ? h / 24 : -((-h + 23) / 24);
  const int hour = static_cast<int>(h - days * 24);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
  return buf;
}

// --- schema --------------------------------------------------------------------

DatasetSchema DatasetSchema::danish() {
  DatasetSchema s;
  s.kind = DatasetKind::danish;
  s.cities = {"Aalborg", "Aarhus", "Esbjerg", "Odense", "Roskilde"};
  s.variables = {"temperature", "pressure", "wind_speed", "wind_direction"};
  s.units = {"degC", "hPa", "m/s", "deg"};
  s.wind_variable = "wind_speed";
  s.target_cities = {"Esbjerg", "Odense", "Roskilde"};
  return s;
}

DatasetSchema DatasetSchema::dutch() {
  DatasetSchema s;
  s.kind = DatasetKind::dutch;
  s.cities = {"Schiphol", "De Kooy", "Leeuwarden", "Eelde", "Rotterdam", "Vlissingen", "Maastricht"};
  s.variables = {"wind_speed", "wind_direction", "temperature", "dew_point", "pressure", "rain_amount"};
  s.units = {"0.1 m/s", "deg", "0.1 degC", "0.1 degC", "0.1 hPa", "0.1 mm"};
  s.wind_variable = "wind_speed";
  s.target_cities = s.cities;
  return s;
}

DatasetSchema DatasetSchema::for_kind(DatasetKind kind) {
  return kind == DatasetKind::danish ? danish() : dutch();
}

DatasetSchema DatasetSchema::load(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  kv.reject_unknown({"kind", "cities", "variables", "units", "wind_variable", "target_cities"});
  DatasetSchema s;
  s.kind = parse_dataset_kind(kv.get("kind"));
  s.cities = split_list(kv.get("cities"));
  s.variables = split_list(kv.get("variables"));
  s.units = kv.has("units") ? split_list(kv.get("units")) : std::vector<std::string>(s.variables.size());
  s.wind_variable = kv.get("wind_variable");
  s.target_cities = kv.has("target_cities") ? split_list(kv.get("target_cities")) : s.cities;
  s.validate();
  return s;
}

namespace {

Index index_of(const std::vector<std::string>& names, const std::string& name, const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError(std::string("schema: unknown ") + what + " `" + name + "`");
  return static_cast<Index>(it - names.begin());
}

}  // namespace

Index DatasetSchema::wind_index() const { return index_of(variables, wind_variable, "wind variable"); }

std::vector<Index> DatasetSchema::target_indices() const {
  std::vector<Index> out;
  for (const auto& c : target_cities) out.push_back(index_of(cities, c, "target city"));
  return out;
}

void DatasetSchema::validate() const {
  const std::size_t want_cities = kind == DatasetKind::danish ? 5 : 7;
  const std::size_t want_vars = kind == DatasetKind::danish ? 4 : 6;
  if (cities.size() != want_cities || variables.size() != want_vars)
    throw ConfigError("schema: " + to_string(kind) + " data needs " + std::to_string(want_cities) + " cities and " +
                      std::to_string(want_vars) + " variables, got " + std::to_string(cities.size()) + " and " +
                      std::to_string(variables.size()));
  if (units.size() != variables.size()) throw ConfigError("schema: one unit per variable expected");
  for (const auto* names : {&cities, &variables}) {
    auto sorted = *names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("schema: duplicate city or variable name");
  }
  wind_index();
  if (target_cities.empty()) throw ConfigError("schema: no target cities");
  target_indices();
}

// --- CSV -----------------------------------------------------------------------

RawSeries load_csv(const std::filesystem::path& path, const DatasetSchema& schema, const GapPolicy& gaps) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open data file " + path.string());
  return parse_csv(in, schema, path.string(), gaps);
}

RawSeries parse_csv(std::istream& in, const DatasetSchema& schema, const std::string& source,
                    const GapPolicy& gaps) {
  schema.validate();
  const Index V = static_cast<Index>(schema.cities.size());
  const Index C = static_cast<Index>(schema.variables.size());

  std::string line;
  if (!std::getline(in, line)) throw LoadError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_list(line);
  if (header.empty() || header[0] != "timestamp")
    throw LoadError(source + ":1: first column must be `timestamp`");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (column.count(header[i])) throw LoadError(source + ":1: duplicate column `" + header[i] + "`");
    column[header[i]] = i;
  }
  // Column of each (city, variable) slot, in V x C order.
  std::vector<std::size_t> slot_column;
  for (const auto& city : schema.cities)
    for (const auto& var : schema.variables) {
      auto it = column.find(city + "." + var);
      if (it == column.end()) throw LoadError(source + ":1: missing column `" + city + "." + var + "`");
      slot_column.push_back(it->second);
    }

  struct Row {
    Hour time;
    std::vector<Scalar> values;
    int line;
  };
  std::vector<Row> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_list(line);
    const std::string where = source + ":" + std::to_string(lineno);
    if (fields.size() != header.size())
      throw LoadError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    Row row{0, std::vector<Scalar>(static_cast<std::size_t>(V * C)), lineno};
    try {
      row.time = parse_timestamp(fields[0]);
    } catch (const LoadError& e) {
      throw LoadError(where + ": " + e.what());
    }
    for (std::size_t s = 0; s < slot_column.size(); ++s) {
      const std::string& f = fields[slot_column[s]];
      double v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw LoadError(where + ": unparseable value `" + f + "` in column `" + header[slot_column[s]] + "`");
      row.values[s] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError(source + ": no data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });

  RawSeries series;
  series.cities = schema.cities;
  series.variables = schema.variables;
  series.units = schema.units;
  std::vector<const Row*> hourly;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      const Hour gap = rows[i].time - rows[i - 1].time;
      if (gap == 0)
        throw LoadError(source + ":" + std::to_string(rows[i].line) + ": duplicate timestamp " +
                        format_timestamp(rows[i].time));
      const Hour missing = gap - 1;
      if (missing > gaps.max_forward_fill)
        throw LoadError(source + ":" + std::to_string(rows[i].line) + ": " + std::to_string(missing) +
                        " missing hours before " + format_timestamp(rows[i].time) + " (forward-fill limit " +
                        std::to_string(gaps.max_forward_fill) + ")");
      for (Hour k = 1; k <= missing; ++k) {
        series.timestamps.push_back(rows[i - 1].time + k);
        hourly.push_back(&rows[i - 1]);
        ++series.filled_hours;
      }
    }
    series.timestamps.push_back(rows[i].time);
    hourly.push_back(&rows[i]);
  }
  series.values = Tensor({static_cast<Index>(hourly.size()), V, C});
  for (std::size_t t = 0; t < hourly.size(); ++t)
    std::copy(hourly[t]->values.begin(), hourly[t]->values.end(),
              series.values.ptr() + static_cast<Index>(t) * V * C);
  return series;
}

// --- splits and normalization -------------------------------------------------------

SplitSpec SplitSpec::danish() {
  return {DatasetKind::danish, parse_timestamp("2000-01-01T00:00"), parse_timestamp("2010-01-01T00:00"),
          parse_timestamp("2011-01-01T00:00"), 0.1};
}

SplitSpec SplitSpec::dutch() {
  return {DatasetKind::dutch, parse_timestamp("2011-01-01T00:00"), parse_timestamp("2019-01-01T00:00"),
          parse_timestamp("2020-04-01T00:00"), 0.1};
}

SplitSpec SplitSpec::for_kind(DatasetKind kind) { return kind == DatasetKind::danish ? danish() : dutch(); }

Scalar NormStats::range(Index var) const {
  const auto i = static_cast<std::size_t>(var);
  return std::max(epsilon, max.at(i) - min.at(i));
}

NormStats compute_norm_stats(const RawSeries& series, const SplitSpec& split, const std::string& wind_variable) {
  const Index C = series.variable_count();
  NormStats stats;
  stats.variables = series.variables;
  stats.wind_index = index_of(series.variables, wind_variable, "wind variable");
  stats.min.assign(static_cast<std::size_t>(C), std::numeric_limits<Scalar>::infinity());
  stats.max.assign(static_cast<std::size_t>(C), -std::numeric_limits<Scalar>::infinity());
  Index rows = 0;
  for (Index t = 0; t < series.length(); ++t) {
    const Hour h = series.timestamps[static_cast<std::size_t>(t)];
    if (h < split.train_start || h >= split.test_start) continue;
    ++rows;
    for (Index v = 0; v < series.vertex_count(); ++v)
      for (Index c = 0; c < C; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        stats.min[ci] = std::min(stats.min[ci], series.at(t, v, c));
        stats.max[ci] = std::max(stats.max[ci], series.at(t, v, c));
      }
  }
  if (rows == 0)
    throw ConfigError("no rows in the training period " + format_timestamp(split.train_start) + " .. " +
                      format_timestamp(split.test_start));
  return stats;
}

RawSeries normalize(const RawSeries& series, const NormStats& stats) {
  if (stats.variables != series.variables) throw ConfigError("normalization statistics do not match the series variables");
  RawSeries out = series;
  const Index C = series.variable_count();
  for (Index t = 0; t < series.length(); ++t)
    for (Index v = 0; v < series.vertex_count(); ++v)
      for (Index c = 0; c < C; ++c)
        out.at(t, v, c) = (series.at(t, v, c) - stats.min[static_cast<std::size_t>(c)]) / stats.range(c);
  return out;
}

Vector denormalize_wind(const Vector& normalized, const NormStats& stats) {
  return (normalized.array() * stats.wind_range() + stats.min.at(static_cast<std::size_t>(stats.wind_index))).matrix();
}

Scalar normalize_wind(Scalar value, const NormStats& stats) {
  return (value - stats.min.at(static_cast<std::size_t>(stats.wind_index))) / stats.wind_range();
}

// --- windows -------------------------------------------------------------------

void WindowedSample::write_x(Scalar* dst) const {
  const Index V = series->vertex_count();
  const Index C = series->variable_count();
  for (Index c = 0; c < C; ++c)
    for (Index t = 0; t < window; ++t)
      for (Index v = 0; v < V; ++v) *dst++ = series->at(start + t, v, c);
}

Tensor WindowedSample::x() const {
  Tensor out({series->variable_count(), window, series->vertex_count()});
  write_x(out.ptr());
  return out;
}

std::vector<WindowedSample> make_windows(std::shared_ptr<const RawSeries> series, Index window, Index horizon,
                                         const std::vector<Index>& target_vertices, Index wind_variable) {
  if (window < 1 || horizon < 1) throw ConfigError("window and horizon must be at least 1");
  for (Index v : target_vertices)
    if (v < 0 || v >= series->vertex_count()) throw ConfigError("target vertex out of range");
  std::vector<WindowedSample> out;
  const Index count = series->length() - window - horizon + 1;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) {
    WindowedSample w;
    w.series = series;
    w.start = s;
    w.window = window;
    w.horizon = horizon;
    w.y.resize(static_cast<Index>(target_vertices.size()));
    const Index target_row = s + window - 1 + horizon;
    for (std::size_t k = 0; k < target_vertices.size(); ++k)
      w.y[static_cast<Index>(k)] = series->at(target_row, target_vertices[k], wind_variable);
    out.push_back(std::move(w));
  }
  return out;
}

SampleSplits split_samples(std::vector<WindowedSample> samples, const SplitSpec& spec) {
  SampleSplits out;
  std::vector<WindowedSample> pre_test;
  for (auto& s : samples) {
    const Hour first = s.window_start(), last = s.target_time();
    if (first >= spec.test_start && last < spec.test_end)
      out.test.push_back(std::move(s));
    else if (first >= spec.train_start && last < spec.test_start)
      pre_test.push_back(std::move(s));
    else
      ++out.discarded;
  }
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(pre_test.size()) * spec.validation_fraction));
  const std::size_t n_train = pre_test.size() - n_val;
  out.train.assign(std::make_move_iterator(pre_test.begin()),
                   std::make_move_iterator(pre_test.begin() + static_cast<std::ptrdiff_t>(n_train)));
  out.val.assign(std::make_move_iterator(pre_test.begin() + static_cast<std::ptrdiff_t>(n_train)),
                 std::make_move_iterator(pre_test.end()));
  return out;
}

// --- batching ------------------------------------------------------------------

Batch make_batch(const std::vector<WindowedSample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("empty batch");
  const WindowedSample& first = samples.at(indices.front());
  const Index C = first.series->variable_count(), T = first.window, V = first.series->vertex_count();
  const Index outputs = first.y.size();
  const auto N = static_cast<Index>(indices.size());
  Batch b{Tensor({N, C, T, V}), Tensor({N, outputs}), indices};
  for (Index n = 0; n < N; ++n) {
    const WindowedSample& s = samples.at(indices[static_cast<std::size_t>(n)]);
    s.write_x(b.x.ptr() + n * C * T * V);
    b.y.matrix().row(n) = s.y.transpose();
  }
  return b;
}

BatchIterator::BatchIterator(const std::vector<WindowedSample>& samples, Index batch_size,
                             std::optional<std::uint64_t> shuffle_seed)
    : count_(samples.size()), batch_size_(batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (shuffle_seed) rng_.emplace(*shuffle_seed);
}

std::vector<std::vector<std::size_t>> BatchIterator::next_epoch() {
  std::vector<std::size_t> order(count_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (rng_)
    for (std::size_t i = count_; i > 1; --i) std::swap(order[i - 1], order[rng_->below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(batch_size_);
  for (std::size_t i = 0; i < count_; i += bs)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(count_, i + bs)));
  return batches;
}

PreparedData prepare_data(const RawSeries& raw, const DatasetSchema& schema, const SplitSpec& split, Index window,
                          Index horizon) {
  PreparedData d;
  d.schema = schema;
  d.split = split;
  d.norm = compute_norm_stats(raw, split, schema.wind_variable);
  d.normalized = std::make_shared<const RawSeries>(normalize(raw, d.norm));
  d.samples = split_samples(make_windows(d.normalized, window, horizon, schema.target_indices(), schema.wind_index()),
                            split);
  return d;
}

}  // namespace wgcn
