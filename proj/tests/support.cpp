#include "support.hpp"

#include "wgcn/keyvalue.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace wgcn::testing {

std::string synthetic_csv(const SyntheticOptions& opts) {
  const DatasetSchema schema = DatasetSchema::for_kind(opts.kind);
  Rng rng(opts.seed);
  const auto v = static_cast<Index>(schema.cities.size());
  const auto c = static_cast<Index>(schema.variables.size());
  const Index wind = schema.wind_index();

  std::string header = "timestamp";
  for (const auto& city : schema.cities)
    for (const auto& var : schema.variables) header += "," + city + "." + var;

  // Upstream wind drives every later station one hour behind its neighbour.
  const Index lead = v;
  std::vector<double> base(static_cast<std::size_t>(opts.hours + lead));
  double level = 6.0;
  for (std::size_t t = 0; t < base.size(); ++t) {
    level += 0.3 * (6.0 - level) + rng.normal();
    base[t] = std::max(0.0, level + 2.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0));
  }

  std::vector<std::string> rows;
  for (Index t = 0; t < opts.hours; ++t) {
    std::ostringstream row;
    row << format_timestamp(opts.start + t);
    const double day = 2.0 * std::numbers::pi * static_cast<double>(opts.start + t) / 24.0;
    for (Index i = 0; i < v; ++i)
      for (Index k = 0; k < c; ++k) {
        double value;
        if (k == wind)
          value = base[static_cast<std::size_t>(t + lead - i)] + 0.1 * rng.normal();
        else
          value = 10.0 * (k + 1) + std::sin(day + 0.5 * i + k) + 0.2 * rng.normal();
        if (opts.kind == DatasetKind::dutch && k == wind) value = std::round(value * 10.0);
        row << ',' << format_double(value);
      }
    rows.push_back(row.str());
  }

  std::vector<std::string> kept;
  for (Index t = 0; t < opts.hours; ++t)
    if (std::find(opts.drop_rows.begin(), opts.drop_rows.end(), t) == opts.drop_rows.end())
      kept.push_back(rows[static_cast<std::size_t>(t)]);
  if (opts.shuffle_rows) {
    Rng shuffle(opts.seed + 99);
    for (std::size_t i = kept.size(); i > 1; --i) std::swap(kept[i - 1], kept[shuffle.below(i)]);
  }

  std::string out = header + "\n";
  for (const auto& r : kept) out += r + "\n";
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  Rng rng(static_cast<std::uint64_t>(::getpid()) * 7919 + static_cast<std::uint64_t>(counter++));
  path_ = std::filesystem::temp_directory_path() / ("wgcn-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

PreparedData small_danish(Index window, Index horizon, std::uint64_t seed) {
  SyntheticOptions o;
  o.start = parse_timestamp("2009-12-18T00:00");
  o.hours = 24 * 19;
  o.seed = seed;
  std::istringstream in(synthetic_csv(o));
  const DatasetSchema schema = DatasetSchema::danish();
  const RawSeries raw = parse_csv(in, schema, "synthetic");
  return prepare_data(raw, schema, SplitSpec::danish(), window, horizon);
}

TrainConfig tiny_train_config(Index window, Index horizon) {
  TrainConfig c;
  c.window = window;
  c.horizon = horizon;
  c.block_channels = {4, 6, 8};
  c.batch_size = 32;
  c.max_epochs = 3;
  c.patience = 5;
  c.seed = 11;
  c.learning_rate = 3e-3;
  return c;
}

CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) {
    r.exit_code = -1;
    return r;
  }
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace wgcn::testing
