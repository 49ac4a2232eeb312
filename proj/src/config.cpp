#include "wgcn/config.hpp"

#include "wgcn/errors.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

namespace wgcn {

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "dataset",    "data",          "schema",        "output_dir", "horizon",
      "window",     "gamma_variant", "learning_rate", "batch_size", "max_epochs",
      "patience",   "seed",          "block_channels", "reduce_channels", "validation_fraction",
      "max_forward_fill"};
  return k;
}

namespace {

std::filesystem::path resolve(const std::string& value, const std::filesystem::path& base) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value, const std::filesystem::path& base) {
  const std::string what = "config key `" + key + "`";
  if (key == "dataset")
    train.dataset = parse_dataset_kind(value);
  else if (key == "data")
    data = resolve(value, base);
  else if (key == "schema")
    schema = value.empty() ? std::filesystem::path() : resolve(value, base);
  else if (key == "output_dir")
    output_dir = resolve(value, base);
  else if (key == "horizon")
    train.horizon = parse_int(value, what);
  else if (key == "window")
    train.window = parse_int(value, what);
  else if (key == "gamma_variant")
    train.gamma_variant = parse_bool(value, what);
  else if (key == "learning_rate")
    train.learning_rate = parse_double(value, what);
  else if (key == "batch_size")
    train.batch_size = parse_int(value, what);
  else if (key == "max_epochs")
    train.max_epochs = parse_int(value, what);
  else if (key == "patience")
    train.patience = parse_int(value, what);
  else if (key == "seed") {
    const long long s = parse_int(value, what);
    if (s < 0) throw ConfigError(what + ": seed must be non-negative");
    train.seed = static_cast<std::uint64_t>(s);
  } else if (key == "block_channels") {
    train.block_channels.clear();
    for (const auto& c : split_list(value)) train.block_channels.push_back(parse_int(c, what));
  } else if (key == "reduce_channels")
    train.reduce_channels = parse_int(value, what);
  else if (key == "validation_fraction")
    validation_fraction = parse_double(value, what);
  else if (key == "max_forward_fill")
    gaps.max_forward_fill = static_cast<int>(parse_int(value, what));
  else
    throw ConfigError("unknown config key `" + key + "`");
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  kv.reject_unknown(keys());
  RunConfig cfg;
  const auto base = path.parent_path();
  for (const auto& key : keys())
    if (kv.has(key)) cfg.set(key, kv.get(key), base);
  return cfg;
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::string channels;
  for (std::size_t i = 0; i < train.block_channels.size(); ++i)
    channels += (i ? "," : "") + std::to_string(train.block_channels[i]);
  return {{"dataset", to_string(train.dataset)},
          {"data", data.string()},
          {"schema", schema.string()},
          {"output_dir", output_dir.string()},
          {"horizon", std::to_string(train.horizon)},
          {"window", std::to_string(train.window)},
          {"gamma_variant", train.gamma_variant ? "true" : "false"},
          {"learning_rate", format_double(train.learning_rate)},
          {"batch_size", std::to_string(train.batch_size)},
          {"max_epochs", std::to_string(train.max_epochs)},
          {"patience", std::to_string(train.patience)},
          {"seed", std::to_string(train.seed)},
          {"block_channels", channels},
          {"reduce_channels", std::to_string(train.reduce_channels)},
          {"validation_fraction", format_double(validation_fraction)},
          {"max_forward_fill", std::to_string(gaps.max_forward_fill)}};
}

void RunConfig::validate() const {
  train.validate();
  if (data.empty()) throw ConfigError("config: `data` is required");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("config: validation_fraction must lie in (0, 1)");
  if (gaps.max_forward_fill < 0) throw ConfigError("config: max_forward_fill must be non-negative");
}

DatasetSchema resolve_schema(const RunConfig& cfg) {
  DatasetSchema s = cfg.schema.empty() ? DatasetSchema::for_kind(cfg.train.dataset) : DatasetSchema::load(cfg.schema);
  return s;
}

SplitSpec resolve_split(const RunConfig& cfg) {
  SplitSpec s = SplitSpec::for_kind(cfg.train.dataset);
  s.validation_fraction = cfg.validation_fraction;
  return s;
}

PreparedData load_prepared(const RunConfig& cfg) {
  const DatasetSchema schema = resolve_schema(cfg);
  if (schema.kind != cfg.train.dataset)
    throw ConfigError("schema " + cfg.schema.string() + " describes " + to_string(schema.kind) + " data, config says " +
                      to_string(cfg.train.dataset));
  const RawSeries raw = load_csv(cfg.data, schema, cfg.gaps);
  return prepare_data(raw, schema, resolve_split(cfg), cfg.train.window, cfg.train.horizon);
}

const std::vector<Index>& protocol_horizons(DatasetKind kind) {
  static const std::vector<Index> danish{6, 12, 18, 24};
  static const std::vector<Index> dutch{2, 4, 6, 8, 10};
  return kind == DatasetKind::danish ? danish : dutch;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw StateError("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace wgcn
