#pragma once

#include "wgcn/data.hpp"
#include "wgcn/keyvalue.hpp"
#include "wgcn/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace wgcn {

/// Everything a run needs. Relative paths in a config file resolve against
/// the file's directory; command-line overrides win over file values.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path data;
  std::filesystem::path schema;  // empty: built-in schema for the dataset
  std::filesystem::path output_dir = "run";
  double validation_fraction = 0.1;
  GapPolicy gaps;

  static const std::vector<std::string>& keys();
  static RunConfig from_file(const std::filesystem::path& path);

  // `key` must be one of keys(); paths are taken relative to `base`.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base = {});
  std::map<std::string, std::string> entries() const;
  void validate() const;
};

DatasetSchema resolve_schema(const RunConfig& cfg);
SplitSpec resolve_split(const RunConfig& cfg);
PreparedData load_prepared(const RunConfig& cfg);

/// Horizons evaluated in the published protocol: {6,12,18,24} Danish,
/// {2,4,6,8,10} Dutch.
const std::vector<Index>& protocol_horizons(DatasetKind kind);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace wgcn
