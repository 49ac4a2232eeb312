#pragma once

#include "wgcn/data.hpp"
#include "wgcn/trainer.hpp"

#include <filesystem>
#include <string>

namespace wgcn::testing {

struct SyntheticOptions {
  DatasetKind kind = DatasetKind::danish;
  Hour start = 0;
  Index hours = 48;
  std::uint64_t seed = 1;
  bool shuffle_rows = false;
  std::vector<Index> drop_rows;  // row indices left out of the file
};

/// Wide CSV whose wind field drifts from the first city to the last with a
/// one-hour lag per station, plus noise; other variables are smooth cycles.
std::string synthetic_csv(const SyntheticOptions& opts);
void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small Danish data set straddling the 2010 test boundary: about 330 hours
/// before it and 120 after.
PreparedData small_danish(Index window = 8, Index horizon = 2, std::uint64_t seed = 1);

/// Tiny training configuration matching small_danish.
TrainConfig tiny_train_config(Index window = 8, Index horizon = 2);

struct CommandResult {
  int exit_code = 0;
  std::string output;  // stdout and stderr interleaved
};

CommandResult run_command(const std::string& command);

}  // namespace wgcn::testing
