#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace wgcn {

// `key = value` lines; `#` starts a comment; blank lines ignored. Keys are
// unique. Values keep inner whitespace but are trimmed at both ends.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text, const std::string& source);
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  // Throws ConfigError naming the first key not in `allowed`.
  void reject_unknown(const std::vector<std::string>& allowed) const;

 private:
  std::string source_;
  std::map<std::string, std::string> entries_;
};

std::vector<std::string> split_list(std::string_view value, char sep = ',');
std::string trim(std::string_view s);

long long parse_int(std::string_view value, const std::string& what);
double parse_double(std::string_view value, const std::string& what);
bool parse_bool(std::string_view value, const std::string& what);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace wgcn
