#include "wgcn/keyvalue.hpp"

#include "wgcn/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace wgcn {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view value, char sep) {
  std::vector<std::string> out;
  if (trim(value).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = value.find(sep, pos);
    out.push_back(trim(value.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& source) {
  KeyValueFile kv;
  kv.source_ = source;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected `key = value`");
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (kv.entries_.count(key)) throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
    kv.entries_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::string& KeyValueFile::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_ + ": missing key `" + key + "`");
  return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

void KeyValueFile::reject_unknown(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : entries_)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(source_ + ": unknown key `" + key + "`");
}

long long parse_int(std::string_view value, const std::string& what) {
  const std::string v = trim(value);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError(what + ": expected an integer, got `" + v + "`");
  return out;
}

double parse_double(std::string_view value, const std::string& what) {
  const std::string v = trim(value);
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError(what + ": expected a number, got `" + v + "`");
  return out;
}

bool parse_bool(std::string_view value, const std::string& what) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(what + ": expected true/false, got `" + v + "`");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace wgcn
