#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "rydloss/common.hpp"

namespace rydloss {

/// Write via a sibling temp file and rename, so readers never see a partial file.
void atomic_write(const std::string& path, const std::string& content);

/// Flat configuration: `key = value` lines with `#` comments and optional
/// `[section]` headers, which prefix keys as `section.key`. Values are numbers,
/// booleans or (optionally quoted) strings; this is the subset of TOML the presets use.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  /// `key=value`; later assignments win.
  void set(const std::string& assignment);
  void set(const std::string& key, const nlohmann::json& value) { values_[key] = value; }
  void merge(const Config& over);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;

  /// Numeric keys without a section: the input of from_experiment_units.
  std::map<std::string, double> medium_values() const;
  nlohmann::json to_json() const;

 private:
  static nlohmann::json parse_value(const std::string& raw);
  std::map<std::string, nlohmann::json> values_;
};

/// Parse `lo:hi:step` (inclusive when hi lands on the grid) or a comma list.
std::vector<double> parse_grid(const std::string& spec, const std::string& field);

}  // namespace rydloss
