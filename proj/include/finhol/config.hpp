#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace finhol {

// Config files use a small TOML subset: `[table]` and `[table.sub]` headers,
// `[[table.item]]` array-of-table elements, `key = value` assignments with
// string / number / boolean / (possibly nested, multi-line) array values and
// `#` comments.  The exact grammar is written out in docs/config.md.
//
// Parsed values keep no source order; commands read what they know and
// reject unknown keys so typos fail loudly (ConfigError, exit code 2).

class ConfigValue;
using ConfigArray = std::vector<ConfigValue>;
using ConfigMap = std::map<std::string, ConfigValue>;

class ConfigValue {
 public:
  enum class Kind { string, number, boolean, array, table };

  ConfigValue() : kind_(Kind::table), table_(std::make_shared<ConfigMap>()) {}
  static ConfigValue make_string(std::string s);
  static ConfigValue make_number(double v);
  static ConfigValue make_bool(bool b);
  static ConfigValue make_array(ConfigArray a);
  static ConfigValue make_table();

  Kind kind() const { return kind_; }
  bool is_table() const { return kind_ == Kind::table; }
  bool is_array() const { return kind_ == Kind::array; }

  // Typed access; every getter throws ConfigError naming `where` when the
  // stored kind does not match.
  const std::string& as_string(const std::string& where) const;
  double as_number(const std::string& where) const;
  bool as_bool(const std::string& where) const;
  const ConfigArray& as_array(const std::string& where) const;
  ConfigMap& as_table(const std::string& where);
  const ConfigMap& as_table(const std::string& where) const;

 private:
  Kind kind_ = Kind::table;
  std::string str_;
  double num_ = 0.0;
  bool bool_ = false;
  std::shared_ptr<ConfigArray> array_;
  std::shared_ptr<ConfigMap> table_;
};

// A table cursor with path-aware error messages and consumed-key tracking.
// Commands wrap each block in a ConfigView, read their keys through it, then
// call finish() so leftovers turn into "unknown key" errors.
class ConfigView {
 public:
  ConfigView(const ConfigMap& map, std::string path);

  bool has(const std::string& key) const;
  // Scalars, with and without defaults.
  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_number(const std::string& key, double fallback);
  double require_number(const std::string& key);
  long get_int(const std::string& key, long fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  // Arrays.
  std::vector<double> get_vector(const std::string& key, std::vector<double> fallback);
  std::vector<double> require_vector(const std::string& key);
  std::vector<std::vector<double>> get_points(const std::string& key,
                                              std::vector<std::vector<double>> fallback);
  std::vector<std::string> get_strings(const std::string& key,
                                       std::vector<std::string> fallback);
  std::vector<double> get_numbers(const std::string& key, std::vector<double> fallback);
  // Sub-tables and arrays of tables.  Missing sub-tables come back empty, so
  // optional blocks read their defaults through the same code path.
  ConfigView sub_table(const std::string& key);
  bool has_table(const std::string& key) const;
  std::vector<ConfigView> table_array(const std::string& key);

  // Throws ConfigError listing every key never read through this view.
  void finish();

  const std::string& path() const { return path_; }

 private:
  const ConfigValue* find(const std::string& key);
  std::string where(const std::string& key) const;

  const ConfigMap* map_;
  std::string path_;
  std::vector<std::string> seen_;
  static const ConfigMap kEmpty;
};

// Parse from a file or from text (origin names the source in errors).
ConfigValue parse_config_file(const std::string& path);
ConfigValue parse_config_text(const std::string& text, const std::string& origin);

}  // namespace finhol
