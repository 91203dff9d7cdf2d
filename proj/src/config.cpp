#include "finhol/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "finhol/errors.hpp"

namespace finhol {

ConfigValue ConfigValue::make_string(std::string s) {
  ConfigValue v;
  v.kind_ = Kind::string;
  v.str_ = std::move(s);
  v.table_.reset();
  return v;
}

ConfigValue ConfigValue::make_number(double d) {
  ConfigValue v;
  v.kind_ = Kind::number;
  v.num_ = d;
  v.table_.reset();
  return v;
}

ConfigValue ConfigValue::make_bool(bool b) {
  ConfigValue v;
  v.kind_ = Kind::boolean;
  v.bool_ = b;
  v.table_.reset();
  return v;
}

ConfigValue ConfigValue::make_array(ConfigArray a) {
  ConfigValue v;
  v.kind_ = Kind::array;
  v.array_ = std::make_shared<ConfigArray>(std::move(a));
  v.table_.reset();
  return v;
}

ConfigValue ConfigValue::make_table() { return ConfigValue(); }

namespace {

const char* kind_name(ConfigValue::Kind k) {
  switch (k) {
    case ConfigValue::Kind::string: return "a string";
    case ConfigValue::Kind::number: return "a number";
    case ConfigValue::Kind::boolean: return "a boolean";
    case ConfigValue::Kind::array: return "an array";
    case ConfigValue::Kind::table: return "a table";
  }
  return "?";
}

[[noreturn]] void kind_error(const std::string& where, ConfigValue::Kind want,
                             ConfigValue::Kind got) {
  throw ConfigError("config: " + where + " must be " + std::string(kind_name(want)) +
                    ", found " + kind_name(got));
}

}  // namespace

const std::string& ConfigValue::as_string(const std::string& where) const {
  if (kind_ != Kind::string) kind_error(where, Kind::string, kind_);
  return str_;
}

double ConfigValue::as_number(const std::string& where) const {
  if (kind_ != Kind::number) kind_error(where, Kind::number, kind_);
  return num_;
}

bool ConfigValue::as_bool(const std::string& where) const {
  if (kind_ != Kind::boolean) kind_error(where, Kind::boolean, kind_);
  return bool_;
}

const ConfigArray& ConfigValue::as_array(const std::string& where) const {
  if (kind_ != Kind::array) kind_error(where, Kind::array, kind_);
  return *array_;
}

ConfigMap& ConfigValue::as_table(const std::string& where) {
  if (kind_ != Kind::table) kind_error(where, Kind::table, kind_);
  return *table_;
}

const ConfigMap& ConfigValue::as_table(const std::string& where) const {
  if (kind_ != Kind::table) kind_error(where, Kind::table, kind_);
  return *table_;
}

// ------------------------------------------------------------------ parser

namespace {

struct Parser {
  const std::string& text;
  const std::string& origin;
  std::size_t pos = 0;
  int line = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << origin << ":" << line << ": " << msg;
    throw ConfigError(os.str());
  }

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  char take() {
    const char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }

  // Whitespace and comments; newlines only when `newlines` is set.
  void skip(bool newlines) {
    while (!done()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos;
      } else if (c == '#') {
        while (!done() && peek() != '\n') ++pos;
      } else if (c == '\n' && newlines) {
        take();
      } else {
        break;
      }
    }
  }

  void expect_line_end() {
    skip(false);
    if (done()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    take();
  }

  static bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string bare_key() {
    std::string k;
    while (!done() && is_key_char(peek())) k.push_back(take());
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts;
    parts.push_back(bare_key());
    while (!done() && peek() == '.') {
      take();
      parts.push_back(bare_key());
    }
    return parts;
  }

  std::string quoted_string() {
    take();  // opening quote
    std::string s;
    while (true) {
      if (done() || peek() == '\n') fail("unterminated string");
      char c = take();
      if (c == '"') break;
      if (c == '\\') {
        if (done()) fail("unterminated escape");
        const char e = take();
        switch (e) {
          case '"': s.push_back('"'); break;
          case '\\': s.push_back('\\'); break;
          case 'n': s.push_back('\n'); break;
          case 't': s.push_back('\t'); break;
          case 'r': s.push_back('\r'); break;
          default: fail(std::string("unknown escape \\") + e);
        }
      } else {
        s.push_back(c);
      }
    }
    return s;
  }

  ConfigValue number() {
    std::string tok;
    while (!done()) {
      const char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
          c == '.' || c == 'e' || c == 'E' || c == '_') {
        if (c != '_') tok.push_back(c);
        ++pos;
      } else {
        break;
      }
    }
    if (tok.empty()) fail("expected a value");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(v))
      fail("malformed number '" + tok + "'");
    return ConfigValue::make_number(v);
  }

  ConfigValue value() {
    skip(false);
    if (done()) fail("expected a value");
    const char c = peek();
    if (c == '"') return ConfigValue::make_string(quoted_string());
    if (c == '[') {
      take();
      ConfigArray items;
      while (true) {
        skip(true);  // arrays may span lines
        if (done()) fail("unterminated array");
        if (peek() == ']') {
          take();
          break;
        }
        items.push_back(value());
        skip(true);
        if (done()) fail("unterminated array");
        if (peek() == ',') {
          take();
        } else if (peek() != ']') {
          fail("expected ',' or ']' in array");
        }
      }
      return ConfigValue::make_array(std::move(items));
    }
    if (text.compare(pos, 4, "true") == 0 && (pos + 4 == text.size() || !is_key_char(text[pos + 4]))) {
      pos += 4;
      return ConfigValue::make_bool(true);
    }
    if (text.compare(pos, 5, "false") == 0 && (pos + 5 == text.size() || !is_key_char(text[pos + 5]))) {
      pos += 5;
      return ConfigValue::make_bool(false);
    }
    return number();
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) s.push_back('.');
      s += parts[i];
    }
    return s;
  }

  // Walk to (and create) the table the dotted path names.  For headers the
  // final segment is a table or, with as_element, a fresh element appended to
  // an array of tables.
  ConfigMap* descend(ConfigValue& root, const std::vector<std::string>& parts, bool as_element) {
    ConfigMap* cur = &root.as_table("config root");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      ConfigValue& slot = (*cur)[parts[i]];
      if (slot.is_array()) {
        // [a.b] after [[a]] continues inside the latest element.
        ConfigArray& arr = const_cast<ConfigArray&>(slot.as_array(join(parts)));
        if (arr.empty() || !arr.back().is_table()) fail("'" + parts[i] + "' is not a table");
        cur = &arr.back().as_table(join(parts));
      } else if (slot.is_table()) {
        cur = &slot.as_table(join(parts));
      } else {
        fail("'" + parts[i] + "' already holds a value, not a table");
      }
    }
    ConfigValue& slot = (*cur)[parts.back()];
    if (as_element) {
      if (slot.is_table() && slot.as_table("").empty()) slot = ConfigValue::make_array({});
      if (!slot.is_array()) fail("'" + join(parts) + "' already holds a non-array value");
      ConfigArray& arr = const_cast<ConfigArray&>(slot.as_array(join(parts)));
      arr.push_back(ConfigValue::make_table());
      return &arr.back().as_table(join(parts));
    }
    if (!slot.is_table()) fail("'" + join(parts) + "' already holds a value, not a table");
    return &slot.as_table(join(parts));
  }

  ConfigValue parse() {
    ConfigValue root = ConfigValue::make_table();
    ConfigMap* current = &root.as_table("config root");
    while (true) {
      skip(true);
      if (done()) break;
      if (peek() == '[') {
        take();
        const bool as_element = !done() && peek() == '[';
        if (as_element) take();
        skip(false);
        const std::vector<std::string> parts = dotted_key();
        skip(false);
        if (done() || take() != ']') fail("expected ']' after table name");
        if (as_element && (done() || take() != ']')) fail("expected ']]' after table name");
        current = descend(root, parts, as_element);
        expect_line_end();
      } else {
        const std::string key = bare_key();
        skip(false);
        if (done() || take() != '=') fail("expected '=' after key '" + key + "'");
        ConfigValue v = value();
        if (current->count(key)) fail("duplicate key '" + key + "'");
        (*current)[key] = std::move(v);
        expect_line_end();
      }
    }
    return root;
  }
};

}  // namespace

ConfigValue parse_config_text(const std::string& text, const std::string& origin) {
  Parser p{text, origin};
  return p.parse();
}

ConfigValue parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str(), path);
}

// -------------------------------------------------------------- ConfigView

const ConfigMap ConfigView::kEmpty;

ConfigView::ConfigView(const ConfigMap& map, std::string path)
    : map_(&map), path_(std::move(path)) {}

std::string ConfigView::where(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

const ConfigValue* ConfigView::find(const std::string& key) {
  if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) seen_.push_back(key);
  const auto it = map_->find(key);
  return it == map_->end() ? nullptr : &it->second;
}

bool ConfigView::has(const std::string& key) const { return map_->count(key) > 0; }

std::string ConfigView::get_string(const std::string& key, const std::string& fallback) {
  const ConfigValue* v = find(key);
  return v ? v->as_string(where(key)) : fallback;
}

std::string ConfigView::require_string(const std::string& key) {
  const ConfigValue* v = find(key);
  if (!v) throw ConfigError("config: missing required key '" + where(key) + "'");
  return v->as_string(where(key));
}

double ConfigView::get_number(const std::string& key, double fallback) {
  const ConfigValue* v = find(key);
  return v ? v->as_number(where(key)) : fallback;
}

double ConfigView::require_number(const std::string& key) {
  const ConfigValue* v = find(key);
  if (!v) throw ConfigError("config: missing required key '" + where(key) + "'");
  return v->as_number(where(key));
}

long ConfigView::get_int(const std::string& key, long fallback) {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  const double d = v->as_number(where(key));
  const long n = static_cast<long>(d);
  if (static_cast<double>(n) != d)
    throw ConfigError("config: " + where(key) + " must be an integer");
  return n;
}

std::uint64_t ConfigView::get_seed(const std::string& key, std::uint64_t fallback) {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  const double d = v->as_number(where(key));
  if (d < 0 || d != std::floor(d) || d > 9007199254740992.0)
    throw ConfigError("config: " + where(key) + " must be a nonnegative integer below 2^53");
  return static_cast<std::uint64_t>(d);
}

bool ConfigView::get_bool(const std::string& key, bool fallback) {
  const ConfigValue* v = find(key);
  return v ? v->as_bool(where(key)) : fallback;
}

std::vector<double> ConfigView::get_vector(const std::string& key, std::vector<double> fallback) {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const ConfigValue& item : v->as_array(where(key)))
    out.push_back(item.as_number(where(key) + "[]"));
  return out;
}

std::vector<double> ConfigView::require_vector(const std::string& key) {
  if (!has(key)) throw ConfigError("config: missing required key '" + where(key) + "'");
  return get_vector(key, {});
}

std::vector<std::vector<double>> ConfigView::get_points(
    const std::string& key, std::vector<std::vector<double>> fallback) {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  std::vector<std::vector<double>> out;
  for (const ConfigValue& item : v->as_array(where(key))) {
    std::vector<double> p;
    for (const ConfigValue& c : item.as_array(where(key) + "[]"))
      p.push_back(c.as_number(where(key) + "[][]"));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> ConfigView::get_strings(const std::string& key,
                                                 std::vector<std::string> fallback) {
  const ConfigValue* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  for (const ConfigValue& item : v->as_array(where(key)))
    out.push_back(item.as_string(where(key) + "[]"));
  return out;
}

std::vector<double> ConfigView::get_numbers(const std::string& key, std::vector<double> fallback) {
  return get_vector(key, std::move(fallback));
}

ConfigView ConfigView::sub_table(const std::string& key) {
  const ConfigValue* v = find(key);
  if (!v) return ConfigView(kEmpty, where(key));
  return ConfigView(v->as_table(where(key)), where(key));
}

bool ConfigView::has_table(const std::string& key) const {
  const auto it = map_->find(key);
  return it != map_->end() && it->second.is_table();
}

std::vector<ConfigView> ConfigView::table_array(const std::string& key) {
  const ConfigValue* v = find(key);
  if (!v) return {};
  std::vector<ConfigView> out;
  const ConfigArray& arr = v->as_array(where(key));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::ostringstream os;
    os << where(key) << "[" << i << "]";
    out.emplace_back(arr[i].as_table(os.str()), os.str());
  }
  return out;
}

void ConfigView::finish() {
  std::vector<std::string> stray;
  for (const auto& [key, value] : *map_)
    if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) stray.push_back(key);
  if (stray.empty()) return;
  std::ostringstream os;
  os << "config: unknown key" << (stray.size() > 1 ? "s" : "") << " in ["
     << (path_.empty() ? "top level" : path_) << "]:";
  for (const std::string& k : stray) os << " '" << k << "'";
  throw ConfigError(os.str());
}

}  // namespace finhol
