#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace qarspec::cli {

/// A config key with its default and help text.
struct OptionSpec {
  std::string key;
  std::string default_value;
  std::string help;
};

/**
 * Flat key = value configuration. Resolution order: built-in defaults, then
 * a config file, then command-line flags.
 */
class RunConfig {
 public:
  RunConfig() = default;
  explicit RunConfig(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] const std::string& text(const std::string& key) const;
  [[nodiscard]] double real(const std::string& key) const;
  [[nodiscard]] long integer(const std::string& key) const;
  [[nodiscard]] std::uint64_t unsigned_integer(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] std::vector<double> real_list(const std::string& key) const;
  [[nodiscard]] std::vector<long> integer_list(const std::string& key) const;
  [[nodiscard]] std::vector<std::string> text_list(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  /// "#% key = value" lines for every key except run-local ones.
  void write_embedded(std::ostream& out, const std::string& command) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Keys that never enter embedded config: they cannot change results.
bool is_run_local(const std::string& key);

/**
 * Reads key = value lines. If the file carries embedded "#% key = value"
 * lines (any output of this tool), only those are used; otherwise every
 * non-blank line not starting with '#' must be a key = value pair.
 */
std::map<std::string, std::string> read_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& origin);

}  // namespace qarspec::cli
