#include "config.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "qarspec/csv.hpp"
#include "qarspec/error.hpp"

namespace qarspec::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

const std::string& RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ParameterError("missing config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const auto v = parse_real(text(key));
  if (!v) throw ParameterError("config key '" + key + "' expects a number, got '" + text(key) + "'");
  return *v;
}

long RunConfig::integer(const std::string& key) const {
  const std::string& s = text(key);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParameterError("config key '" + key + "' expects an integer, got '" + s + "'");
  }
  return value;
}

std::uint64_t RunConfig::unsigned_integer(const std::string& key) const {
  const std::string& s = text(key);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParameterError("config key '" + key + "' expects an unsigned integer, got '" + s + "'");
  }
  return value;
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& s = text(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParameterError("config key '" + key + "' expects true/false, got '" + s + "'");
}

std::vector<double> RunConfig::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(text(key))) {
    const auto v = parse_real(item);
    if (!v) throw ParameterError("config key '" + key + "' has a non-numeric entry '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<long> RunConfig::integer_list(const std::string& key) const {
  std::vector<long> out;
  for (const auto& item : split_list(text(key))) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ParameterError("config key '" + key + "' has a non-integer entry '" + item + "'");
    }
    out.push_back(value);
  }
  return out;
}

std::vector<std::string> RunConfig::text_list(const std::string& key) const {
  return split_list(text(key));
}

bool is_run_local(const std::string& key) {
  return key == "threads" || key == "out" || key == "config";
}

void RunConfig::write_embedded(std::ostream& out, const std::string& command) const {
  out << "#% command = " << command << '\n';
  for (const auto& [key, value] : values_) {
    if (!is_run_local(key)) out << "#% " << key << " = " << value << '\n';
  }
}

std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& origin) {
  std::vector<std::pair<std::string, int>> plain;
  std::vector<std::pair<std::string, int>> embedded;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.rfind("#%", 0) == 0) {
      embedded.emplace_back(t.substr(2), number);
    } else if (!t.empty() && t[0] != '#') {
      plain.emplace_back(t, number);
    }
  }
  const auto& use = embedded.empty() ? plain : embedded;
  std::map<std::string, std::string> values;
  for (const auto& [entry, at] : use) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(origin + ":" + std::to_string(at) + ": expected 'key = value'");
    }
    const std::string key = trim(entry.substr(0, eq));
    if (key.empty()) throw ParameterError(origin + ":" + std::to_string(at) + ": empty key");
    values[key] = trim(entry.substr(eq + 1));
  }
  return values;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config file: " + path);
  return parse_config_text(in, path);
}

}  // namespace qarspec::cli
