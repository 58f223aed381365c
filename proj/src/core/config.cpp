#include "config.hpp"

#include "common.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace uqxai {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), "config line " + std::to_string(lineno) + " has an empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

std::string KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  require(it != values_.end(), "missing config key: " + key);
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  require(end && *end == '\0' && end != v.c_str(), "config key " + key + " is not a number: " + v);
  return d;
}

double KeyValueConfig::get_double_or(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}

long long KeyValueConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  require(end && *end == '\0' && end != v.c_str(), "config key " + key + " is not an integer: " + v);
  return i;
}

long long KeyValueConfig::get_int_or(const std::string& key, long long def) const {
  return has(key) ? get_int(key) : def;
}

bool KeyValueConfig::get_bool_or(const std::string& key, bool def) const {
  if (!has(key)) return def;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail("config key " + key + " is not a bool: " + v);
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) {
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    require(end && *end == '\0', "config key " + key + " has a non-numeric entry: " + s);
    out.push_back(d);
  }
  return out;
}

std::string KeyValueConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace uqxai
