#pragma once

#include <map>
#include <string>
#include <vector>

namespace uqxai {

// key = value files with '#' comments. Keys are case-sensitive; values keep
// internal whitespace. Used for dataset schemas and experiment configs.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key) const;                      // throws when missing
  std::string get_or(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double def) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long def) const;
  bool get_bool_or(const std::string& key, bool def) const;
  std::vector<std::string> get_list(const std::string& key) const;    // comma separated
  std::vector<double> get_double_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

  // canonical "key=value\n" dump, sorted; feeds the provenance hash
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace uqxai
