#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "klda/error.hpp"

namespace klda::cli {

// Flat key/value run configuration: defaults, overlaid by an optional
// config file (key = value lines, # comments), overlaid by --set pairs.
// Unknown keys are rejected so typos surface as config errors.
class Config {
 public:
  static const std::map<std::string, std::string>& defaults();

  static Config resolve(const std::string& config_path,
                        const std::vector<std::string>& overrides);

  const std::string& raw(const std::string& key) const;
  std::string get_string(const std::string& key) const { return raw(key); }
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;     // comma
  std::vector<double> get_double_list(const std::string& key) const;

  const std::map<std::string, std::string>& table() const { return kv_; }

  // FNV-1a over the canonical sorted "key=value\n" rendering.
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace klda::cli
