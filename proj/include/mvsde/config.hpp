#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mvsde/paths.hpp"

namespace mvsde {

/// Flat `key = value` text config. Lines starting with '#' (or trailing
/// `# ...`) are comments. Unknown keys are rejected by finish() so typos
/// fail loudly with the offending key named.
class KeyValueConfig {
public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def);
  double get_double(const std::string& key, double def);
  int get_int(const std::string& key, int def);
  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  bool get_bool(const std::string& key, bool def);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> def);

  /// Throws ConfigError naming any key that was never consumed.
  void finish() const;

  const std::map<std::string, std::string>& raw() const { return values_; }

private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

}  // namespace mvsde
