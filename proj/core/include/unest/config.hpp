#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace unest {

// Ordered key=value store backing config files and run manifests. Insertion
// order is preserved so writes are deterministic.
class ConfigMap {
 public:
  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, long long value);
  void set_u64(const std::string& key, std::uint64_t value);
  void set_double(const std::string& key, double value);  // round-trip exact

  bool contains(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws when absent
  std::string get_or(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// key=value lines; blank lines and '#' comments are skipped.
ConfigMap load_config_file(const std::string& path);
void save_config_file(const std::string& path, const ConfigMap& config);

}  // namespace unest
