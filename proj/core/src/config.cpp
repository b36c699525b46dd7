#include "unest/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace unest {

void ConfigMap::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void ConfigMap::set_int(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

void ConfigMap::set_u64(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void ConfigMap::set_double(const std::string& key, double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  set(key, buf);
}

bool ConfigMap::contains(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& ConfigMap::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw std::out_of_range("missing config key '" + key + "'");
}

std::string ConfigMap::get_or(const std::string& key,
                              const std::string& fallback) const {
  return contains(key) ? get(key) : fallback;
}

long long ConfigMap::get_int(const std::string& key) const {
  return std::stoll(get(key));
}

std::uint64_t ConfigMap::get_u64(const std::string& key) const {
  return std::stoull(get(key));
}

double ConfigMap::get_double(const std::string& key) const {
  return std::stod(get(key));
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  ConfigMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const std::size_t eq = line.find('=', begin);
    if (eq == std::string::npos) {
      throw std::runtime_error("config " + path + ":" + std::to_string(line_no) +
                               ": expected key=value");
    }
    std::string key = line.substr(begin, eq - begin);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    while (!value.empty() && (value.back() == '\r' || value.back() == ' ' ||
                              value.back() == '\t')) {
      value.pop_back();
    }
    std::size_t vbegin = value.find_first_not_of(" \t");
    value = vbegin == std::string::npos ? "" : value.substr(vbegin);
    out.set(key, value);
  }
  return out;
}

void save_config_file(const std::string& path, const ConfigMap& config) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config " + path);
  for (const auto& [k, v] : config.entries()) {
    os << k << '=' << v << '\n';
  }
  if (!os) throw std::runtime_error("write failure on " + path);
}

}  // namespace unest
