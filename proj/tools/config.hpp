#pragma once

// Flat key=value run configuration. Values stay strings until a command reads
// them, so the resolved config can be echoed verbatim into the JSON summary.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hpin::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunConfig {
 public:
  /// Lines "key = value"; '#' starts a comment; blank lines ignored.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void merge(const RunConfig& other);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void erase(const std::string& key) { values_.erase(key); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key, double fallback) const;
  std::optional<double> real(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  /// Comma-separated reals.
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Every key a config file may set, with a one-line description.
const std::map<std::string, std::string>& config_schema();

}  // namespace hpin::cli
