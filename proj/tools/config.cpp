#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hpin::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw UsageError("config key '" + key + "': not a number: '" + v + "'");
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (config_schema().count(key) == 0) {
      throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::merge(const RunConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string RunConfig::str(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::optional<double> RunConfig::real(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return parse_real(key, it->second);
}

double RunConfig::real(const std::string& key, double fallback) const {
  return real(key).value_or(fallback);
}

long long RunConfig::integer(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    // Accept integral reals such as 1e5.
    const double d = parse_real(key, v);
    if (d != static_cast<double>(static_cast<long long>(d))) {
      throw UsageError("config key '" + key + "': not an integer: '" + v + "'");
    }
    return static_cast<long long>(d);
  }
  return x;
}

std::uint64_t RunConfig::u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError("config key '" + key + "': not an unsigned integer: '" + v + "'");
  }
  return x;
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<double> RunConfig::reals(const std::string& key,
                                     const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(parse_real(key, t));
  }
  return out;
}

const std::map<std::string, std::string>& config_schema() {
  static const std::map<std::string, std::string> schema = {
      {"B", "growth parameter, B > 2"},
      {"beta", "disorder strength, >= 0"},
      {"h", "pinning parameter (exclusive with eps)"},
      {"eps", "e^h - (B-1) (exclusive with h)"},
      {"disorder", "gaussian | rademacher | finite:v@p,..."},
      {"M", "pool size"},
      {"N", "level (fe, irrelevance) or orbit length (anneal)"},
      {"replicas", "independent pools, >= 2"},
      {"seed", "64-bit seed"},
      {"threads", "worker threads; 0 = all cores; never changes results"},
      {"n_max", "deepest level scanned by certify"},
      {"gamma_grid", "comma-separated moment orders in (log2/logB, 1)"},
      {"confidence", "two-sided confidence for statistical certificates"},
      {"exact_level_cap", "deepest exact-oracle level tried by certify"},
      {"tol_h", "bracket tolerance in h"},
      {"rel_tol", "bracket tolerance relative to the shift h - h_c(0)"},
      {"budget", "pool-steps allowed per bracket"},
      {"common_random_numbers", "reuse the seed at every probe (true/false)"},
      {"betas", "comma-separated betas (scaling, marginal)"},
      {"offsets", "comma-separated h - h_c(0) values (irrelevance)"},
      {"min_ratio", "irrelevance gate on the 99% ratio lower bound"},
      {"slope_tol", "scaling gate, relative distance to the exponent"},
      {"expect", "certify gate: expected verdict"},
      {"delta_min", "anneal fit: smallest h - h_c"},
      {"delta_max", "anneal fit: largest h - h_c"},
      {"points", "anneal fit: number of deltas"},
      {"levels", "exact-check: deepest level"},
      {"gammas", "exact-check: moment orders"},
      {"tail_tol", "exact-check: tolerance of the tail probability"},
      {"eta", "tilt: eta"},
      {"n0", "tilt: level, -1 = automatic"},
      {"delta", "tilt: delta, -1 = default"},
      {"a", "tilt: likelihood-ratio threshold, -1 = 2 delta"},
      {"x", "tilt: concentration window R <= 1 + x"},
      {"samples", "tilt: sampled trees"},
      {"bins", "fe: histogram bins for replica 0 at level N (0 = none)"},
  };
  return schema;
}

}  // namespace hpin::cli
