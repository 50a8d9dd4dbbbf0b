#pragma once

// Typed, path-aware access to the JSON experiment config. Every lookup is
// recorded so unknown keys can be rejected.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qml/geometry.hpp"
#include "qml/symbol.hpp"

namespace qml::cli {

using json = nlohmann::json;

/// Schema or semantic problem in the config; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path);

class Obj {
 public:
  Obj(const json& j, std::string path);

  bool has(const std::string& key) const;
  double number(const std::string& key, std::optional<double> def = std::nullopt);
  long long integer(const std::string& key, std::optional<long long> def = std::nullopt);
  bool boolean(const std::string& key, std::optional<bool> def = std::nullopt);
  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt);
  std::vector<double> numbers(const std::string& key);
  /// Numbers, or the string "inf".
  std::vector<double> exponents_list(const std::string& key);
  /// A list of positive numbers, or {"powers_of_two": [a, b]} for 2^a..2^b.
  std::vector<double> ladder(const std::string& key);
  Obj child(const std::string& key);
  std::optional<Obj> optional_child(const std::string& key);
  const json& raw(const std::string& key);
  std::string where(const std::string& key) const { return path_ + "." + key; }

  /// Throws ConfigError naming the first key that was never read.
  void finish() const;

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

/// Top-level fields shared by the subcommands.
struct Common {
  int dimension = 2;
  std::string symbol_text;
  std::optional<SymbolFn> symbol;
  std::string hypersurface_text;
  std::optional<SymbolFn> hypersurface;
  std::optional<PhasePoint> base;
  std::uint64_t seed = 0;
};

/// Reads dimension, symbol, hypersurface, base_point and seed. The CLI seed,
/// when given, overrides the config seed.
Common read_common(Obj& root, std::optional<std::uint64_t> cli_seed);

Region read_region(Obj& root, const Common& c);

}  // namespace qml::cli
