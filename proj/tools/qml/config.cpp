#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace qml::cli {

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

Obj::Obj(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
  if (!j.is_object()) throw ConfigError(path_ + " must be an object");
}

bool Obj::has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

const json& Obj::raw(const std::string& key) {
  used_.insert(key);
  if (!has(key)) throw ConfigError("missing required field " + where(key));
  return (*j_)[key];
}

double Obj::number(const std::string& key, std::optional<double> def) {
  used_.insert(key);
  if (!has(key)) {
    if (def) return *def;
    throw ConfigError("missing required field " + where(key));
  }
  const json& v = (*j_)[key];
  if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
  return v.get<double>();
}

long long Obj::integer(const std::string& key, std::optional<long long> def) {
  used_.insert(key);
  if (!has(key)) {
    if (def) return *def;
    throw ConfigError("missing required field " + where(key));
  }
  const json& v = (*j_)[key];
  if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
  return v.get<long long>();
}

bool Obj::boolean(const std::string& key, std::optional<bool> def) {
  used_.insert(key);
  if (!has(key)) {
    if (def) return *def;
    throw ConfigError("missing required field " + where(key));
  }
  const json& v = (*j_)[key];
  if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
  return v.get<bool>();
}

std::string Obj::string(const std::string& key, std::optional<std::string> def) {
  used_.insert(key);
  if (!has(key)) {
    if (def) return *def;
    throw ConfigError("missing required field " + where(key));
  }
  const json& v = (*j_)[key];
  if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
  return v.get<std::string>();
}

std::vector<double> Obj::numbers(const std::string& key) {
  const json& v = raw(key);
  if (!v.is_array()) throw ConfigError(where(key) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where(key) + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<double> Obj::exponents_list(const std::string& key) {
  const json& v = raw(key);
  const json arr = v.is_array() ? v : json::array({v});
  std::vector<double> out;
  for (const auto& e : arr) {
    if (e.is_number())
      out.push_back(e.get<double>());
    else if (e.is_string() && (e.get<std::string>() == "inf" || e.get<std::string>() == "infinity"))
      out.push_back(std::numeric_limits<double>::infinity());
    else
      throw ConfigError(where(key) + " entries must be numbers or \"inf\"");
  }
  if (out.empty()) throw ConfigError(where(key) + " must not be empty");
  return out;
}

std::vector<double> Obj::ladder(const std::string& key) {
  const json& v = raw(key);
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number() || !(e.get<double>() > 0.0)) throw ConfigError(where(key) + " entries must be positive numbers");
      out.push_back(e.get<double>());
    }
  } else if (v.is_object()) {
    Obj o(v, where(key));
    const auto r = o.numbers("powers_of_two");
    o.finish();
    if (r.size() != 2 || r[0] != std::floor(r[0]) || r[1] != std::floor(r[1]))
      throw ConfigError(where(key) + ".powers_of_two must be two integers [a, b]");
    const int a = static_cast<int>(r[0]), b = static_cast<int>(r[1]);
    const int step = b >= a ? 1 : -1;
    for (int e = a;; e += step) {
      out.push_back(std::ldexp(1.0, e));
      if (e == b) break;
    }
  } else {
    throw ConfigError(where(key) + " must be a list or {\"powers_of_two\": [a, b]}");
  }
  if (out.empty()) throw ConfigError(where(key) + " must not be empty");
  return out;
}

Obj Obj::child(const std::string& key) { return Obj(raw(key), where(key)); }

std::optional<Obj> Obj::optional_child(const std::string& key) {
  used_.insert(key);
  if (!has(key)) return std::nullopt;
  return Obj((*j_)[key], where(key));
}

void Obj::finish() const {
  for (auto it = j_->begin(); it != j_->end(); ++it)
    if (!used_.count(it.key())) throw ConfigError("unknown field " + path_ + "." + it.key());
}

namespace {

Eigen::VectorXd vec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<Interval> intervals(Obj& o, const std::string& key, int n) {
  const json& v = o.raw(key);
  auto one = [&](const json& e) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw ConfigError(o.where(key) + " intervals must be [lo, hi]");
    Interval iv{e[0].get<double>(), e[1].get<double>()};
    if (!(iv.hi >= iv.lo)) throw ConfigError(o.where(key) + " interval has hi < lo");
    return iv;
  };
  if (v.is_array() && v.size() == 2 && v[0].is_number()) return std::vector<Interval>(static_cast<std::size_t>(n), one(v));
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    throw ConfigError(o.where(key) + " must be one [lo, hi] or " + std::to_string(n) + " of them");
  std::vector<Interval> out;
  for (const auto& e : v) out.push_back(one(e));
  return out;
}

std::vector<int> samples(Obj& o, const std::string& key, int n, int def) {
  if (!o.has(key)) {
    o.integer(key, def);
    return std::vector<int>(static_cast<std::size_t>(n), def);
  }
  const json& v = o.raw(key);
  if (v.is_number_integer()) return std::vector<int>(static_cast<std::size_t>(n), v.get<int>());
  if (!v.is_array() || static_cast<int>(v.size()) != n) throw ConfigError(o.where(key) + " must be an integer or a list of n");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(o.where(key) + " must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

SymbolFn parse_field(const std::string& text, int n, const std::string& where) {
  try {
    return symbol_from_text(text, n);
  } catch (const qml::Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

Common read_common(Obj& root, std::optional<std::uint64_t> cli_seed) {
  Common c;
  const long long n = root.integer("dimension", 2);
  if (n < 2 || n > 16) throw ConfigError("dimension must be an integer in [2, 16]");
  c.dimension = static_cast<int>(n);
  if (root.has("symbol")) {
    c.symbol_text = root.string("symbol");
    c.symbol = parse_field(c.symbol_text, c.dimension, "symbol");
  } else {
    root.string("symbol", "");
  }
  if (root.has("hypersurface")) {
    c.hypersurface_text = root.string("hypersurface");
    c.hypersurface = parse_field(c.hypersurface_text, c.dimension, "hypersurface");
  } else {
    root.string("hypersurface", "");
  }
  if (auto bp = root.optional_child("base_point")) {
    const auto x = bp->numbers("x"), xi = bp->numbers("xi");
    bp->finish();
    if (static_cast<int>(x.size()) != c.dimension || static_cast<int>(xi.size()) != c.dimension)
      throw ConfigError("base_point.x and base_point.xi must have length dimension = " + std::to_string(c.dimension));
    c.base = PhasePoint(vec(x), vec(xi));
  }
  if (root.has("seed")) {
    const long long s = root.integer("seed");
    if (s < 0) throw ConfigError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else {
    root.integer("seed", 0);
  }
  if (cli_seed) c.seed = *cli_seed;
  return c;
}

Region read_region(Obj& root, const Common& c) {
  Obj o = root.child("region");
  Region r;
  const int n = c.dimension;
  r.x = intervals(o, "x", n);
  r.xi = intervals(o, "xi", n);
  const long long common = o.integer("samples", 5);
  if (common < 1) throw ConfigError("region.samples must be >= 1");
  r.x_samples = samples(o, "x_samples", n, static_cast<int>(common));
  r.xi_samples = samples(o, "xi_samples", n, static_cast<int>(common));
  const long long rs = o.integer("random_seeds", 0);
  if (rs < 0) throw ConfigError("region.random_seeds must be >= 0");
  r.random_seeds = static_cast<int>(rs);
  r.seed = c.seed;
  o.finish();
  try {
    r.validate();
  } catch (const qml::Error& e) {
    throw ConfigError(std::string("region: ") + e.what());
  }
  return r;
}

}  // namespace qml::cli
