#pragma once

// RunConfig and its `key = value` text form. Lines starting with '#' and blank
// lines are ignored; unknown keys are an error. Doubles are written in
// shortest round-trip form, so write -> parse is lossless.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "srank/data.hpp"
#include "srank/error.hpp"
#include "srank/losses.hpp"
#include "srank/training.hpp"

namespace srank {

struct RunConfig {
  std::uint64_t seed = 1;

  // model
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t hidden = 64;
  std::size_t d_in = 32;

  // training
  LossKind loss = LossKind::kLinearPairwise;
  std::size_t chunk_size = 0;
  std::size_t refresh_interval = 10;
  double learning_rate = 0.05;
  std::size_t max_epochs = 30;
  double tolerance = 1e-4;
  std::size_t eval_every = 1;
  double holdout_fraction = 0.2;

  // paths
  std::string data_path = "dataset.srnk";
  std::string params_path = "params.srnk";
  std::string cache_path = "cache.srnk";

  // generator
  std::size_t groups = 22;
  std::size_t size_min = 3;
  std::size_t size_max = 26;
  std::size_t queries = 10000;
  double empty_rate = 0.1;
  double noise = 0.3;
  double far_margin = 1.0;
  double augment_rate = 0.0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  RankerConfig model() const { return {d_in, d_model, heads, hidden}; }

  TrainConfig train() const {
    TrainConfig t;
    t.model = model();
    t.loss = loss;
    t.chunk_size = chunk_size;
    t.refresh_interval = refresh_interval;
    t.learning_rate = learning_rate;
    t.max_epochs = max_epochs;
    t.tolerance = tolerance;
    t.seed = seed;
    t.eval_every = eval_every;
    return t;
  }

  SyntheticConfig synthetic() const {
    SyntheticConfig s;
    s.seed = seed;
    s.n_groups = groups;
    s.size_min = size_min;
    s.size_max = size_max;
    s.d_in = d_in;
    s.n_queries = queries;
    s.empty_rate = empty_rate;
    s.noise = noise;
    s.far_margin = far_margin;
    return s;
  }

  void validate() const {
    model().validate();
    train().validate();
    synthetic().validate();
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout_fraction must be in [0, 1)");
    if (!(augment_rate >= 0.0)) throw ConfigError("augment_rate must be >= 0");
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, std::string_view text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + std::string(text) + "'");
  return v;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, std::string_view)> set;
};

template <class T>
Field number_field(T RunConfig::*member) {
  return {[member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          },
          [member](RunConfig& c, const std::string& key, std::string_view v) { c.*member = parse_number<T>(key, v); }};
}

inline Field string_field(std::string RunConfig::*member) {
  return {[member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string&, std::string_view v) { c.*member = std::string(v); }};
}

// Ordered as written by to_text.
inline const std::vector<std::pair<std::string, Field>>& config_fields() {
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"seed", number_field(&RunConfig::seed)},
      {"d_model", number_field(&RunConfig::d_model)},
      {"heads", number_field(&RunConfig::heads)},
      {"hidden", number_field(&RunConfig::hidden)},
      {"d_in", number_field(&RunConfig::d_in)},
      {"loss",
       {[](const RunConfig& c) { return to_string(c.loss); },
        [](RunConfig& c, const std::string&, std::string_view v) { c.loss = parse_loss_kind(std::string(v)); }}},
      {"chunk_size", number_field(&RunConfig::chunk_size)},
      {"refresh_interval", number_field(&RunConfig::refresh_interval)},
      {"learning_rate", number_field(&RunConfig::learning_rate)},
      {"max_epochs", number_field(&RunConfig::max_epochs)},
      {"tolerance", number_field(&RunConfig::tolerance)},
      {"eval_every", number_field(&RunConfig::eval_every)},
      {"holdout_fraction", number_field(&RunConfig::holdout_fraction)},
      {"data_path", string_field(&RunConfig::data_path)},
      {"params_path", string_field(&RunConfig::params_path)},
      {"cache_path", string_field(&RunConfig::cache_path)},
      {"groups", number_field(&RunConfig::groups)},
      {"size_min", number_field(&RunConfig::size_min)},
      {"size_max", number_field(&RunConfig::size_max)},
      {"queries", number_field(&RunConfig::queries)},
      {"empty_rate", number_field(&RunConfig::empty_rate)},
      {"noise", number_field(&RunConfig::noise)},
      {"far_margin", number_field(&RunConfig::far_margin)},
      {"augment_rate", number_field(&RunConfig::augment_rate)},
  };
  return fields;
}

}  // namespace detail

inline std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [key, field] : detail::config_fields()) out += key + " = " + field.get(c) + "\n";
  return out;
}

/// Applies `key = value` lines on top of `base`.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::map<std::string, const detail::Field*> by_key;
  for (const auto& [key, field] : detail::config_fields()) by_key.emplace(key, &field);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(detail::trim(body.substr(0, eq)));
    const auto value = detail::trim(body.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second->set(base, key, value);
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace srank
