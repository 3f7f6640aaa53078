#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seda/constellation.hpp"
#include "seda/dictator.hpp"
#include "seda/env.hpp"
#include "seda/learner.hpp"
#include "seda/schedule.hpp"

namespace seda {

/// 64-bit FNV-1a hash; used to fingerprint config snapshots.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  char digits[17] = {};
  for (int i = 15; i >= 0; --i) {
    digits[i] = "0123456789abcdef"[value & 0xf];
    value >>= 4;
  }
  return std::string(digits, 16);
}

/// Parsed key/value view of a plain-text config file. Lines are `key = value`
/// pairs grouped under `[section]` or nested `[section.subsection]` headers;
/// keys are addressed with their dotted path. `#` and `;` start comments.
/// Every key must be consumed by a typed getter; `finish()` rejects leftovers
/// so misspelled keys fail fast with the offending name.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text) {
    ConfigMap map;
    std::istringstream lines(text);
    std::string line;
    std::string section;
    int line_number = 0;
    while (std::getline(lines, line)) {
      ++line_number;
      const std::string stripped = strip_comment(line);
      const std::string trimmed = trim(stripped);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw std::invalid_argument("config line " +
                                      std::to_string(line_number) +
                                      ": unterminated section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty())
          throw std::invalid_argument("config line " +
                                      std::to_string(line_number) +
                                      ": empty section name");
        continue;
      }
      const auto equals = trimmed.find('=');
      if (equals == std::string::npos)
        throw std::invalid_argument("config line " +
                                    std::to_string(line_number) +
                                    ": expected key = value");
      const std::string key = trim(trimmed.substr(0, equals));
      const std::string value = trim(trimmed.substr(equals + 1));
      if (key.empty())
        throw std::invalid_argument("config line " +
                                    std::to_string(line_number) +
                                    ": empty key");
      const std::string full_key = section.empty() ? key : section + "." + key;
      if (!map.values_.emplace(full_key, value).second)
        throw std::invalid_argument("duplicate config key: " + full_key);
    }
    return map;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string take_string(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw std::invalid_argument("missing config key: " + key);
    consumed_.insert(key);
    return it->second;
  }

  std::string take_string(const std::string& key,
                          const std::string& fallback) {
    return has(key) ? take_string(key) : fallback;
  }

  long take_long(const std::string& key) {
    return parse_long(key, take_string(key));
  }
  long take_long(const std::string& key, long fallback) {
    return has(key) ? take_long(key) : fallback;
  }

  int take_int(const std::string& key) {
    const long value = take_long(key);
    if (value < std::numeric_limits<int>::min() ||
        value > std::numeric_limits<int>::max())
      throw std::invalid_argument("config key out of int range: " + key);
    return static_cast<int>(value);
  }
  int take_int(const std::string& key, int fallback) {
    return has(key) ? take_int(key) : fallback;
  }

  double take_double(const std::string& key) {
    return parse_double(key, take_string(key));
  }
  double take_double(const std::string& key, double fallback) {
    return has(key) ? take_double(key) : fallback;
  }

  bool take_bool(const std::string& key) {
    const std::string value = take_string(key);
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config key " + key +
                                " must be true or false");
  }
  bool take_bool(const std::string& key, bool fallback) {
    return has(key) ? take_bool(key) : fallback;
  }

  std::vector<long> take_long_list(const std::string& key) {
    std::vector<long> out;
    for (const std::string& item : split_list(take_string(key)))
      out.push_back(parse_long(key, item));
    return out;
  }

  std::vector<double> take_double_list(const std::string& key) {
    std::vector<double> out;
    for (const std::string& item : split_list(take_string(key)))
      out.push_back(parse_double(key, item));
    return out;
  }

  /// Throws if any parsed key was never consumed, naming the first offender.
  void finish() const {
    for (const auto& [key, value] : values_)
      if (consumed_.count(key) == 0)
        throw std::invalid_argument("unknown config key: " + key);
  }

 private:
  static std::string strip_comment(const std::string& line) {
    const auto pos = line.find_first_of("#;");
    return pos == std::string::npos ? line : line.substr(0, pos);
  }

  static std::string trim(const std::string& text) {
    const auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
  }

  static std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string current;
    std::istringstream stream(value);
    while (std::getline(stream, current, ',')) items.push_back(trim(current));
    return items;
  }

  static long parse_long(const std::string& key, const std::string& value) {
    long out = 0;
    const auto [ptr, ec] =
        std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
      throw std::invalid_argument("config key " + key +
                                  " is not an integer: " + value);
    return out;
  }

  static double parse_double(const std::string& key,
                             const std::string& value) {
    double out = 0.0;
    const auto [ptr, ec] =
        std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
      throw std::invalid_argument("config key " + key +
                                  " is not a number: " + value);
    return out;
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

/// Full description of one experiment: environment, algorithm, learner
/// hyperparameters, exploration schedule, and evaluation cadence. Batch size
/// and buffer capacity may be configured in episodes; they are converted to
/// transitions using the environment horizon while parsing.
struct ExperimentConfig {
  std::string raw_text;
  std::string environment;
  std::string algorithm;
  long total_steps = 0;
  long eval_interval = 500;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds;
  RedaConfig learner;
  ExplorationSchedule exploration;
  ConstellationConfig constellation;

  std::uint64_t config_hash() const { return fnv1a64(raw_text); }

  static ExperimentConfig from_text(const std::string& text) {
    ConfigMap map = ConfigMap::parse(text);
    ExperimentConfig config;
    config.raw_text = text;

    config.environment = map.take_string("environment");
    if (config.environment != "dictator" &&
        config.environment != "constellation")
      throw std::invalid_argument("unknown environment: " +
                                  config.environment);
    config.algorithm = map.take_string("algorithm");
    if (config.algorithm != "reda" && config.algorithm != "iql" &&
        config.algorithm != "greedy" && config.algorithm != "random")
      throw std::invalid_argument("unknown algorithm: " + config.algorithm);
    config.total_steps = map.take_long("total_steps");
    if (config.total_steps <= 0)
      throw std::invalid_argument("total_steps must be positive");
    config.eval_interval = map.take_long("eval_interval", 500);
    if (config.eval_interval <= 0)
      throw std::invalid_argument("eval_interval must be positive");
    config.eval_episodes = map.take_int("eval_episodes", 10);
    if (config.eval_episodes <= 0)
      throw std::invalid_argument("eval_episodes must be positive");
    if (map.has("seeds")) {
      for (long seed : map.take_long_list("seeds")) {
        if (seed < 0) throw std::invalid_argument("seeds must be >= 0");
        config.seeds.push_back(static_cast<std::uint64_t>(seed));
      }
      std::set<std::uint64_t> distinct(config.seeds.begin(),
                                       config.seeds.end());
      if (distinct.size() != config.seeds.size())
        throw std::invalid_argument("seeds must be distinct");
    }

    int horizon = DictatorSpec::horizon;
    if (config.environment == "constellation") {
      ConstellationConfig& c = config.constellation;
      c.geometry.n_planes = map.take_int("env.n_planes", c.geometry.n_planes);
      c.geometry.sats_per_plane =
          map.take_int("env.sats_per_plane", c.geometry.sats_per_plane);
      c.geometry.altitude_km =
          map.take_double("env.altitude_km", c.geometry.altitude_km);
      c.geometry.inclination_deg =
          map.take_double("env.inclination_deg", c.geometry.inclination_deg);
      c.geometry.dt_seconds =
          map.take_double("env.dt_seconds", c.geometry.dt_seconds);
      c.n_tasks = map.take_int("env.n_tasks", c.n_tasks);
      c.horizon = map.take_int("env.horizon", c.horizon);
      c.sigma_deg = map.take_double("env.sigma_deg", c.sigma_deg);
      c.theta_fov_deg = map.take_double("env.theta_fov_deg", c.theta_fov_deg);
      c.top_k_tasks = map.take_int("env.top_k_tasks", c.top_k_tasks);
      c.n_neighbors = map.take_int("env.n_neighbors", c.n_neighbors);
      c.switch_penalty =
          map.take_double("env.switch_penalty", c.switch_penalty);
      c.power_drain = map.take_double("env.power_drain", c.power_drain);
      c.power_charge = map.take_double("env.power_charge", c.power_charge);
      if (map.has("env.priority_pool"))
        c.priority_pool = map.take_double_list("env.priority_pool");
      c.task_seed = static_cast<std::uint64_t>(
          map.take_long("env.task_seed", static_cast<long>(c.task_seed)));
      c.apply_switch_penalty_at_start =
          map.take_bool("env.apply_switch_penalty_at_start",
                        c.apply_switch_penalty_at_start);
      c.validate();
      horizon = c.horizon;
    }

    RedaConfig& learner = config.learner;
    learner.gamma = map.take_double("learner.gamma", learner.gamma);
    learner.learning_rate =
        map.take_double("learner.learning_rate", learner.learning_rate);
    learner.tau = map.take_double("learner.tau", learner.tau);
    learner.train_every =
        map.take_int("learner.train_every", learner.train_every);
    learner.hard_update_every =
        map.take_int("learner.hard_update_every", learner.hard_update_every);
    const std::string units =
        map.take_string("learner.capacity_units", "transitions");
    long batch = map.take_long("learner.batch_size", learner.batch_size);
    long capacity = map.take_long("learner.buffer_capacity",
                                  static_cast<long>(learner.buffer_capacity));
    if (units == "episodes") {
      batch *= horizon;
      capacity *= horizon;
    } else if (units != "transitions") {
      throw std::invalid_argument(
          "learner.capacity_units must be episodes or transitions");
    }
    if (batch <= 0 || batch > std::numeric_limits<int>::max())
      throw std::invalid_argument("learner.batch_size out of range");
    learner.batch_size = static_cast<int>(batch);
    if (capacity <= 0)
      throw std::invalid_argument("learner.buffer_capacity out of range");
    learner.buffer_capacity = static_cast<std::size_t>(capacity);
    if (map.has("learner.hidden_sizes")) {
      learner.hidden_sizes.clear();
      for (long h : map.take_long_list("learner.hidden_sizes"))
        learner.hidden_sizes.push_back(static_cast<int>(h));
    }
    learner.noise_scale =
        map.take_double("learner.noise_scale", learner.noise_scale);
    learner.noise_as_std =
        map.take_bool("learner.noise_as_std", learner.noise_as_std);
    learner.validate();

    ExplorationSchedule& exploration = config.exploration;
    exploration.epsilon_start =
        map.take_double("exploration.epsilon_start", 1.0);
    exploration.epsilon_end = map.take_double("exploration.epsilon_end", 0.0);
    exploration.decay_steps =
        map.take_long("exploration.decay_steps", config.total_steps / 2);
    exploration.validate();

    map.finish();
    return config;
  }

  static ExperimentConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
  }
};

/// Instantiates the environment named by the config.
inline std::unique_ptr<SapEnv> make_environment(
    const ExperimentConfig& config) {
  if (config.environment == "dictator")
    return std::make_unique<DictatorEnv>();
  return std::make_unique<ConstellationEnv>(config.constellation);
}

}  // namespace seda
