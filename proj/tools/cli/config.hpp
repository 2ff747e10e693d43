// Copyright 2026 The otbayes Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef OTBAYES_CLI_CONFIG_HPP
#define OTBAYES_CLI_CONFIG_HPP

// Flat key-value configuration.
//
//   # comment
//   key = value
//
// One setting per line; blank lines and lines starting with '#' are skipped;
// whitespace around keys and values is trimmed. Unknown keys are errors.
// Booleans accept true/false/1/0/yes/no.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <otbayes/common.hpp>
#include <otbayes/icnn_train.hpp>

namespace otbayes::cli {

struct RunConfig {
  std::string command;
  std::string model;             // empty: command default
  Eigen::Index particles = 0;    // 0: command default
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
  bool plot = true;

  // prop1-check
  int cases = 20;
  bool degenerate_case = false;

  // gauss-enkf
  double observation = 1.0;

  // bimodal-icnn
  TrainConfig train;
  Eigen::Index units = 64;
  Eigen::Index eval_samples = 20000;

  // fpf
  double dt = 1e-3;
  double horizon = 1.0;
  double sigma_w = 1.0;
  std::string observation_function = "linear";
  Eigen::Index expansion_samples = 100000;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw Error("config: bad value '" + value + "' for " + key);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("config: bad boolean '" + value + "' for " + key);
}

}  // namespace detail

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "model") {
    cfg.model = value;
  } else if (key == "particles") {
    cfg.particles = parse_number<Eigen::Index>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "plot") {
    cfg.plot = parse_bool(key, value);
  } else if (key == "cases") {
    cfg.cases = parse_number<int>(key, value);
  } else if (key == "degenerate_case") {
    cfg.degenerate_case = parse_bool(key, value);
  } else if (key == "observation") {
    cfg.observation = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_number<Eigen::Index>(key, value);
  } else if (key == "lr_f") {
    cfg.train.lr_f = parse_number<double>(key, value);
  } else if (key == "lr_g") {
    cfg.train.lr_g = parse_number<double>(key, value);
  } else if (key == "beta1") {
    cfg.train.beta1 = parse_number<double>(key, value);
  } else if (key == "beta2") {
    cfg.train.beta2 = parse_number<double>(key, value);
  } else if (key == "epsilon") {
    cfg.train.epsilon = parse_number<double>(key, value);
  } else if (key == "inner_steps") {
    cfg.train.inner_steps = parse_number<int>(key, value);
  } else if (key == "outer_steps") {
    cfg.train.outer_steps = parse_number<int>(key, value);
  } else if (key == "final_lr_fraction") {
    cfg.train.final_lr_fraction = parse_number<double>(key, value);
  } else if (key == "projection") {
    if (value == "clamp") {
      cfg.train.projection = ProjectionMode::kClamp;
    } else if (value == "absolute") {
      cfg.train.projection = ProjectionMode::kAbsolute;
    } else {
      throw Error("config: projection must be clamp or absolute");
    }
  } else if (key == "units") {
    cfg.units = parse_number<Eigen::Index>(key, value);
  } else if (key == "eval_samples") {
    cfg.eval_samples = parse_number<Eigen::Index>(key, value);
  } else if (key == "dt") {
    cfg.dt = parse_number<double>(key, value);
  } else if (key == "horizon") {
    cfg.horizon = parse_number<double>(key, value);
  } else if (key == "sigma_w") {
    cfg.sigma_w = parse_number<double>(key, value);
  } else if (key == "observation_function") {
    if (value != "linear" && value != "constant") throw Error("config: observation_function must be linear or constant");
    cfg.observation_function = value;
  } else if (key == "expansion_samples") {
    cfg.expansion_samples = parse_number<Eigen::Index>(key, value);
  } else {
    throw Error("config: unknown key '" + key + "'");
  }
}

inline void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(number) + ": empty key");
    apply_setting(cfg, key, value);
  }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_config_text(cfg, buffer.str());
}

}  // namespace otbayes::cli

#endif  // OTBAYES_CLI_CONFIG_HPP
