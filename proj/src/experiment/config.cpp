// Copyright 2026 The qmarl Authors
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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "qmarl/experiment.hpp"

namespace qmarl::experiment {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("setting '" + key + "': '" + value + "' is not a number");
  }
}

std::size_t to_count(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("setting '" + key + "': '" + value + "' is not a non-negative integer");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  const auto v = lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("setting '" + key + "': '" + value + "' is not a boolean");
}

std::string number(double v) { return metrics::format_number(v); }

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

EnvKind parse_env(std::string_view name) {
  const auto key = lower(std::string(name));
  if (key == "harvest") return EnvKind::Harvest;
  switch (envs::parse_dilemma(key)) {
    case envs::DilemmaKind::PrisonersDilemma:
      return EnvKind::Ipd;
    case envs::DilemmaKind::StagHunt:
      return EnvKind::StagHunt;
    case envs::DilemmaKind::Chicken:
      return EnvKind::Chicken;
  }
  throw ConfigError("unknown env");
}

std::string_view env_name(EnvKind env) {
  switch (env) {
    case EnvKind::Ipd:
      return "ipd";
    case EnvKind::StagHunt:
      return "stag_hunt";
    case EnvKind::Chicken:
      return "chicken";
    case EnvKind::Harvest:
      return "harvest";
  }
  return "unknown";
}

bool is_matrix_game(EnvKind env) { return env != EnvKind::Harvest; }

envs::DilemmaKind dilemma_of(EnvKind env) {
  switch (env) {
    case EnvKind::StagHunt:
      return envs::DilemmaKind::StagHunt;
    case EnvKind::Chicken:
      return envs::DilemmaKind::Chicken;
    case EnvKind::Ipd:
      return envs::DilemmaKind::PrisonersDilemma;
    case EnvKind::Harvest:
      break;
  }
  throw ConfigError("harvest is not a matrix game");
}

agent::EpsilonSchedule ExperimentConfig::epsilon_schedule() const {
  return {epsilon_kind, epsilon_initial, epsilon_final,
          epsilon_horizon.value_or(static_cast<double>(episodes))};
}

envs::PayoffMatrix ExperimentConfig::payoff_matrix() const {
  const auto kind = dilemma_of(env);
  return payoff.empty() ? envs::PayoffMatrix::defaults(kind) : envs::PayoffMatrix::parse(kind, payoff);
}

ExperimentConfig defaults_for(EnvKind env) {
  ExperimentConfig c;
  c.env = env;
  if (env == EnvKind::Harvest) {
    c.protocol = qnet::ProtocolKind::HarvestIql;
    c.episodes = 1000;
    c.steps_per_episode = 250;
    c.seeds = {0, 1, 2};
    c.n_layers = 1;
    c.lr = 0.01;
    c.gamma = 0.99;
    c.buffer_capacity = 2500;
    c.batch_size = 100;
    c.n_minibatches = 1;
    c.epsilon_kind = agent::EpsilonSchedule::Kind::Exponential;
    c.epsilon_initial = 1.0;
    c.epsilon_final = 0.02;
  } else {
    for (std::uint64_t s = 0; s < 15; ++s) c.seeds.push_back(s);
  }
  return c;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash));
        const auto hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("seed range '" + part + "' is reversed");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("cannot parse seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = lower(trim(raw_key));
  const std::string value = trim(raw_value);
  if (key.rfind("grid.", 0) == 0) {
    const auto axis = key.substr(5);
    if (axis.empty() || axis.rfind("grid.", 0) == 0 || axis == "seeds" || axis == "out_dir") {
      throw ConfigError("invalid sweep axis '" + axis + "'");
    }
    auto values = split(value, ',');
    if (values.empty()) throw ConfigError("sweep axis '" + axis + "' has no values");
    ExperimentConfig probe = c;
    for (const auto& v : values) apply_setting(probe, axis, v);
    c.grid[axis] = std::move(values);
    return;
  }
  if (key == "env") {
    c.env = parse_env(value);
  } else if (key == "protocol") {
    c.protocol = qnet::parse_protocol(value);
  } else if (key == "episodes") {
    c.episodes = to_count(key, value);
  } else if (key == "steps_per_episode") {
    c.steps_per_episode = to_count(key, value);
  } else if (key == "seeds" || key == "seed") {
    c.seeds = parse_seed_list(value);
  } else if (key == "n_layers" || key == "layers") {
    c.n_layers = to_count(key, value);
  } else if (key == "lr" || key == "alpha") {
    c.lr = to_double(key, value);
  } else if (key == "lr_scale" || key == "alpha_w") {
    c.lr_scale = to_double(key, value);
  } else if (key == "gamma") {
    c.gamma = to_double(key, value);
  } else if (key == "buffer_capacity") {
    c.buffer_capacity = to_count(key, value);
  } else if (key == "batch_size") {
    c.batch_size = to_count(key, value);
  } else if (key == "n_minibatches") {
    c.n_minibatches = to_count(key, value);
  } else if (key == "epsilon_kind") {
    const auto v = lower(value);
    if (v == "linear") {
      c.epsilon_kind = agent::EpsilonSchedule::Kind::Linear;
    } else if (v == "exponential") {
      c.epsilon_kind = agent::EpsilonSchedule::Kind::Exponential;
    } else {
      throw ConfigError("epsilon_kind must be linear or exponential");
    }
  } else if (key == "epsilon_initial") {
    c.epsilon_initial = to_double(key, value);
  } else if (key == "epsilon_final") {
    c.epsilon_final = to_double(key, value);
  } else if (key == "epsilon_horizon") {
    if (lower(value) == "episodes") {
      c.epsilon_horizon.reset();
    } else {
      c.epsilon_horizon = to_double(key, value);
    }
  } else if (key == "mate_token") {
    c.mate_token = to_double(key, value);
  } else if (key == "gift_value") {
    c.gift_value = to_double(key, value);
  } else if (key == "gift_budget") {
    c.gift_budget = to_double(key, value);
  } else if (key == "mediate_initial_token") {
    c.mediate.initial_token = to_double(key, value);
  } else if (key == "mediate_alpha") {
    c.mediate.alpha = to_double(key, value);
  } else if (key == "mediate_epoch") {
    c.mediate.epoch_length = to_count(key, value);
  } else if (key == "mediate_direction") {
    const auto v = lower(value);
    if (v == "deterioration") {
      c.mediate.direction = comms::TokenDirection::IncreaseOnDeterioration;
    } else if (v == "improvement") {
      c.mediate.direction = comms::TokenDirection::IncreaseOnImprovement;
    } else {
      throw ConfigError("mediate_direction must be deterioration or improvement");
    }
  } else if (key == "share_range") {
    c.share_range = to_double(key, value);
  } else if (key == "value_estimator") {
    const auto v = lower(value);
    if (v == "literal") {
      c.value_estimator = comms::ValueEstimator::Literal;
    } else if (v == "normalized") {
      c.value_estimator = comms::ValueEstimator::Normalized;
    } else {
      throw ConfigError("value_estimator must be literal or normalized");
    }
  } else if (key == "payoff") {
    c.payoff = value;
  } else if (key == "harvest_map") {
    c.harvest_map = value;
  } else if (key == "harvest_network") {
    const auto v = lower(value);
    if (v != "vqc" && v != "classical") throw ConfigError("harvest_network must be vqc or classical");
    c.harvest_network = v;
  } else if (key == "classical_hidden") {
    c.classical_hidden = to_count(key, value);
  } else if (key == "out_dir") {
    c.out_dir = value;
  } else if (key == "checkpoints") {
    c.checkpoints = to_bool(key, value);
  } else if (key == "trace") {
    c.trace = to_bool(key, value);
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> to_settings(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> s;
  auto add = [&](std::string k, std::string v) { s.emplace_back(std::move(k), std::move(v)); };
  add("env", std::string(env_name(c.env)));
  add("protocol", std::string(qnet::protocol_name(c.protocol)));
  add("episodes", std::to_string(c.episodes));
  add("steps_per_episode", std::to_string(c.steps_per_episode));
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(c.seeds[i]);
  add("seeds", seeds);
  add("n_layers", std::to_string(c.n_layers));
  add("lr", number(c.lr));
  add("lr_scale", number(c.lr_scale));
  add("gamma", number(c.gamma));
  add("buffer_capacity", std::to_string(c.buffer_capacity));
  add("batch_size", std::to_string(c.batch_size));
  add("n_minibatches", std::to_string(c.n_minibatches));
  add("epsilon_kind", c.epsilon_kind == agent::EpsilonSchedule::Kind::Linear ? "linear" : "exponential");
  add("epsilon_initial", number(c.epsilon_initial));
  add("epsilon_final", number(c.epsilon_final));
  add("epsilon_horizon", c.epsilon_horizon ? number(*c.epsilon_horizon) : "episodes");
  add("mate_token", number(c.mate_token));
  add("gift_value", number(c.gift_value));
  add("gift_budget", number(c.gift_budget));
  add("mediate_initial_token", number(c.mediate.initial_token));
  add("mediate_alpha", number(c.mediate.alpha));
  add("mediate_epoch", std::to_string(c.mediate.epoch_length));
  add("mediate_direction",
      c.mediate.direction == comms::TokenDirection::IncreaseOnDeterioration ? "deterioration" : "improvement");
  add("share_range", number(c.share_range));
  add("value_estimator", c.value_estimator == comms::ValueEstimator::Literal ? "literal" : "normalized");
  if (is_matrix_game(c.env)) add("payoff", c.payoff_matrix().to_string());
  if (!c.harvest_map.empty()) add("harvest_map", c.harvest_map);
  add("harvest_network", c.harvest_network);
  add("classical_hidden", std::to_string(c.classical_hidden));
  add("out_dir", c.out_dir);
  add("checkpoints", c.checkpoints ? "true" : "false");
  add("trace", c.trace ? "true" : "false");
  for (const auto& [axis, values] : c.grid) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) joined += (i ? "," : "") + values[i];
    add("grid." + axis, joined);
  }
  return s;
}

void validate(const ExperimentConfig& c) {
  if (c.episodes == 0) throw ConfigError("episodes must be positive");
  if (c.steps_per_episode == 0) throw ConfigError("steps_per_episode must be positive");
  if (c.seeds.empty()) throw ConfigError("no seeds configured");
  if (c.n_layers == 0) throw ConfigError("n_layers must be positive");
  if (!(c.lr > 0.0) || !(c.lr_scale > 0.0)) throw ConfigError("learning rates must be positive");
  if (c.gamma < 0.0 || c.gamma >= 1.0) throw ConfigError("gamma must be in [0, 1)");
  if (c.buffer_capacity == 0 || c.batch_size == 0) throw ConfigError("buffer and batch sizes must be positive");
  for (double e : {c.epsilon_initial, c.epsilon_final}) {
    if (e < 0.0 || e > 1.0) throw ConfigError("epsilon values must be in [0, 1]");
  }
  if (c.epsilon_horizon && !(*c.epsilon_horizon > 0.0)) throw ConfigError("epsilon_horizon must be positive");
  if (c.mate_token < 0.0 || c.gift_value < 0.0 || c.gift_budget < 0.0) {
    throw ConfigError("token, gift and budget values must be non-negative");
  }
  if (c.mediate.initial_token < 0.0 || c.mediate.alpha < 0.0 || c.mediate.epoch_length == 0) {
    throw ConfigError("invalid MEDIATE settings");
  }
  if (!(c.share_range > 0.0)) throw ConfigError("share_range must be positive");

  if (c.env == EnvKind::Harvest) {
    if (c.protocol != qnet::ProtocolKind::HarvestIql) {
      throw ConfigError("harvest runs use protocol harvest_iql (no communication protocol)");
    }
    if (!c.harvest_map.empty()) envs::HarvestMap::load(c.harvest_map);
    if (c.harvest_network == "vqc") {
      const auto net = qnet::build_layout(c.protocol, {c.n_layers});
      if (net.n_qubits() != qnet::qubit_budget(c.protocol)) throw ConfigError("qubit layout mismatch");
    } else if (c.classical_hidden == 0) {
      throw ConfigError("classical_hidden must be positive");
    }
  } else {
    if (c.protocol == qnet::ProtocolKind::HarvestIql) {
      throw ConfigError("harvest_iql is only valid with env harvest");
    }
    c.payoff_matrix().validate();
    const auto net = qnet::build_layout(c.protocol, {c.n_layers, {0.0, c.gift_budget > 0 ? c.gift_budget : 1.0}});
    if (net.n_qubits() != qnet::qubit_budget(c.protocol)) throw ConfigError("qubit layout mismatch");
  }

  if (!c.grid.empty()) {
    for (const auto& point : expand_grid(c.grid)) {
      ExperimentConfig p = c;
      p.grid.clear();
      for (const auto& [k, v] : point.settings) apply_setting(p, k, v);
      try {
        validate(p);
      } catch (const ConfigError& e) {
        throw ConfigError("grid point " + point.label + ": " + e.what());
      }
    }
  }
}

std::vector<std::pair<std::string, std::string>> read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& settings) {
  EnvKind env = EnvKind::Ipd;
  for (const auto& [k, v] : settings) {
    if (lower(trim(k)) == "env") env = parse_env(trim(v));
  }
  ExperimentConfig config = defaults_for(env);
  for (const auto& [k, v] : settings) apply_setting(config, k, v);
  return config;
}

}  // namespace qmarl::experiment
