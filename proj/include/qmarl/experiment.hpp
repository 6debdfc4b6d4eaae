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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmarl/agent.hpp"
#include "qmarl/comms.hpp"
#include "qmarl/envs.hpp"
#include "qmarl/metrics.hpp"
#include "qmarl/qnet.hpp"

/// Experiment harness: configuration, per-seed runs, sweeps, summaries.
namespace qmarl::experiment {

inline constexpr const char* kVersion = "qmarl 1.0.0";

enum class EnvKind { Ipd, StagHunt, Chicken, Harvest };

EnvKind parse_env(std::string_view name);
std::string_view env_name(EnvKind env);
bool is_matrix_game(EnvKind env);
envs::DilemmaKind dilemma_of(EnvKind env);

struct ExperimentConfig {
  EnvKind env = EnvKind::Ipd;
  qnet::ProtocolKind protocol = qnet::ProtocolKind::Baseline;
  std::size_t episodes = 2000;
  std::size_t steps_per_episode = 50;
  std::vector<std::uint64_t> seeds;

  std::size_t n_layers = 4;
  double lr = 0.001;
  double lr_scale = 0.1;
  double gamma = 0.9;
  std::size_t buffer_capacity = 50;
  std::size_t batch_size = 5;
  std::size_t n_minibatches = 5;

  agent::EpsilonSchedule::Kind epsilon_kind = agent::EpsilonSchedule::Kind::Linear;
  double epsilon_initial = 0.3;
  double epsilon_final = 0.0;
  /// Unset means "the episode count".
  std::optional<double> epsilon_horizon;

  double mate_token = 1.0;
  double gift_value = 1.0;
  double gift_budget = 10.0;
  comms::MediateConfig mediate{};
  double share_range = 1.0;
  comms::ValueEstimator value_estimator = comms::ValueEstimator::Literal;

  /// Payoff override in PayoffMatrix::parse syntax; empty means defaults.
  std::string payoff;
  /// ASCII map path; empty means the built-in default map.
  std::string harvest_map;
  /// "vqc" or "classical".
  std::string harvest_network = "vqc";
  std::size_t classical_hidden = 64;

  std::string out_dir = "runs";
  bool checkpoints = true;
  bool trace = false;

  /// Sweep axes: setting key -> values.
  std::map<std::string, std::vector<std::string>> grid;

  agent::EpsilonSchedule epsilon_schedule() const;
  envs::PayoffMatrix payoff_matrix() const;
};

/// Defaults for an environment: matrix games use 2000x50 episodes, seeds
/// 0-14, gamma 0.9, buffer 50, five minibatches of 5, linear epsilon from
/// 0.3. Harvest uses 1000x250, seeds 0-2, gamma 0.99, buffer 2500, one
/// minibatch of 100, exponential epsilon 1.0 -> 0.02, one layer, lr 0.01.
ExperimentConfig defaults_for(EnvKind env);

/// Applies one `key = value` setting; throws ConfigError for unknown keys or
/// unparsable values. `grid.<key>` adds a sweep axis.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Resolved settings in a stable order; applying them to defaults_for(env)
/// reproduces `config`.
std::vector<std::pair<std::string, std::string>> to_settings(const ExperimentConfig& config);

/// Throws ConfigError if anything is inconsistent (payoff ordering, qubit
/// layout, protocol/env pairing, ranges).
void validate(const ExperimentConfig& config);

/// Reads `key = value` lines ('#' comments). Throws InputError on I/O.
std::vector<std::pair<std::string, std::string>> read_settings_file(const std::string& path);

/// Builds a config: env is resolved first (later entries win), defaults for
/// that env are taken, then every setting is applied in order.
ExperimentConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& settings);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// ---------------------------------------------------------------------------
// Runs

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<metrics::EpisodeRecord> records;
  /// Final greedy cooperation fraction per agent (matrix games only).
  std::optional<std::array<double, 2>> coop_fraction;
  std::optional<bool> mutual_defection;
  std::array<std::unique_ptr<qnet::QFunction>, 2> nets;
  double total_apples = 0.0;
  std::vector<std::string> trace;
};

/// Runs one seed entirely in memory. Deterministic given (config, seed).
SeedOutcome simulate(const ExperimentConfig& config, std::uint64_t seed);

struct SeedReport {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::filesystem::path episodes_csv;
  std::filesystem::path final_eval_csv;
  std::vector<std::filesystem::path> checkpoints;
  double seconds = 0.0;
};

struct RunReport {
  std::filesystem::path dir;
  std::vector<SeedReport> seeds;
  bool all_ok() const;
};

/// Runs every seed of `config` into config.out_dir: manifest.json (written
/// before the first episode, atomically replaced on completion),
/// config.resolved, and seed_<k>/{episodes.csv, final_eval.csv, agent<i>.json}.
/// A failing seed is reported and the remaining seeds still run.
RunReport run(const ExperimentConfig& config, std::size_t jobs = 1);

struct SweepPoint {
  std::string label;
  std::vector<std::pair<std::string, std::string>> settings;
};

/// Cartesian product of the grid axes; an empty grid yields one point.
std::vector<SweepPoint> expand_grid(const std::map<std::string, std::vector<std::string>>& grid);

struct SweepReport {
  std::vector<std::pair<SweepPoint, RunReport>> completed;
  std::vector<std::pair<SweepPoint, std::string>> failed;
};

/// One run per grid point under out_dir/<label>; an empty grid runs in out_dir.
SweepReport sweep(const ExperimentConfig& config, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Summaries

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

struct SummaryRow {
  std::string run;
  std::string env;
  std::string protocol;
  std::size_t n_seeds = 0;
  Stat collective;
  Stat fc_rate;
  Stat inequality;
  std::optional<Stat> gifting;
  std::optional<Stat> token;
  std::optional<Stat> coop_fraction;
};

/// Mean and sample standard deviation (0 for a single value).
Stat mean_std(const std::vector<double>& values);

/// Aggregates each run directory over its seeds using the last `window`
/// episodes.
std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& run_dirs, std::size_t window = 100);

inline constexpr const char* kSummaryCsvHeader =
    "run,env,protocol,seeds,C_mean,C_std,FC_rate_mean,FC_rate_std,I_mean,I_std,FG_mean,FG_std,"
    "token_mean,token_std,coop_fraction_mean,coop_fraction_std";
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace qmarl::experiment
