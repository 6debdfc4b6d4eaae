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
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qmarl/qnet.hpp"

namespace qmarl::metrics {

/// One CSV row. FG and token_mean are absent for protocols without
/// gifting heads / learned tokens.
struct EpisodeRecord {
  std::size_t episode = 0;
  double collective = 0.0;      // C
  int mutual_cooperation = 0;   // FC
  double inequality = 0.0;      // I
  std::optional<double> gifting_frequency;  // FG
  std::optional<double> token_mean;
  double epsilon = 0.0;
  std::array<double, 2> raw{};
  std::array<double, 2> shaped{};
};

/// Per-step inputs. Metrics are computed over raw environment rewards;
/// shaped rewards are tracked only for the r*_shaped columns.
struct StepData {
  std::array<double, 2> raw{};
  std::array<double, 2> shaped{};
  /// Joint env action for matrix games; absent where FC is undefined.
  std::optional<std::array<int, 2>> joint_action;
  /// Index of the cooperative action (0 for every matrix game here).
  int cooperative_action = 0;
  /// Gift indicators per agent, present only for gifting protocols.
  std::optional<std::array<bool, 2>> gifts;
};

class EpisodeAccumulator {
 public:
  EpisodeAccumulator(std::size_t episode, bool track_gifts);

  void accumulate(const StepData& step);
  void set_token_mean(double value) { token_mean_ = value; }
  void set_epsilon(double value) { epsilon_ = value; }

  /// FG = gift actions / (agents * steps); null when gifts are not tracked.
  EpisodeRecord finish() const;

  std::size_t steps() const { return steps_; }

 private:
  EpisodeRecord record_;
  bool track_gifts_;
  std::size_t steps_ = 0;
  std::size_t gifts_ = 0;
  std::optional<double> token_mean_;
  double epsilon_ = 0.0;
};

inline constexpr const char* kEpisodeCsvHeader =
    "episode,C,FC,I,FG,token_mean,epsilon,r0_raw,r1_raw,r0_shaped,r1_shaped";

/// Shortest round-trip decimal form, so equal doubles print equal bytes.
std::string format_number(double value);
std::string format_row(const EpisodeRecord& record);
void write_episode_csv(std::ostream& out, const std::vector<EpisodeRecord>& records);

/// Parses a CSV written by write_episode_csv. Throws InputError naming
/// `source` if the header does not match.
std::vector<EpisodeRecord> read_episode_csv(std::istream& in, const std::string& source);

/// Every observation a trained agent can be queried with during final
/// evaluation: 4 joint actions; x16 message patterns for RIAL; x{0, 5, 10}
/// budgets for Gifting_Budget.
std::vector<std::vector<double>> evaluation_observations(qnet::ProtocolKind protocol);

/// Fraction of enumerated observations whose greedy env action is cooperative.
double final_policy_eval(const qnet::QFunction& net, qnet::ProtocolKind protocol,
                         int cooperative_action = 0);

/// Greedy self-play of two matrix-game agents from a start joint action.
/// Returns the joint env action played at the last step. Gift/message heads
/// act greedily too; Gifting_Budget agents observe a fixed full budget.
std::array<int, 2> greedy_selfplay(const qnet::QFunction& agent0, const qnet::QFunction& agent1,
                                   qnet::ProtocolKind protocol, std::array<int, 2> start,
                                   std::size_t steps = 20, double budget = 10.0);

/// True when greedy self-play ends in mutual defection from every start.
bool converges_to_mutual_defection(const qnet::QFunction& agent0, const qnet::QFunction& agent1,
                                   qnet::ProtocolKind protocol);

}  // namespace qmarl::metrics
