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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qmarl/common.hpp"

namespace qmarl::envs {

// ---------------------------------------------------------------------------
// Iterated 2x2 matrix games. Action 0 is the cooperative action
// (cooperate / hunt / chicken), action 1 the selfish one.

enum class DilemmaKind { PrisonersDilemma, StagHunt, Chicken };

DilemmaKind parse_dilemma(std::string_view name);
std::string_view dilemma_name(DilemmaKind kind);

struct PayoffMatrix {
  DilemmaKind kind = DilemmaKind::PrisonersDilemma;
  /// payoffs[row action][column action] = (row reward, column reward)
  std::array<std::array<std::pair<double, double>, 2>, 2> payoffs{};
  std::array<std::string, 2> labels{"cooperate", "defect"};

  static PayoffMatrix defaults(DilemmaKind kind);

  /// Parses "cc=3,3;cd=0,5;dc=5,0;dd=1,1" onto the given kind's labels.
  static PayoffMatrix parse(DilemmaKind kind, std::string_view text);
  std::string to_string() const;

  /// Throws ConfigError unless the game is symmetric and satisfies its
  /// dilemma's ordering: PD T > R > P > S and 2R > S + T > 2P; Chicken
  /// T > R > S > P; Stag Hunt mutual hunting strictly best.
  void validate() const;

  double reward_r() const { return payoffs[0][0].first; }
  double sucker_s() const { return payoffs[0][1].first; }
  double temptation_t() const { return payoffs[1][0].first; }
  double punishment_p() const { return payoffs[1][1].first; }
};

struct MatrixStep {
  std::array<double, 2> rewards{};
  /// The joint action just played, seen by both agents.
  std::array<int, 2> joint_action{};
  bool done = false;
};

class MatrixGame {
 public:
  explicit MatrixGame(PayoffMatrix matrix, std::size_t episode_length = 50);

  /// Each agent independently gets a uniformly random fake previous joint
  /// action as its first observation.
  std::array<std::array<int, 2>, 2> reset(Rng& rng);

  MatrixStep step(std::array<int, 2> actions);

  std::size_t step_count() const { return steps_; }
  std::size_t episode_length() const { return length_; }
  bool finished() const { return steps_ >= length_; }
  const PayoffMatrix& matrix() const { return matrix_; }

 private:
  PayoffMatrix matrix_;
  std::size_t length_;
  std::size_t steps_ = 0;
};

/// Basis-embedding features of a joint action.
std::vector<double> joint_action_features(std::array<int, 2> joint);

// ---------------------------------------------------------------------------
// Harvest commons gridworld

enum class Cell : unsigned char { Empty, Apple, Wall };
enum class Orientation : int { North = 0, East = 1, South = 2, West = 3 };

enum class HarvestAction : int {
  Stay = 0,
  Forward = 1,
  StrafeLeft = 2,
  StrafeRight = 3,
  RotateLeft = 4,
  RotateRight = 5,
};
inline constexpr std::size_t kHarvestActions = 6;

struct Position {
  int row = 0;
  int col = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

/// Map text: '#' wall, '.' empty, 'A' apple spawn (starts filled),
/// '1'/'2' agent spawns; newline-separated rows of equal width.
struct HarvestMap {
  int rows = 0;
  int cols = 0;
  std::vector<Cell> cells;
  std::vector<bool> spawn;
  std::vector<Position> agent_spawns;

  static HarvestMap parse(std::string_view text);
  static HarvestMap load(const std::string& path);
  /// 16x9 default with a central apple patch and two corner spawns.
  static HarvestMap default_map();
  static std::string_view default_map_text();
};

struct HarvestConfig {
  std::size_t episode_length = 250;
  double regrowth_radius = 2.0;
  /// p(k) for k nearby apples: 0, 1-2, 3-4, >= 5.
  std::array<double, 4> regrowth_prob{0.0, 0.01, 0.05, 0.1};
};

struct AgentPose {
  Position pos;
  Orientation facing = Orientation::North;
};

struct HarvestStep {
  std::array<double, 2> rewards{};
  bool done = false;
  int regrown = 0;
};

inline constexpr int kWindow = 5;
inline constexpr std::size_t kHarvestChannels = 4;
inline constexpr std::size_t kHarvestFeatures = kWindow * kWindow * kHarvestChannels;

/// Observation channels, flattened channels-last and row-major over the
/// rotated window: index = (row * 5 + col) * 4 + channel. Row 0 is the
/// row ahead of the agent, column 0 is to its left.
enum HarvestChannel : std::size_t { kAppleChannel = 0, kAgentChannel = 1, kWallChannel = 2, kHeadingChannel = 3 };

class HarvestGame {
 public:
  explicit HarvestGame(HarvestMap map, HarvestConfig config = {});

  /// Restores the map's apples and places agents on their spawns facing north.
  void reset(Rng& rng);

  /// Simultaneous moves; invalid action indices throw ConfigError.
  HarvestStep step(std::array<int, 2> actions, Rng& rng);

  /// 100 non-negative features. The heading channel marks the window cell
  /// that points to map north, which encodes absolute orientation after the
  /// window has been rotated into the agent's frame.
  std::vector<double> observe(std::size_t agent) const;

  Cell cell(Position p) const;
  void set_cell(Position p, Cell c);
  bool in_bounds(Position p) const;
  int apple_count() const;
  /// Apples within the regrowth radius of p, excluding p itself.
  int nearby_apples(Position p) const;
  double regrowth_probability(int nearby) const;

  const AgentPose& pose(std::size_t agent) const { return agents_[agent]; }
  void set_pose(std::size_t agent, AgentPose pose) { agents_[agent] = pose; }
  std::size_t step_count() const { return steps_; }
  const HarvestMap& map() const { return map_; }
  const HarvestConfig& config() const { return config_; }

 private:
  HarvestMap map_;
  HarvestConfig config_;
  std::vector<Cell> cells_;
  std::array<AgentPose, 2> agents_{};
  std::size_t steps_ = 0;

  std::size_t index(Position p) const { return static_cast<std::size_t>(p.row * map_.cols + p.col); }
  bool blocked(Position p) const;
};

Position offset(Position p, Orientation o, int forward, int right);
Orientation rotate_left(Orientation o);
Orientation rotate_right(Orientation o);

}  // namespace qmarl::envs
