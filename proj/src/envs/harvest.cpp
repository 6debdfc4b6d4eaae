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

#include <cmath>
#include <fstream>
#include <sstream>
#include <optional>

#include "qmarl/envs.hpp"

namespace qmarl::envs {

namespace {

constexpr std::string_view kDefaultMap =
    "################\n"
    "#1............2#\n"
    "#......AA......#\n"
    "#.....AAAA.....#\n"
    "#....AAAAAA....#\n"
    "#.....AAAA.....#\n"
    "#......AA......#\n"
    "#..............#\n"
    "################\n";

}  // namespace

Orientation rotate_left(Orientation o) { return static_cast<Orientation>((static_cast<int>(o) + 3) % 4); }
Orientation rotate_right(Orientation o) { return static_cast<Orientation>((static_cast<int>(o) + 1) % 4); }

Position offset(Position p, Orientation o, int forward, int right) {
  switch (o) {
    case Orientation::North:
      return {p.row - forward, p.col + right};
    case Orientation::East:
      return {p.row + right, p.col + forward};
    case Orientation::South:
      return {p.row + forward, p.col - right};
    case Orientation::West:
      return {p.row - right, p.col - forward};
  }
  return p;
}

std::string_view HarvestMap::default_map_text() { return kDefaultMap; }

HarvestMap HarvestMap::default_map() { return parse(kDefaultMap); }

HarvestMap HarvestMap::parse(std::string_view text) {
  HarvestMap map;
  std::vector<std::string> lines;
  std::stringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw InputError("harvest map is empty");
  map.rows = static_cast<int>(lines.size());
  map.cols = static_cast<int>(lines.front().size());
  std::array<std::optional<Position>, 2> spawns;
  for (int r = 0; r < map.rows; ++r) {
    if (static_cast<int>(lines[r].size()) != map.cols) throw InputError("harvest map rows differ in width");
    for (int c = 0; c < map.cols; ++c) {
      const char ch = lines[r][c];
      Cell cell = Cell::Empty;
      bool spawn = false;
      switch (ch) {
        case '#':
          cell = Cell::Wall;
          break;
        case '.':
          break;
        case 'A':
          cell = Cell::Apple;
          spawn = true;
          break;
        case '1':
        case '2': {
          auto& slot = spawns[ch - '1'];
          if (slot) throw InputError("harvest map has duplicate agent spawn");
          slot = Position{r, c};
          break;
        }
        default:
          throw InputError(std::string("harvest map: unknown cell '") + ch + "'");
      }
      map.cells.push_back(cell);
      map.spawn.push_back(spawn);
    }
  }
  for (const auto& s : spawns) {
    if (!s) throw InputError("harvest map needs spawns '1' and '2'");
    map.agent_spawns.push_back(*s);
  }
  return map;
}

HarvestMap HarvestMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open harvest map " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

HarvestGame::HarvestGame(HarvestMap map, HarvestConfig config) : map_(std::move(map)), config_(config) {
  if (map_.agent_spawns.size() != 2) throw ConfigError("harvest supports exactly two agents");
  cells_ = map_.cells;
  for (std::size_t i = 0; i < 2; ++i) agents_[i] = {map_.agent_spawns[i], Orientation::North};
}

void HarvestGame::reset(Rng& /*rng*/) {
  cells_ = map_.cells;
  for (std::size_t i = 0; i < 2; ++i) agents_[i] = {map_.agent_spawns[i], Orientation::North};
  steps_ = 0;
}

bool HarvestGame::in_bounds(Position p) const {
  return p.row >= 0 && p.col >= 0 && p.row < map_.rows && p.col < map_.cols;
}

Cell HarvestGame::cell(Position p) const { return in_bounds(p) ? cells_[index(p)] : Cell::Wall; }

void HarvestGame::set_cell(Position p, Cell c) {
  if (!in_bounds(p)) throw ConfigError("set_cell out of bounds");
  cells_[index(p)] = c;
}

bool HarvestGame::blocked(Position p) const { return cell(p) == Cell::Wall; }

int HarvestGame::apple_count() const {
  int n = 0;
  for (auto c : cells_) n += c == Cell::Apple;
  return n;
}

int HarvestGame::nearby_apples(Position p) const {
  const int reach = static_cast<int>(std::floor(config_.regrowth_radius));
  const double r2 = config_.regrowth_radius * config_.regrowth_radius;
  int n = 0;
  for (int dr = -reach; dr <= reach; ++dr) {
    for (int dc = -reach; dc <= reach; ++dc) {
      if ((dr == 0 && dc == 0) || dr * dr + dc * dc > r2) continue;
      const Position q{p.row + dr, p.col + dc};
      if (in_bounds(q) && cells_[index(q)] == Cell::Apple) ++n;
    }
  }
  return n;
}

double HarvestGame::regrowth_probability(int nearby) const {
  if (nearby <= 0) return config_.regrowth_prob[0];
  if (nearby <= 2) return config_.regrowth_prob[1];
  if (nearby <= 4) return config_.regrowth_prob[2];
  return config_.regrowth_prob[3];
}

HarvestStep HarvestGame::step(std::array<int, 2> actions, Rng& rng) {
  for (int a : actions) {
    if (a < 0 || a >= static_cast<int>(kHarvestActions)) {
      throw ConfigError("harvest action " + std::to_string(a) + " out of range");
    }
  }
  if (steps_ >= config_.episode_length) throw ConfigError("harvest episode already finished");

  std::array<Position, 2> current{agents_[0].pos, agents_[1].pos};
  std::array<Position, 2> target = current;
  for (std::size_t i = 0; i < 2; ++i) {
    auto& pose = agents_[i];
    Position want = pose.pos;
    switch (static_cast<HarvestAction>(actions[i])) {
      case HarvestAction::Stay:
        break;
      case HarvestAction::Forward:
        want = offset(pose.pos, pose.facing, 1, 0);
        break;
      case HarvestAction::StrafeLeft:
        want = offset(pose.pos, pose.facing, 0, -1);
        break;
      case HarvestAction::StrafeRight:
        want = offset(pose.pos, pose.facing, 0, 1);
        break;
      case HarvestAction::RotateLeft:
        pose.facing = rotate_left(pose.facing);
        break;
      case HarvestAction::RotateRight:
        pose.facing = rotate_right(pose.facing);
        break;
    }
    if (!blocked(want)) target[i] = want;
  }

  // Swaps fail for both; a contested cell goes to the lower index; moving
  // into a cell whose occupant stays put fails. Repeat until stable.
  const bool moving0 = !(target[0] == current[0]);
  const bool moving1 = !(target[1] == current[1]);
  if (moving0 && moving1 && target[0] == current[1] && target[1] == current[0]) target = current;
  for (int pass = 0; pass < 3; ++pass) {
    if (target[0] == target[1]) {
      if (!(target[1] == current[1])) {
        target[1] = current[1];
      } else {
        target[0] = current[0];
      }
    }
  }

  HarvestStep result;
  for (std::size_t i = 0; i < 2; ++i) {
    agents_[i].pos = target[i];
    auto& c = cells_[index(target[i])];
    if (!(target[i] == current[i]) && c == Cell::Apple) {
      c = Cell::Empty;
      result.rewards[i] += 1.0;
    }
  }

  // Regrowth probabilities are computed from the post-harvest grid before
  // any cell regrows.
  std::vector<std::pair<std::size_t, double>> candidates;
  for (int r = 0; r < map_.rows; ++r) {
    for (int c = 0; c < map_.cols; ++c) {
      const Position p{r, c};
      const std::size_t idx = index(p);
      if (!map_.spawn[idx] || cells_[idx] != Cell::Empty) continue;
      if (agents_[0].pos == p || agents_[1].pos == p) continue;
      candidates.emplace_back(idx, regrowth_probability(nearby_apples(p)));
    }
  }
  for (const auto& [idx, p] : candidates) {
    // One draw per candidate keeps the stream aligned regardless of p.
    const double u = rng.uniform();
    if (p > 0.0 && u < p) {
      cells_[idx] = Cell::Apple;
      ++result.regrown;
    }
  }

  ++steps_;
  result.done = steps_ >= config_.episode_length;
  return result;
}

std::vector<double> HarvestGame::observe(std::size_t agent) const {
  if (agent >= 2) throw ConfigError("agent index out of range");
  const auto& self = agents_[agent];
  const auto& other = agents_[1 - agent];
  std::vector<double> obs(kHarvestFeatures, 0.0);
  const int half = kWindow / 2;
  for (int r = 0; r < kWindow; ++r) {
    for (int c = 0; c < kWindow; ++c) {
      const Position p = offset(self.pos, self.facing, half - r, c - half);
      const std::size_t base = static_cast<std::size_t>(r * kWindow + c) * kHarvestChannels;
      if (!in_bounds(p) || cells_[index(p)] == Cell::Wall) {
        obs[base + kWallChannel] = 1.0;
        continue;
      }
      if (cells_[index(p)] == Cell::Apple) obs[base + kAppleChannel] = 1.0;
      if (other.pos == p) obs[base + kAgentChannel] = 1.0;
    }
  }
  // Neighbour of the centre that points to map north.
  const Position north{self.pos.row - 1, self.pos.col};
  for (int r = half - 1; r <= half + 1; ++r) {
    for (int c = half - 1; c <= half + 1; ++c) {
      if (std::abs(r - half) + std::abs(c - half) != 1) continue;
      if (offset(self.pos, self.facing, half - r, c - half) == north) {
        obs[static_cast<std::size_t>(r * kWindow + c) * kHarvestChannels + kHeadingChannel] = 1.0;
      }
    }
  }
  return obs;
}

}  // namespace qmarl::envs
