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

#include <cctype>
#include <sstream>

#include "qmarl/envs.hpp"

namespace qmarl::envs {

DilemmaKind parse_dilemma(std::string_view name) {
  std::string key;
  for (char c : name) key.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key == "ipd" || key == "prisoners_dilemma") return DilemmaKind::PrisonersDilemma;
  if (key == "stag_hunt" || key == "staghunt") return DilemmaKind::StagHunt;
  if (key == "chicken") return DilemmaKind::Chicken;
  throw ConfigError("unknown matrix game '" + std::string(name) + "'");
}

std::string_view dilemma_name(DilemmaKind kind) {
  switch (kind) {
    case DilemmaKind::PrisonersDilemma:
      return "ipd";
    case DilemmaKind::StagHunt:
      return "stag_hunt";
    case DilemmaKind::Chicken:
      return "chicken";
  }
  return "unknown";
}

PayoffMatrix PayoffMatrix::defaults(DilemmaKind kind) {
  PayoffMatrix m;
  m.kind = kind;
  switch (kind) {
    case DilemmaKind::PrisonersDilemma:
      // R = 3, S = 0, T = 5, P = 1
      m.payoffs = {{{{{3, 3}, {0, 5}}}, {{{5, 0}, {1, 1}}}}};
      m.labels = {"cooperate", "defect"};
      break;
    case DilemmaKind::StagHunt:
      m.payoffs = {{{{{4, 4}, {1, 3}}}, {{{3, 1}, {2, 2}}}}};
      m.labels = {"hunt", "forage"};
      break;
    case DilemmaKind::Chicken:
      m.payoffs = {{{{{3, 3}, {2, 4}}}, {{{4, 2}, {1, 1}}}}};
      m.labels = {"chicken", "dare"};
      break;
  }
  return m;
}

PayoffMatrix PayoffMatrix::parse(DilemmaKind kind, std::string_view text) {
  PayoffMatrix m = defaults(kind);
  std::array<std::array<bool, 2>, 2> seen{};
  std::stringstream entries{std::string(text)};
  std::string entry;
  while (std::getline(entries, entry, ';')) {
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq != 2) throw ConfigError("payoff entry '" + entry + "' is not xy=a,b");
    auto action = [&](char c) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (c == 'c' || c == '0') return 0;
      if (c == 'd' || c == '1') return 1;
      throw ConfigError("payoff entry '" + entry + "': action must be c/d or 0/1");
    };
    const int row = action(entry[0]);
    const int col = action(entry[1]);
    const auto value = entry.substr(3);
    const auto comma = value.find(',');
    if (comma == std::string::npos) throw ConfigError("payoff entry '" + entry + "' needs two rewards");
    try {
      m.payoffs[row][col] = {std::stod(value.substr(0, comma)), std::stod(value.substr(comma + 1))};
    } catch (const std::exception&) {
      throw ConfigError("payoff entry '" + entry + "' has a non-numeric reward");
    }
    seen[row][col] = true;
  }
  for (const auto& r : seen) {
    for (bool s : r) {
      if (!s) throw ConfigError("payoff override must list all four cells (cc, cd, dc, dd)");
    }
  }
  return m;
}

std::string PayoffMatrix::to_string() const {
  std::ostringstream out;
  const char* keys[2][2] = {{"cc", "cd"}, {"dc", "dd"}};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      if (r || c) out << ';';
      out << keys[r][c] << '=' << payoffs[r][c].first << ',' << payoffs[r][c].second;
    }
  }
  return out.str();
}

void PayoffMatrix::validate() const {
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      if (payoffs[a][b].first != payoffs[b][a].second) {
        throw ConfigError("payoff matrix must be symmetric between players");
      }
    }
  }
  const double R = reward_r();
  const double S = sucker_s();
  const double T = temptation_t();
  const double P = punishment_p();
  switch (kind) {
    case DilemmaKind::PrisonersDilemma:
      if (!(T > R && R > P && P > S)) throw ConfigError("prisoner's dilemma requires T > R > P > S");
      if (!(2 * R > S + T && S + T > 2 * P)) throw ConfigError("prisoner's dilemma requires 2R > S + T > 2P");
      break;
    case DilemmaKind::Chicken:
      if (!(T > R && R > S && S > P)) throw ConfigError("chicken requires T > R > S > P");
      break;
    case DilemmaKind::StagHunt:
      if (!(R > S && R > T && R > P)) throw ConfigError("stag hunt requires mutual hunting to pay strictly best");
      break;
  }
}

MatrixGame::MatrixGame(PayoffMatrix matrix, std::size_t episode_length)
    : matrix_(std::move(matrix)), length_(episode_length) {
  matrix_.validate();
  if (length_ == 0) throw ConfigError("episode length must be positive");
}

std::array<std::array<int, 2>, 2> MatrixGame::reset(Rng& rng) {
  steps_ = 0;
  std::array<std::array<int, 2>, 2> obs{};
  for (auto& o : obs) {
    o[0] = static_cast<int>(rng.below(2));
    o[1] = static_cast<int>(rng.below(2));
  }
  return obs;
}

MatrixStep MatrixGame::step(std::array<int, 2> actions) {
  if (finished()) throw ConfigError("matrix game episode already finished");
  for (int a : actions) {
    if (a != 0 && a != 1) throw ConfigError("matrix game actions must be 0 or 1");
  }
  const auto& cell = matrix_.payoffs[actions[0]][actions[1]];
  ++steps_;
  return {{cell.first, cell.second}, actions, finished()};
}

std::vector<double> joint_action_features(std::array<int, 2> joint) {
  return {static_cast<double>(joint[0]), static_cast<double>(joint[1])};
}

}  // namespace qmarl::envs
