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

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "qmarl/agent.hpp"
#include "qmarl/comms.hpp"
#include "qmarl/metrics.hpp"

namespace qmarl::metrics {

EpisodeAccumulator::EpisodeAccumulator(std::size_t episode, bool track_gifts) : track_gifts_(track_gifts) {
  record_.episode = episode;
}

void EpisodeAccumulator::accumulate(const StepData& step) {
  ++steps_;
  record_.collective += step.raw[0] + step.raw[1];
  record_.inequality += std::abs(step.raw[0] - step.raw[1]);
  if (step.joint_action && (*step.joint_action)[0] == step.cooperative_action &&
      (*step.joint_action)[1] == step.cooperative_action) {
    ++record_.mutual_cooperation;
  }
  if (track_gifts_ && step.gifts) gifts_ += (*step.gifts)[0] + (*step.gifts)[1];
  for (std::size_t i = 0; i < 2; ++i) {
    record_.raw[i] += step.raw[i];
    record_.shaped[i] += step.shaped[i];
  }
}

EpisodeRecord EpisodeAccumulator::finish() const {
  EpisodeRecord out = record_;
  if (track_gifts_) {
    out.gifting_frequency = steps_ ? static_cast<double>(gifts_) / static_cast<double>(2 * steps_) : 0.0;
  }
  out.token_mean = token_mean_;
  out.epsilon = epsilon_;
  return out;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_row(const EpisodeRecord& r) {
  std::string row;
  row += std::to_string(r.episode);
  row += ',' + format_number(r.collective);
  row += ',' + std::to_string(r.mutual_cooperation);
  row += ',' + format_number(r.inequality);
  row += ',' + (r.gifting_frequency ? format_number(*r.gifting_frequency) : std::string());
  row += ',' + (r.token_mean ? format_number(*r.token_mean) : std::string());
  row += ',' + format_number(r.epsilon);
  for (double v : r.raw) row += ',' + format_number(v);
  for (double v : r.shaped) row += ',' + format_number(v);
  return row;
}

void write_episode_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  out << kEpisodeCsvHeader << '\n';
  for (const auto& r : records) out << format_row(r) << '\n';
}

std::vector<EpisodeRecord> read_episode_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeCsvHeader) {
    throw InputError(source + ": unexpected episode CSV header");
  }
  std::vector<EpisodeRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 11) {
      throw InputError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, expected 11");
    }
    try {
      EpisodeRecord r;
      r.episode = std::stoul(fields[0]);
      r.collective = std::stod(fields[1]);
      r.mutual_cooperation = std::stoi(fields[2]);
      r.inequality = std::stod(fields[3]);
      if (!fields[4].empty()) r.gifting_frequency = std::stod(fields[4]);
      if (!fields[5].empty()) r.token_mean = std::stod(fields[5]);
      r.epsilon = std::stod(fields[6]);
      r.raw = {std::stod(fields[7]), std::stod(fields[8])};
      r.shaped = {std::stod(fields[9]), std::stod(fields[10])};
      out.push_back(r);
    } catch (const std::exception&) {
      throw InputError(source + ": malformed number on line " + std::to_string(line_no));
    }
  }
  return out;
}

std::vector<std::vector<double>> evaluation_observations(qnet::ProtocolKind protocol) {
  std::vector<std::vector<double>> out;
  for (int a0 = 0; a0 < 2; ++a0) {
    for (int a1 = 0; a1 < 2; ++a1) {
      const double x0 = a0;
      const double x1 = a1;
      switch (protocol) {
        case qnet::ProtocolKind::Rial:
          for (int m = 0; m < 16; ++m) {
            out.push_back({x0, x1, double((m >> 3) & 1), double((m >> 2) & 1), double((m >> 1) & 1),
                           double(m & 1)});
          }
          break;
        case qnet::ProtocolKind::GiftingBudget:
          for (double budget : {0.0, 5.0, 10.0}) out.push_back({x0, x1, budget});
          break;
        case qnet::ProtocolKind::HarvestIql:
          throw ConfigError("final policy evaluation is defined for matrix games only");
        default:
          out.push_back({x0, x1});
      }
    }
  }
  return out;
}

double final_policy_eval(const qnet::QFunction& net, qnet::ProtocolKind protocol, int cooperative_action) {
  const auto observations = evaluation_observations(protocol);
  const auto env = qnet::find_head(net.heads(), "env");
  if (!env) throw ConfigError("network has no env head");
  std::size_t cooperative = 0;
  for (const auto& obs : observations) {
    const auto q = net.forward(obs);
    const auto actions = agent::greedy_actions(net.heads(), q);
    if (static_cast<int>(actions[*env]) == cooperative_action) ++cooperative;
  }
  return static_cast<double>(cooperative) / static_cast<double>(observations.size());
}

std::array<int, 2> greedy_selfplay(const qnet::QFunction& agent0, const qnet::QFunction& agent1,
                                   qnet::ProtocolKind protocol, std::array<int, 2> start, std::size_t steps,
                                   double budget) {
  const std::array<const qnet::QFunction*, 2> nets{&agent0, &agent1};
  std::array<int, 2> joint = start;
  comms::RialChannel channel;
  channel.reset({comms::Message{0, 0}, comms::Message{0, 0}});
  for (std::size_t t = 0; t < steps; ++t) {
    std::array<int, 2> next{};
    std::array<comms::Message, 2> sent{};
    for (std::size_t i = 0; i < 2; ++i) {
      std::vector<double> obs;
      if (protocol == qnet::ProtocolKind::Rial) {
        obs = channel.observation(i, joint[i], joint[1 - i]);
      } else {
        obs = {double(joint[0]), double(joint[1])};
        if (protocol == qnet::ProtocolKind::GiftingBudget) obs.push_back(budget);
      }
      const auto& heads = nets[i]->heads();
      const auto actions = agent::greedy_actions(heads, nets[i]->forward(obs));
      next[i] = static_cast<int>(actions[*qnet::find_head(heads, "env")]);
      if (protocol == qnet::ProtocolKind::Rial) {
        sent[i] = {static_cast<int>(actions[*qnet::find_head(heads, "msg_bit_0")]),
                   static_cast<int>(actions[*qnet::find_head(heads, "msg_bit_1")])};
      }
    }
    joint = next;
    channel.deliver(sent);
  }
  return joint;
}

bool converges_to_mutual_defection(const qnet::QFunction& agent0, const qnet::QFunction& agent1,
                                   qnet::ProtocolKind protocol) {
  for (int a0 = 0; a0 < 2; ++a0) {
    for (int a1 = 0; a1 < 2; ++a1) {
      const auto end = greedy_selfplay(agent0, agent1, protocol, {a0, a1});
      if (end[0] != 1 || end[1] != 1) return false;
    }
  }
  return true;
}

}  // namespace qmarl::metrics
