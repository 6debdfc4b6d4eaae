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
#include <numeric>
#include <sstream>

#include "qmarl/experiment.hpp"

namespace qmarl::experiment {

namespace {

using qnet::ProtocolKind;

comms::MediateVariant mediate_variant(ProtocolKind p) {
  switch (p) {
    case ProtocolKind::AutoMate:
      return comms::MediateVariant::AutoMate;
    case ProtocolKind::MediateI:
      return comms::MediateVariant::MediateI;
    case ProtocolKind::MediateS:
      return comms::MediateVariant::MediateS;
    default:
      throw ConfigError("not a MEDIATE protocol");
  }
}

agent::TrainingConfig training_config(const ExperimentConfig& c) {
  agent::TrainingConfig t;
  t.gamma = c.gamma;
  t.n_minibatches = c.n_minibatches;
  t.batch_size = c.batch_size;
  t.buffer_capacity = c.buffer_capacity;
  t.adam.lr = c.lr;
  t.adam.lr_scale = c.lr_scale;
  return t;
}

std::unique_ptr<qnet::QFunction> make_net(const ExperimentConfig& c, Rng& rng) {
  if (c.env == EnvKind::Harvest && c.harvest_network == "classical") {
    auto net = qnet::build_classical_baseline(c.classical_hidden);
    net.initialize(rng);
    return std::make_unique<qnet::ClassicalNet>(std::move(net));
  }
  auto net = qnet::build_layout(c.protocol, {c.n_layers, {0.0, c.gift_budget > 0.0 ? c.gift_budget : 1.0}});
  net.initialize(rng);
  return std::make_unique<qnet::QNetwork>(std::move(net));
}

std::size_t head_index(const qnet::QFunction& net, std::string_view name) {
  const auto idx = qnet::find_head(net.heads(), name);
  if (!idx) throw ConfigError("network has no '" + std::string(name) + "' head");
  return *idx;
}

struct MatrixRun {
  MatrixRun(const ExperimentConfig& c, std::uint64_t s, SeedOutcome& o) : config(c), seed(s), out(o) {}

  const ExperimentConfig& config;
  std::uint64_t seed;
  SeedOutcome& out;

  ProtocolKind protocol = config.protocol;
  envs::MatrixGame game{config.payoff_matrix(), config.steps_per_episode};
  Rng env_rng = Rng::for_role(seed, "env");
  std::array<Rng, 2> agent_rng{Rng::for_role(seed, "agent0"), Rng::for_role(seed, "agent1")};
  Rng protocol_rng = Rng::for_role(seed, "protocol");
  std::vector<agent::Agent> agents;

  bool mate = qnet::is_mate_family(protocol);
  bool mediate = qnet::is_mediate_family(protocol);
  bool gifting = qnet::is_gifting(protocol);
  bool rial = protocol == ProtocolKind::Rial;

  std::array<comms::MediateState, 2> mediate_states{comms::MediateState(config.mediate),
                                                    comms::MediateState(config.mediate)};
  double consensus = config.mediate.initial_token;
  std::array<comms::GiftingState, 2> gift_states{};
  comms::RialChannel channel;

  void setup() {
    for (std::size_t i = 0; i < 2; ++i) agents.emplace_back(make_net(config, agent_rng[i]), training_config(config));
    if (mediate && protocol != ProtocolKind::AutoMate) {
      std::vector<double> locals{mediate_states[0].local_token(), mediate_states[1].local_token()};
      consensus = comms::mediate_consensus(locals, protocol_rng, config.share_range).consensus.front();
      comms::mediate_apply_variant(mediate_variant(protocol), mediate_states, consensus);
    }
    for (auto& g : gift_states) {
      g.variant = protocol == ProtocolKind::GiftingBudget ? comms::GiftingVariant::Budget
                                                          : comms::GiftingVariant::Zerosum;
      g.gift_value = config.gift_value;
      g.initial_budget = config.gift_budget;
    }
  }

  std::vector<double> observe(std::size_t i, const std::array<int, 2>& joint) const {
    if (rial) return channel.observation(i, joint[i], joint[1 - i]);
    std::vector<double> obs{double(joint[0]), double(joint[1])};
    if (protocol == ProtocolKind::GiftingBudget) obs.push_back(gift_states[i].budget);
    return obs;
  }

  std::array<double, 2> exchange_tokens() const {
    if (!mediate) return {config.mate_token, config.mate_token};
    const auto t = comms::mediate_exchange_tokens(mediate_variant(protocol), mediate_states, consensus);
    return {t[0], t[1]};
  }

  void episode(std::size_t e) {
    const double eps = config.epsilon_schedule().at(e);
    const auto first = game.reset(env_rng);
    if (rial) channel.reset(env_rng);
    for (auto& g : gift_states) g.reset_episode();
    const auto tokens = exchange_tokens();

    std::array<std::array<int, 2>, 2> last = first;
    std::array<double, 2> raw_sum{};
    metrics::EpisodeAccumulator acc(e, gifting);
    acc.set_epsilon(eps);
    if (mediate) acc.set_token_mean(0.5 * (tokens[0] + tokens[1]));

    for (std::size_t t = 0; t < config.steps_per_episode; ++t) {
      std::array<std::vector<double>, 2> obs;
      std::array<std::vector<double>, 2> q;
      std::array<std::vector<std::size_t>, 2> actions;
      std::array<int, 2> joint{};
      std::array<bool, 2> gifts{};
      std::array<comms::Message, 2> sent{};
      for (std::size_t i = 0; i < 2; ++i) {
        const auto& net = agents[i].net();
        obs[i] = observe(i, last[i]);
        q[i] = net.forward(obs[i]);
        actions[i] = agent::select_actions(net.heads(), q[i], eps, agent_rng[i]);
        joint[i] = static_cast<int>(actions[i][head_index(net, "env")]);
        if (gifting) gifts[i] = actions[i][head_index(net, "gift")] == 1;
        if (rial) {
          sent[i] = {static_cast<int>(actions[i][head_index(net, "msg_bit_0")]),
                     static_cast<int>(actions[i][head_index(net, "msg_bit_1")])};
        }
      }

      const auto step = game.step(joint);
      if (rial) channel.deliver(sent);
      const bool terminal = t + 1 == config.steps_per_episode;
      std::array<double, 2> raw = step.rewards;
      std::array<double, 2> shaped = raw;
      std::array<std::vector<double>, 2> next_obs;
      for (std::size_t i = 0; i < 2; ++i) {
        last[i] = step.joint_action;
        raw_sum[i] += raw[i];
      }
      for (std::size_t i = 0; i < 2; ++i) next_obs[i] = observe(i, last[i]);

      std::array<double, 2> mi_values{};
      comms::MateOutcome mate_out;
      if (gifting) {
        const auto g = comms::gifting_apply(gifts, gift_states, raw);
        shaped = {g[0], g[1]};
        // The budget feature reflects this step's spending.
        for (std::size_t i = 0; i < 2; ++i) next_obs[i] = observe(i, last[i]);
      } else if (mate) {
        const bool td = protocol != ProtocolKind::MateRew;
        std::array<double, 2> v_obs{};
        std::array<double, 2> v_next{};
        std::array<double, 2> r_bar{};
        for (std::size_t i = 0; i < 2; ++i) {
          r_bar[i] = raw_sum[i] / static_cast<double>(t + 1);
          if (!td) continue;
          const auto& net = agents[i].net();
          v_obs[i] = comms::state_value(comms::env_head_values(net, q[i]), eps, config.value_estimator);
          const auto q_next = net.forward(next_obs[i]);
          v_next[i] = comms::state_value(comms::env_head_values(net, q_next), eps, config.value_estimator);
        }
        const comms::MiFunction mi = [&](std::size_t i, double r) {
          return td ? comms::mi_td(r, v_obs[i], v_next[i], config.gamma) : comms::mi_rew(r, r_bar[i]);
        };
        for (std::size_t i = 0; i < 2; ++i) mi_values[i] = mi(i, raw[i]);
        mate_out = comms::mate_exchange(raw, tokens, tokens, mi);
        shaped = {mate_out.shaped[0], mate_out.shaped[1]};
        if (mediate) {
          for (std::size_t i = 0; i < 2; ++i) {
            mediate_states[i].record_value(v_obs[i]);
            mediate_states[i].observe_reward(raw[i]);
          }
        }
      }

      for (std::size_t i = 0; i < 2; ++i) {
        agents[i].remember({obs[i], actions[i], shaped[i], next_obs[i], terminal});
      }

      metrics::StepData data;
      data.raw = raw;
      data.shaped = shaped;
      data.joint_action = joint;
      if (gifting) data.gifts = gifts;
      acc.accumulate(data);

      if (config.trace) {
        for (std::size_t i = 0; i < 2; ++i) {
          std::ostringstream line;
          line << "episode=" << e << " step=" << t << " agent=" << i << " action=" << joint[i];
          if (mate) {
            line << " mi=" << metrics::format_number(mi_values[i]) << " token=" << metrics::format_number(tokens[i])
                 << " requests_sent=" << mate_out.requests_sent[i]
                 << " requests_received=" << mate_out.requests_received[i]
                 << " responses_pos=" << mate_out.positive_responses_sent[i]
                 << " responses_neg=" << mate_out.negative_responses_sent[i];
          }
          if (gifting) line << " gift=" << gifts[i] << " budget=" << metrics::format_number(gift_states[i].budget);
          if (rial) line << " msg=" << sent[i][0] << sent[i][1];
          line << " raw=" << metrics::format_number(raw[i]) << " shaped=" << metrics::format_number(shaped[i]);
          out.trace.push_back(line.str());
        }
      }
    }
    out.records.push_back(acc.finish());

    for (std::size_t i = 0; i < 2; ++i) agents[i].train_episode(agent_rng[i]);

    if (mediate && (e + 1) % config.mediate.epoch_length == 0) {
      consensus =
          comms::mediate_epoch(mediate_variant(protocol), mediate_states, consensus, protocol_rng, config.share_range);
    }
  }

  void finish() {
    const int cooperative = 0;
    std::array<double, 2> fractions{};
    for (std::size_t i = 0; i < 2; ++i) {
      fractions[i] = metrics::final_policy_eval(agents[i].net(), protocol, cooperative);
    }
    out.coop_fraction = fractions;
    out.mutual_defection = metrics::converges_to_mutual_defection(agents[0].net(), agents[1].net(), protocol);
    for (std::size_t i = 0; i < 2; ++i) out.nets[i] = agents[i].net().clone();
  }
};

void simulate_harvest(const ExperimentConfig& c, std::uint64_t seed, SeedOutcome& out) {
  Rng env_rng = Rng::for_role(seed, "env");
  std::array<Rng, 2> agent_rng{Rng::for_role(seed, "agent0"), Rng::for_role(seed, "agent1")};
  auto map = c.harvest_map.empty() ? envs::HarvestMap::default_map() : envs::HarvestMap::load(c.harvest_map);
  envs::HarvestConfig hc;
  hc.episode_length = c.steps_per_episode;
  envs::HarvestGame game(std::move(map), hc);

  std::vector<agent::Agent> agents;
  for (std::size_t i = 0; i < 2; ++i) agents.emplace_back(make_net(c, agent_rng[i]), training_config(c));
  const auto schedule = c.epsilon_schedule();

  for (std::size_t e = 0; e < c.episodes; ++e) {
    const double eps = schedule.at(e);
    game.reset(env_rng);
    metrics::EpisodeAccumulator acc(e, false);
    acc.set_epsilon(eps);
    std::array<std::vector<double>, 2> obs{game.observe(0), game.observe(1)};
    for (std::size_t t = 0; t < c.steps_per_episode; ++t) {
      std::array<std::vector<std::size_t>, 2> actions;
      std::array<int, 2> joint{};
      for (std::size_t i = 0; i < 2; ++i) {
        actions[i] = agents[i].act(obs[i], eps, agent_rng[i]);
        joint[i] = static_cast<int>(actions[i][0]);
      }
      const auto step = game.step(joint, env_rng);
      std::array<std::vector<double>, 2> next{game.observe(0), game.observe(1)};
      for (std::size_t i = 0; i < 2; ++i) {
        agents[i].remember({obs[i], actions[i], step.rewards[i], next[i], step.done});
      }
      metrics::StepData data;
      data.raw = step.rewards;
      data.shaped = step.rewards;
      acc.accumulate(data);
      out.total_apples += step.rewards[0] + step.rewards[1];
      if (c.trace) {
        std::ostringstream line;
        line << "episode=" << e << " step=" << t << " actions=" << joint[0] << "," << joint[1]
             << " rewards=" << step.rewards[0] << "," << step.rewards[1] << " apples=" << game.apple_count();
        out.trace.push_back(line.str());
      }
      obs = std::move(next);
    }
    out.records.push_back(acc.finish());
    for (std::size_t i = 0; i < 2; ++i) agents[i].train_episode(agent_rng[i]);
  }
  for (std::size_t i = 0; i < 2; ++i) out.nets[i] = agents[i].net().clone();
}

}  // namespace

SeedOutcome simulate(const ExperimentConfig& config, std::uint64_t seed) {
  validate(config);
  SeedOutcome out;
  out.seed = seed;
  out.records.reserve(config.episodes);
  if (config.env == EnvKind::Harvest) {
    simulate_harvest(config, seed, out);
    return out;
  }
  MatrixRun run(config, seed, out);
  run.setup();
  for (std::size_t e = 0; e < config.episodes; ++e) run.episode(e);
  run.finish();
  return out;
}

}  // namespace qmarl::experiment
