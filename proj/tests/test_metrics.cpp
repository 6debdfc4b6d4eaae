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
#include <functional>
#include <sstream>

#include "doctest.h"
#include "qmarl/envs.hpp"
#include "qmarl/metrics.hpp"

using namespace qmarl;
using namespace qmarl::metrics;
using qmarl::qnet::Head;
using qmarl::qnet::ProtocolKind;

namespace {

// Fixed-policy stand-in: env Q-values come from a rule over the observation.
class RuleNet final : public qnet::QFunction {
 public:
  using Rule = std::function<std::vector<double>(std::span<const double>)>;
  RuleNet(std::size_t n_obs, std::vector<Head> heads, Rule rule)
      : n_obs_(n_obs), heads_(std::move(heads)), rule_(std::move(rule)) {}
  std::size_t observation_size() const override { return n_obs_; }
  std::size_t output_size() const override {
    std::size_t n = 0;
    for (const auto& h : heads_) n += h.size;
    return n;
  }
  const std::vector<Head>& heads() const override { return heads_; }
  std::vector<double> forward(std::span<const double> obs) const override {
    auto q = rule_(obs);
    q.resize(output_size(), 0.0);
    return q;
  }
  std::vector<double> backward(std::span<const double> obs, std::span<const double>,
                               std::span<double>) const override {
    return forward(obs);
  }
  std::span<double> parameters() override { return {}; }
  std::span<const double> parameters() const override { return {}; }
  std::span<const qnet::ParamGroup> parameter_groups() const override { return {}; }
  std::unique_ptr<qnet::QFunction> clone() const override { return std::make_unique<RuleNet>(*this); }
  nlohmann::json to_json() const override { return {}; }

 private:
  std::size_t n_obs_;
  std::vector<Head> heads_;
  Rule rule_;
};

const std::vector<Head> kEnv{{"env", 0, 2}};

RuleNet always(int action) {
  return RuleNet(2, kEnv, [action](std::span<const double>) {
    return action == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1};
  });
}

// Cooperates iff the opponent cooperated last step.
RuleNet tit_for_tat() {
  return RuleNet(2, kEnv, [](std::span<const double> obs) {
    return obs[1] == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1};
  });
}

}  // namespace

TEST_CASE("step accumulation") {
  const auto ipd = envs::PayoffMatrix::defaults(envs::DilemmaKind::PrisonersDilemma);
  EpisodeAccumulator acc(3, false);
  auto play = [&](int a, int b) {
    const auto [r0, r1] = ipd.payoffs[a][b];
    StepData d;
    d.raw = {r0, r1};
    d.shaped = {r0 + 1, r1 - 1};
    d.joint_action = std::array<int, 2>{a, b};
    acc.accumulate(d);
  };
  play(0, 0);
  auto rec = acc.finish();
  CHECK(rec.collective == 6);
  CHECK(rec.mutual_cooperation == 1);
  CHECK(rec.inequality == 0);
  play(1, 0);
  rec = acc.finish();
  CHECK(rec.collective == 11);
  CHECK(rec.mutual_cooperation == 1);
  CHECK(rec.inequality == 5);
  CHECK(rec.episode == 3);
  CHECK_FALSE(rec.gifting_frequency.has_value());
  // C is computed from raw rewards only.
  CHECK(rec.collective == rec.raw[0] + rec.raw[1]);
  CHECK(rec.shaped == std::array<double, 2>{10, 1});
}

TEST_CASE("accumulator properties") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    EpisodeAccumulator acc(0, true);
    EpisodeAccumulator mirrored(0, true);
    int both_coop = 0;
    std::size_t gifts = 0;
    const int steps = 1 + int(rng.below(50));
    for (int t = 0; t < steps; ++t) {
      StepData d;
      d.raw = {double(rng.below(6)), double(rng.below(6))};
      const std::array<int, 2> joint{int(rng.below(2)), int(rng.below(2))};
      d.joint_action = joint;
      const std::array<bool, 2> g{rng.bernoulli(0.3), rng.bernoulli(0.6)};
      d.gifts = g;
      gifts += g[0] + g[1];
      both_coop += joint[0] == 0 && joint[1] == 0;
      acc.accumulate(d);
      StepData m = d;
      m.raw = {d.raw[1], d.raw[0]};
      m.joint_action = std::array<int, 2>{joint[1], joint[0]};
      m.gifts = std::array<bool, 2>{g[1], g[0]};
      mirrored.accumulate(m);
    }
    const auto rec = acc.finish();
    CHECK(rec.mutual_cooperation == both_coop);
    CHECK(rec.mutual_cooperation <= steps);
    CHECK(rec.inequality >= 0);
    CHECK(rec.inequality == mirrored.finish().inequality);
    CHECK(rec.collective == rec.raw[0] + rec.raw[1]);
    REQUIRE(rec.gifting_frequency.has_value());
    CHECK(*rec.gifting_frequency == doctest::Approx(double(gifts) / (2.0 * steps)));
    CHECK(*rec.gifting_frequency >= 0);
    CHECK(*rec.gifting_frequency <= 1);
  }
  EpisodeAccumulator same(0, false);
  for (int t = 0; t < 10; ++t) same.accumulate(StepData{{2, 2}, {2, 2}, std::nullopt, 0, std::nullopt});
  CHECK(same.finish().inequality == 0);
  CHECK(same.finish().mutual_cooperation == 0);
}

TEST_CASE("episode CSV round trip") {
  std::vector<EpisodeRecord> recs(3);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].episode = i;
    recs[i].collective = 0.1 * (i + 1) + 1.0 / 3.0;
    recs[i].mutual_cooperation = int(i * 7);
    recs[i].inequality = 2.5;
    recs[i].epsilon = 0.3 - 1e-17 * i;
    recs[i].raw = {1.0 / 7.0, 2};
    recs[i].shaped = {-0.5, 1e-300};
  }
  recs[1].gifting_frequency = 0.42;
  recs[2].token_mean = 0.123456789012345;
  std::ostringstream out;
  write_episode_csv(out, recs);
  const std::string text = out.str();
  CHECK(text.rfind(std::string(kEpisodeCsvHeader) + "\n", 0) == 0);
  std::istringstream in(text);
  const auto back = read_episode_csv(in, "memory");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].collective == recs[i].collective);
    CHECK(back[i].mutual_cooperation == recs[i].mutual_cooperation);
    CHECK(back[i].epsilon == recs[i].epsilon);
    CHECK(back[i].raw == recs[i].raw);
    CHECK(back[i].shaped == recs[i].shaped);
    CHECK(back[i].gifting_frequency == recs[i].gifting_frequency);
    CHECK(back[i].token_mean == recs[i].token_mean);
  }
  std::ostringstream again;
  write_episode_csv(again, back);
  CHECK(again.str() == text);

  std::istringstream bad("episode,C,FC\n0,1,2\n");
  CHECK_THROWS_AS(read_episode_csv(bad, "bad.csv"), InputError);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(3) == "3");
}

TEST_CASE("final policy evaluation") {
  CHECK(final_policy_eval(always(0), ProtocolKind::Baseline) == 1.0);
  CHECK(final_policy_eval(always(1), ProtocolKind::Baseline) == 0.0);
  CHECK(final_policy_eval(tit_for_tat(), ProtocolKind::MateTd) == 0.5);

  CHECK(evaluation_observations(ProtocolKind::Baseline).size() == 4);
  CHECK(evaluation_observations(ProtocolKind::Rial).size() == 64);
  const auto budget = evaluation_observations(ProtocolKind::GiftingBudget);
  CHECK(budget.size() == 12);
  for (const auto& o : budget) CHECK((o[2] == 0 || o[2] == 5 || o[2] == 10));

  Rng rng(19);
  auto net = qnet::build_layout(ProtocolKind::Rial);
  net.initialize(rng);
  const double f = final_policy_eval(net, ProtocolKind::Rial);
  CHECK(f == final_policy_eval(net, ProtocolKind::Rial));
  CHECK(f * 64 == doctest::Approx(std::round(f * 64)));
}

TEST_CASE("greedy self-play") {
  CHECK(converges_to_mutual_defection(always(1), always(1), ProtocolKind::Baseline));
  CHECK_FALSE(converges_to_mutual_defection(always(0), always(1), ProtocolKind::Baseline));
  // Two tit-for-tat agents started from mutual cooperation keep cooperating.
  CHECK_FALSE(converges_to_mutual_defection(tit_for_tat(), tit_for_tat(), ProtocolKind::Baseline));
  CHECK(greedy_selfplay(tit_for_tat(), tit_for_tat(), ProtocolKind::Baseline, {0, 0}) == std::array<int, 2>{0, 0});
  CHECK(greedy_selfplay(tit_for_tat(), tit_for_tat(), ProtocolKind::Baseline, {1, 1}) == std::array<int, 2>{1, 1});
}
