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

#include "doctest.h"
#include "qmarl/agent.hpp"

using namespace qmarl;
using namespace qmarl::agent;
using qmarl::qnet::Head;
using qmarl::qnet::ParamGroup;

namespace {

// Q = p * x for a single feature and a single one-slot head.
class ScalarNet final : public qnet::QFunction {
 public:
  explicit ScalarNet(double p) : params_{p} {}
  std::size_t observation_size() const override { return 1; }
  std::size_t output_size() const override { return 1; }
  const std::vector<Head>& heads() const override { return heads_; }
  std::vector<double> forward(std::span<const double> obs) const override { return {params_[0] * obs[0]}; }
  std::vector<double> backward(std::span<const double> obs, std::span<const double> upstream,
                               std::span<double> grad) const override {
    grad[0] += upstream[0] * obs[0];
    return forward(obs);
  }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  std::span<const ParamGroup> parameter_groups() const override { return groups_; }
  std::unique_ptr<qnet::QFunction> clone() const override { return std::make_unique<ScalarNet>(*this); }
  nlohmann::json to_json() const override { return {{"p", params_[0]}}; }

 private:
  std::vector<double> params_;
  std::vector<ParamGroup> groups_{ParamGroup::Main};
  std::vector<Head> heads_{{"env", 0, 1}};
};

const std::vector<Head> kEnvHead{{"env", 0, 2}};

Transition make_transition(std::vector<double> obs, std::vector<std::size_t> actions, double r,
                           std::vector<double> next, bool terminal) {
  return Transition{std::move(obs), std::move(actions), r, std::move(next), terminal};
}

}  // namespace

TEST_CASE("greedy selection and tie-break") {
  Rng rng(0);
  const std::vector<double> q{0.2, 0.9};
  CHECK(select_actions(kEnvHead, q, 0.0, rng) == std::vector<std::size_t>{1});
  const std::vector<double> tie{0.5, 0.5};
  CHECK(select_actions(kEnvHead, tie, 0.0, rng) == std::vector<std::size_t>{0});
  CHECK(greedy_actions(kEnvHead, tie) == std::vector<std::size_t>{0});
}

TEST_CASE("epsilon = 1 is uniform") {
  Rng rng(11);
  const std::vector<double> q{0.0, 10.0};
  const int draws = 10000;
  int ones = 0;
  for (int i = 0; i < draws; ++i) ones += static_cast<int>(select_actions(kEnvHead, q, 1.0, rng)[0]);
  const double freq = static_cast<double>(ones) / draws;
  CHECK(freq == doctest::Approx(0.5).epsilon(0.04));
  // Chi-squared with one degree of freedom; 6.635 is the p = 0.01 critical value.
  const double expected = draws / 2.0;
  const double chi2 = std::pow(ones - expected, 2) / expected + std::pow(draws - ones - expected, 2) / expected;
  CHECK(chi2 < 6.635);
}

TEST_CASE("heads select independently") {
  const std::vector<Head> heads{{"env", 0, 2}, {"gift", 2, 2}};
  std::vector<double> q{0.1, 0.7, 0.4, 0.3};
  Rng rng(5);
  CHECK(select_actions(heads, q, 0.0, rng) == std::vector<std::size_t>{1, 0});
  for (double v : {-3.0, 0.0, 0.65, 0.71, 9.0}) {
    q[3] = v;
    CHECK(greedy_actions(heads, q)[0] == 1);
  }
  // Exploration on one head leaves the other's marginal unchanged.
  int gift_ones = 0;
  const int draws = 4000;
  std::vector<double> q2{0.1, 0.7, 0.4, 0.3};
  for (int i = 0; i < draws; ++i) gift_ones += static_cast<int>(select_actions(heads, q2, 0.5, rng)[1]);
  CHECK(gift_ones / double(draws) == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("td targets") {
  SUBCASE("bootstrapped") {
    const std::vector<double> next{0.5, 0.1};
    CHECK(td_targets(1.0, next, kEnvHead, 0.9, false)[0] == doctest::Approx(1.45));
  }
  SUBCASE("terminal") {
    const std::vector<double> next{100.0, 100.0};
    CHECK(td_targets(2.0, next, kEnvHead, 0.9, true)[0] == 2.0);
  }
  SUBCASE("myopic") {
    const std::vector<double> next{7.0, -3.0};
    CHECK(td_targets(0.25, next, kEnvHead, 0.0, false)[0] == 0.25);
  }
  SUBCASE("one target per head, same reward") {
    const std::vector<Head> heads{{"env", 0, 2}, {"gift", 2, 2}};
    const std::vector<double> next{1.0, 3.0, -2.0, -1.0};
    const auto t = td_targets(1.0, next, heads, 0.5, false);
    REQUIRE(t.size() == 2);
    CHECK(t[0] == doctest::Approx(2.5));
    CHECK(t[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("epsilon schedules") {
  EpsilonSchedule linear{EpsilonSchedule::Kind::Linear, 0.3, 0.0, 2000};
  CHECK(epsilon_at(linear, 0) == doctest::Approx(0.3));
  CHECK(epsilon_at(linear, 1000) == doctest::Approx(0.15));
  CHECK(epsilon_at(linear, 2000) == doctest::Approx(0.0));
  CHECK(epsilon_at(linear, 5000) == doctest::Approx(0.0));

  EpsilonSchedule expo{EpsilonSchedule::Kind::Exponential, 1.0, 0.02, 600};
  CHECK(epsilon_at(expo, 0) == doctest::Approx(1.0));
  CHECK(std::pow(0.95, 100) < 0.02);
  CHECK(epsilon_at(expo, 600) == doctest::Approx(0.02));
  CHECK(epsilon_at(expo, 300) == doctest::Approx(std::pow(0.95, 50)));

  for (const auto& s : {linear, expo}) {
    const double lo = std::min(s.initial, s.final);
    const double hi = std::max(s.initial, s.final);
    for (std::size_t e = 0; e < 3000; e += 7) {
      const double eps = s.at(e);
      CHECK(eps >= lo);
      CHECK(eps <= hi);
    }
  }
}

TEST_CASE("replay buffer is a bounded FIFO") {
  ReplayBuffer buf(3);
  CHECK(buf.empty());
  for (int i = 0; i < 7; ++i) {
    buf.push(make_transition({double(i)}, {0}, i, {0}, false));
    CHECK(buf.size() <= buf.capacity());
  }
  REQUIRE(buf.size() == 3);
  CHECK(buf[0].reward == 4);
  CHECK(buf[1].reward == 5);
  CHECK(buf[2].reward == 6);
  Rng rng(9);
  const auto batch = buf.sample(20, rng);
  CHECK(batch.size() == 20);
  for (const auto* t : batch) CHECK(t->reward >= 4);
}

TEST_CASE("Adam matches a scalar hand computation") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam adam(1, cfg);
  std::vector<double> p{0.3};
  const std::vector<ParamGroup> groups{ParamGroup::Main};
  double m = 0, v = 0, ref = 0.3;
  const double grads[] = {0.8, -0.2, 1.5, 0.0, -0.7};
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    const std::vector<double> grad{g};
    adam.step(p, grad, groups);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    ref -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("output scales use their own learning rate") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.lr_scale = 0.1;
  Adam adam(2, cfg);
  std::vector<double> p{0.0, 0.0};
  const std::vector<double> g{1.0, 1.0};
  const std::vector<ParamGroup> groups{ParamGroup::Main, ParamGroup::OutputScale};
  adam.step(p, g, groups);
  CHECK(p[0] == doctest::Approx(-0.01));
  CHECK(p[1] == doctest::Approx(-0.1));
}

TEST_CASE("zero gradient is a no-op") {
  Adam adam(3, {});
  std::vector<double> p{0.1, -2.0, 5.0};
  const auto before = p;
  const std::vector<double> g(3, 0.0);
  const std::vector<ParamGroup> groups(3, ParamGroup::Main);
  adam.step(p, g, groups);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p[i] - before[i]) <= 1e-12);

  // A transition whose prediction already equals its target.
  TrainingConfig tc;
  tc.gamma = 0.9;
  Agent agent(std::make_unique<ScalarNet>(0.5), tc);
  agent.remember(make_transition({2.0}, {0}, 1.0, {0.0}, true));
  Rng rng(1);
  agent.train_episode(rng);
  CHECK(std::abs(agent.net().parameters()[0] - 0.5) <= 1e-12);
}

TEST_CASE("one training step on a scalar net matches Adam by hand") {
  TrainingConfig tc;
  tc.n_minibatches = 1;
  tc.batch_size = 1;
  tc.adam.lr = 0.01;
  Agent agent(std::make_unique<ScalarNet>(0.2), tc);
  agent.remember(make_transition({1.5}, {0}, 3.0, {0.0}, true));
  Rng rng(2);
  const double loss = agent.train_episode(rng);
  const double residual = 0.2 * 1.5 - 3.0;
  CHECK(loss == doctest::Approx(residual * residual));
  // First Adam step: the bias-corrected update is lr * g / (|g| + eps).
  const double g = 2 * residual * 1.5;
  CHECK(agent.net().parameters()[0] == doctest::Approx(0.2 - 0.01 * g / (std::abs(g) + 1e-8)).epsilon(1e-14));
}

TEST_CASE("minibatch gradient matches finite differences of the loss") {
  Rng rng(17);
  auto net = std::make_unique<qnet::QNetwork>(qnet::build_layout(qnet::ProtocolKind::GiftingZerosum, {2}));
  net->initialize(rng);
  TrainingConfig tc;
  Agent agent(std::move(net), tc);
  std::vector<Transition> ts;
  for (int i = 0; i < 4; ++i) {
    ts.push_back(make_transition({double(rng.below(2)), double(rng.below(2))}, {rng.below(2), rng.below(2)},
                                 rng.uniform(-1, 5), {double(rng.below(2)), double(rng.below(2))}, i == 3));
  }
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  std::vector<double> grad(agent.net().parameters().size());
  agent.minibatch_gradient(batch, grad);
  // The target is a function of the parameters too, but the TD gradient
  // treats it as a constant. Freeze the targets for the oracle.
  auto params = agent.net().parameters();
  std::vector<std::vector<double>> targets;
  for (const auto& t : ts) targets.push_back(td_targets(t.reward, t.next_obs, agent.net(), tc.gamma, t.terminal));
  auto frozen_loss = [&] {
    double loss = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto q = agent.net().forward(ts[i].obs);
      const auto& heads = agent.net().heads();
      for (std::size_t h = 0; h < heads.size(); ++h) {
        const double r = q[heads[h].offset + ts[i].actions[h]] - targets[i][h];
        loss += r * r / ts.size();
      }
    }
    return loss;
  };
  const double h = 1e-6;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double keep = params[j];
    params[j] = keep + h;
    const double up = frozen_loss();
    params[j] = keep - h;
    const double down = frozen_loss();
    params[j] = keep;
    CHECK(grad[j] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1));
  }
}

TEST_CASE("loss decreases on a repeated transition") {
  Rng rng(3);
  auto net = std::make_unique<qnet::QNetwork>(qnet::build_layout(qnet::ProtocolKind::Baseline));
  net->initialize(rng);
  TrainingConfig tc;
  tc.n_minibatches = 1;
  tc.batch_size = 1;
  tc.adam.lr = 0.01;
  Agent agent(std::move(net), tc);
  agent.remember(make_transition({1, 0}, {1}, 2.0, {0, 1}, true));
  const double first = agent.train_episode(rng);
  double last = first;
  for (int i = 0; i < 99; ++i) last = agent.train_episode(rng);
  CHECK(last < first);
  CHECK(last < 0.5 * first);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto trajectory = [] {
    Rng init(8);
    auto net = std::make_unique<qnet::QNetwork>(qnet::build_layout(qnet::ProtocolKind::Rial, {2}));
    net->initialize(init);
    Agent agent(std::move(net), TrainingConfig{});
    Rng rng(99);
    for (int i = 0; i < 12; ++i) {
      std::vector<double> obs(6), next(6);
      for (auto& o : obs) o = double(rng.below(2));
      for (auto& o : next) o = double(rng.below(2));
      agent.remember(make_transition(obs, {rng.below(2), rng.below(2), rng.below(2)}, rng.uniform(0, 5), next,
                                     false));
    }
    for (int e = 0; e < 5; ++e) agent.train_episode(rng);
    auto p = agent.net().parameters();
    return std::vector<double>(p.begin(), p.end());
  };
  CHECK(trajectory() == trajectory());
}

TEST_CASE("head count mismatch is rejected") {
  Rng rng(4);
  auto net = std::make_unique<qnet::QNetwork>(qnet::build_layout(qnet::ProtocolKind::Baseline));
  net->initialize(rng);
  Agent agent(std::move(net), TrainingConfig{});
  agent.remember(make_transition({1, 0}, {1, 0}, 2.0, {0, 1}, true));
  CHECK_THROWS_AS(agent.train_episode(rng), ConfigError);
}
