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

#include <cstddef>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "qmarl/common.hpp"
#include "qmarl/qnet.hpp"

/// Independent Q-learning: replay, multi-head epsilon-greedy, Adam on MSE TD loss.
namespace qmarl::agent {

struct Transition {
  std::vector<double> obs;
  /// Chosen slot index within each head (not a global output index).
  std::vector<std::size_t> actions;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;
};

/// Fixed-capacity FIFO; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  /// Uniform draws with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct EpsilonSchedule {
  enum class Kind { Linear, Exponential };
  Kind kind = Kind::Linear;
  double initial = 0.3;
  double final = 0.0;
  /// Linear: episodes until `final`. Exponential: maximum episode count.
  double horizon = 2000.0;

  /// Linear: initial * (1 - e/horizon), floored at final.
  /// Exponential: max(final, initial * 0.95^(100 e / horizon)).
  double at(std::size_t episode) const;
};

double epsilon_at(const EpsilonSchedule& schedule, std::size_t episode);

struct AdamConfig {
  double lr = 0.001;
  double lr_scale = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n_params, AdamConfig config);

  /// One update; the learning rate is chosen per entry by `groups`.
  void step(std::span<double> params, std::span<const double> grad,
            std::span<const qnet::ParamGroup> groups);

  std::size_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

/// Greedy slot per head; ties go to the lowest slot.
std::vector<std::size_t> greedy_actions(std::span<const qnet::Head> heads, std::span<const double> q);

/// Independently per head: uniform slot with probability epsilon, else greedy.
std::vector<std::size_t> select_actions(const qnet::QFunction& net, std::span<const double> obs,
                                        double epsilon, Rng& rng);
/// Same, from precomputed Q-values.
std::vector<std::size_t> select_actions(std::span<const qnet::Head> heads, std::span<const double> q,
                                        double epsilon, Rng& rng);

/// reward + gamma * max_head Q(next) per head, or reward alone when terminal.
std::vector<double> td_targets(double reward, std::span<const double> next_q,
                               std::span<const qnet::Head> heads, double gamma, bool terminal);
std::vector<double> td_targets(double reward, std::span<const double> next_obs,
                               const qnet::QFunction& net, double gamma, bool terminal);

struct TrainingConfig {
  double gamma = 0.9;
  std::size_t n_minibatches = 5;
  std::size_t batch_size = 5;
  std::size_t buffer_capacity = 50;
  AdamConfig adam{};
};

class Agent {
 public:
  Agent(std::unique_ptr<qnet::QFunction> net, TrainingConfig config);

  qnet::QFunction& net() { return *net_; }
  const qnet::QFunction& net() const { return *net_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const Adam& optimizer() const { return adam_; }
  const TrainingConfig& config() const { return config_; }

  std::vector<std::size_t> act(std::span<const double> obs, double epsilon, Rng& rng) const {
    return select_actions(*net_, obs, epsilon, rng);
  }
  void remember(Transition t) { buffer_.push(std::move(t)); }

  /// n_minibatches Adam steps on sum_heads (Q[chosen] - target)^2 / batch.
  /// Returns the mean minibatch loss; no-op (returns 0) on an empty buffer.
  double train_episode(Rng& rng);

  /// Loss and gradient for one minibatch without updating parameters.
  double minibatch_gradient(std::span<const Transition* const> batch, std::span<double> grad) const;

 private:
  std::unique_ptr<qnet::QFunction> net_;
  TrainingConfig config_;
  ReplayBuffer buffer_;
  Adam adam_;
};

}  // namespace qmarl::agent
