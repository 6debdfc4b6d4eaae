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

#include <algorithm>
#include <cmath>

#include "qmarl/agent.hpp"

namespace qmarl::agent {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<const Transition*> out;
  if (items_.empty()) return out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[rng.below(items_.size())]);
  return out;
}

double EpsilonSchedule::at(std::size_t episode) const {
  const double e = static_cast<double>(episode);
  const double lo = std::min(initial, final);
  const double hi = std::max(initial, final);
  double value = 0.0;
  if (kind == Kind::Linear) {
    value = horizon > 0.0 ? initial * (1.0 - e / horizon) : final;
    value = std::max(value, final);
  } else {
    value = initial * std::pow(0.95, 100.0 * e / horizon);
    value = std::max(value, final);
  }
  return std::clamp(value, lo, hi);
}

double epsilon_at(const EpsilonSchedule& schedule, std::size_t episode) { return schedule.at(episode); }

Adam::Adam(std::size_t n_params, AdamConfig config)
    : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad,
                std::span<const qnet::ParamGroup> groups) {
  if (params.size() != m_.size() || grad.size() != m_.size() || groups.size() != m_.size()) {
    throw ConfigError("Adam: parameter/gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
    const double lr = groups[i] == qnet::ParamGroup::OutputScale ? config_.lr_scale : config_.lr;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  }
}

std::vector<std::size_t> greedy_actions(std::span<const qnet::Head> heads, std::span<const double> q) {
  std::vector<std::size_t> out;
  out.reserve(heads.size());
  for (const auto& h : heads) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < h.size; ++s) {
      if (q[h.offset + s] > q[h.offset + best]) best = s;
    }
    out.push_back(best);
  }
  return out;
}

std::vector<std::size_t> select_actions(std::span<const qnet::Head> heads, std::span<const double> q,
                                        double epsilon, Rng& rng) {
  auto actions = greedy_actions(heads, q);
  // Draw per head even when epsilon is 0 so the stream position does not
  // depend on the schedule.
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const bool explore = rng.uniform() < epsilon;
    const std::size_t random_slot = rng.below(heads[h].size);
    if (explore) actions[h] = random_slot;
  }
  return actions;
}

std::vector<std::size_t> select_actions(const qnet::QFunction& net, std::span<const double> obs,
                                        double epsilon, Rng& rng) {
  return select_actions(net.heads(), net.forward(obs), epsilon, rng);
}

std::vector<double> td_targets(double reward, std::span<const double> next_q,
                               std::span<const qnet::Head> heads, double gamma, bool terminal) {
  std::vector<double> out;
  out.reserve(heads.size());
  for (const auto& h : heads) {
    if (terminal) {
      out.push_back(reward);
      continue;
    }
    const auto first = next_q.begin() + static_cast<std::ptrdiff_t>(h.offset);
    const double best = *std::max_element(first, first + static_cast<std::ptrdiff_t>(h.size));
    out.push_back(reward + gamma * best);
  }
  return out;
}

std::vector<double> td_targets(double reward, std::span<const double> next_obs,
                               const qnet::QFunction& net, double gamma, bool terminal) {
  if (terminal) return td_targets(reward, std::span<const double>{}, net.heads(), gamma, true);
  const auto q = net.forward(next_obs);
  return td_targets(reward, q, net.heads(), gamma, false);
}

Agent::Agent(std::unique_ptr<qnet::QFunction> net, TrainingConfig config)
    : net_(std::move(net)),
      config_(config),
      buffer_(config.buffer_capacity),
      adam_(net_->parameters().size(), config.adam) {
  if (config_.gamma < 0.0 || config_.gamma >= 1.0) throw ConfigError("gamma must be in [0, 1)");
}

double Agent::minibatch_gradient(std::span<const Transition* const> batch, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  const auto& heads = net_->heads();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<double> upstream(net_->output_size());
  double loss = 0.0;
  for (const Transition* t : batch) {
    if (t->actions.size() != heads.size()) throw ConfigError("transition head count mismatch");
    const auto targets = td_targets(t->reward, t->next_obs, *net_, config_.gamma, t->terminal);
    // Q(obs) is needed before the upstream gradient is known; the adjoint
    // pass returns it, so run forward once for the residuals and then the
    // backward pass with the final coefficients.
    const auto q = net_->forward(t->obs);
    std::fill(upstream.begin(), upstream.end(), 0.0);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const std::size_t slot = heads[h].offset + t->actions[h];
      const double residual = q[slot] - targets[h];
      loss += residual * residual * inv_batch;
      upstream[slot] += 2.0 * residual * inv_batch;
    }
    net_->backward(t->obs, upstream, grad);
  }
  return loss;
}

double Agent::train_episode(Rng& rng) {
  if (buffer_.empty()) return 0.0;
  std::vector<double> grad(net_->parameters().size());
  double total = 0.0;
  for (std::size_t b = 0; b < config_.n_minibatches; ++b) {
    const auto batch = buffer_.sample(config_.batch_size, rng);
    total += minibatch_gradient(batch, grad);
    adam_.step(net_->parameters(), grad, net_->parameter_groups());
  }
  return config_.n_minibatches ? total / static_cast<double>(config_.n_minibatches) : 0.0;
}

}  // namespace qmarl::agent
