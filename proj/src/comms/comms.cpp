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
#include <limits>
#include <numeric>

#include "qmarl/comms.hpp"

namespace qmarl::comms {

double mi_rew(double r_hat, double r_bar) { return r_hat - r_bar; }

double state_value(std::span<const double> env_q, double epsilon, ValueEstimator estimator) {
  if (env_q.empty()) throw ConfigError("state_value on an empty head");
  const double best = *std::max_element(env_q.begin(), env_q.end());
  const double sum = std::accumulate(env_q.begin(), env_q.end(), 0.0);
  const double spread =
      estimator == ValueEstimator::Literal ? sum : sum / static_cast<double>(env_q.size());
  return (1.0 - epsilon) * best + epsilon * spread;
}

double mi_td(double r_hat, double v_obs, double v_next, double gamma) {
  return r_hat + gamma * v_next - v_obs;
}

std::span<const double> env_head_values(const qnet::QFunction& net, std::span<const double> q) {
  const auto idx = qnet::find_head(net.heads(), "env");
  if (!idx) throw ConfigError("network has no env head");
  const auto& h = net.heads()[*idx];
  return q.subspan(h.offset, h.size);
}

double mi_td(double r_hat, std::span<const double> obs, std::span<const double> next_obs,
             const qnet::QFunction& net, double gamma, double epsilon, ValueEstimator estimator) {
  const auto q_obs = net.forward(obs);
  const auto q_next = net.forward(next_obs);
  return mi_td(r_hat, state_value(env_head_values(net, q_obs), epsilon, estimator),
               state_value(env_head_values(net, q_next), epsilon, estimator), gamma);
}

MateOutcome mate_exchange(std::span<const double> raw_rewards, std::span<const double> request_tokens,
                          std::span<const double> response_tokens, const MiFunction& mi) {
  const std::size_t n = raw_rewards.size();
  if (request_tokens.size() != n || response_tokens.size() != n) {
    throw ConfigError("mate_exchange: token count must match agent count");
  }
  MateOutcome out;
  out.shaped.assign(raw_rewards.begin(), raw_rewards.end());
  out.request_credit.assign(n, 0.0);
  out.response_credit.assign(n, 0.0);
  out.requests_sent.assign(n, 0);
  out.requests_received.assign(n, 0);
  out.positive_responses_sent.assign(n, 0);
  out.negative_responses_sent.assign(n, 0);

  // Request phase completes for everyone before any response is evaluated.
  std::vector<bool> requesting(n, false);
  for (std::size_t i = 0; i < n; ++i) requesting[i] = mi(i, raw_rewards[i]) >= 0.0;

  constexpr double kNone = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> best_request(n, kNone);
  std::vector<double> worst_response(n, kNone);
  for (std::size_t i = 0; i < n; ++i) {
    if (!requesting[i]) continue;
    const double x = request_tokens[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      ++out.requests_sent[i];
      ++out.requests_received[j];
      if (std::isnan(best_request[j]) || x > best_request[j]) best_request[j] = x;
      // j answers i's request.
      const bool accept = mi(j, raw_rewards[j] + x) >= 0.0;
      const double y = accept ? response_tokens[j] : -response_tokens[j];
      ++(accept ? out.positive_responses_sent : out.negative_responses_sent)[j];
      if (std::isnan(worst_response[i]) || y < worst_response[i]) worst_response[i] = y;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.request_credit[i] = std::isnan(best_request[i]) ? 0.0 : best_request[i];
    out.response_credit[i] = std::isnan(worst_response[i]) ? 0.0 : worst_response[i];
    out.shaped[i] = raw_rewards[i] + out.request_credit[i] + out.response_credit[i];
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

MediateState::MediateState(MediateConfig config) : config_(config), local_(config.initial_token) {
  if (config_.initial_token < 0.0) throw ConfigError("MEDIATE initial token must be non-negative");
  if (config_.epoch_length == 0) throw ConfigError("MEDIATE epoch length must be positive");
}

void MediateState::set_local_token(double token) { local_ = std::max(token, 0.0); }

void MediateState::observe_reward(double r) {
  const double mag = std::abs(r);
  if (mag == 0.0) return;
  if (r_min_ == 0.0 || mag < r_min_) r_min_ = mag;
}

double MediateState::step_magnitude() const {
  if (!has_previous_ || previous_.empty() || current_.empty()) return 0.0;
  const double v_prev = median(previous_);
  if (std::abs(v_prev) < 1e-8) return 0.0;
  const double v_cur = median(current_);
  return config_.alpha * std::abs(v_prev - v_cur) / std::abs(v_prev) * r_min_;
}

double MediateState::epoch_update() {
  double applied = 0.0;
  if (has_previous_ && !previous_.empty() && !current_.empty()) {
    const double magnitude = step_magnitude();
    const double v_prev = median(previous_);
    const double v_cur = median(current_);
    const bool deteriorated = v_cur < v_prev;
    double sign = 0.0;
    if (v_cur != v_prev) {
      const bool increase = config_.direction == TokenDirection::IncreaseOnDeterioration ? deteriorated
                                                                                         : !deteriorated;
      sign = increase ? 1.0 : -1.0;
    }
    const double before = local_;
    local_ = std::max(0.0, local_ + sign * magnitude);
    applied = local_ - before;
  }
  if (!current_.empty()) {
    previous_ = std::move(current_);
    has_previous_ = true;
  }
  current_.clear();
  return applied;
}

ConsensusResult mediate_consensus(std::span<const double> local_tokens, Rng& rng, double share_range) {
  const std::size_t n = local_tokens.size();
  if (n < 2) throw ConfigError("consensus needs at least two agents");
  ConsensusResult out;
  out.shares.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double sent = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      out.shares[i][k] = rng.uniform(-share_range, share_range);
      sent += out.shares[i][k];
    }
    out.shares[i][i] = local_tokens[i] - sent;
  }
  // Agent k sums its kept share and every share addressed to it.
  out.partial_sums.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) out.partial_sums[k] += out.shares[i][k];
  }
  // Partials are broadcast; every agent sums them in the same order, so all
  // reconstructions are bitwise equal.
  double total = 0.0;
  for (double p : out.partial_sums) total += p;
  out.consensus.assign(n, total / static_cast<double>(n));
  return out;
}

std::vector<double> mediate_exchange_tokens(MediateVariant variant, std::span<const MediateState> states,
                                            double consensus) {
  std::vector<double> tokens;
  tokens.reserve(states.size());
  for (const auto& s : states) {
    tokens.push_back(variant == MediateVariant::AutoMate ? s.local_token() : consensus);
  }
  return tokens;
}

void mediate_apply_variant(MediateVariant variant, std::span<MediateState> states, double consensus) {
  if (variant != MediateVariant::MediateS) return;
  for (auto& s : states) s.set_local_token(consensus);
}

double mediate_epoch(MediateVariant variant, std::span<MediateState> states, double consensus, Rng& rng,
                     double share_range) {
  mediate_apply_variant(variant, states, consensus);
  for (auto& s : states) s.epoch_update();
  std::vector<double> locals;
  for (const auto& s : states) locals.push_back(s.local_token());
  if (variant == MediateVariant::AutoMate) {
    return std::accumulate(locals.begin(), locals.end(), 0.0) / static_cast<double>(locals.size());
  }
  const double fresh = mediate_consensus(locals, rng, share_range).consensus.front();
  mediate_apply_variant(variant, states, fresh);
  return fresh;
}

void GiftingState::reset_episode() {
  budget = variant == GiftingVariant::Budget ? initial_budget : 0.0;
  gifts_attempted = 0;
  gifts_delivered = 0;
  gifted_total = 0.0;
}

std::vector<double> gifting_apply(std::span<const bool> gift_decisions, std::span<GiftingState> states,
                                  std::span<const double> raw_rewards) {
  if (gift_decisions.size() != 2 || states.size() != 2 || raw_rewards.size() != 2) {
    throw ConfigError("gifting is defined for two agents");
  }
  std::vector<double> shaped(raw_rewards.begin(), raw_rewards.end());
  for (std::size_t giver = 0; giver < 2; ++giver) {
    if (!gift_decisions[giver]) continue;
    auto& s = states[giver];
    const std::size_t recipient = 1 - giver;
    ++s.gifts_attempted;
    if (s.variant == GiftingVariant::Zerosum) {
      shaped[recipient] += s.gift_value;
      shaped[giver] -= s.gift_value;
    } else {
      if (s.budget < s.gift_value) continue;
      s.budget -= s.gift_value;
      shaped[recipient] += s.gift_value;
    }
    ++s.gifts_delivered;
    s.gifted_total += s.gift_value;
  }
  return shaped;
}

void RialChannel::reset(Rng& rng) {
  for (auto& m : last_) {
    for (auto& bit : m) bit = static_cast<int>(rng.below(2));
  }
}

std::vector<double> RialChannel::observation(std::size_t agent, int own_action, int other_action) const {
  const auto& own = last_[agent];
  const auto& other = last_[1 - agent];
  return {static_cast<double>(own_action), static_cast<double>(other_action), static_cast<double>(own[0]),
          static_cast<double>(own[1]),     static_cast<double>(other[0]),     static_cast<double>(other[1])};
}

int message_index(const Message& m) { return m[0] * 2 + m[1]; }

Message message_from_index(int index) { return {(index >> 1) & 1, index & 1}; }

}  // namespace qmarl::comms
