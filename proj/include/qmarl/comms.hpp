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
#include <functional>
#include <span>
#include <vector>

#include "qmarl/common.hpp"
#include "qmarl/qnet.hpp"

/// Reward-shaping and messaging protocols that run between the environment
/// step and replay insertion.
namespace qmarl::comms {

// ---------------------------------------------------------------------------
// Monotonic improvement measures

/// Reward-difference measure: r_hat - r_bar.
double mi_rew(double r_hat, double r_bar);

enum class ValueEstimator {
  /// (1 - eps) * max Q + eps * sum Q
  Literal,
  /// (1 - eps) * max Q + (eps / |A|) * sum Q, the epsilon-greedy expectation
  Normalized,
};

/// State-value estimate from the env head's Q-values.
double state_value(std::span<const double> env_q, double epsilon,
                   ValueEstimator estimator = ValueEstimator::Literal);

/// Temporal-difference measure from precomputed value estimates.
double mi_td(double r_hat, double v_obs, double v_next, double gamma);

/// Temporal-difference measure evaluated with the agent's own network.
double mi_td(double r_hat, std::span<const double> obs, std::span<const double> next_obs,
             const qnet::QFunction& net, double gamma, double epsilon,
             ValueEstimator estimator = ValueEstimator::Literal);

/// Env-head Q-values of a network output vector.
std::span<const double> env_head_values(const qnet::QFunction& net, std::span<const double> q);

// ---------------------------------------------------------------------------
// MATE

enum class MiKind { Reward, TemporalDifference };

struct MateConfig {
  double x_token = 1.0;
  double y_token = 1.0;
  MiKind mi_kind = MiKind::TemporalDifference;
};

struct MateOutcome {
  std::vector<double> shaped;
  std::vector<double> request_credit;   // r_hat^req per agent
  std::vector<double> response_credit;  // r_hat^res per agent
  std::vector<int> requests_sent;
  std::vector<int> requests_received;
  std::vector<int> positive_responses_sent;
  std::vector<int> negative_responses_sent;
};

/// MI_agent(reward) for the agent's current transition.
using MiFunction = std::function<double(std::size_t agent, double reward)>;

/// Two-phase exchange over a fully connected neighborhood. Agent i requests
/// with value request_tokens[i] when MI_i(r_i) >= 0; a receiver j answers
/// +response_tokens[j] if MI_j(r_j + x) >= 0 else -response_tokens[j].
/// r_hat_i = r_i + max(received requests, 0 if none) + min(received responses, 0 if none).
MateOutcome mate_exchange(std::span<const double> raw_rewards, std::span<const double> request_tokens,
                          std::span<const double> response_tokens, const MiFunction& mi);

// ---------------------------------------------------------------------------
// MEDIATE

enum class MediateVariant { AutoMate, MediateI, MediateS };

enum class TokenDirection {
  /// Raise the token when the epoch-median value dropped.
  IncreaseOnDeterioration,
  /// Raise the token when the epoch-median value improved.
  IncreaseOnImprovement,
};

struct MediateConfig {
  double initial_token = 0.1;
  double alpha = 0.1;
  std::size_t epoch_length = 5;
  TokenDirection direction = TokenDirection::IncreaseOnImprovement;
};

double median(std::vector<double> values);

class MediateState {
 public:
  explicit MediateState(MediateConfig config = {});

  double local_token() const { return local_; }
  void set_local_token(double token);
  double r_min() const { return r_min_; }
  bool has_r_min() const { return r_min_ > 0.0; }
  const std::vector<double>& current_samples() const { return current_; }
  const std::vector<double>& previous_samples() const { return previous_; }
  bool has_previous_epoch() const { return has_previous_; }
  const MediateConfig& config() const { return config_; }

  void record_value(double v) { current_.push_back(v); }
  /// Tracks the smallest nonzero |r| seen since construction.
  void observe_reward(double r);

  /// Token step magnitude from the previous/current epoch medians and r_min;
  /// zero before the first full epoch or when |V_prev| < 1e-8.
  double step_magnitude() const;

  /// Applies the signed step, clamps at 0, rotates samples. Returns the
  /// signed change actually applied.
  double epoch_update();

 private:
  MediateConfig config_;
  double local_;
  double r_min_ = 0.0;
  std::vector<double> current_;
  std::vector<double> previous_;
  bool has_previous_ = false;
};

struct ConsensusResult {
  /// One entry per agent, bitwise identical.
  std::vector<double> consensus;
  /// shares[i][k]: k-th additive share of agent i's token. Entry i is kept,
  /// the others are sent to the neighbor with that index.
  std::vector<std::vector<double>> shares;
  std::vector<double> partial_sums;
};

/// Additive-share secure averaging over a fully connected group. Sent shares
/// are drawn uniformly from [-share_range, share_range); the kept share
/// makes each agent's shares sum to its token.
ConsensusResult mediate_consensus(std::span<const double> local_tokens, Rng& rng,
                                  double share_range = 1.0);

/// Tokens each agent uses for requests and responses under `variant`.
std::vector<double> mediate_exchange_tokens(MediateVariant variant, std::span<const MediateState> states,
                                            double consensus);

/// Epoch boundary for a MEDIATE group: MEDIATE-S syncs locals to the current
/// consensus, every state takes its epoch update, then a fresh consensus is
/// reconstructed (AutoMATE skips consensus and returns the mean of locals for
/// reporting only). Returns the new consensus token.
double mediate_epoch(MediateVariant variant, std::span<MediateState> states, double consensus, Rng& rng,
                     double share_range = 1.0);

/// Applies the variant's use of a freshly computed consensus: MEDIATE-S
/// overwrites local tokens, the others leave them untouched.
void mediate_apply_variant(MediateVariant variant, std::span<MediateState> states, double consensus);

// ---------------------------------------------------------------------------
// Gifting

enum class GiftingVariant { Zerosum, Budget };

struct GiftingState {
  GiftingVariant variant = GiftingVariant::Zerosum;
  double gift_value = 1.0;
  double initial_budget = 10.0;
  double budget = 10.0;
  int gifts_attempted = 0;
  int gifts_delivered = 0;
  double gifted_total = 0.0;

  void reset_episode();
};

/// Two-player gifting: a gift from agent i goes to the other agent.
/// Zerosum moves gift_value from giver to recipient. Budget pays the
/// recipient from the giver's budget if it covers gift_value, else nothing.
std::vector<double> gifting_apply(std::span<const bool> gift_decisions, std::span<GiftingState> states,
                                  std::span<const double> raw_rewards);

// ---------------------------------------------------------------------------
// RIAL

inline constexpr std::size_t kMessageBits = 2;
using Message = std::array<int, kMessageBits>;

/// Messages chosen at step t become visible to both agents at step t + 1.
class RialChannel {
 public:
  /// Uniformly random messages, matching the random first observation.
  void reset(Rng& rng);
  void reset(const std::array<Message, 2>& initial) { last_ = initial; }

  void deliver(const std::array<Message, 2>& sent) { last_ = sent; }

  const Message& last(std::size_t agent) const { return last_[agent]; }

  /// (own prev action, other prev action, own msg bits, other msg bits).
  std::vector<double> observation(std::size_t agent, int own_action, int other_action) const;

 private:
  std::array<Message, 2> last_{};
};

/// Message index 0..3 encoded by the two message heads' slots.
int message_index(const Message& m);
Message message_from_index(int index);

}  // namespace qmarl::comms
