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
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "qmarl/qnet.hpp"

namespace qmarl::qnet {

namespace {

struct ProtocolEntry {
  ProtocolKind kind;
  std::string_view name;
};

constexpr ProtocolEntry kProtocols[] = {
    {ProtocolKind::Baseline, "baseline"},
    {ProtocolKind::MateRew, "mate_rew"},
    {ProtocolKind::MateTd, "mate_td"},
    {ProtocolKind::AutoMate, "automate"},
    {ProtocolKind::MediateI, "mediate_i"},
    {ProtocolKind::MediateS, "mediate_s"},
    {ProtocolKind::GiftingZerosum, "gifting_zerosum"},
    {ProtocolKind::GiftingBudget, "gifting_budget"},
    {ProtocolKind::Rial, "rial"},
    {ProtocolKind::HarvestIql, "harvest_iql"},
};

}  // namespace

ProtocolKind parse_protocol(std::string_view name) {
  std::string key;
  for (char c : name) key.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (const auto& entry : kProtocols) {
    if (entry.name == key) return entry.kind;
  }
  throw ConfigError("unknown protocol '" + std::string(name) + "'");
}

std::string_view protocol_name(ProtocolKind kind) {
  for (const auto& entry : kProtocols) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

bool is_mate_family(ProtocolKind kind) {
  return kind == ProtocolKind::MateRew || kind == ProtocolKind::MateTd || is_mediate_family(kind);
}

bool is_mediate_family(ProtocolKind kind) {
  return kind == ProtocolKind::AutoMate || kind == ProtocolKind::MediateI ||
         kind == ProtocolKind::MediateS;
}

bool is_gifting(ProtocolKind kind) {
  return kind == ProtocolKind::GiftingZerosum || kind == ProtocolKind::GiftingBudget;
}

std::optional<std::size_t> find_head(std::span<const Head> heads, std::string_view name) {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (heads[i].name == name) return i;
  }
  return std::nullopt;
}

QNetwork::QNetwork(std::size_t n_qubits, std::size_t n_layers, EmbeddingSpec embedding,
                   std::vector<Head> heads, std::vector<std::size_t> slot_qubits,
                   std::optional<std::size_t> dense_outputs)
    : n_qubits_(n_qubits),
      n_layers_(n_layers),
      embedding_(std::move(embedding)),
      heads_(std::move(heads)),
      slot_qubits_(std::move(slot_qubits)),
      dense_outputs_(dense_outputs) {
  if (n_qubits_ == 0 || n_qubits_ > 12) throw ConfigError("VQC qubit count must be in [1, 12]");
  if (n_layers_ == 0) throw ConfigError("VQC needs at least one layer");
  if (!embedding_.amplitude && embedding_.per_qubit.size() > n_qubits_) {
    throw ConfigError("more qubit embeddings than qubits");
  }
  if (embedding_.amplitude && embedding_.n_features > (std::size_t{1} << n_qubits_)) {
    throw ConfigError("amplitude embedding features exceed 2^n_qubits");
  }
  for (const auto& e : embedding_.per_qubit) {
    if (e.kind != EmbedKind::None && e.feature >= embedding_.n_features) {
      throw ConfigError("embedding references a missing feature");
    }
  }

  std::size_t total_slots = 0;
  for (const auto& h : heads_) {
    if (h.offset != total_slots || h.size == 0) throw ConfigError("heads must tile the output slots");
    total_slots += h.size;
  }
  if (dense_outputs_) {
    if (total_slots != *dense_outputs_) throw ConfigError("head sizes must sum to the dense width");
  } else {
    if (total_slots != slot_qubits_.size()) throw ConfigError("head sizes must sum to the slot count");
    for (auto q : slot_qubits_) {
      if (q >= n_qubits_) throw ConfigError("slot qubit out of range");
    }
  }

  scales_offset_ = n_theta();
  const std::size_t n_scales = dense_outputs_ ? 0 : slot_qubits_.size();
  dense_w_offset_ = scales_offset_ + n_scales;
  const std::size_t n_dense_w = dense_outputs_ ? *dense_outputs_ * n_qubits_ : 0;
  dense_b_offset_ = dense_w_offset_ + n_dense_w;
  const std::size_t n_dense_b = dense_outputs_ ? *dense_outputs_ : 0;

  params_.assign(dense_b_offset_ + n_dense_b, 0.0);
  groups_.assign(params_.size(), ParamGroup::Main);
  for (std::size_t i = 0; i < n_scales; ++i) {
    params_[scales_offset_ + i] = 1.0;
    groups_[scales_offset_ + i] = ParamGroup::OutputScale;
  }
  build_skeleton();
}

void QNetwork::build_skeleton() {
  skeleton_ = {};
  skeleton_.n_qubits = n_qubits_;
  embed_slots_.clear();
  for (std::size_t l = 0; l < n_layers_; ++l) {
    if (!embedding_.amplitude) {
      for (std::size_t q = 0; q < embedding_.per_qubit.size(); ++q) {
        if (embedding_.per_qubit[q].kind == EmbedKind::None) continue;
        embed_slots_.emplace_back(skeleton_.gates.size(), q);
        skeleton_.gates.push_back(qsim::GateOp::rx(q, 0.0));
      }
    }
    for (std::size_t q = 0; q < n_qubits_; ++q) {
      const std::size_t base = (l * n_qubits_ + q) * 3;
      skeleton_.gates.push_back(qsim::GateOp::parameterized(qsim::GateKind::RZ, q, base));
      skeleton_.gates.push_back(qsim::GateOp::parameterized(qsim::GateKind::RY, q, base + 1));
      skeleton_.gates.push_back(qsim::GateOp::parameterized(qsim::GateKind::RZ, q, base + 2));
    }
    if (n_qubits_ > 1) {
      for (std::size_t q = 0; q < n_qubits_; ++q) {
        skeleton_.gates.push_back(qsim::GateOp::cnot(q, (q + 1) % n_qubits_));
      }
    }
  }
  for (std::size_t q = 0; q < n_qubits_; ++q) skeleton_.observables.push_back(q);
  skeleton_.validate(n_theta());
}

void QNetwork::initialize(Rng& rng) {
  for (std::size_t i = 0; i < n_theta(); ++i) {
    params_[i] = rng.uniform(-std::numbers::pi, std::numbers::pi);
  }
  if (dense_outputs_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_qubits_));
    for (std::size_t i = dense_w_offset_; i < params_.size(); ++i) {
      params_[i] = rng.uniform(-bound, bound);
    }
  } else {
    for (std::size_t i = scales_offset_; i < dense_w_offset_; ++i) params_[i] = 1.0;
  }
}

double& QNetwork::theta(std::size_t layer, std::size_t qubit, std::size_t rotation) {
  return params_[(layer * n_qubits_ + qubit) * 3 + rotation];
}

double QNetwork::theta(std::size_t layer, std::size_t qubit, std::size_t rotation) const {
  return params_[(layer * n_qubits_ + qubit) * 3 + rotation];
}

std::span<double> QNetwork::theta_values() { return std::span(params_).first(n_theta()); }

std::span<double> QNetwork::out_scales() {
  return std::span(params_).subspan(scales_offset_, dense_w_offset_ - scales_offset_);
}

std::span<const double> QNetwork::out_scales() const {
  return std::span(params_).subspan(scales_offset_, dense_w_offset_ - scales_offset_);
}

std::span<double> QNetwork::dense_weights() {
  return std::span(params_).subspan(dense_w_offset_, dense_b_offset_ - dense_w_offset_);
}

std::span<double> QNetwork::dense_bias() { return std::span(params_).subspan(dense_b_offset_); }

std::size_t QNetwork::output_size() const {
  return dense_outputs_ ? *dense_outputs_ : slot_qubits_.size();
}

void QNetwork::check_observation(std::span<const double> obs) const {
  if (obs.size() != embedding_.n_features) {
    throw ConfigError("observation has " + std::to_string(obs.size()) + " features, network expects " +
                      std::to_string(embedding_.n_features));
  }
}

qsim::CircuitProgram QNetwork::program(std::span<const double> obs) const {
  check_observation(obs);
  qsim::CircuitProgram prog = skeleton_;
  for (const auto& [gate_index, qubit] : embed_slots_) {
    const auto& e = embedding_.per_qubit[qubit];
    const double value = obs[e.feature];
    if (e.kind == EmbedKind::BasisBit) {
      if (value != 0.0 && value != 1.0) throw InputError("basis feature is not binary");
      prog.gates[gate_index].angle = value * std::numbers::pi;
    } else {
      prog.gates[gate_index] = qsim::angle_embed(value, e.range, qubit);
    }
  }
  return prog;
}

qsim::StateVector QNetwork::initial_state(std::span<const double> obs) const {
  if (embedding_.amplitude) return qsim::amplitude_embed(obs, n_qubits_);
  return qsim::StateVector(n_qubits_);
}

std::vector<double> QNetwork::measurements(std::span<const double> obs) const {
  const auto prog = program(obs);
  auto values = qsim::expectations(prog, std::span(params_).first(n_theta()), initial_state(obs));
  for (auto& v : values) v = (v + 1.0) / 2.0;
  return values;
}

std::vector<double> QNetwork::outputs_from_measurements(std::span<const double> m) const {
  std::vector<double> q(output_size());
  if (dense_outputs_) {
    for (std::size_t a = 0; a < q.size(); ++a) {
      double acc = params_[dense_b_offset_ + a];
      for (std::size_t k = 0; k < n_qubits_; ++k) acc += params_[dense_w_offset_ + a * n_qubits_ + k] * m[k];
      q[a] = acc;
    }
  } else {
    for (std::size_t s = 0; s < q.size(); ++s) q[s] = params_[scales_offset_ + s] * m[slot_qubits_[s]];
  }
  return q;
}

std::vector<double> QNetwork::forward(std::span<const double> obs) const {
  return outputs_from_measurements(measurements(obs));
}

std::vector<double> QNetwork::backward(std::span<const double> obs, std::span<const double> upstream,
                                       std::span<double> grad) const {
  if (upstream.size() != output_size() || grad.size() != params_.size()) {
    throw ConfigError("backward: buffer size mismatch");
  }
  const auto prog = program(obs);
  const auto adj = qsim::adjoint_gradient(prog, std::span(params_).first(n_theta()), initial_state(obs));

  std::vector<double> m(n_qubits_);
  for (std::size_t k = 0; k < n_qubits_; ++k) m[k] = (adj.expectations[k] + 1.0) / 2.0;
  auto q = outputs_from_measurements(m);

  // dL/dm_k, then dm_k/dtheta = 0.5 * d<Z_k>/dtheta.
  std::vector<double> dm(n_qubits_, 0.0);
  if (dense_outputs_) {
    for (std::size_t a = 0; a < q.size(); ++a) {
      if (upstream[a] == 0.0) continue;
      grad[dense_b_offset_ + a] += upstream[a];
      for (std::size_t k = 0; k < n_qubits_; ++k) {
        grad[dense_w_offset_ + a * n_qubits_ + k] += upstream[a] * m[k];
        dm[k] += upstream[a] * params_[dense_w_offset_ + a * n_qubits_ + k];
      }
    }
  } else {
    for (std::size_t s = 0; s < q.size(); ++s) {
      if (upstream[s] == 0.0) continue;
      const std::size_t k = slot_qubits_[s];
      grad[scales_offset_ + s] += upstream[s] * m[k];
      dm[k] += upstream[s] * params_[scales_offset_ + s];
    }
  }
  for (std::size_t k = 0; k < n_qubits_; ++k) {
    if (dm[k] == 0.0) continue;
    const double coeff = 0.5 * dm[k];
    const auto& g = adj.gradients[k];
    for (std::size_t j = 0; j < n_theta(); ++j) grad[j] += coeff * g[j];
  }
  return q;
}

QNetwork::Gradient QNetwork::gradient(std::span<const double> obs, std::size_t slot) const {
  if (slot >= output_size()) throw ConfigError("gradient: slot out of range");
  std::vector<double> upstream(output_size(), 0.0);
  upstream[slot] = 1.0;
  std::vector<double> flat(params_.size(), 0.0);
  backward(obs, upstream, flat);
  Gradient g;
  g.theta.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(scales_offset_));
  g.out_scales.assign(flat.begin() + static_cast<std::ptrdiff_t>(scales_offset_),
                      flat.begin() + static_cast<std::ptrdiff_t>(dense_w_offset_));
  g.dense_weights.assign(flat.begin() + static_cast<std::ptrdiff_t>(dense_w_offset_),
                         flat.begin() + static_cast<std::ptrdiff_t>(dense_b_offset_));
  g.dense_bias.assign(flat.begin() + static_cast<std::ptrdiff_t>(dense_b_offset_), flat.end());
  return g;
}

nlohmann::json QNetwork::to_json() const {
  return {{"type", "vqc"}, {"n_qubits", n_qubits_}, {"n_layers", n_layers_}, {"params", params_}};
}

std::size_t qubit_budget(ProtocolKind protocol) {
  switch (protocol) {
    case ProtocolKind::GiftingZerosum:
    case ProtocolKind::GiftingBudget:
      return 4;
    case ProtocolKind::Rial:
      return 6;
    case ProtocolKind::HarvestIql:
      return 7;
    default:
      return 2;
  }
}

QNetwork build_layout(ProtocolKind protocol, const LayoutOptions& options) {
  auto basis = [](std::size_t feature) { return QubitEmbedding{EmbedKind::BasisBit, feature, {}}; };
  std::optional<QNetwork> net;
  switch (protocol) {
    case ProtocolKind::Baseline:
    case ProtocolKind::MateRew:
    case ProtocolKind::MateTd:
    case ProtocolKind::AutoMate:
    case ProtocolKind::MediateI:
    case ProtocolKind::MediateS: {
      EmbeddingSpec spec{false, {basis(0), basis(1)}, 2};
      net.emplace(2, options.n_layers, spec, std::vector<Head>{{"env", 0, 2}},
                  std::vector<std::size_t>{0, 1});
      break;
    }
    case ProtocolKind::GiftingZerosum:
    case ProtocolKind::GiftingBudget: {
      EmbeddingSpec spec{false, {basis(0), basis(1)}, 2};
      if (protocol == ProtocolKind::GiftingBudget) {
        spec.per_qubit.push_back({EmbedKind::Angle, 2, options.budget_range});
        spec.n_features = 3;
      }
      net.emplace(4, options.n_layers, spec, std::vector<Head>{{"env", 0, 2}, {"gift", 2, 2}},
                  std::vector<std::size_t>{0, 1, 2, 3});
      break;
    }
    case ProtocolKind::Rial: {
      EmbeddingSpec spec{false, {}, 6};
      for (std::size_t f = 0; f < 6; ++f) spec.per_qubit.push_back(basis(f));
      net.emplace(6, options.n_layers, spec,
                  std::vector<Head>{{"env", 0, 2}, {"msg_bit_0", 2, 2}, {"msg_bit_1", 4, 2}},
                  std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
      break;
    }
    case ProtocolKind::HarvestIql: {
      EmbeddingSpec spec{true, {}, 100};
      net.emplace(7, options.n_layers, spec, std::vector<Head>{{"env", 0, 6}},
                  std::vector<std::size_t>{}, std::size_t{6});
      break;
    }
  }
  if (!net) throw ConfigError("unknown protocol");
  if (net->n_qubits() != qubit_budget(protocol)) throw ConfigError("layout violates qubit budget");
  return std::move(*net);
}

}  // namespace qmarl::qnet
