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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qmarl/common.hpp"
#include "qmarl/qsim.hpp"

namespace qmarl::qnet {

enum class ProtocolKind {
  Baseline,
  MateRew,
  MateTd,
  AutoMate,
  MediateI,
  MediateS,
  GiftingZerosum,
  GiftingBudget,
  Rial,
  HarvestIql,
};

ProtocolKind parse_protocol(std::string_view name);
std::string_view protocol_name(ProtocolKind kind);

bool is_mate_family(ProtocolKind kind);
bool is_mediate_family(ProtocolKind kind);
bool is_gifting(ProtocolKind kind);

/// A contiguous block of output slots with its own action set.
struct Head {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Index of a head by name, or nullopt.
std::optional<std::size_t> find_head(std::span<const Head> heads, std::string_view name);

/// Per-parameter learning-rate group.
enum class ParamGroup : unsigned char { Main = 0, OutputScale = 1 };

/// Anything the Q-learning agent can train: VQC or classical MLP.
class QFunction {
 public:
  virtual ~QFunction() = default;

  virtual std::size_t observation_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual const std::vector<Head>& heads() const = 0;

  virtual std::vector<double> forward(std::span<const double> obs) const = 0;

  /// Returns Q(obs) and adds sum_s upstream[s] * dQ_s/dparams into `grad`.
  virtual std::vector<double> backward(std::span<const double> obs,
                                       std::span<const double> upstream,
                                       std::span<double> grad) const = 0;

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
  virtual std::span<const ParamGroup> parameter_groups() const = 0;

  virtual std::unique_ptr<QFunction> clone() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

enum class EmbedKind { None, BasisBit, Angle };

struct QubitEmbedding {
  EmbedKind kind = EmbedKind::None;
  std::size_t feature = 0;
  qsim::AngleRange range{};
};

struct EmbeddingSpec {
  /// Whole-register Mottonen amplitude embedding of all features.
  bool amplitude = false;
  std::vector<QubitEmbedding> per_qubit;
  std::size_t n_features = 0;
};

/// Variational Q-function: embedding plus L re-uploading layers of
/// RZ-RY-RZ rotations and a circular CNOT ring, read out in Z.
///
/// Without a dense head, Q_slot = out_scale[slot] * (<Z_q> + 1) / 2 where q is
/// the slot's qubit. With a dense head, all rescaled measurements feed an
/// affine map instead and there are no output scales. Amplitude embeddings
/// are prepared once in front of the layers (a state preparation cannot be
/// re-uploaded onto a non-|0> register).
class QNetwork final : public QFunction {
 public:
  struct Gradient {
    std::vector<double> theta;
    std::vector<double> out_scales;
    std::vector<double> dense_weights;
    std::vector<double> dense_bias;
  };

  QNetwork(std::size_t n_qubits, std::size_t n_layers, EmbeddingSpec embedding,
           std::vector<Head> heads, std::vector<std::size_t> slot_qubits,
           std::optional<std::size_t> dense_outputs = std::nullopt);

  /// theta ~ U[-pi, pi), out_scales = 1, dense head ~ U[-1/sqrt(n), 1/sqrt(n)).
  void initialize(Rng& rng);

  std::size_t n_qubits() const { return n_qubits_; }
  std::size_t n_layers() const { return n_layers_; }
  std::size_t n_theta() const { return n_layers_ * n_qubits_ * 3; }
  bool has_dense_head() const { return dense_outputs_.has_value(); }
  const EmbeddingSpec& embedding() const { return embedding_; }
  const std::vector<std::size_t>& slot_qubits() const { return slot_qubits_; }

  double& theta(std::size_t layer, std::size_t qubit, std::size_t rotation);
  double theta(std::size_t layer, std::size_t qubit, std::size_t rotation) const;
  std::span<double> theta_values();
  std::span<double> out_scales();
  std::span<const double> out_scales() const;
  std::span<double> dense_weights();
  std::span<double> dense_bias();

  /// Circuit for one observation: embedding gates (repeated per layer for
  /// basis/angle embeddings) and parameterized layers over theta.
  qsim::CircuitProgram program(std::span<const double> obs) const;
  /// Initial register: Mottonen-prepared for amplitude embeddings, else |0...0>.
  qsim::StateVector initial_state(std::span<const double> obs) const;

  /// Rescaled measurements (<Z_q> + 1) / 2, one per measured qubit.
  std::vector<double> measurements(std::span<const double> obs) const;

  /// dQ_slot / d(every trainable parameter).
  Gradient gradient(std::span<const double> obs, std::size_t slot) const;

  // QFunction
  std::size_t observation_size() const override { return embedding_.n_features; }
  std::size_t output_size() const override;
  const std::vector<Head>& heads() const override { return heads_; }
  std::vector<double> forward(std::span<const double> obs) const override;
  std::vector<double> backward(std::span<const double> obs, std::span<const double> upstream,
                               std::span<double> grad) const override;
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  std::span<const ParamGroup> parameter_groups() const override { return groups_; }
  std::unique_ptr<QFunction> clone() const override { return std::make_unique<QNetwork>(*this); }
  nlohmann::json to_json() const override;

 private:
  std::size_t n_qubits_;
  std::size_t n_layers_;
  EmbeddingSpec embedding_;
  std::vector<Head> heads_;
  std::vector<std::size_t> slot_qubits_;
  std::optional<std::size_t> dense_outputs_;

  // [theta | out_scales | dense weights (row-major, outputs x qubits) | dense bias]
  std::vector<double> params_;
  std::vector<ParamGroup> groups_;
  std::size_t scales_offset_ = 0;
  std::size_t dense_w_offset_ = 0;
  std::size_t dense_b_offset_ = 0;

  // Gate skeleton with embedding angles left at zero; embed_slots_ lists the
  // gate indices to fill and which qubit embedding feeds them.
  qsim::CircuitProgram skeleton_;
  std::vector<std::pair<std::size_t, std::size_t>> embed_slots_;

  void build_skeleton();
  void check_observation(std::span<const double> obs) const;
  std::vector<double> outputs_from_measurements(std::span<const double> m) const;
};

struct LayoutOptions {
  std::size_t n_layers = 4;
  qsim::AngleRange budget_range{0.0, 10.0};
};

/// Per-protocol network layout. Qubit budgets: 2 for Baseline/MATE/MEDIATE,
/// 4 for Gifting, 6 for RIAL, 7 for Harvest.
QNetwork build_layout(ProtocolKind protocol, const LayoutOptions& options = {});

/// Expected qubit count per protocol; build_layout asserts against this.
std::size_t qubit_budget(ProtocolKind protocol);

/// Fully connected ReLU network, linear output, single "env" head.
class ClassicalNet final : public QFunction {
 public:
  /// `layer_sizes` includes input and output, e.g. {100, 64, 64, 6}.
  explicit ClassicalNet(std::vector<std::size_t> layer_sizes);

  /// PyTorch-style U[-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(Rng& rng);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  /// Weight (out x in, row-major) and bias views for layer `l`.
  std::span<double> weights(std::size_t layer);
  std::span<double> bias(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  std::size_t observation_size() const override { return sizes_.front(); }
  std::size_t output_size() const override { return sizes_.back(); }
  const std::vector<Head>& heads() const override { return heads_; }
  std::vector<double> forward(std::span<const double> obs) const override;
  std::vector<double> backward(std::span<const double> obs, std::span<const double> upstream,
                               std::span<double> grad) const override;
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  std::span<const ParamGroup> parameter_groups() const override { return groups_; }
  std::unique_ptr<QFunction> clone() const override { return std::make_unique<ClassicalNet>(*this); }
  nlohmann::json to_json() const override;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Head> heads_;
  std::vector<double> params_;
  std::vector<ParamGroup> groups_;
  std::vector<std::size_t> w_offset_;
  std::vector<std::size_t> b_offset_;
};

/// 100 -> hidden -> hidden -> 6 Harvest baseline.
ClassicalNet build_classical_baseline(std::size_t hidden = 64);

/// Checkpoint I/O. The container is a JSON object with
///   format: "qmarl-qfunction", version: 1, type: "vqc" | "mlp",
/// and for "vqc": protocol, n_layers, params (flat: theta, out_scales, dense
/// weights, dense bias); for "mlp": layer_sizes, params.
constexpr int kCheckpointVersion = 1;
void save_checkpoint(const QFunction& net, std::optional<ProtocolKind> protocol,
                     const std::string& path);
struct Checkpoint {
  std::unique_ptr<QFunction> net;
  std::optional<ProtocolKind> protocol;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qmarl::qnet
