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
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "qmarl/qsim.hpp"

namespace qmarl::qsim {

std::vector<GateOp> basis_embedding_gates(std::span<const double> bits, std::size_t n_qubits) {
  if (bits.size() > n_qubits) {
    throw ConfigError("basis embedding got " + std::to_string(bits.size()) + " bits for " +
                      std::to_string(n_qubits) + " qubits");
  }
  std::vector<GateOp> gates;
  gates.reserve(bits.size());
  for (std::size_t q = 0; q < bits.size(); ++q) {
    if (bits[q] != 0.0 && bits[q] != 1.0) {
      throw InputError("basis embedding feature " + std::to_string(q) + " is not binary");
    }
    gates.push_back(GateOp::rx(q, bits[q] * std::numbers::pi));
  }
  return gates;
}

StateVector basis_embed(std::span<const double> bits, std::size_t n_qubits) {
  StateVector state(n_qubits);
  for (const auto& g : basis_embedding_gates(bits, n_qubits)) state.apply(g);
  return state;
}

GateOp angle_embed(double value, AngleRange range, std::size_t qubit) {
  if (!(range.hi > range.lo)) throw ConfigError("angle embedding range is empty");
  if (value < range.lo || value > range.hi) {
    log_warning("angle embedding value " + std::to_string(value) + " outside [" +
                std::to_string(range.lo) + ", " + std::to_string(range.hi) + "], clamping");
    value = std::clamp(value, range.lo, range.hi);
  }
  return GateOp::rx(qubit, (value - range.lo) / (range.hi - range.lo) * std::numbers::pi);
}

std::vector<GateOp> mottonen_gates(std::span<const double> features, std::size_t n_qubits) {
  if (features.empty()) throw InputError("amplitude embedding of an empty vector");
  if (n_qubits == 0 || n_qubits > 24) throw ConfigError("invalid qubit count for amplitude embedding");
  const std::size_t dim = std::size_t{1} << n_qubits;
  if (features.size() > dim) {
    throw ConfigError(std::to_string(features.size()) + " features do not fit in " +
                      std::to_string(n_qubits) + " qubits");
  }

  // Squared magnitudes, zero-padded. Normalization cancels in the angle
  // ratios below, so it never has to be applied explicitly.
  std::vector<double> weight(dim, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i] < 0.0) throw InputError("amplitude embedding expects non-negative features");
    weight[i] = features[i] * features[i];
  }

  std::vector<GateOp> gates;
  for (std::size_t k = 0; k < n_qubits; ++k) {
    const std::size_t n_controls = k;
    const std::size_t n_blocks = std::size_t{1} << n_controls;
    const std::size_t block = dim >> n_controls;
    const std::size_t half = block / 2;

    // Target rotation for each control pattern j (qubits 0..k-1, MSB first).
    std::vector<double> alpha(n_blocks);
    for (std::size_t j = 0; j < n_blocks; ++j) {
      double w0 = 0.0;
      double w1 = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        w0 += weight[j * block + i];
        w1 += weight[j * block + half + i];
      }
      alpha[j] = 2.0 * std::atan2(std::sqrt(w1), std::sqrt(w0));
    }

    if (n_controls == 0) {
      if (alpha[0] != 0.0) gates.push_back(GateOp::ry(k, alpha[0]));
      continue;
    }

    // Control pattern j sees rotation i with sign (-1)^{popcount(j & gray(i))};
    // invert that Walsh-like system to get the per-step angles.
    const double inv = 1.0 / static_cast<double>(n_blocks);
    for (std::size_t i = 0; i < n_blocks; ++i) {
      const std::size_t gray = i ^ (i >> 1);
      double theta = 0.0;
      for (std::size_t j = 0; j < n_blocks; ++j) {
        theta += (std::popcount(j & gray) & 1) ? -alpha[j] : alpha[j];
      }
      gates.push_back(GateOp::ry(k, theta * inv));
      const std::size_t flipped_bit =
          (i + 1 < n_blocks) ? static_cast<std::size_t>(std::countr_zero(i + 1)) : n_controls - 1;
      gates.push_back(GateOp::cnot(n_controls - 1 - flipped_bit, k));
    }
  }
  return gates;
}

StateVector amplitude_embed(std::span<const double> features, std::size_t n_qubits) {
  StateVector state(n_qubits);
  for (const auto& g : mottonen_gates(features, n_qubits)) state.apply(g);
  return state;
}

}  // namespace qmarl::qsim
