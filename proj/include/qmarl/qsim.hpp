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

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qmarl/common.hpp"

/// Exact statevector simulation of small qubit registers.
///
/// Qubit 0 is the most significant bit of the basis-state index, so the
/// amplitude of |q0 q1 ... q_{n-1}> lives at index q0*2^{n-1} + ... + q_{n-1}.
namespace qmarl::qsim {

using Amplitude = std::complex<double>;

enum class GateKind { RX, RY, RZ, CNOT };

struct GateOp {
  GateKind kind = GateKind::RX;
  std::size_t target = 0;
  std::optional<std::size_t> control;
  double angle = 0.0;
  /// When set, the gate angle is read from the parameter vector at run time.
  std::optional<std::size_t> param_index;

  static GateOp rx(std::size_t target, double angle) { return {GateKind::RX, target, {}, angle, {}}; }
  static GateOp ry(std::size_t target, double angle) { return {GateKind::RY, target, {}, angle, {}}; }
  static GateOp rz(std::size_t target, double angle) { return {GateKind::RZ, target, {}, angle, {}}; }
  static GateOp cnot(std::size_t control, std::size_t target) {
    return {GateKind::CNOT, target, control, 0.0, {}};
  }
  static GateOp parameterized(GateKind kind, std::size_t target, std::size_t param) {
    return {kind, target, {}, 0.0, param};
  }

  bool is_rotation() const { return kind != GateKind::CNOT; }
};

class StateVector {
 public:
  /// |0...0> on `n_qubits` qubits.
  explicit StateVector(std::size_t n_qubits);

  /// Takes ownership of `amplitudes`; the length must be a power of two.
  static StateVector from_amplitudes(std::vector<Amplitude> amplitudes);

  std::size_t n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const Amplitude> amplitudes() const { return amps_; }
  const Amplitude& operator[](std::size_t i) const { return amps_[i]; }

  double norm_squared() const;

  /// In-place gate application. Throws ConfigError on invalid indices.
  void apply(const GateOp& gate);
  void apply(const GateOp& gate, double angle);
  /// Applies the inverse of the gate.
  void apply_adjoint(const GateOp& gate, double angle);

  double expectation_z(std::size_t qubit) const;

  /// <this| G_target |other> where G is the Pauli generator of a rotation gate.
  Amplitude generator_overlap(const StateVector& other, GateKind kind, std::size_t target) const;

  /// Computational-basis mask for a qubit under the MSB-first convention.
  std::size_t mask(std::size_t qubit) const { return std::size_t{1} << (n_qubits_ - 1 - qubit); }

  void multiply_z(std::size_t qubit);

 private:
  std::size_t n_qubits_;
  std::vector<Amplitude> amps_;

  void check_gate(const GateOp& gate) const;
};

/// Value-semantics wrapper around StateVector::apply.
StateVector apply_gate(StateVector state, const GateOp& gate);

/// Exact <Z_qubit>; +1 contribution where the qubit's bit is 0.
double expectation_z(const StateVector& state, std::size_t qubit);

struct CircuitProgram {
  std::size_t n_qubits = 0;
  std::vector<GateOp> gates;
  /// Qubits measured in Z, one expectation per entry.
  std::vector<std::size_t> observables;

  /// Throws ConfigError if any gate or observable is out of range or if a
  /// param_index is not below `n_params`.
  void validate(std::size_t n_params) const;
};

/// Runs the program on `state` in place.
void run(const CircuitProgram& program, std::span<const double> params, StateVector& state);

/// Runs the program on a copy of `initial` and returns one <Z> per observable.
std::vector<double> expectations(const CircuitProgram& program, std::span<const double> params,
                                 const StateVector& initial);

struct AdjointResult {
  std::vector<double> expectations;
  /// gradients[q][j] = d<Z_{observables[q]}>/d params[j].
  std::vector<std::vector<double>> gradients;
};

/// Adjoint-method gradient: one forward pass, then a backward sweep that
/// un-applies each gate and picks up generator overlaps at parameterized
/// gates. Gates without a param_index contribute nothing.
AdjointResult adjoint_gradient(const CircuitProgram& program, std::span<const double> params,
                               const StateVector& state_prep);

/// RX(b*pi) on each qubit that has a feature. Throws InputError for
/// non-binary features and ConfigError if there are more bits than qubits.
std::vector<GateOp> basis_embedding_gates(std::span<const double> bits, std::size_t n_qubits);
StateVector basis_embed(std::span<const double> bits, std::size_t n_qubits);

struct AngleRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// RX((value - lo)/(hi - lo) * pi) on `qubit`; out-of-range values are
/// clamped with a warning.
GateOp angle_embed(double value, AngleRange range, std::size_t qubit);

/// Mottonen state preparation for non-negative real features: uniformly
/// controlled RY rotations per qubit, each decomposed into RY and CNOT gates
/// along a Gray-code path. Features are zero-padded to 2^n_qubits and
/// L2-normalized; an all-zero input prepares |0...0>. Signed features would
/// need the phase stage, which is not emitted, so negative entries throw
/// InputError, as does an empty vector.
std::vector<GateOp> mottonen_gates(std::span<const double> features, std::size_t n_qubits);
StateVector amplitude_embed(std::span<const double> features, std::size_t n_qubits);

}  // namespace qmarl::qsim
