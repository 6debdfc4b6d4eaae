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

#include <bit>
#include <cmath>
#include <string>

#include "qmarl/qsim.hpp"

namespace qmarl::qsim {

namespace {

constexpr std::size_t kMaxQubits = 24;

void rotate_pairs(std::vector<Amplitude>& amps, std::size_t m, GateKind kind, double angle) {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const std::size_t dim = amps.size();
  switch (kind) {
    case GateKind::RX:
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & m) continue;
        const Amplitude a0 = amps[i];
        const Amplitude a1 = amps[i | m];
        // [[c, -is], [-is, c]]
        amps[i] = Amplitude(c * a0.real() + s * a1.imag(), c * a0.imag() - s * a1.real());
        amps[i | m] = Amplitude(c * a1.real() + s * a0.imag(), c * a1.imag() - s * a0.real());
      }
      break;
    case GateKind::RY:
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & m) continue;
        const Amplitude a0 = amps[i];
        const Amplitude a1 = amps[i | m];
        amps[i] = c * a0 - s * a1;
        amps[i | m] = s * a0 + c * a1;
      }
      break;
    case GateKind::RZ: {
      const Amplitude p0(c, -s);
      const Amplitude p1(c, s);
      for (std::size_t i = 0; i < dim; ++i) amps[i] *= (i & m) ? p1 : p0;
      break;
    }
    case GateKind::CNOT:
      break;
  }
}

}  // namespace

StateVector::StateVector(std::size_t n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits == 0 || n_qubits > kMaxQubits) {
    throw ConfigError("qubit count must be in [1, " + std::to_string(kMaxQubits) + "]");
  }
  amps_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
  amps_[0] = 1.0;
}

StateVector StateVector::from_amplitudes(std::vector<Amplitude> amplitudes) {
  const std::size_t dim = amplitudes.size();
  if (dim < 2 || !std::has_single_bit(dim)) {
    throw InputError("amplitude vector length must be a power of two >= 2");
  }
  StateVector state(static_cast<std::size_t>(std::countr_zero(dim)));
  state.amps_ = std::move(amplitudes);
  return state;
}

double StateVector::norm_squared() const {
  double total = 0.0;
  for (const auto& a : amps_) total += std::norm(a);
  return total;
}

void StateVector::check_gate(const GateOp& gate) const {
  if (gate.target >= n_qubits_) {
    throw ConfigError("gate target " + std::to_string(gate.target) + " out of range for " +
                      std::to_string(n_qubits_) + " qubits");
  }
  if (gate.kind == GateKind::CNOT) {
    if (!gate.control) throw ConfigError("CNOT requires a control qubit");
    if (*gate.control >= n_qubits_) {
      throw ConfigError("CNOT control " + std::to_string(*gate.control) + " out of range");
    }
    if (*gate.control == gate.target) throw ConfigError("CNOT control equals target");
  } else if (gate.control) {
    throw ConfigError("rotation gates take no control qubit");
  }
}

void StateVector::apply(const GateOp& gate) { apply(gate, gate.angle); }

void StateVector::apply(const GateOp& gate, double angle) {
  check_gate(gate);
  const std::size_t t = mask(gate.target);
  if (gate.kind == GateKind::CNOT) {
    const std::size_t c = mask(*gate.control);
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      if ((i & c) && !(i & t)) std::swap(amps_[i], amps_[i | t]);
    }
    return;
  }
  rotate_pairs(amps_, t, gate.kind, angle);
}

void StateVector::apply_adjoint(const GateOp& gate, double angle) {
  // Rotations invert by negating the angle; CNOT is self-inverse.
  apply(gate, -angle);
}

double StateVector::expectation_z(std::size_t qubit) const {
  if (qubit >= n_qubits_) throw ConfigError("observable qubit out of range");
  const std::size_t m = mask(qubit);
  double total = 0.0;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    total += (i & m) ? -std::norm(amps_[i]) : std::norm(amps_[i]);
  }
  return total;
}

void StateVector::multiply_z(std::size_t qubit) {
  const std::size_t m = mask(qubit);
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (i & m) amps_[i] = -amps_[i];
  }
}

Amplitude StateVector::generator_overlap(const StateVector& other, GateKind kind,
                                         std::size_t target) const {
  const std::size_t m = mask(target);
  const auto& rhs = other.amps_;
  Amplitude total{0.0, 0.0};
  switch (kind) {
    case GateKind::RX:
      for (std::size_t i = 0; i < amps_.size(); ++i) total += std::conj(amps_[i]) * rhs[i ^ m];
      break;
    case GateKind::RY: {
      // Y|0> = i|1>, Y|1> = -i|0>.
      const Amplitude plus_i(0.0, 1.0);
      for (std::size_t i = 0; i < amps_.size(); ++i) {
        const Amplitude y = (i & m) ? plus_i * rhs[i ^ m] : -plus_i * rhs[i ^ m];
        total += std::conj(amps_[i]) * y;
      }
      break;
    }
    case GateKind::RZ:
      for (std::size_t i = 0; i < amps_.size(); ++i) {
        const Amplitude z = (i & m) ? -rhs[i] : rhs[i];
        total += std::conj(amps_[i]) * z;
      }
      break;
    case GateKind::CNOT:
      throw ConfigError("CNOT has no generator");
  }
  return total;
}

StateVector apply_gate(StateVector state, const GateOp& gate) {
  state.apply(gate);
  return state;
}

double expectation_z(const StateVector& state, std::size_t qubit) {
  return state.expectation_z(qubit);
}

}  // namespace qmarl::qsim
