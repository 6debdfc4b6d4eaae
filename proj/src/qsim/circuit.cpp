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

#include <string>

#include "qmarl/qsim.hpp"

namespace qmarl::qsim {

namespace {

double gate_angle(const GateOp& gate, std::span<const double> params) {
  return gate.param_index ? params[*gate.param_index] : gate.angle;
}

}  // namespace

void CircuitProgram::validate(std::size_t n_params) const {
  if (n_qubits == 0) throw ConfigError("circuit has no qubits");
  for (const auto& g : gates) {
    if (g.target >= n_qubits) throw ConfigError("gate target out of range");
    if (g.kind == GateKind::CNOT) {
      if (!g.control || *g.control >= n_qubits || *g.control == g.target) {
        throw ConfigError("invalid CNOT control");
      }
      if (g.param_index) throw ConfigError("CNOT cannot be parameterized");
    }
    if (g.param_index && *g.param_index >= n_params) {
      throw ConfigError("param_index " + std::to_string(*g.param_index) +
                        " exceeds parameter count " + std::to_string(n_params));
    }
  }
  for (auto q : observables) {
    if (q >= n_qubits) throw ConfigError("observable qubit out of range");
  }
}

void run(const CircuitProgram& program, std::span<const double> params, StateVector& state) {
  if (state.n_qubits() != program.n_qubits) throw ConfigError("state/program qubit mismatch");
  for (const auto& g : program.gates) state.apply(g, gate_angle(g, params));
}

std::vector<double> expectations(const CircuitProgram& program, std::span<const double> params,
                                 const StateVector& initial) {
  StateVector state = initial;
  run(program, params, state);
  std::vector<double> out;
  out.reserve(program.observables.size());
  for (auto q : program.observables) out.push_back(state.expectation_z(q));
  return out;
}

AdjointResult adjoint_gradient(const CircuitProgram& program, std::span<const double> params,
                               const StateVector& state_prep) {
  StateVector psi = state_prep;
  run(program, params, psi);

  const std::size_t n_obs = program.observables.size();
  AdjointResult result;
  result.expectations.reserve(n_obs);
  result.gradients.assign(n_obs, std::vector<double>(params.size(), 0.0));

  std::vector<StateVector> lambdas;
  lambdas.reserve(n_obs);
  for (auto q : program.observables) {
    result.expectations.push_back(psi.expectation_z(q));
    lambdas.push_back(psi);
    lambdas.back().multiply_z(q);
  }

  for (auto it = program.gates.rbegin(); it != program.gates.rend(); ++it) {
    const GateOp& g = *it;
    const double angle = gate_angle(g, params);
    if (g.param_index) {
      // d<O>/dtheta = Im <lambda| G |psi> for U = exp(-i theta G / 2).
      for (std::size_t q = 0; q < n_obs; ++q) {
        result.gradients[q][*g.param_index] +=
            lambdas[q].generator_overlap(psi, g.kind, g.target).imag();
      }
    }
    psi.apply_adjoint(g, angle);
    for (auto& lambda : lambdas) lambda.apply_adjoint(g, angle);
  }
  return result;
}

}  // namespace qmarl::qsim
