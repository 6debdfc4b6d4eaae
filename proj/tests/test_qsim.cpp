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

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "qmarl/qsim.hpp"

using namespace qmarl;
using namespace qmarl::qsim;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

// Dense reference: builds the full 2^n x 2^n matrix of a gate from Kronecker
// products and multiplies it in, independent of the simulator's bit tricks.
using Matrix = std::vector<std::vector<cd>>;

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.size() * b.size(), std::vector<cd>(a.size() * b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k)
        for (std::size_t l = 0; l < b.size(); ++l) out[i * b.size() + k][j * b.size() + l] = a[i][j] * b[k][l];
  return out;
}

Matrix single(GateKind kind, double t) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  const cd i(0, 1);
  switch (kind) {
    case GateKind::RX:
      return {{c, -i * s}, {-i * s, c}};
    case GateKind::RY:
      return {{c, -s}, {s, c}};
    default:
      return {{std::exp(-i * t / 2.0), 0}, {0, std::exp(i * t / 2.0)}};
  }
}

Matrix dense_gate(const GateOp& g, std::size_t n) {
  const Matrix id{{1, 0}, {0, 1}};
  if (g.kind != GateKind::CNOT) {
    Matrix m{{1}};
    for (std::size_t q = 0; q < n; ++q) m = kron(m, q == g.target ? single(g.kind, g.angle) : id);
    return m;
  }
  const std::size_t dim = std::size_t{1} << n;
  Matrix m(dim, std::vector<cd>(dim));
  for (std::size_t b = 0; b < dim; ++b) {
    const bool ctrl = (b >> (n - 1 - *g.control)) & 1;
    const std::size_t out = ctrl ? b ^ (std::size_t{1} << (n - 1 - g.target)) : b;
    m[out][b] = 1;
  }
  return m;
}

std::vector<cd> matvec(const Matrix& m, const std::vector<cd>& v) {
  std::vector<cd> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

GateOp random_gate(Rng& rng, std::size_t n) {
  const auto pick = rng.below(n > 1 ? 4 : 3);
  if (pick == 3) {
    const auto c = rng.below(n);
    auto t = rng.below(n - 1);
    if (t >= c) ++t;
    return GateOp::cnot(c, t);
  }
  const auto kind = static_cast<GateKind>(pick);
  return {kind, rng.below(n), {}, rng.uniform(-2 * kPi, 2 * kPi), {}};
}

// Random layered circuit in the shape used by the Q-networks: basis-bit
// embedding gates, RZ-RY-RZ per qubit, CNOT ring; repeated per layer.
CircuitProgram random_layered(Rng& rng, std::size_t n, std::size_t layers, std::size_t& n_params) {
  CircuitProgram p;
  p.n_qubits = n;
  n_params = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t q = 0; q < n; ++q) p.gates.push_back(GateOp::rx(q, rng.below(2) * kPi));
    for (std::size_t q = 0; q < n; ++q) {
      p.gates.push_back(GateOp::parameterized(GateKind::RZ, q, n_params++));
      p.gates.push_back(GateOp::parameterized(GateKind::RY, q, n_params++));
      p.gates.push_back(GateOp::parameterized(GateKind::RZ, q, n_params++));
    }
    for (std::size_t q = 0; q < n && n > 1; ++q) p.gates.push_back(GateOp::cnot(q, (q + 1) % n));
  }
  for (std::size_t q = 0; q < n; ++q) p.observables.push_back(q);
  return p;
}

}  // namespace

TEST_CASE("gate kernels on basis states") {
  StateVector s(1);
  s.apply(GateOp::rx(0, kPi));
  CHECK(std::abs(s[0]) < 1e-12);
  CHECK(std::abs(s[1] - cd(0, -1)) < 1e-12);

  StateVector two = basis_embed(std::vector<double>{1, 0}, 2);
  two.apply(GateOp::cnot(0, 1));
  CHECK(std::norm(two[3]) == doctest::Approx(1.0).epsilon(1e-12));

  StateVector z(1);
  z.apply(GateOp::rz(0, 1.234));
  CHECK(std::norm(z[0]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::norm(z[1]) == doctest::Approx(0.0));
}

TEST_CASE("expectation_z examples") {
  CHECK(expectation_z(StateVector(1), 0) == doctest::Approx(1.0));
  StateVector one(1);
  one.apply(GateOp::rx(0, kPi));
  CHECK(expectation_z(one, 0) == doctest::Approx(-1.0));
  StateVector half(1);
  half.apply(GateOp::rx(0, kPi / 2));
  CHECK(std::abs(expectation_z(half, 0)) < 1e-12);
}

TEST_CASE("invalid gates are configuration errors") {
  StateVector s(2);
  CHECK_THROWS_AS(s.apply(GateOp::rx(2, 0.1)), ConfigError);
  CHECK_THROWS_AS(s.apply(GateOp::cnot(1, 1)), ConfigError);
  CHECK_THROWS_AS(s.apply(GateOp::cnot(3, 0)), ConfigError);
  CHECK_THROWS_AS((void)s.expectation_z(5), ConfigError);
  CircuitProgram p{2, {GateOp::parameterized(GateKind::RY, 0, 4)}, {0}};
  CHECK_THROWS_AS(p.validate(2), ConfigError);
}

TEST_CASE("kernels agree with a dense-matrix reference") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(4);
    std::vector<cd> amps(std::size_t{1} << n);
    double norm = 0;
    for (auto& a : amps) {
      a = cd(rng.uniform(-1, 1), rng.uniform(-1, 1));
      norm += std::norm(a);
    }
    for (auto& a : amps) a /= std::sqrt(norm);
    StateVector s = StateVector::from_amplitudes(amps);
    const auto g = random_gate(rng, n);
    s.apply(g);
    const auto ref = matvec(dense_gate(g, n), amps);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(s[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("norm and unitarity over 10^4 random gate sequences") {
  Rng rng(2024);
  double worst_norm = 0.0;
  double worst_restore = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(5);
    StateVector s(n);
    for (std::size_t q = 0; q < n; ++q) s.apply(GateOp::ry(q, rng.uniform(0, kPi)));
    const StateVector start = s;
    std::vector<GateOp> seq;
    const std::size_t len = 1 + rng.below(12);
    for (std::size_t k = 0; k < len; ++k) {
      seq.push_back(random_gate(rng, n));
      s.apply(seq.back());
      worst_norm = std::max(worst_norm, std::abs(s.norm_squared() - 1.0));
    }
    for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
      GateOp inv = *it;
      inv.angle = -inv.angle;  // a repeated CNOT is its own inverse
      s.apply(inv);
    }
    for (std::size_t i = 0; i < s.dim(); ++i) worst_restore = std::max(worst_restore, std::abs(s[i] - start[i]));
  }
  CHECK(worst_norm < 1e-10);
  CHECK(worst_restore < 1e-10);
}

TEST_CASE("expectation is invariant under global phase") {
  Rng rng(5);
  StateVector s(3);
  for (int k = 0; k < 20; ++k) s.apply(random_gate(rng, 3));
  std::vector<cd> amps(s.amplitudes().begin(), s.amplitudes().end());
  const cd phase = std::polar(1.0, 0.77);
  for (auto& a : amps) a *= phase;
  const auto rotated = StateVector::from_amplitudes(amps);
  for (std::size_t q = 0; q < 3; ++q) CHECK(expectation_z(rotated, q) == doctest::Approx(expectation_z(s, q)).epsilon(1e-12));
}

TEST_CASE("basis embedding") {
  const auto a = basis_embed(std::vector<double>{1, 0}, 2);
  CHECK(expectation_z(a, 0) == doctest::Approx(-1.0));
  CHECK(expectation_z(a, 1) == doctest::Approx(1.0));
  const auto b = basis_embed(std::vector<double>{0, 0}, 2);
  CHECK(std::norm(b[0]) == doctest::Approx(1.0));
  const auto c = basis_embed(std::vector<double>{1, 1}, 2);
  CHECK(std::norm(c[3]) == doctest::Approx(1.0));
  const auto partial = basis_embed(std::vector<double>{1}, 3);
  CHECK(std::norm(partial[4]) == doctest::Approx(1.0));
  CHECK_THROWS_AS(basis_embed(std::vector<double>{0.5, 0}, 2), InputError);
  CHECK_THROWS_AS(basis_embed(std::vector<double>{1, 0, 1}, 2), ConfigError);
}

TEST_CASE("angle embedding scales onto [0, pi]") {
  const AngleRange budget{0.0, 10.0};
  CHECK(angle_embed(10.0, budget, 2).angle == doctest::Approx(kPi));
  CHECK(angle_embed(0.0, budget, 2).angle == doctest::Approx(0.0));
  CHECK(angle_embed(5.0, budget, 2).angle == doctest::Approx(kPi / 2));
  CHECK(angle_embed(5.0, budget, 2).kind == GateKind::RX);
  CHECK(angle_embed(5.0, budget, 2).target == 2);
  set_warnings_enabled(false);
  CHECK(angle_embed(12.0, budget, 0).angle == doctest::Approx(kPi));
  CHECK(angle_embed(-3.0, budget, 0).angle == doctest::Approx(0.0));
  set_warnings_enabled(true);
}

TEST_CASE("amplitude embedding") {
  SUBCASE("100 ones into 7 qubits") {
    const std::vector<double> ones(100, 1.0);
    const auto s = amplitude_embed(ones, 7);
    for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(s[i] - cd(i < 100 ? 0.1 : 0.0, 0)) < 1e-10);
  }
  SUBCASE("basis vector") {
    const auto s = amplitude_embed(std::vector<double>{1, 0, 0, 0}, 2);
    CHECK(std::norm(s[0]) == doctest::Approx(1.0));
  }
  SUBCASE("(0.6, 0.8) on one qubit") {
    const auto s = amplitude_embed(std::vector<double>{0.6, 0.8}, 1);
    CHECK(std::abs(s[0] - cd(0.6, 0)) < 1e-12);
    CHECK(std::abs(s[1] - cd(0.8, 0)) < 1e-12);
    // Direct statevector computation.
    const auto direct = StateVector::from_amplitudes({cd(0.6, 0), cd(0.8, 0)});
    CHECK(expectation_z(direct, 0) == doctest::Approx(-0.28).epsilon(1e-12));
    CHECK(expectation_z(s, 0) == doctest::Approx(-0.28).epsilon(1e-12));
  }
  SUBCASE("all zero maps to |0...0>") {
    const auto s = amplitude_embed(std::vector<double>(5, 0.0), 3);
    CHECK(std::norm(s[0]) == doctest::Approx(1.0));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(amplitude_embed(std::vector<double>{}, 2), InputError);
    CHECK_THROWS_AS(amplitude_embed(std::vector<double>{0.1, -0.2}, 1), InputError);
    CHECK_THROWS_AS(amplitude_embed(std::vector<double>(9, 1.0), 3), ConfigError);
  }
  SUBCASE("Mottonen gates reproduce normalized features") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.below(7);
      const std::size_t len = 1 + rng.below(std::size_t{1} << n);
      std::vector<double> f(len);
      double norm = 0;
      for (auto& x : f) {
        x = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0, 3);
        norm += x * x;
      }
      if (norm == 0) continue;
      StateVector s(n);
      for (const auto& g : mottonen_gates(f, n)) {
        CHECK(g.kind != GateKind::RX);
        s.apply(g);
      }
      CHECK(std::abs(s.norm_squared() - 1.0) < 1e-10);
      for (std::size_t i = 0; i < s.dim(); ++i) {
        const double want = i < len ? f[i] / std::sqrt(norm) : 0.0;
        CHECK(std::abs(s[i] - cd(want, 0)) < 1e-10);
      }
    }
  }
}

TEST_CASE("adjoint gradient examples") {
  CircuitProgram p{1, {GateOp::parameterized(GateKind::RX, 0, 0)}, {0}};
  const std::vector<double> zero{0.0};
  CHECK(std::abs(adjoint_gradient(p, zero, StateVector(1)).gradients[0][0]) < 1e-12);
  const std::vector<double> quarter{kPi / 2};
  CHECK(adjoint_gradient(p, quarter, StateVector(1)).gradients[0][0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("embedding gates receive no gradient") {
  CircuitProgram p{1, {GateOp::rx(0, 0.3), GateOp::parameterized(GateKind::RY, 0, 0)}, {0}};
  const auto r = adjoint_gradient(p, std::vector<double>{0.4}, StateVector(1));
  REQUIRE(r.gradients[0].size() == 1);
  CHECK(r.expectations[0] == doctest::Approx(std::cos(0.3) * std::cos(0.4)).epsilon(1e-12));
}

TEST_CASE("adjoint gradient matches parameter-shift and finite differences (100 circuits)") {
  Rng rng(99);
  double worst_shift = 0.0;
  double worst_fd = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 6;
    const std::size_t layers = 1 + rng.below(4);
    std::size_t n_params = 0;
    const auto prog = random_layered(rng, n, layers, n_params);
    std::vector<double> theta(n_params);
    for (auto& t : theta) t = rng.uniform(-kPi, kPi);
    StateVector prep(n);
    if (trial % 3 == 0) {
      std::vector<double> f(std::size_t{1} << n);
      for (auto& x : f) x = rng.uniform(0, 1);
      prep = amplitude_embed(f, n);
    }
    const auto adj = adjoint_gradient(prog, theta, prep);
    for (std::size_t j = 0; j < n_params; ++j) {
      auto plus = theta, minus = theta;
      plus[j] += kPi / 2;
      minus[j] -= kPi / 2;
      const auto ep = expectations(prog, plus, prep);
      const auto em = expectations(prog, minus, prep);
      plus[j] = theta[j] + 1e-4;
      minus[j] = theta[j] - 1e-4;
      const auto fp = expectations(prog, plus, prep);
      const auto fm = expectations(prog, minus, prep);
      for (std::size_t q = 0; q < prog.observables.size(); ++q) {
        const double shift = 0.5 * (ep[q] - em[q]);
        const double fd = (fp[q] - fm[q]) / 2e-4;
        worst_shift = std::max(worst_shift, std::abs(adj.gradients[q][j] - shift));
        worst_fd = std::max(worst_fd, std::abs(adj.gradients[q][j] - fd));
      }
    }
  }
  CHECK(worst_shift < 1e-9);
  CHECK(worst_fd < 1e-5);
}
