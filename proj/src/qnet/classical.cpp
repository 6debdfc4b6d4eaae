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
#include <fstream>

#include "qmarl/qnet.hpp"

namespace qmarl::qnet {

ClassicalNet::ClassicalNet(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ConfigError("classical net needs input and output sizes");
  for (auto s : sizes_) {
    if (s == 0) throw ConfigError("classical net layer of width 0");
  }
  heads_ = {{"env", 0, sizes_.back()}};
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    w_offset_.push_back(offset);
    offset += sizes_[l] * sizes_[l + 1];
    b_offset_.push_back(offset);
    offset += sizes_[l + 1];
  }
  params_.assign(offset, 0.0);
  groups_.assign(offset, ParamGroup::Main);
}

void ClassicalNet::initialize(Rng& rng) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    for (auto& w : weights(l)) w = rng.uniform(-bound, bound);
    for (auto& b : bias(l)) b = rng.uniform(-bound, bound);
  }
}

std::span<double> ClassicalNet::weights(std::size_t layer) {
  return std::span(params_).subspan(w_offset_.at(layer), sizes_[layer] * sizes_[layer + 1]);
}
std::span<double> ClassicalNet::bias(std::size_t layer) {
  return std::span(params_).subspan(b_offset_.at(layer), sizes_[layer + 1]);
}
std::span<const double> ClassicalNet::weights(std::size_t layer) const {
  return std::span(params_).subspan(w_offset_.at(layer), sizes_[layer] * sizes_[layer + 1]);
}
std::span<const double> ClassicalNet::bias(std::size_t layer) const {
  return std::span(params_).subspan(b_offset_.at(layer), sizes_[layer + 1]);
}

std::vector<double> ClassicalNet::forward(std::span<const double> obs) const {
  if (obs.size() != sizes_.front()) throw ConfigError("classical net: observation size mismatch");
  std::vector<double> x(obs.begin(), obs.end());
  const std::size_t n_layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto w = weights(l);
    const auto b = bias(l);
    std::vector<double> y(sizes_[l + 1]);
    for (std::size_t o = 0; o < y.size(); ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < x.size(); ++i) acc += w[o * x.size() + i] * x[i];
      y[o] = (l + 1 < n_layers) ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

std::vector<double> ClassicalNet::backward(std::span<const double> obs, std::span<const double> upstream,
                                           std::span<double> grad) const {
  if (obs.size() != sizes_.front()) throw ConfigError("classical net: observation size mismatch");
  if (upstream.size() != sizes_.back() || grad.size() != params_.size()) {
    throw ConfigError("classical net: backward buffer size mismatch");
  }
  const std::size_t n_layers = sizes_.size() - 1;
  // activations[l] is the input to layer l (post-ReLU for hidden layers).
  std::vector<std::vector<double>> activations{std::vector<double>(obs.begin(), obs.end())};
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto w = weights(l);
    const auto b = bias(l);
    const auto& x = activations.back();
    std::vector<double> y(sizes_[l + 1]);
    for (std::size_t o = 0; o < y.size(); ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < x.size(); ++i) acc += w[o * x.size() + i] * x[i];
      y[o] = (l + 1 < n_layers) ? std::max(acc, 0.0) : acc;
    }
    activations.push_back(std::move(y));
  }

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto w = weights(l);
    const auto& x = activations[l];
    const std::size_t n_in = x.size();
    for (std::size_t o = 0; o < delta.size(); ++o) {
      if (delta[o] == 0.0) continue;
      grad[b_offset_[l] + o] += delta[o];
      for (std::size_t i = 0; i < n_in; ++i) grad[w_offset_[l] + o * n_in + i] += delta[o] * x[i];
    }
    if (l == 0) break;
    std::vector<double> prev(n_in, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      if (x[i] <= 0.0) continue;  // ReLU gate
      double acc = 0.0;
      for (std::size_t o = 0; o < delta.size(); ++o) acc += w[o * n_in + i] * delta[o];
      prev[i] = acc;
    }
    delta = std::move(prev);
  }
  return activations.back();
}

nlohmann::json ClassicalNet::to_json() const {
  return {{"type", "mlp"}, {"layer_sizes", sizes_}, {"params", params_}};
}

ClassicalNet build_classical_baseline(std::size_t hidden) { return ClassicalNet({100, hidden, hidden, 6}); }

void save_checkpoint(const QFunction& net, std::optional<ProtocolKind> protocol, const std::string& path) {
  nlohmann::json doc = net.to_json();
  doc["format"] = "qmarl-qfunction";
  doc["version"] = kCheckpointVersion;
  if (protocol) doc["protocol"] = std::string(protocol_name(*protocol));
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out << doc.dump(1) << '\n';
  if (!out) throw InputError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed checkpoint " + path + ": " + e.what());
  }
  if (doc.value("format", "") != "qmarl-qfunction") throw InputError("not a qmarl checkpoint: " + path);
  if (doc.value("version", 0) != kCheckpointVersion) throw InputError("unsupported checkpoint version");

  Checkpoint ckpt;
  if (doc.contains("protocol")) ckpt.protocol = parse_protocol(doc["protocol"].get<std::string>());
  const auto params = doc.at("params").get<std::vector<double>>();
  const auto type = doc.at("type").get<std::string>();
  if (type == "vqc") {
    if (!ckpt.protocol) throw InputError("VQC checkpoint lacks a protocol");
    auto net = build_layout(*ckpt.protocol, {doc.at("n_layers").get<std::size_t>()});
    if (params.size() != net.parameters().size()) throw InputError("checkpoint parameter count mismatch");
    std::copy(params.begin(), params.end(), net.parameters().begin());
    ckpt.net = std::make_unique<QNetwork>(std::move(net));
  } else if (type == "mlp") {
    ClassicalNet net(doc.at("layer_sizes").get<std::vector<std::size_t>>());
    if (params.size() != net.parameters().size()) throw InputError("checkpoint parameter count mismatch");
    std::copy(params.begin(), params.end(), net.parameters().begin());
    ckpt.net = std::make_unique<ClassicalNet>(std::move(net));
  } else {
    throw InputError("unknown network type '" + type + "'");
  }
  return ckpt;
}

}  // namespace qmarl::qnet
