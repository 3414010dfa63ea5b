#pragma once

// Parameter-holding building blocks shared by the model modules.

#include <random>
#include <string>

#include "swcap/ops.hpp"
#include "swcap/tensor.hpp"

namespace swcap {

// y = x W (+ b), W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when the layer has no bias

  static Linear create(std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams create(std::size_t d);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

// W_2 ReLU(W_1 x), with biases on both layers.
struct FeedForward {
  Linear up;
  Linear down;

  static FeedForward create(std::size_t d, std::size_t hidden, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return down(relu(up(x))); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Dropout owned by a module; inactive unless `training` is set.
struct DropoutContext {
  Real p = 0;
  bool training = false;
  std::mt19937_64* rng = nullptr;

  Tensor operator()(const Tensor& x) const {
    if (!training || p == 0 || rng == nullptr) return x;
    return dropout(x, p, *rng);
  }
};

}  // namespace swcap
