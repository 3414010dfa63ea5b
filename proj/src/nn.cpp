#include "swcap/nn.hpp"

#include <cmath>

namespace swcap {

Linear Linear::create(std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng) {
  const Real limit = std::sqrt(Real(6) / static_cast<Real>(in + out));
  Linear l;
  l.weight = Tensor::uniform({in, out}, -limit, limit, rng, true);
  if (with_bias) l.bias = Tensor::zeros({out}, true);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x.ndim() == 1 ? reshape(x, {1, x.dim(0)}) : x, weight);
  if (x.ndim() == 1) y = reshape(y, {weight.dim(1)});
  return bias.defined() ? add(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LayerNormParams LayerNormParams::create(std::size_t d) {
  return {Tensor::full({d}, Real(1), true), Tensor::zeros({d}, true)};
}

void LayerNormParams::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

FeedForward FeedForward::create(std::size_t d, std::size_t hidden, std::mt19937_64& rng) {
  FeedForward ff;
  ff.up = Linear::create(d, hidden, true, rng);
  ff.down = Linear::create(hidden, d, true, rng);
  return ff;
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  up.collect(prefix + ".w1", out);
  down.collect(prefix + ".w2", out);
}

}  // namespace swcap
