#include "swcap/decoder.hpp"

#include <cmath>

#include "swcap/ops.hpp"

namespace swcap {

DecoderBlockWeights DecoderBlockWeights::create(std::size_t d, std::size_t hidden, std::mt19937_64& rng) {
  DecoderBlockWeights b;
  b.fusion = Linear::create(2 * d, d, true, rng);
  b.fusion_norm = LayerNormParams::create(d);
  b.self_attn = MsaWeights::create(d, rng);
  b.self_norm = LayerNormParams::create(d);
  b.cross_attn = MsaWeights::create(d, rng);
  b.cross_norm = LayerNormParams::create(d);
  b.ff = FeedForward::create(d, hidden, rng);
  b.ff_norm = LayerNormParams::create(d);
  return b;
}

void DecoderBlockWeights::collect(const std::string& prefix, ParameterList& out) const {
  fusion.collect(prefix + ".fusion", out);
  fusion_norm.collect(prefix + ".fusion_norm", out);
  self_attn.collect(prefix + ".self_attn", out);
  self_norm.collect(prefix + ".self_norm", out);
  cross_attn.collect(prefix + ".cross_attn", out);
  cross_norm.collect(prefix + ".cross_norm", out);
  ff.collect(prefix + ".ff", out);
  ff_norm.collect(prefix + ".ff_norm", out);
}

Tensor sinusoidal_positions(std::size_t length, std::size_t d) {
  std::vector<Real> table(length * d);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * d + i] = static_cast<Real>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor::from({length, d}, std::move(table));
}

Tensor pre_fusion(const Tensor& x, const Tensor& global, const Linear& fusion, const LayerNormParams& norm) {
  if (x.ndim() != 2 || global.numel() != x.dim(1)) {
    throw DimensionError("pre_fusion expects X [T, D] and v_g [D], got " + shape_str(x.shape()) + " and " +
                         shape_str(global.shape()));
  }
  const std::size_t t = x.dim(0);
  std::vector<Tensor> rows(t, reshape(global, {1, global.numel()}));
  const Tensor broadcast = stack_rows(std::span<const Tensor>(rows));
  return norm(add(x, relu(fusion(concat_last(x, broadcast)))));
}

Tensor masked_self_attention(const Tensor& x, const MsaWeights& w, const LayerNormParams& norm,
                             const AttentionConfig& config, const DropoutContext& dropout) {
  const Tensor mask = causal_mask(x.dim(0));
  return norm(add(x, dropout(msa(x, x, x, w, config, &mask))));
}

Tensor cross_attention(const Tensor& x, const Tensor& grid, const MsaWeights& w, const LayerNormParams& norm,
                       const AttentionConfig& config, const DropoutContext& dropout, Tensor* weights_out) {
  return norm(add(x, dropout(msa(x, grid, grid, w, config, nullptr, weights_out))));
}

Tensor word_distribution(const Tensor& hidden, const Linear& output) { return log_softmax(output(hidden)); }

Decoder Decoder::create(const ModelConfig& config, std::mt19937_64& rng) {
  if (config.vocab_size <= static_cast<std::size_t>(kNumReserved)) {
    throw ConfigError("model.vocab_size must exceed the reserved ids, got " + std::to_string(config.vocab_size));
  }
  Decoder dec;
  dec.attention_ = config.attention();
  const std::size_t d = config.d_model, v = config.vocab_size;
  const Real limit = std::sqrt(Real(6) / static_cast<Real>(v + d));
  dec.embedding_ = Tensor::uniform({v, d}, -limit, limit, rng, true);
  dec.output_ = Linear::create(d, v, false, rng);
  std::vector<Real> bias(v, 0);
  bias[kBos] = kMaskValue;
  bias[kPad] = kMaskValue;
  dec.generation_bias_ = Tensor::from({v}, std::move(bias));
  for (std::size_t i = 0; i < config.blocks; ++i) {
    dec.blocks_.push_back(DecoderBlockWeights::create(d, config.ff_mult * d, rng));
  }
  return dec;
}

Tensor Decoder::embed(std::span<const int> ids, const DropoutContext& dropout) const {
  const Tensor rows = embedding_lookup(embedding_, ids);
  return dropout(add(rows, sinusoidal_positions(ids.size(), embedding_.dim(1))));
}

DecodeOutputs Decoder::forward(std::span<const int> prefix, const RefinedFeatures& features,
                               const DropoutContext& dropout, bool want_cross_weights) const {
  if (prefix.empty()) throw ContractError("decoder prefix must contain at least BOS");
  DecodeOutputs out;
  Tensor x = embed(prefix, dropout);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const bool last = i + 1 == blocks_.size();
    x = pre_fusion(x, features.global, b.fusion, b.fusion_norm);
    x = masked_self_attention(x, b.self_attn, b.self_norm, attention_, dropout);
    Tensor weights;
    x = cross_attention(x, features.grid, b.cross_attn, b.cross_norm, attention_, dropout,
                        last && want_cross_weights ? &weights : nullptr);
    x = b.ff_norm(add(x, dropout(b.ff(x))));
    if (weights.defined()) {
      const std::size_t h = weights.dim(0), t = weights.dim(1), m = weights.dim(2);
      std::vector<Real> avg(t * m, 0);
      const auto w = weights.data();
      for (std::size_t head = 0; head < h; ++head)
        for (std::size_t j = 0; j < t * m; ++j) avg[j] += w[head * t * m + j];
      for (auto& a : avg) a /= static_cast<Real>(h);
      out.cross_weights = Tensor::from({t, m}, std::move(avg));
    }
  }
  out.log_probs = log_softmax(add(output_(x), generation_bias_));
  return out;
}

void Decoder::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".embedding", embedding_});
  output_.collect(prefix + ".output", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
}

}  // namespace swcap
