#pragma once

#include <random>
#include <span>
#include <vector>

#include "swcap/attention.hpp"
#include "swcap/encoder.hpp"
#include "swcap/model_config.hpp"
#include "swcap/nn.hpp"

namespace swcap {

// Reserved vocabulary ids.
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumReserved = 4;

struct DecoderBlockWeights {
  Linear fusion;  // [2D, D]
  LayerNormParams fusion_norm;
  MsaWeights self_attn;
  LayerNormParams self_norm;
  MsaWeights cross_attn;
  LayerNormParams cross_norm;
  FeedForward ff;
  LayerNormParams ff_norm;

  static DecoderBlockWeights create(std::size_t d, std::size_t hidden, std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

// [length, D] fixed sinusoidal table.
Tensor sinusoidal_positions(std::size_t length, std::size_t d);

// LayerNorm(X + ReLU([X; v_g] W_f + b)); x [T, D], global [D].
Tensor pre_fusion(const Tensor& x, const Tensor& global, const Linear& fusion, const LayerNormParams& norm);

// LayerNorm(X + MSA(X, X, X)) under a causal mask.
Tensor masked_self_attention(const Tensor& x, const MsaWeights& w, const LayerNormParams& norm,
                             const AttentionConfig& config, const DropoutContext& dropout = {});

// LayerNorm(X + MSA(X, V_G, V_G)); `weights_out` receives [h, T, m].
Tensor cross_attention(const Tensor& x, const Tensor& grid, const MsaWeights& w, const LayerNormParams& norm,
                       const AttentionConfig& config, const DropoutContext& dropout = {},
                       Tensor* weights_out = nullptr);

// log_softmax(X W_x) over the vocabulary, one row per position.
Tensor word_distribution(const Tensor& hidden, const Linear& output);

struct DecodeOutputs {
  Tensor log_probs;      // [T, V]
  Tensor cross_weights;  // [T, m], last block, mean over heads; set on request
};

class Decoder {
 public:
  static Decoder create(const ModelConfig& config, std::mt19937_64& rng);

  // X^0: embedding rows plus the positional table.
  Tensor embed(std::span<const int> ids, const DropoutContext& dropout = {}) const;

  // Teacher-forced pass over `prefix` (begins with BOS). BOS and PAD never
  // receive probability mass: their logits carry kMaskValue.
  DecodeOutputs forward(std::span<const int> prefix, const RefinedFeatures& features,
                        const DropoutContext& dropout = {}, bool want_cross_weights = false) const;

  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t vocab_size() const { return embedding_.dim(0); }
  Tensor& embedding() { return embedding_; }
  Linear& output() { return output_; }
  std::vector<DecoderBlockWeights>& blocks() { return blocks_; }
  const std::vector<DecoderBlockWeights>& blocks() const { return blocks_; }

 private:
  AttentionConfig attention_;
  Tensor embedding_;  // [V, D]
  Linear output_;     // [D, V], no bias
  Tensor generation_bias_;
  std::vector<DecoderBlockWeights> blocks_;
};

}  // namespace swcap
