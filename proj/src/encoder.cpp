#include "swcap/encoder.hpp"

#include "swcap/ops.hpp"

namespace swcap {

RefiningBlockWeights RefiningBlockWeights::create(std::size_t d, std::size_t hidden, std::mt19937_64& rng) {
  RefiningBlockWeights b;
  b.attn = MsaWeights::create(d, rng);
  b.ff = FeedForward::create(d, hidden, rng);
  b.grid_attn_norm = LayerNormParams::create(d);
  b.grid_ff_norm = LayerNormParams::create(d);
  b.global_attn_norm = LayerNormParams::create(d);
  b.global_ff_norm = LayerNormParams::create(d);
  return b;
}

void RefiningBlockWeights::collect(const std::string& prefix, ParameterList& out) const {
  attn.collect(prefix + ".attn", out);
  ff.collect(prefix + ".ff", out);
  grid_attn_norm.collect(prefix + ".grid_attn_norm", out);
  grid_ff_norm.collect(prefix + ".grid_ff_norm", out);
  global_attn_norm.collect(prefix + ".global_attn_norm", out);
  global_ff_norm.collect(prefix + ".global_ff_norm", out);
}

RefinedFeatures refine_block(const Tensor& grid, const Tensor& global, const RefiningBlockWeights& w,
                             const AttentionConfig& config, const WindowSpec& spec, bool use_shift,
                             const RefineOptions& options) {
  if (!global.defined() || global.numel() != config.d_model) {
    throw DimensionError("refine_block needs a global feature of width " + std::to_string(config.d_model));
  }
  const auto& drop = options.dropout;
  const std::size_t m = grid.dim(0);

  WindowAttentionOptions window_opts;
  window_opts.mask_global = options.mask_global;
  Tensor g = windowed_msa(grid, global, w.attn, config, spec, use_shift ? spec.shift : 0, window_opts);
  g = w.grid_attn_norm(add(grid, drop(g)));
  g = w.grid_ff_norm(add(g, drop(w.ff(g))));

  const Tensor query = reshape(global, {1, config.d_model});
  const Tensor stacked = stack_rows({grid, global});
  Tensor mask;
  if (options.mask_global) {
    std::vector<Real> bias(m + 1, 0);
    bias[m] = kMaskValue;
    mask = Tensor::from({1, m + 1}, std::move(bias));
  }
  Tensor v = msa(query, stacked, stacked, w.attn, config, mask.defined() ? &mask : nullptr);
  v = w.global_attn_norm(add(query, drop(v)));
  v = w.global_ff_norm(add(v, drop(w.ff(v))));
  return {g, reshape(v, {config.d_model})};
}

RefiningEncoder RefiningEncoder::create(const ModelConfig& config, std::mt19937_64& rng) {
  RefiningEncoder e;
  e.attention_ = config.attention();
  e.spec_ = config.window_spec();
  for (std::size_t i = 0; i < config.blocks; ++i) {
    e.blocks_.push_back(RefiningBlockWeights::create(config.d_model, config.ff_mult * config.d_model, rng));
  }
  return e;
}

RefinedFeatures RefiningEncoder::refine(const Tensor& grid, const Tensor& global,
                                        const RefineOptions& options) const {
  if (blocks_.empty()) throw ConfigError("refining encoder needs at least one block");
  RefinedFeatures f{grid, global};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    f = refine_block(f.grid, f.global, blocks_[i], attention_, spec_, i % 2 == 1, options);
  }
  return f;
}

void RefiningEncoder::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
}

}  // namespace swcap
