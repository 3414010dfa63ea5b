#pragma once

#include <functional>
#include <random>
#include <vector>

#include "swcap/ops.hpp"
#include "support/gradcheck.hpp"

namespace swcap::testing {

// One random instance per op; shapes are kept small so every element is
// perturbed.
using OpCase = std::function<Tensor(const std::vector<Tensor>&)>;

struct NamedOp {
  const char* name;
  std::vector<Shape> shapes;
  OpCase fn;
};

inline std::vector<NamedOp> differentiable_ops() {
  auto weighted = [](const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul(y, random_tensor(y.shape(), rng)));
  };
  return {
      {"matmul", {{3, 4}, {4, 2}}, [=](auto& in) { return weighted(matmul(in[0], in[1]), 11); }},
      {"matmul_batched", {{2, 3, 4}, {4, 2}}, [=](auto& in) { return weighted(matmul(in[0], in[1]), 12); }},
      {"add_broadcast", {{3, 4}, {4}}, [=](auto& in) { return weighted(add(in[0], in[1]), 13); }},
      {"sub_broadcast", {{2, 1, 3}, {4, 1}}, [=](auto& in) { return weighted(sub(in[0], in[1]), 14); }},
      {"mul", {{3, 4}, {3, 4}}, [=](auto& in) { return weighted(mul(in[0], in[1]), 15); }},
      {"scale", {{5}}, [=](auto& in) { return weighted(scale(in[0], -1.7), 16); }},
      {"relu", {{4, 4}}, [=](auto& in) { return weighted(relu(in[0]), 17); }},
      {"softmax_last", {{3, 5}}, [=](auto& in) { return weighted(softmax(in[0], -1), 18); }},
      {"softmax_first", {{3, 5}}, [=](auto& in) { return weighted(softmax(in[0], 0), 19); }},
      {"log_softmax", {{3, 5}}, [=](auto& in) { return weighted(log_softmax(in[0], -1), 20); }},
      {"layer_norm", {{3, 6}, {6}, {6}}, [=](auto& in) { return weighted(layer_norm(in[0], in[1], in[2]), 21); }},
      {"mean_pool", {{4, 3}}, [=](auto& in) { return weighted(mean_pool(in[0]), 22); }},
      {"mean", {{4, 3}}, [=](auto& in) { return mean(in[0]); }},
      {"concat_last", {{2, 3}, {2, 2}}, [=](auto& in) { return weighted(concat_last(in[0], in[1]), 23); }},
      {"stack_rows", {{2, 3}, {3}}, [=](auto& in) { return weighted(stack_rows({in[0], in[1]}), 24); }},
      {"gather_rows", {{4, 3}}, [=](auto& in) {
         std::vector<std::size_t> idx{3, 0, 0, 2};
         return weighted(gather_rows(in[0], idx), 25);
       }},
      {"pick", {{3, 4}}, [=](auto& in) {
         std::vector<int> ids{1, 3, 0};
         return weighted(pick(in[0], ids), 26);
       }},
      {"reshape", {{2, 6}}, [=](auto& in) { return weighted(reshape(in[0], {3, 4}), 27); }},
      {"transpose_last2", {{2, 3, 4}}, [=](auto& in) { return weighted(transpose_last2(in[0]), 28); }},
      {"split_heads", {{2, 3, 4}}, [=](auto& in) { return weighted(split_heads(in[0], 2), 29); }},
      {"merge_heads", {{2, 3, 2}}, [=](auto& in) { return weighted(merge_heads(in[0]), 30); }},
      {"slice_rows", {{5, 2}}, [=](auto& in) { return weighted(slice_rows(in[0], 1, 4), 31); }},
      {"embedding_lookup", {{5, 3}}, [=](auto& in) {
         std::vector<int> ids{4, 1, 1};
         return weighted(embedding_lookup(in[0], ids), 32);
       }},
      {"dropout", {{4, 4}}, [=](auto& in) {
         std::mt19937_64 mask_rng(33);
         return weighted(dropout(in[0], 0.3, mask_rng), 34);
       }},
  };
}


}  // namespace swcap::testing
