#pragma once

// Long-double loop references for the residual sublayers.

#include <cmath>

#include "swcap/nn.hpp"
#include "support/attention_oracle.hpp"

namespace swcap::testing {

inline Matrix add_rows(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] += b[i][j];
  return out;
}

inline Matrix layer_norm_rows(const Matrix& x, const LayerNormParams& p, long double eps = 1e-5L) {
  Matrix out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t d = x[i].size();
    long double mean = 0;
    for (auto v : x[i]) mean += v;
    mean /= d;
    long double var = 0;
    for (auto v : x[i]) var += (v - mean) * (v - mean);
    var /= d;
    for (std::size_t j = 0; j < d; ++j) out[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * p.gain[j] + p.bias[j];
  }
  return out;
}

inline Matrix relu_rows(Matrix x) {
  for (auto& row : x)
    for (auto& v : row) v = v > 0 ? v : 0;
  return x;
}

inline Matrix feed_forward_rows(const Matrix& x, const FeedForward& ff) {
  return project(relu_rows(project(x, ff.up)), ff.down);
}

inline Real max_diff(const Tensor& t, const Matrix& m) {
  const std::size_t cols = m[0].size();
  Real worst = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j)
      worst = std::max(worst, static_cast<Real>(std::abs(t[i * cols + j] - m[i][j])));
  return worst;
}

inline void fill(Tensor t, Real value) {
  for (auto& v : t.mutable_data()) v = value;
}

}  // namespace swcap::testing
