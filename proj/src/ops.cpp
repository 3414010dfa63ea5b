#include "swcap/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace swcap {

namespace {

using detail::Node;

void accumulate(Node& input, std::span<const Real> delta) {
  if (!input.requires_grad) return;
  auto& g = input.grad_buffer();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ea = i < n - a.size() ? 1 : a[i - (n - a.size())];
    const std::size_t eb = i < n - b.size() ? 1 : b[i - (n - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcastable");
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

// For each flat element of `out`, the flat index into an operand of shape
// `in` broadcast to `out`.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t n = out.size();
  const std::size_t offset = n - in.size();
  std::vector<std::size_t> stride(n, 0);
  std::size_t s = 1;
  for (std::size_t i = n; i-- > offset;) {
    const std::size_t e = in[i - offset];
    stride[i] = e == 1 ? 0 : s;
    s *= e;
  }
  const std::size_t total = shape_numel(out);
  std::vector<std::size_t> index(total);
  std::vector<std::size_t> counter(n, 0);
  std::size_t flat = 0;
  for (std::size_t k = 0; k < total; ++k) {
    index[k] = flat;
    for (std::size_t d = n; d-- > 0;) {
      ++counter[d];
      flat += stride[d];
      if (counter[d] < out[d]) break;
      flat -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

enum class BinaryKind { kAdd, kSub, kMul };

const char* binary_name(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::kAdd:
      return "add";
    case BinaryKind::kSub:
      return "sub";
    case BinaryKind::kMul:
      return "mul";
  }
  return "binary";
}

Real apply(BinaryKind kind, Real x, Real y) {
  switch (kind) {
    case BinaryKind::kAdd:
      return x + y;
    case BinaryKind::kSub:
      return x - y;
    case BinaryKind::kMul:
      return x * y;
  }
  return 0;
}

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  const char* name = binary_name(kind);
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape(), name);
  const std::size_t total = shape_numel(out_shape);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<Real> out(total);

  // Index maps are only materialized when an operand actually broadcasts.
  std::shared_ptr<std::vector<std::size_t>> ia, ib;
  if (a.shape() != out_shape) ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(a.shape(), out_shape));
  if (b.shape() != out_shape) ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(b.shape(), out_shape));
  for (std::size_t k = 0; k < total; ++k) {
    out[k] = apply(kind, ad[ia ? (*ia)[k] : k], bd[ib ? (*ib)[k] : k]);
  }

  return make_op_result(name, out_shape, std::move(out), {&a, &b}, [kind, ia, ib](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      auto& ga = na.grad_buffer();
      for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t j = ib ? (*ib)[k] : k;
        const Real d = kind == BinaryKind::kMul ? g[k] * nb.data[j] : g[k];
        ga[ia ? (*ia)[k] : k] += d;
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.grad_buffer();
      for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t i = ia ? (*ia)[k] : k;
        Real d = g[k];
        if (kind == BinaryKind::kSub) d = -d;
        if (kind == BinaryKind::kMul) d = g[k] * na.data[i];
        gb[ib ? (*ib)[k] : k] += d;
      }
    }
  });
}

std::size_t normalize_axis(int axis, std::size_t ndim, const char* op) {
  const int n = static_cast<int>(ndim);
  const int a = axis < 0 ? axis + n : axis;
  if (a < 0 || a >= n) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                         std::to_string(ndim) + "-d tensor");
  }
  return static_cast<std::size_t>(a);
}

struct AxisLayout {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

void require_rank_at_least(const Tensor& x, std::size_t rank, const char* op) {
  if (x.ndim() < rank) {
    throw DimensionError(std::string(op) + " needs a tensor of rank >= " + std::to_string(rank) +
                         ", got shape " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2 || b.ndim() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const std::size_t p = as[as.size() - 2], q = as.back();
  const std::size_t q2 = bs[bs.size() - 2], r = bs.back();
  if (q != q2) {
    throw DimensionError("matmul inner extents differ: " + shape_str(as) + " x " + shape_str(bs));
  }
  const Shape a_batch(as.begin(), as.end() - 2);
  const Shape b_batch(bs.begin(), bs.end() - 2);
  Shape batch = broadcast_shapes(a_batch, b_batch, "matmul");
  const std::size_t nbatch = shape_numel(batch);
  auto a_off = std::make_shared<std::vector<std::size_t>>(broadcast_index(a_batch, batch));
  auto b_off = std::make_shared<std::vector<std::size_t>>(broadcast_index(b_batch, batch));

  std::vector<Real> out(nbatch * p * r, Real(0));
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t n = 0; n < nbatch; ++n) {
    const Real* A = ad.data() + (*a_off)[n] * p * q;
    const Real* B = bd.data() + (*b_off)[n] * q * r;
    Real* C = out.data() + n * p * r;
    for (std::size_t i = 0; i < p; ++i) {
      Real* crow = C + i * r;
      for (std::size_t k = 0; k < q; ++k) {
        const Real aik = A[i * q + k];
        const Real* brow = B + k * r;
        for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
      }
    }
  }

  Shape out_shape = batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  return make_op_result("matmul", std::move(out_shape), std::move(out), {&a, &b},
                        [p, q, r, nbatch, a_off, b_off](Node& self) {
                          Node& na = *self.inputs[0];
                          Node& nb = *self.inputs[1];
                          const Real* G = self.grad.data();
                          Real* GA = na.requires_grad ? na.grad_buffer().data() : nullptr;
                          Real* GB = nb.requires_grad ? nb.grad_buffer().data() : nullptr;
                          for (std::size_t n = 0; n < nbatch; ++n) {
                            const Real* A = na.data.data() + (*a_off)[n] * p * q;
                            const Real* B = nb.data.data() + (*b_off)[n] * q * r;
                            const Real* Gn = G + n * p * r;
                            if (GA) {
                              // dA = G * B^T
                              Real* dA = GA + (*a_off)[n] * p * q;
                              for (std::size_t i = 0; i < p; ++i) {
                                const Real* grow = Gn + i * r;
                                for (std::size_t k = 0; k < q; ++k) {
                                  const Real* brow = B + k * r;
                                  Real acc = 0;
                                  for (std::size_t j = 0; j < r; ++j) acc += grow[j] * brow[j];
                                  dA[i * q + k] += acc;
                                }
                              }
                            }
                            if (GB) {
                              // dB = A^T * G
                              Real* dB = GB + (*b_off)[n] * q * r;
                              for (std::size_t i = 0; i < p; ++i) {
                                const Real* grow = Gn + i * r;
                                for (std::size_t k = 0; k < q; ++k) {
                                  const Real aik = A[i * q + k];
                                  Real* dbrow = dB + k * r;
                                  for (std::size_t j = 0; j < r; ++j) dbrow[j] += aik * grow[j];
                                }
                              }
                            }
                          }
                        });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul); }

Tensor scale(const Tensor& x, Real factor) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return make_op_result("scale", x.shape(), std::move(out), {&x}, [factor](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > 0 ? v : Real(0);
  return make_op_result("relu", x.shape(), std::move(out), {&x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in.data[i] > 0) g[i] += self.grad[i];
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), "softmax");
  const AxisLayout l = axis_layout(x.shape(), ax);
  auto xd = x.data();
  std::vector<Real> out(xd.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t k = 0; k < l.extent; ++k) mx = std::max(mx, xd[base + k * l.inner]);
      Real total = 0;
      for (std::size_t k = 0; k < l.extent; ++k) {
        const Real e = std::exp(xd[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < l.extent; ++k) out[base + k * l.inner] /= total;
    }
  }
  return make_op_result("softmax", x.shape(), std::move(out), {&x}, [l](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const auto& y = self.data;
    const auto& gy = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.extent * l.inner + i;
        Real dot = 0;
        for (std::size_t k = 0; k < l.extent; ++k) {
          const std::size_t idx = base + k * l.inner;
          dot += gy[idx] * y[idx];
        }
        for (std::size_t k = 0; k < l.extent; ++k) {
          const std::size_t idx = base + k * l.inner;
          g[idx] += y[idx] * (gy[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), "log_softmax");
  const AxisLayout l = axis_layout(x.shape(), ax);
  auto xd = x.data();
  std::vector<Real> out(xd.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t k = 0; k < l.extent; ++k) mx = std::max(mx, xd[base + k * l.inner]);
      Real total = 0;
      for (std::size_t k = 0; k < l.extent; ++k) total += std::exp(xd[base + k * l.inner] - mx);
      const Real lse = mx + std::log(total);
      for (std::size_t k = 0; k < l.extent; ++k) out[base + k * l.inner] = xd[base + k * l.inner] - lse;
    }
  }
  return make_op_result("log_softmax", x.shape(), std::move(out), {&x}, [l](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const auto& y = self.data;
    const auto& gy = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.extent * l.inner + i;
        Real total = 0;
        for (std::size_t k = 0; k < l.extent; ++k) total += gy[base + k * l.inner];
        for (std::size_t k = 0; k < l.extent; ++k) {
          const std::size_t idx = base + k * l.inner;
          g[idx] += gy[idx] - std::exp(y[idx]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  if (eps <= 0) throw ConfigError("layer_norm eps must be positive");
  require_rank_at_least(x, 1, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " with gain " +
                         shape_str(gain.shape()) + " and bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / d;
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  auto xhat = std::make_shared<std::vector<Real>>(xd.size());
  auto rstd = std::make_shared<std::vector<Real>>(rows);
  std::vector<Real> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = xd.data() + r * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<Real>(d);
    const Real rs = Real(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const Real h = (row[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gd[j] + bd[j];
    }
  }
  return make_op_result("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                        [d, rows, xhat, rstd](Node& self) {
                          Node& nx = *self.inputs[0];
                          Node& ng = *self.inputs[1];
                          Node& nb = *self.inputs[2];
                          const auto& gy = self.grad;
                          if (ng.requires_grad || nb.requires_grad) {
                            Real* gg = ng.requires_grad ? ng.grad_buffer().data() : nullptr;
                            Real* gb = nb.requires_grad ? nb.grad_buffer().data() : nullptr;
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t j = 0; j < d; ++j) {
                                if (gg) gg[j] += gy[r * d + j] * (*xhat)[r * d + j];
                                if (gb) gb[j] += gy[r * d + j];
                              }
                            }
                          }
                          if (!nx.requires_grad) return;
                          auto& gx = nx.grad_buffer();
                          std::vector<Real> dh(d);
                          for (std::size_t r = 0; r < rows; ++r) {
                            Real mean_dh = 0, mean_dh_h = 0;
                            for (std::size_t j = 0; j < d; ++j) {
                              dh[j] = gy[r * d + j] * ng.data[j];
                              mean_dh += dh[j];
                              mean_dh_h += dh[j] * (*xhat)[r * d + j];
                            }
                            mean_dh /= static_cast<Real>(d);
                            mean_dh_h /= static_cast<Real>(d);
                            for (std::size_t j = 0; j < d; ++j) {
                              gx[r * d + j] +=
                                  (*rstd)[r] * (dh[j] - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
                            }
                          }
                        });
}

Tensor sum(const Tensor& x) {
  auto xd = x.data();
  Real total = 0;
  for (auto v : xd) total += v;
  return make_op_result("sum", {1}, {total}, {&x}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real(1) / static_cast<Real>(x.numel())); }

Tensor mean_pool(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(0) == 0) {
    throw DimensionError("mean_pool needs a non-empty [m, D] tensor, got " + shape_str(x.shape()));
  }
  const std::size_t m = x.dim(0), d = x.dim(1);
  auto xd = x.data();
  std::vector<Real> out(d, Real(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[j] += xd[i * d + j];
  }
  for (auto& v : out) v /= static_cast<Real>(m);
  return make_op_result("mean_pool", {d}, std::move(out), {&x}, [m, d](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    const Real inv = Real(1) / static_cast<Real>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[j] * inv;
    }
  });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != bs.size() || as.empty() || !std::equal(as.begin(), as.end() - 1, bs.begin())) {
    throw DimensionError("concat_last: leading extents differ for " + shape_str(as) + " and " +
                         shape_str(bs));
  }
  const std::size_t da = as.back(), db = bs.back();
  const std::size_t rows = a.numel() / std::max<std::size_t>(da, 1);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<Real> out;
  out.reserve(a.numel() + b.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    out.insert(out.end(), ad.begin() + r * da, ad.begin() + (r + 1) * da);
    out.insert(out.end(), bd.begin() + r * db, bd.begin() + (r + 1) * db);
  }
  Shape shape = as;
  shape.back() = da + db;
  return make_op_result("concat_last", std::move(shape), std::move(out), {&a, &b},
                        [rows, da, db](Node& self) {
                          Node& na = *self.inputs[0];
                          Node& nb = *self.inputs[1];
                          const std::size_t w = da + db;
                          if (na.requires_grad) {
                            auto& g = na.grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < da; ++j) g[r * da + j] += self.grad[r * w + j];
                          }
                          if (nb.requires_grad) {
                            auto& g = nb.grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < db; ++j)
                                g[r * db + j] += self.grad[r * w + da + j];
                          }
                        });
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("stack_rows needs at least one input");
  auto trailing = [](const Tensor& t) {
    return t.ndim() == 1 ? t.shape() : Shape(t.shape().begin() + 1, t.shape().end());
  };
  const Shape tail = trailing(rows[0]);
  std::size_t total_rows = 0;
  for (const auto& t : rows) {
    if (trailing(t) != tail) {
      throw DimensionError("stack_rows: trailing extents " + shape_str(trailing(t)) + " vs " +
                           shape_str(tail));
    }
    total_rows += t.ndim() == 1 ? 1 : t.dim(0);
  }
  const std::size_t row_size = shape_numel(tail);
  std::vector<Real> out;
  out.reserve(total_rows * row_size);
  for (const auto& t : rows) out.insert(out.end(), t.data().begin(), t.data().end());
  Shape shape{total_rows};
  shape.insert(shape.end(), tail.begin(), tail.end());

  // make_op_result takes a fixed initializer list, so inputs are wired here.
  auto result = make_op_result("stack_rows", std::move(shape), std::move(out), {}, nullptr);
  bool track = false;
  if (grad_enabled()) {
    for (const auto& t : rows) track = track || t.requires_grad();
  }
  if (track) {
    Node* node = result.node();
    node->requires_grad = true;
    for (const auto& t : rows) node->inputs.push_back(t.node_ptr());
    node->backward_fn = [](Node& self) {
      std::size_t offset = 0;
      for (auto& in : self.inputs) {
        const std::size_t n = in->data.size();
        if (in->requires_grad) {
          accumulate(*in, std::span<const Real>(self.grad.data() + offset, n));
        }
        offset += n;
      }
    };
  }
  return result;
}

Tensor stack_rows(std::initializer_list<Tensor> rows) {
  return stack_rows(std::span<const Tensor>(rows.begin(), rows.size()));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_rank_at_least(x, 1, "gather_rows");
  const std::size_t n = x.dim(0);
  const std::size_t row = n == 0 ? 0 : x.numel() / n;
  auto xd = x.data();
  auto idx = std::make_shared<std::vector<std::size_t>>(index.begin(), index.end());
  std::vector<Real> out(idx->size() * row);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::size_t src = (*idx)[i];
    if (src >= n) {
      throw IndexError("gather_rows: index " + std::to_string(src) + " out of range for " +
                       std::to_string(n) + " rows");
    }
    std::copy_n(xd.begin() + src * row, row, out.begin() + i * row);
  }
  Shape shape = x.shape();
  shape[0] = idx->size();
  return make_op_result("gather_rows", std::move(shape), std::move(out), {&x}, [idx, row](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const std::size_t dst = (*idx)[i];
      for (std::size_t j = 0; j < row; ++j) g[dst * row + j] += self.grad[i * row + j];
    }
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  if (table.ndim() != 2) {
    throw DimensionError("embedding table must be [V, D], got " + shape_str(table.shape()));
  }
  const std::size_t vocab = table.dim(0);
  std::vector<std::size_t> index(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
    index[i] = static_cast<std::size_t>(ids[i]);
  }
  return gather_rows(table, index);
}

Tensor pick(const Tensor& x, std::span<const int> ids) {
  if (x.ndim() != 2 || x.dim(0) != ids.size()) {
    throw DimensionError("pick: tensor " + shape_str(x.shape()) + " with " +
                         std::to_string(ids.size()) + " ids");
  }
  const std::size_t cols = x.dim(1);
  auto flat = std::make_shared<std::vector<std::size_t>>(ids.size());
  std::vector<Real> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= cols) {
      throw IndexError("pick: id " + std::to_string(ids[i]) + " outside " + std::to_string(cols) +
                       " columns");
    }
    (*flat)[i] = i * cols + static_cast<std::size_t>(ids[i]);
    out[i] = x.data()[(*flat)[i]];
  }
  return make_op_result("pick", {ids.size()}, std::move(out), {&x}, [flat](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < flat->size(); ++i) g[(*flat)[i]] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return make_op_result("reshape", std::move(shape), std::move(out), {&x}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
  });
}

Tensor transpose_last2(const Tensor& x) {
  require_rank_at_least(x, 2, "transpose_last2");
  const Shape& s = x.shape();
  const std::size_t p = s[s.size() - 2], q = s.back();
  const std::size_t batch = x.numel() / std::max<std::size_t>(p * q, 1);
  auto xd = x.data();
  std::vector<Real> out(xd.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) out[b * p * q + j * p + i] = xd[b * p * q + i * q + j];
  Shape shape = s;
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  return make_op_result("transpose_last2", std::move(shape), std::move(out), {&x},
                        [batch, p, q](Node& self) {
                          Node& in = *self.inputs[0];
                          if (!in.requires_grad) return;
                          auto& g = in.grad_buffer();
                          for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t i = 0; i < p; ++i)
                              for (std::size_t j = 0; j < q; ++j)
                                g[b * p * q + i * q + j] += self.grad[b * p * q + j * p + i];
                        });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank_at_least(x, 1, "slice_rows");
  if (begin > end || end > x.dim(0)) {
    throw IndexError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + std::to_string(x.dim(0)) + " rows");
  }
  std::vector<std::size_t> index(end - begin);
  std::iota(index.begin(), index.end(), begin);
  return gather_rows(x, index);
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
  require_rank_at_least(x, 2, "split_heads");
  const Shape& s = x.shape();
  const std::size_t len = s[s.size() - 2], d = s.back();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " does not divide width " +
                      std::to_string(d));
  }
  const std::size_t dk = d / heads;
  const std::size_t batch = x.numel() / std::max<std::size_t>(len * d, 1);
  auto xd = x.data();
  std::vector<Real> out(xd.size());
  // out[b, h, l, c] = x[b, l, h*dk + c]
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < len; ++l)
        std::copy_n(xd.begin() + b * len * d + l * d + h * dk, dk,
                    out.begin() + ((b * heads + h) * len + l) * dk);
  Shape shape(s.begin(), s.end() - 2);
  shape.insert(shape.end(), {heads, len, dk});
  return make_op_result("split_heads", std::move(shape), std::move(out), {&x},
                        [batch, heads, len, d, dk](Node& self) {
                          Node& in = *self.inputs[0];
                          if (!in.requires_grad) return;
                          auto& g = in.grad_buffer();
                          for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t h = 0; h < heads; ++h)
                              for (std::size_t l = 0; l < len; ++l)
                                for (std::size_t c = 0; c < dk; ++c)
                                  g[b * len * d + l * d + h * dk + c] +=
                                      self.grad[((b * heads + h) * len + l) * dk + c];
                        });
}

Tensor merge_heads(const Tensor& x) {
  require_rank_at_least(x, 3, "merge_heads");
  const Shape& s = x.shape();
  const std::size_t heads = s[s.size() - 3], len = s[s.size() - 2], dk = s.back();
  const std::size_t d = heads * dk;
  const std::size_t batch = x.numel() / std::max<std::size_t>(len * d, 1);
  auto xd = x.data();
  std::vector<Real> out(xd.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < len; ++l)
        std::copy_n(xd.begin() + ((b * heads + h) * len + l) * dk, dk,
                    out.begin() + b * len * d + l * d + h * dk);
  Shape shape(s.begin(), s.end() - 3);
  shape.insert(shape.end(), {len, d});
  return make_op_result("merge_heads", std::move(shape), std::move(out), {&x},
                        [batch, heads, len, d, dk](Node& self) {
                          Node& in = *self.inputs[0];
                          if (!in.requires_grad) return;
                          auto& g = in.grad_buffer();
                          for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t h = 0; h < heads; ++h)
                              for (std::size_t l = 0; l < len; ++l)
                                for (std::size_t c = 0; c < dk; ++c)
                                  g[((b * heads + h) * len + l) * dk + c] +=
                                      self.grad[b * len * d + l * d + h * dk + c];
                        });
}

Tensor dropout(const Tensor& x, Real p, std::mt19937_64& rng) {
  if (p < 0 || p >= 1) throw ConfigError("dropout probability must be in [0, 1)");
  if (p == 0) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Real factor = Real(1) / (Real(1) - p);
  auto mask = std::make_shared<std::vector<Real>>(x.numel());
  std::vector<Real> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? factor : Real(0);
    out[i] = xd[i] * (*mask)[i];
  }
  return make_op_result("dropout", x.shape(), std::move(out), {&x}, [mask](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
}

}  // namespace swcap
