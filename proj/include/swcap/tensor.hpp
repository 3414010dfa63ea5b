#pragma once

// Dense row-major tensors with a reverse-mode gradient record.
//
// A Tensor is a shared handle to a graph node. Ops executed while gradient
// recording is enabled and with at least one tracked input produce tracked
// outputs that remember their inputs and a backward rule. `backward()` on a
// scalar walks the reachable nodes in exact reverse execution order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "swcap/error.hpp"

namespace swcap {

#ifdef SWCAP_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward_fn;

  std::vector<Real>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);
  static Tensor uniform(Shape shape, Real lo, Real hi, std::mt19937_64& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const Real> data() const;
  // Mutable access is meant for leaves (parameters, inputs); mutating an
  // interior node invalidates its recorded backward rule.
  std::span<Real> mutable_data();
  Real item() const;
  Real operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;
  // Deep copy of values into a new leaf with the given tracking flag.
  Tensor clone(bool requires_grad = false) const;

  // Loss must be a single-element tensor.
  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_op_result(const char* op, Shape shape, std::vector<Real> data,
                               std::initializer_list<const Tensor*> inputs,
                               std::function<void(detail::Node&)> backward_fn);

  std::shared_ptr<detail::Node> node_;
};

// Builds an op output. When recording is enabled and any input is tracked, the
// result is tracked and `backward_fn` is retained. Throws NumericError when the
// computed values contain NaN or Inf.
Tensor make_op_result(const char* op, Shape shape, std::vector<Real> data,
                      std::initializer_list<const Tensor*> inputs,
                      std::function<void(detail::Node&)> backward_fn);

// Gradient recording switch, confined to the calling thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// The ordered record of ops reachable from a loss, in execution order.
class GradTape {
 public:
  static GradTape record(const Tensor& loss);
  const std::vector<detail::Node*>& ops() const { return ops_; }
  // Runs backward rules in reverse execution order.
  void replay_backward() const;

 private:
  std::vector<detail::Node*> ops_;
};

struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<Parameter>;

// Throws ContractError when two parameters share a name.
void check_unique_names(const ParameterList& params);

}  // namespace swcap
