#include "swcap/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace swcap {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<std::uint64_t> g_next_seq{1};

std::uint64_t next_seq() { return g_next_seq.fetch_add(1, std::memory_order_relaxed); }

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<Real> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = next_seq();
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<Real>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), Real(0));
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<Real>(n, Real(0)), requires_grad));
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<Real>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::uniform(Shape shape, Real lo, Real hi, std::mt19937_64& rng, bool requires_grad) {
  std::uniform_real_distribution<Real> dist(lo, hi);
  std::vector<Real> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const Real> Tensor::data() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

std::span<Real> Tensor::mutable_data() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

Real Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() needs a single-element tensor, got shape " + shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const Real> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

std::span<Real> Tensor::mutable_grad() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(make_leaf(shape(), node_->data, false)); }

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(make_leaf(shape(), node_->data, requires_grad));
}

void Tensor::backward() const {
  if (!node_) throw ContractError("backward on an undefined tensor");
  if (numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw ContractError("backward on a loss that does not depend on any tracked tensor");
  }
  auto tape = GradTape::record(*this);
  node_->grad_buffer()[0] += Real(1);
  tape.replay_backward();
}

Tensor make_op_result(const char* op, Shape shape, std::vector<Real> data,
                      std::initializer_list<const Tensor*> inputs,
                      std::function<void(detail::Node&)> backward_fn) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NumericError(std::string("non-finite value produced by ") + op + " at element " +
                         std::to_string(i) + " of shape " + shape_str(shape));
    }
  }
  bool track = false;
  if (t_grad_enabled) {
    for (const Tensor* t : inputs) track = track || t->requires_grad();
  }
  auto node = make_leaf(std::move(shape), std::move(data), track);
  node->op = op;
  if (track) {
    node->inputs.reserve(inputs.size());
    for (const Tensor* t : inputs) node->inputs.push_back(t->node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

GradTape GradTape::record(const Tensor& loss) {
  GradTape tape;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{loss.node()};
  while (!stack.empty()) {
    auto* node = stack.back();
    stack.pop_back();
    if (!node->requires_grad || !seen.insert(node).second) continue;
    if (node->backward_fn) tape.ops_.push_back(node);
    for (const auto& in : node->inputs) stack.push_back(in.get());
  }
  std::sort(tape.ops_.begin(), tape.ops_.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq < b->seq; });
  return tape;
}

void GradTape::replay_backward() const {
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    auto* node = *it;
    if (node->grad.empty()) continue;
    node->backward_fn(*node);
  }
}

void check_unique_names(const ParameterList& params) {
  std::unordered_set<std::string> names;
  for (const auto& p : params) {
    if (!names.insert(p.name).second) {
      throw ContractError("duplicate parameter name '" + p.name + "'");
    }
  }
}

}  // namespace swcap
