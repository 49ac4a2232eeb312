#include "wgcn/autodiff.hpp"

#include "op_support.hpp"

#include <atomic>

namespace wgcn {

namespace detail {

Tensor& Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Tensor::zeros_like(value);
  return grad;
}

void Node::accumulate(const Vector& g) {
  if (!requires_grad) return;
  grad_buffer().data() += g;
}

Var make_result(const char* op, Tensor value, std::vector<NodePtr> inputs,
                std::function<void(Node&)> backward) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  Tape* tape = Tape::active();
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in->requires_grad;
  if (tape && needs_grad) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Var(std::move(node));
}

}  // namespace detail

Tensor Var::grad() const {
  if (node_->grad.size() == node_->value.size()) return node_->grad;
  return Tensor::zeros_like(node_->value);
}

Var constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

// --- Tape --------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::~Tape() {
  clear();
  if (g_active_tape == this) g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

NoRecordScope::NoRecordScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoRecordScope::~NoRecordScope() { g_active_tape = previous_; }

void Tape::record(const std::shared_ptr<detail::Node>& node) {
  node->tape = this;
  node->tape_index = nodes_.size();
  nodes_.push_back(node);
}

void Tape::clear() {
  for (auto& n : nodes_) n->tape = nullptr;
  nodes_.clear();
  visit_order_.clear();
}

void Tape::backward(const Var& loss) {
  if (!loss.valid()) throw ContractError("backward on an empty Var");
  if (loss.size() != 1)
    throw ContractError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  const auto& root = loss.node();
  if (root->tape != this || nodes_.at(root->tape_index) != root)
    throw ContractError("loss was not produced on this tape");

  for (auto& n : nodes_) n->grad = Tensor();
  root->grad_buffer()[0] = 1.0;

  visit_order_.clear();
  for (std::size_t i = root->tape_index + 1; i-- > 0;) {
    visit_order_.push_back(i);
    detail::Node& n = *nodes_[i];
    if (n.grad.size() == n.value.size() && n.backward) n.backward(n);
  }
}

// --- Parameter ---------------------------------------------------------------

namespace {
std::uint64_t next_parameter_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace

Parameter::Parameter(std::string name, Tensor init)
    : name_(std::move(name)), id_(next_parameter_id()), node_(std::make_shared<detail::Node>()) {
  node_->op = "parameter";
  node_->requires_grad = true;
  node_->grad = Tensor::zeros_like(init);
  node_->value = std::move(init);
}

Parameter::Parameter(const Parameter& other) : name_(other.name_), id_(next_parameter_id()) {
  if (other.node_) {
    node_ = std::make_shared<detail::Node>();
    node_->op = "parameter";
    node_->requires_grad = true;
    node_->value = other.node_->value;
    node_->grad = other.node_->grad;
  }
}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    Parameter tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void Parameter::zero_grad() { node_->grad = Tensor::zeros_like(node_->value); }

}  // namespace wgcn
