// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "gcldr/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "gcldr/errors.hpp"

namespace gcldr::ad {

namespace {

std::atomic<std::uint64_t> next_seq{1};
thread_local bool grad_mode = true;

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> value, bool requires_grad) {
    if (shape_size(shape) != value.size())
        throw DimensionError("tensor of shape " + shape_string(shape) + " given " +
                             std::to_string(value.size()) + " values");
    for (auto extent : shape)
        if (extent == 0) throw DimensionError("zero extent in shape " + shape_string(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->value.size(), 0.0);
    node->seq = next_seq.fetch_add(1, std::memory_order_relaxed);
    return node;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto extent : shape) n *= extent;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = shape_size(shape);
    return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }

std::size_t Tensor::cols() const {
    if (node_->shape.size() < 2) return 1;
    return node_->value.size() / node_->shape[0];
}

std::size_t Tensor::size() const { return node_->value.size(); }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::values_mut() { return node_->value; }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::grad_mut() { return node_->grad; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const { return node_->value[i * cols() + j]; }

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->value, false)); }

Tensor Tensor::clone(bool requires_grad) const {
    return Tensor(new_node(node_->shape, node_->value, requires_grad));
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
    bool track = false;
    if (grad_mode)
        for (const auto& t : inputs) track = track || t.requires_grad();
    auto node = new_node(std::move(shape), std::move(value), false);
    node->op = op;
    if (track) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& t : inputs) node->inputs.push_back(t.shared());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
    Tape tape;
    tape.root_ = root;
    if (!root.requires_grad()) return tape;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.node()};
    seen.insert(root.node());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        tape.nodes_.push_back(n);
        for (const auto& in : n->inputs)
            if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
    std::sort(tape.nodes_.begin(), tape.nodes_.end(), [](const Node* a, const Node* b) { return a->seq < b->seq; });
    for (Node* n : tape.nodes_) {
        if (n->backward_fn)
            n->grad.assign(n->value.size(), 0.0);
        else if (n->grad.size() != n->value.size())
            n->grad.assign(n->value.size(), 0.0);
    }
    return tape;
}

void Tape::backward() {
    if (!root_.defined() || !root_.requires_grad()) return;
    if (root_.size() != 1)
        throw ContractError("backward() needs a scalar loss, got shape " + shape_string(root_.shape()));
    root_.node()->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    Tape::record(loss).backward();
}

std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> params) {
    for (auto p : params) p.zero_grad();
    backward(loss);
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.grad().begin(), p.grad().end());
    return out;
}

bool grad_enabled() noexcept { return grad_mode; }

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }

NoGradGuard::~NoGradGuard() { grad_mode = previous_; }

}  // namespace gcldr::ad
