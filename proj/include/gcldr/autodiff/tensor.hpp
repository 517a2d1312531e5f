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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gcldr::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// One value in the computation graph. Leaves are parameters or inputs;
/// interior nodes carry the closure that pushes their gradient to `inputs`.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized iff requires_grad
    bool requires_grad = false;
    std::uint64_t seq = 0;     // creation order; inputs always precede outputs
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;
};

/// Shared handle to a graph node. Copies alias the same storage; use
/// `clone()` for an independent leaf.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t size() const;

    std::span<const double> values() const;
    std::span<double> values_mut();
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    bool requires_grad() const;

    double item() const;
    double at(std::size_t i, std::size_t j) const;

    Tensor detach() const;
    Tensor clone(bool requires_grad) const;
    void zero_grad();

    Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<Node>& shared() const noexcept { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Reachable graph below a root, ordered so every node follows its inputs.
/// Built fresh for each backward pass; interior gradients are reset here.
class Tape {
public:
    static Tape record(const Tensor& root);

    std::span<Node* const> nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds d(root)/d(root) = 1 and runs every closure once, last to first.
    void backward();

private:
    Tensor root_;
    std::vector<Node*> nodes_;
};

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
void backward(const Tensor& loss);

/// Zeroes the grads of `params`, backpropagates `loss`, and returns copies of
/// the resulting gradients. Unreached parameters come back as zeros.
std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> params);

bool grad_enabled() noexcept;

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Used by the op implementations.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn);

}  // namespace gcldr::ad
