#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "shadowae/tensor.hpp"

namespace shadowae {

/// Handle to a value recorded in a Graph.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

/// Define-by-run tape of executed operations.
///
/// Nodes are appended in execution order, so every operation's inputs have
/// smaller ids than the operation itself. backward() walks the tape once in
/// reverse and calls each recorded adjoint whose output received a gradient.
/// A Graph is rebuilt for every forward pass and is not thread-safe.
template <typename T>
class Graph {
 public:
  using Adjoint = std::function<void(Graph&, std::size_t self)>;

  /// Leaf value. Parameters pass requires_grad = true.
  Var input(Tensor<T> value, bool requires_grad = false) {
    value.clear_grad();
    nodes_.push_back(Node{std::move(value), requires_grad, {}});
    return Var{nodes_.size() - 1};
  }

  /// Appends an operation output. The adjoint is dropped when no input
  /// requires a gradient.
  Var record(Tensor<T> out, std::initializer_list<Var> inputs, Adjoint adjoint) {
    return record(std::move(out), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(adjoint));
  }
  Var record(Tensor<T> out, std::span<const Var> inputs, Adjoint adjoint) {
    bool needs = false;
    for (Var v : inputs) {
      check(v);
      needs = needs || nodes_[v.id].requires_grad;
    }
    out.clear_grad();
    nodes_.push_back(Node{std::move(out), needs, needs ? std::move(adjoint) : Adjoint{}});
    return Var{nodes_.size() - 1};
  }

  const Tensor<T>& value(Var v) const {
    check(v);
    return nodes_[v.id].tensor;
  }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const {
    check(v);
    return nodes_[v.id].requires_grad;
  }

  /// Gradient buffer of a node, allocated (zeroed) on first use.
  std::span<T> grad_buffer(Var v) {
    check(v);
    return nodes_[v.id].tensor.ensure_grad();
  }
  std::span<T> grad_buffer(std::size_t id) { return grad_buffer(Var{id}); }
  std::span<const T> out_grad(std::size_t id) const { return nodes_.at(id).tensor.grad(); }

  bool has_grad(Var v) const {
    check(v);
    return nodes_[v.id].tensor.has_grad();
  }

  /// Gradient of the last backward() with respect to a node; zeros if the
  /// node was not reached.
  Tensor<T> grad(Var v) const {
    check(v);
    const auto& t = nodes_[v.id].tensor;
    Tensor<T> g(t.shape());
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), g.storage().begin());
    return g;
  }

  /// Reverse sweep seeded with d(loss)/d(loss) = 1.
  void backward(Var loss) {
    check(loss);
    if (nodes_[loss.id].tensor.size() != 1) {
      throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                  shape_str(nodes_[loss.id].tensor.shape()));
    }
    for (auto& n : nodes_) n.tensor.clear_grad();
    nodes_[loss.id].tensor.ensure_grad()[0] = T{1};
    visits_ = 0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.adjoint || !n.tensor.has_grad()) continue;
      ++visits_;
      // Adjoints only touch gradient buffers, never the tape itself.
      n.adjoint(*this, id);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t last_backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    Tensor<T> tensor;
    bool requires_grad = false;
    Adjoint adjoint;
  };

  void check(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("graph: invalid variable handle");
  }

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

}  // namespace shadowae
