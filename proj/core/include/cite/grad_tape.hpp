#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cite/matrix.hpp"

namespace cite {

/// Handle to a node recorded on a GradTape. Only valid for the tape that
/// produced it.
struct Var {
  std::size_t id = 0;
};

/// Row-major boolean mask used to select which logits enter a softmax
/// denominator.
struct RowMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> keep;

  bool operator()(std::size_t r, std::size_t c) const { return keep[r * cols + c] != 0; }
};

/// Explicit reverse-mode tape. Every op appends a node holding its value and
/// a closure that pushes the node's gradient into its inputs; backward()
/// replays those closures in exact reverse recording order.
///
/// One forward/backward pair per tape. Not thread-safe.
class GradTape {
 public:
  Var constant(Matrix value);
  Var parameter(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Accumulated gradient; a zero matrix for nodes that received none.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 on a 1x1 node and accumulates gradients into
  /// every node that requires them.
  void backward(Var root);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1xC bias to every row of an RxC input.
  Var add_row_bias(Var a, Var bias);
  Var scale(Var a, double factor);
  Var tanh(Var a);
  Var transpose(Var a);
  Var l2_normalize_rows(Var a);

  /// Sum over rows of -log softmax(logits)[r, targets[r]] where the softmax
  /// runs over the entries kept by `mask` (all entries when mask is null).
  /// Returns a 1x1 node.
  Var masked_cross_entropy(Var logits, std::span<const std::size_t> targets, const RowMask* mask = nullptr);

  /// Sum over rows of KL(softmax(logits)_r || softmax(q_logits)_r) with the
  /// second argument held constant. Returns a 1x1 node.
  Var kl_from_logits(Var logits, const Matrix& q_logits);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(GradTape&, const Matrix&)> backward;
  };

  Var record(Matrix value, std::initializer_list<Var> inputs, std::function<void(GradTape&, const Matrix&)> bw);
  void accumulate(Var v, const Matrix& g);
  bool wants(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace cite
