#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Nodes that do not
// depend on any parameter are marked constant and never receive gradients,
// so data preprocessing on the tape costs nothing in the backward pass.

#include "tsnet/params.hpp"
#include "tsnet/tensor.hpp"

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace tsnet::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  /// Appends a node. It requires a gradient when any input does.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and accumulates parameter grads.
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

  /// Gradient buffer of a node, zero-initialized on first access.
  Matrix& grad(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

// -- generic ops -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a + bias, bias is 1 x cols broadcast over rows.
Var add_row(Var a, Var bias);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index width);
/// Row-major reinterpretation; rows * cols must be preserved.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// Each row repeated `times` times consecutively.
Var repeat_rows(Var a, int times);
/// out.row(r) = table.row(index[r]).
Var gather_rows(Var table, std::vector<int> index);
/// out.row(r) = x.row(r).segment(block[r] * width, width).
Var select_col_block(Var x, Eigen::Index width, std::vector<int> block);
/// Sum of all entries, 1x1.
Var sum(Var a);
/// Mean of all entries, 1x1.
Var mean(Var a);

// -- fused ops ---------------------------------------------------------------

/// One GRU step. `input_proj` is x W_i + b_i (rows x 3H, gate order r, z, n);
/// `hidden_weights` is H x 3H and `hidden_bias` 1 x 3H.
Var gru_cell(Var input_proj, Var hidden, Var hidden_weights, Var hidden_bias);

/// Row-wise softmax(Q_h K_h^T * scale) per group and head. Q and K are
/// (groups*n) x (heads*dq); the result is (groups*n) x (heads*n) with head h
/// occupying columns [h*n, (h+1)*n).
Var attention_softmax(Var q, Var k, int n, int heads, double scale);

/// J = sigmoid(sum_h kernel_h * R_h + bias) for R laid out as returned by
/// attention_softmax. kernel is 1 x heads, bias is 1 x 1.
Var fuse_heads(Var scores, Var kernel, Var bias, int n, int heads);

/// M = J * 1[J >= xi]; the gradient passes only where the indicator is one.
Var threshold(Var scores, double xi);

struct MaskStats {
  std::int64_t groups = 0;
  std::int64_t degenerate_groups = 0;
  std::int64_t masked_nodes = 0;
};

/// Sparse features F_hat from features F ((groups*n) x d) and masks M
/// ((groups*n) x n). Node keep-score m_i is the row mean of M; a column-wise
/// softmax over the nodes with m_i > 0 is taken of m_i * F[i][.]; nodes with
/// m_i == 0 get exactly zero. A group whose nodes are all removed falls back
/// to the plain softmax of F, counted in `stats`.
Var mask_softmax(Var features, Var mask, int n, MaskStats* stats = nullptr);

/// Y_g = P_g X_g per group, with P a constant (groups*n) x n stack.
Var group_propagate(const Matrix& propagation, Var x, int n);

enum class LossNorm { Flattened, PerStepMean };

/// Per-sample min over K candidates of ||pred_k - target||. pred is
/// (B*K) x L with candidates of a sample contiguous, target is B x L.
/// PerStepMean averages the Euclidean norm of consecutive `step_width`
/// segments instead. Returns B x 1; `argmin` receives the chosen candidate.
Var best_of_k_distance(Var pred, Var target, int k, LossNorm norm = LossNorm::Flattened,
                       int step_width = 4, std::vector<int>* argmin = nullptr);

/// Closed-form KL(N(mu_a, exp(ls_a)^2) || N(mu_b, exp(ls_b)^2)) for diagonal
/// Gaussians, summed over dimensions. Returns rows x 1.
Var kl_diagonal(Var mean_a, Var log_std_a, Var mean_b, Var log_std_b);

}  // namespace tsnet::ad
