#pragma once

#include "tsnet/autodiff.hpp"
#include "tsnet/tensor.hpp"

#include <span>
#include <vector>

namespace tsnet {

/// Query/key projections of the character self-attention; one D_f x D_q
/// matrix per head.
struct AttentionParams {
  std::vector<Matrix> query;
  std::vector<Matrix> key;

  int heads() const { return static_cast<int>(query.size()); }
  int key_width() const { return query.empty() ? 0 : static_cast<int>(query.front().cols()); }
  double scale() const;
  void validate(Eigen::Index feature_width) const;
};

/// 1x1 convolution fusing H attention maps into one channel.
struct FusionKernel {
  std::vector<double> weights;
  double bias = 0.0;
};

struct MaskPair {
  Matrix scores;  // J, in [0, 1]
  Matrix mask;    // M, J kept where J >= xi, else 0
  double xi = 0.5;
};

/// Per-head row-softmax attention maps O_h = softmax(Q_h K_h^T / sqrt(D_q)).
std::vector<Matrix> attention_scores(const Matrix& features, const AttentionParams& params);

/// J = sigmoid(sum_h k_h R_h + b).
Matrix fuse_heads(std::span<const Matrix> scores, const FusionKernel& kernel);

/// Keeps entries >= xi verbatim and zeroes the rest; xi must lie in [0, 1].
Matrix threshold_mask(const Matrix& scores, double xi);

MaskPair compute_mask(const Matrix& features, const AttentionParams& attention, const FusionKernel& kernel, double xi);

/// Per-node keep-scores m_i = mean_j M[i][j].
Eigen::VectorXd keep_scores(const Matrix& mask);

/// Sparse features: masked column softmax of m_i * F[i][.] over the nodes
/// with m_i > 0; removed nodes are exactly zero. Throws DegenerateMaskError
/// when every node is removed.
Matrix apply_mask(const Matrix& features, const Matrix& mask);

}  // namespace tsnet
