#include "tsnet/sparsemask.hpp"

#include "tsnet/error.hpp"

#include <cmath>

namespace tsnet {

double AttentionParams::scale() const { return 1.0 / std::sqrt(static_cast<double>(key_width())); }

void AttentionParams::validate(Eigen::Index feature_width) const {
  if (query.empty()) throw ArgumentError("attention: at least one head is required");
  if (query.size() != key.size()) throw ArgumentError("attention: query/key head counts differ");
  for (std::size_t h = 0; h < query.size(); ++h) {
    if (query[h].rows() != feature_width || key[h].rows() != feature_width) {
      throw ArgumentError("attention: projection rows must equal the feature width");
    }
    if (query[h].cols() != key_width() || key[h].cols() != key_width() || key_width() < 1) {
      throw ArgumentError("attention: every head must share one positive key width");
    }
  }
}

namespace {

Matrix stack_heads(const std::vector<Matrix>& blocks) {
  Matrix out(blocks.front().rows(), blocks.front().cols() * static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t h = 0; h < blocks.size(); ++h) {
    out.middleCols(static_cast<Eigen::Index>(h) * blocks[h].cols(), blocks[h].cols()) = blocks[h];
  }
  return out;
}

}  // namespace

std::vector<Matrix> attention_scores(const Matrix& features, const AttentionParams& params) {
  if (features.rows() < 1) throw ArgumentError("attention_scores: at least one node is required");
  params.validate(features.cols());
  if (!features.allFinite()) throw NumericError("attention_scores: non-finite features");
  ad::Tape tape;
  const auto f = tape.constant(features);
  const auto q = ad::matmul(f, tape.constant(stack_heads(params.query)));
  const auto k = ad::matmul(f, tape.constant(stack_heads(params.key)));
  const int n = static_cast<int>(features.rows());
  const Matrix& o = ad::attention_softmax(q, k, n, params.heads(), params.scale()).value();
  std::vector<Matrix> out;
  for (int h = 0; h < params.heads(); ++h) out.emplace_back(o.middleCols(h * n, n));
  return out;
}

Matrix fuse_heads(std::span<const Matrix> scores, const FusionKernel& kernel) {
  if (scores.empty()) throw ArgumentError("fuse_heads: no attention maps");
  if (kernel.weights.size() != scores.size()) throw ArgumentError("fuse_heads: kernel width differs from head count");
  const Eigen::Index n = scores.front().rows();
  for (const Matrix& s : scores) {
    if (s.rows() != n || s.cols() != n) throw ArgumentError("fuse_heads: attention maps must be n x n");
  }
  ad::Tape tape;
  const auto r = tape.constant(stack_heads(std::vector<Matrix>(scores.begin(), scores.end())));
  Matrix k(1, static_cast<Eigen::Index>(kernel.weights.size()));
  for (std::size_t h = 0; h < kernel.weights.size(); ++h) k(0, static_cast<Eigen::Index>(h)) = kernel.weights[h];
  const auto j = ad::fuse_heads(r, tape.constant(k), tape.constant(Matrix::Constant(1, 1, kernel.bias)),
                                static_cast<int>(n), static_cast<int>(scores.size()));
  return j.value();
}

Matrix threshold_mask(const Matrix& scores, double xi) {
  if (!(xi >= 0.0 && xi <= 1.0)) throw ArgumentError("threshold_mask: xi must lie in [0, 1]");
  ad::Tape tape;
  return ad::threshold(tape.constant(scores), xi).value();
}

MaskPair compute_mask(const Matrix& features, const AttentionParams& attention, const FusionKernel& kernel, double xi) {
  const auto r = attention_scores(features, attention);
  MaskPair out;
  out.scores = fuse_heads(r, kernel);
  out.mask = threshold_mask(out.scores, xi);
  out.xi = xi;
  return out;
}

Eigen::VectorXd keep_scores(const Matrix& mask) {
  return mask.rowwise().sum() / static_cast<double>(mask.cols());
}

Matrix apply_mask(const Matrix& features, const Matrix& mask) {
  if (mask.rows() != features.rows() || mask.cols() != features.rows()) {
    throw ArgumentError("apply_mask: mask must be n x n for n feature rows");
  }
  if ((keep_scores(mask).array() > 0.0).count() == 0) {
    throw DegenerateMaskError("apply_mask: every node was removed by the mask");
  }
  ad::Tape tape;
  return ad::mask_softmax(tape.constant(features), tape.constant(mask), static_cast<int>(features.rows())).value();
}

}  // namespace tsnet
