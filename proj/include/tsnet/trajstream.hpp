#pragma once

#include "tsnet/autodiff.hpp"
#include "tsnet/data.hpp"
#include "tsnet/tensor.hpp"

#include <array>
#include <vector>

namespace tsnet {

/// Maps pixel boxes to offsets from an origin box divided by the image size,
/// and back.
struct BoxNormalizer {
  BBox origin;
  std::array<double, 2> scale{1920.0, 1080.0};

  /// Boxes flattened to one row of 4 * boxes.size() values.
  RowVector normalize(const std::vector<BBox>& boxes) const;
  BBox denormalize(const double* coords) const;
  std::vector<BBox> denormalize_row(const RowVector& row) const;
};

/// Gate order r, z, n; input_weights is in x 3H, hidden_weights H x 3H.
struct GruParams {
  Matrix input_weights;
  Matrix hidden_weights;
  RowVector input_bias;
  RowVector hidden_bias;

  int hidden_width() const { return static_cast<int>(hidden_weights.rows()); }
  int input_width() const { return static_cast<int>(input_weights.rows()); }
  static GruParams zeros(int input_width, int hidden_width);
};

struct GruVars {
  ad::Var input_weights, input_bias, hidden_weights, hidden_bias;
};

GruVars place(ad::Tape& tape, const GruParams& p);

/// Runs a GRU from a zero state over steps packed as B x (T * in) and returns
/// the final hidden state, B x H.
ad::Var gru_encode(ad::Var steps, int input_width, const GruVars& gru);

/// Single-sequence convenience: steps is T x in, returns the final state.
RowVector encode_sequence(const Matrix& steps, const GruParams& params);

/// Diagonal Gaussian over the latent space.
struct LatentGaussian {
  RowVector mean;
  RowVector stddev;

  Eigen::Index dim() const { return mean.size(); }
  void validate() const;
};

/// Linear head emitting (mean, log stddev) of width 2 * d_z.
struct GaussianHead {
  Matrix weights;
  RowVector bias;
};

LatentGaussian gaussian_from_head(const RowVector& input, const GaussianHead& head);

/// z_k = mean + stddev * eps_k with eps_k ~ N(0, I) drawn from `rng`.
std::vector<RowVector> sample_latent(const LatentGaussian& dist, int count, Rng& rng);

/// Standard normal noise for `rows` latent draws of width `dim`, in row order.
Matrix standard_normal(Eigen::Index rows, Eigen::Index dim, Rng& rng);

enum class KldDirection {
  PriorPosterior,   // KL(p || q)
  PosteriorPrior,   // KL(q || p)
};

/// Closed-form KL(a || b) of two diagonal Gaussians.
double kl_divergence(const LatentGaussian& a, const LatentGaussian& b);

}  // namespace tsnet
