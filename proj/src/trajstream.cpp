#include "tsnet/trajstream.hpp"

#include "tsnet/error.hpp"

#include <cmath>

namespace tsnet {

RowVector BoxNormalizer::normalize(const std::vector<BBox>& boxes) const {
  RowVector out(static_cast<Eigen::Index>(4 * boxes.size()));
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(4 * t);
    out(i + 0) = (boxes[t].x1 - origin.x1) / scale[0];
    out(i + 1) = (boxes[t].y1 - origin.y1) / scale[1];
    out(i + 2) = (boxes[t].x2 - origin.x2) / scale[0];
    out(i + 3) = (boxes[t].y2 - origin.y2) / scale[1];
  }
  return out;
}

BBox BoxNormalizer::denormalize(const double* c) const {
  return BBox{origin.x1 + c[0] * scale[0], origin.y1 + c[1] * scale[1], origin.x2 + c[2] * scale[0],
              origin.y2 + c[3] * scale[1]};
}

std::vector<BBox> BoxNormalizer::denormalize_row(const RowVector& row) const {
  std::vector<BBox> out;
  for (Eigen::Index i = 0; i + 4 <= row.size(); i += 4) out.push_back(denormalize(row.data() + i));
  return out;
}

GruParams GruParams::zeros(int input_width, int hidden_width) {
  GruParams p;
  p.input_weights = Matrix::Zero(input_width, 3 * hidden_width);
  p.hidden_weights = Matrix::Zero(hidden_width, 3 * hidden_width);
  p.input_bias = RowVector::Zero(3 * hidden_width);
  p.hidden_bias = RowVector::Zero(3 * hidden_width);
  return p;
}

GruVars place(ad::Tape& tape, const GruParams& p) {
  return GruVars{tape.constant(p.input_weights), tape.constant(p.input_bias), tape.constant(p.hidden_weights),
                 tape.constant(p.hidden_bias)};
}

ad::Var gru_encode(ad::Var steps, int input_width, const GruVars& gru) {
  if (input_width < 1 || steps.cols() % input_width != 0) throw ArgumentError("gru_encode: step width mismatch");
  const Eigen::Index hidden = gru.hidden_weights.rows();
  const int count = static_cast<int>(steps.cols() / input_width);
  ad::Tape& tape = *steps.tape();
  ad::Var h = tape.constant(Matrix::Zero(steps.rows(), hidden));
  for (int t = 0; t < count; ++t) {
    const auto x = ad::slice_cols(steps, static_cast<Eigen::Index>(t) * input_width, input_width);
    const auto xp = ad::add_row(ad::matmul(x, gru.input_weights), gru.input_bias);
    h = ad::gru_cell(xp, h, gru.hidden_weights, gru.hidden_bias);
  }
  return h;
}

RowVector encode_sequence(const Matrix& steps, const GruParams& params) {
  if (steps.cols() != params.input_width()) throw ArgumentError("encode_sequence: input width mismatch");
  ad::Tape tape;
  const Matrix packed = Eigen::Map<const Matrix>(steps.data(), 1, steps.size());
  return gru_encode(tape.constant(packed), params.input_width(), place(tape, params)).value().row(0);
}

void LatentGaussian::validate() const {
  if (mean.size() != stddev.size()) throw ArgumentError("latent Gaussian: mean and stddev differ in dimension");
  if (!mean.allFinite() || !stddev.allFinite()) throw NumericError("latent Gaussian: non-finite parameters");
  if ((stddev.array() <= 0.0).any()) throw NumericError("latent Gaussian: stddev must be positive");
}

LatentGaussian gaussian_from_head(const RowVector& input, const GaussianHead& head) {
  if (input.size() != head.weights.rows()) throw ArgumentError("gaussian head: input width mismatch");
  if (head.weights.cols() % 2 != 0 || head.bias.size() != head.weights.cols()) {
    throw ArgumentError("gaussian head: output must hold mean and log stddev");
  }
  const RowVector out = input * head.weights + head.bias;
  const Eigen::Index d = out.size() / 2;
  LatentGaussian g{out.head(d), out.tail(d).array().exp().matrix()};
  if (!g.mean.allFinite() || !g.stddev.allFinite()) throw NumericError("gaussian head: non-finite output");
  return g;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) eps(r, c) = normal(rng);
  }
  return eps;
}

std::vector<RowVector> sample_latent(const LatentGaussian& dist, int count, Rng& rng) {
  if (count < 1) throw ArgumentError("sample_latent: count must be >= 1");
  dist.validate();
  const Matrix eps = standard_normal(count, dist.dim(), rng);
  std::vector<RowVector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out.emplace_back(dist.mean + dist.stddev.cwiseProduct(eps.row(k)));
  return out;
}

double kl_divergence(const LatentGaussian& a, const LatentGaussian& b) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim()) throw ArgumentError("kl_divergence: dimension mismatch");
  ad::Tape tape;
  auto row = [&](const RowVector& v) { return tape.constant(Matrix(v)); };
  const auto kl = ad::kl_diagonal(row(a.mean), row(a.stddev.array().log().matrix()), row(b.mean),
                                  row(b.stddev.array().log().matrix()));
  return kl.value()(0, 0);
}

}  // namespace tsnet
