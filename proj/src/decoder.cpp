#include "tsnet/decoder.hpp"

#include "tsnet/error.hpp"

namespace tsnet {

LinearVars place(ad::Tape& tape, const LinearParams& p) {
  return LinearVars{tape.constant(p.weights), tape.constant(Matrix(p.bias))};
}

GoalHeadVars place(ad::Tape& tape, const GoalHeadParams& p) {
  GoalHeadVars v;
  if (p.hidden) v.hidden = place(tape, *p.hidden);
  v.output = place(tape, p.output);
  return v;
}

DecoderVars place(ad::Tape& tape, const DecoderParams& p) {
  DecoderVars v;
  if (p.char_embed) {
    v.char_embed = place(tape, *p.char_embed);
    v.in_char = tape.constant(p.in_char);
    v.init_char = tape.constant(p.init_char);
  }
  v.goal_embed = place(tape, p.goal_embed);
  v.in_past = tape.constant(p.in_past);
  v.in_goal = tape.constant(p.in_goal);
  v.in_bias = tape.constant(Matrix(p.in_bias));
  v.init_past = tape.constant(p.init_past);
  v.init_goal = tape.constant(p.init_goal);
  v.init_bias = tape.constant(Matrix(p.init_bias));
  v.hidden_weights = tape.constant(p.hidden_weights);
  v.hidden_bias = tape.constant(Matrix(p.hidden_bias));
  v.output = place(tape, p.output);
  return v;
}

DecoderParams DecoderParams::zeros(int char_width, int char_embed_width, int past_width, int goal_embed_width,
                                   int hidden) {
  DecoderParams p;
  if (char_width > 0) {
    p.char_embed = LinearParams{Matrix::Zero(char_width, char_embed_width), RowVector::Zero(char_embed_width)};
    p.in_char = Matrix::Zero(char_embed_width, 3 * hidden);
    p.init_char = Matrix::Zero(char_embed_width, hidden);
  }
  p.goal_embed = LinearParams{Matrix::Zero(4, goal_embed_width), RowVector::Zero(goal_embed_width)};
  p.in_past = Matrix::Zero(past_width, 3 * hidden);
  p.in_goal = Matrix::Zero(goal_embed_width, 3 * hidden);
  p.in_bias = RowVector::Zero(3 * hidden);
  p.init_past = Matrix::Zero(past_width, hidden);
  p.init_goal = Matrix::Zero(goal_embed_width, hidden);
  p.init_bias = RowVector::Zero(hidden);
  p.hidden_weights = Matrix::Zero(hidden, 3 * hidden);
  p.hidden_bias = RowVector::Zero(3 * hidden);
  p.output = LinearParams{Matrix::Zero(hidden, 4), RowVector::Zero(4)};
  return p;
}

ad::Var predict_goal(const GoalHeadVars& head, ad::Var past, ad::Var latent) {
  ad::Var x = ad::concat_cols({past, latent});
  if (head.hidden) x = ad::relu((*head.hidden)(x));
  return head.output(x);
}

ad::Var decode(const DecoderVars& dec, ad::Var characters, ad::Var past, ad::Var goals, int k, int steps) {
  if (k < 1 || steps < 1) throw ArgumentError("decode: K and steps must be >= 1");
  if (goals.rows() != past.rows() * k || goals.cols() != 4) throw ArgumentError("decode: goals must be (B*K) x 4");
  if (characters.valid() != dec.char_embed.has_value()) {
    throw ArgumentError("decode: character input does not match the decoder configuration");
  }
  if (characters.valid() && characters.rows() != past.rows()) throw ArgumentError("decode: batch size mismatch");

  ad::Var sample_in = ad::matmul(past, dec.in_past);
  ad::Var sample_init = ad::matmul(past, dec.init_past);
  if (characters.valid()) {
    const auto chars = ad::relu((*dec.char_embed)(characters));
    sample_in = ad::add(sample_in, ad::matmul(chars, dec.in_char));
    sample_init = ad::add(sample_init, ad::matmul(chars, dec.init_char));
  }
  const auto goal = ad::relu(dec.goal_embed(goals));
  const auto input_proj =
      ad::add_row(ad::add(ad::repeat_rows(sample_in, k), ad::matmul(goal, dec.in_goal)), dec.in_bias);
  ad::Var h = ad::tanh(
      ad::add_row(ad::add(ad::repeat_rows(sample_init, k), ad::matmul(goal, dec.init_goal)), dec.init_bias));

  ad::Tape& tape = *past.tape();
  ad::Var pos = tape.constant(Matrix::Zero(goals.rows(), 4));
  std::vector<ad::Var> boxes;
  boxes.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    h = ad::gru_cell(input_proj, h, dec.hidden_weights, dec.hidden_bias);
    pos = ad::add(pos, dec.output(h));
    boxes.push_back(pos);
  }
  return ad::concat_cols(boxes);
}

BBox predict_goal(const RowVector& past, const RowVector& latent, const GoalHeadParams& head,
                  const BoxNormalizer& normalizer) {
  ad::Tape tape;
  const auto g = predict_goal(place(tape, head), tape.constant(Matrix(past)), tape.constant(Matrix(latent)));
  const Matrix& v = g.value();
  if (!v.allFinite()) throw NumericError("predict_goal: non-finite output");
  return normalizer.denormalize(v.data());
}

std::vector<BBox> decode(const RowVector& temporal_chars, const RowVector& category_chars, const RowVector& past,
                         const BBox& goal, const DecoderParams& params, const BoxNormalizer& normalizer, int steps) {
  ad::Tape tape;
  ad::Var chars;
  if (temporal_chars.size() + category_chars.size() > 0) {
    Matrix c(1, temporal_chars.size() + category_chars.size());
    c << temporal_chars, category_chars;
    chars = tape.constant(std::move(c));
  }
  const RowVector g = normalizer.normalize({goal});
  const auto out = decode(place(tape, params), chars, tape.constant(Matrix(past)), tape.constant(Matrix(g)), 1, steps);
  return normalizer.denormalize_row(out.value().row(0));
}

void PredictionSet::validate(std::size_t steps) const {
  if (trajectories.empty()) throw ArgumentError("prediction set is empty");
  if (goals.size() != trajectories.size() || (!latents.empty() && latents.size() != trajectories.size())) {
    throw ArgumentError("prediction set members are not aligned");
  }
  for (const auto& t : trajectories) {
    if (t.size() != steps) throw ArgumentError("prediction set trajectory has the wrong length");
  }
}

BBox goal_ground_truth(const BBoxTrack& future) {
  if (future.boxes.empty()) throw ArgumentError("goal_ground_truth: empty future");
  return future.boxes.back();
}

namespace {

Matrix boxes_to_row(const std::vector<BBox>& boxes) {
  Matrix m(1, static_cast<Eigen::Index>(4 * boxes.size()));
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(4 * t);
    m(0, i) = boxes[t].x1;
    m(0, i + 1) = boxes[t].y1;
    m(0, i + 2) = boxes[t].x2;
    m(0, i + 3) = boxes[t].y2;
  }
  return m;
}

}  // namespace

LossTerms tsnet_loss(const PredictionSet& pred, const std::vector<BBox>& truth, const BBox& goal_truth,
                     const LatentGaussian& prior, const LatentGaussian& posterior, const LossOptions& options) {
  pred.validate(truth.size());
  const auto k = static_cast<Eigen::Index>(pred.size());
  Matrix traj(k, static_cast<Eigen::Index>(4 * truth.size()));
  Matrix goals(k, 4);
  for (Eigen::Index i = 0; i < k; ++i) {
    traj.row(i) = boxes_to_row(pred.trajectories[static_cast<std::size_t>(i)]);
    goals.row(i) = boxes_to_row({pred.goals[static_cast<std::size_t>(i)]});
  }
  ad::Tape tape;
  const auto l_trj = ad::best_of_k_distance(tape.constant(traj), tape.constant(boxes_to_row(truth)),
                                            static_cast<int>(k), options.norm);
  const auto l_gl =
      ad::best_of_k_distance(tape.constant(goals), tape.constant(boxes_to_row({goal_truth})), static_cast<int>(k),
                             options.norm);
  LossTerms out;
  out.trajectory = l_trj.value()(0, 0);
  out.goal = l_gl.value()(0, 0);
  out.kld = options.kld_direction == KldDirection::PriorPosterior ? kl_divergence(prior, posterior)
                                                                  : kl_divergence(posterior, prior);
  out.total = out.trajectory + out.goal + out.kld;
  return out;
}

}  // namespace tsnet
