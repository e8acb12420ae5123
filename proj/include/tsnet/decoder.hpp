#pragma once

#include "tsnet/autodiff.hpp"
#include "tsnet/data.hpp"
#include "tsnet/trajstream.hpp"

#include <optional>
#include <vector>

namespace tsnet {

struct LinearParams {
  Matrix weights;  // in x out
  RowVector bias;  // 1 x out
};

struct LinearVars {
  ad::Var weights, bias;
  ad::Var operator()(ad::Var x) const { return ad::add_row(ad::matmul(x, weights), bias); }
};

LinearVars place(ad::Tape& tape, const LinearParams& p);

/// Goal head: concat(F_p, Z) -> optional ReLU hidden layer -> 4 normalized
/// coordinates relative to the last observed box.
struct GoalHeadVars {
  std::optional<LinearVars> hidden;
  LinearVars output;
};

/// (B*K) x 4 normalized goals from per-candidate past features and latents.
ad::Var predict_goal(const GoalHeadVars& head, ad::Var past, ad::Var latent);

/// Recurrent decoder conditioned on epsilon(characters) (+) F_p (+) epsilon(G).
/// The input projection and initial state are split per input block so that
/// the per-sample part is computed once and shared by the K candidates.
struct DecoderVars {
  std::optional<LinearVars> char_embed;
  LinearVars goal_embed;
  ad::Var in_char, in_past, in_goal, in_bias;          // -> 3H
  ad::Var init_char, init_past, init_goal, init_bias;  // -> H
  ad::Var hidden_weights, hidden_bias;
  LinearVars output;  // H -> 4 displacement per step
};

/// Decodes `steps` boxes for each of the K candidates of every sample.
/// `characters` is B x L (invalid Var when no character stream is used),
/// `past` B x H_enc, `goals` (B*K) x 4. Returns (B*K) x (4*steps) normalized
/// boxes, the running sum of per-step displacements from the last observed box.
ad::Var decode(const DecoderVars& dec, ad::Var characters, ad::Var past, ad::Var goals, int k, int steps);

// -- single-sample convenience API (plain matrices) ------------------------------

struct GoalHeadParams {
  std::optional<LinearParams> hidden;
  LinearParams output;
};

struct DecoderParams {
  std::optional<LinearParams> char_embed;
  LinearParams goal_embed;
  Matrix in_char, in_past, in_goal;
  RowVector in_bias;
  Matrix init_char, init_past, init_goal;
  RowVector init_bias;
  Matrix hidden_weights;
  RowVector hidden_bias;
  LinearParams output;

  /// Zero-valued parameters of the given widths (char_width 0: no characters).
  static DecoderParams zeros(int char_width, int char_embed_width, int past_width, int goal_embed_width, int hidden);
};

GoalHeadVars place(ad::Tape& tape, const GoalHeadParams& p);
DecoderVars place(ad::Tape& tape, const DecoderParams& p);

/// Goal box in pixels for one (F_p, Z) pair.
BBox predict_goal(const RowVector& past, const RowVector& latent, const GoalHeadParams& head,
                  const BoxNormalizer& normalizer);

/// Pixel trajectory of `steps` boxes for one sample and goal. The character
/// vectors are the flattened outputs of the temporal and category streams
/// (either may be empty).
std::vector<BBox> decode(const RowVector& temporal_chars, const RowVector& category_chars, const RowVector& past,
                         const BBox& goal, const DecoderParams& params, const BoxNormalizer& normalizer, int steps);

// -- loss ---------------------------------------------------------------------------

struct PredictionSet {
  std::vector<std::vector<BBox>> trajectories;
  std::vector<BBox> goals;
  std::vector<RowVector> latents;

  std::size_t size() const { return trajectories.size(); }
  void validate(std::size_t steps) const;
};

struct LossTerms {
  double trajectory = 0;
  double goal = 0;
  double kld = 0;
  double total = 0;
};

struct LossOptions {
  ad::LossNorm norm = ad::LossNorm::Flattened;
  KldDirection kld_direction = KldDirection::PriorPosterior;
};

/// Ground-truth goal: the last box of the future window.
BBox goal_ground_truth(const BBoxTrack& future);

/// Best-of-K trajectory and goal distances plus the KL term, unit weights.
/// Distances are measured in the coordinates the boxes are given in.
LossTerms tsnet_loss(const PredictionSet& pred, const std::vector<BBox>& truth, const BBox& goal_truth,
                     const LatentGaussian& prior, const LatentGaussian& posterior, const LossOptions& options = {});

}  // namespace tsnet
