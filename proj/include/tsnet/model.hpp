#pragma once

#include "tsnet/autodiff.hpp"
#include "tsnet/config.hpp"
#include "tsnet/data.hpp"
#include "tsnet/params.hpp"
#include "tsnet/trajstream.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tsnet {

/// A window with everything the network needs precomputed: normalized boxes,
/// embedding row indices and GCN propagation operators.
struct PreparedSample {
  std::string track_id;
  std::size_t window_start = 0;
  BoxNormalizer normalizer;
  RowVector observed;             // 4 * T_obs, normalized
  RowVector future;               // 4 * T_pred, normalized
  std::vector<BBox> observed_px;
  std::vector<BBox> future_px;
  CharacterSet characters;
  std::vector<int> temporal_codes;  // N * T_obs rows, ordered (category, step)
  std::vector<int> category_codes;  // T_obs * N rows, ordered (step, category)
  Matrix temporal_propagation;      // (N * T_obs) x T_obs
  Matrix category_propagation;      // (T_obs * N) x N
};

/// Thresholded masks of one batch, rows laid out like the codes above.
struct MaskTrace {
  Matrix temporal;  // (B * N * T_obs) x T_obs
  Matrix category;  // (B * T_obs * N) x N
  ad::MaskStats temporal_stats;
  ad::MaskStats category_stats;
  // Closest fused score to xi; the threshold is not differentiable there.
  double xi_margin = std::numeric_limits<double>::infinity();
};

struct TrainStep {
  ad::Var loss;  // batch mean of L_TRJ + L_GL + L_KLD
  double trajectory = 0, goal = 0, kld = 0;
  // Smallest gap between the best and second-best candidate distance over
  // the batch (trajectory and goal terms); the min is not differentiable at 0.
  double tie_margin = 0;
  MaskTrace masks;
};

struct Inference {
  Matrix trajectories;  // (B * count) x (4 * T_pred), normalized, candidates of a sample contiguous
  Matrix goals;         // (B * count) x 4, normalized
  Matrix latents;       // (B * count) x d_z
  MaskTrace masks;
};

class Model {
 public:
  /// Fresh parameters drawn from config.seed.
  explicit Model(Config config);
  /// Parameters restored from a checkpoint; shapes are checked against the config.
  Model(Config config, const ParamStore& params);

  const Config& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  PreparedSample prepare(const Sample& sample) const;

  /// K posterior draws per sample, best-of-K losses. Requires training mode.
  TrainStep forward_train(ad::Tape& tape, std::span<const PreparedSample* const> batch, Rng& rng);

  /// `count` prior draws per sample; sample b draws its noise from seeds[b].
  /// Never reads the future encoder or the posterior head.
  Inference infer(std::span<const PreparedSample* const> batch, int count, std::span<const std::uint64_t> seeds);

  /// Future-trajectory features; only exists while training.
  ad::Var encode_future(ad::Tape& tape, ad::Var future_steps);

  /// Names of parameters read by the character streams.
  std::vector<std::string> character_parameters() const;

 private:
  struct Stream;
  void init_parameters();
  void check_parameters() const;
  ad::Var place(ad::Tape& tape, const std::string& name);
  ad::Var characters(ad::Tape& tape, std::span<const PreparedSample* const> batch, MaskTrace& trace);
  ad::Var stream(ad::Tape& tape, const std::string& prefix, std::span<const PreparedSample* const> batch,
                 bool temporal, Matrix& mask_out, ad::MaskStats& stats, double& xi_margin);
  ad::Var encode_past(ad::Tape& tape, std::span<const PreparedSample* const> batch);
  ad::Var decode_all(ad::Tape& tape, ad::Var chars, ad::Var past, ad::Var latents, int count, ad::Var* goals);

  Config config_;
  CharacterSchema schema_;
  ParamStore params_;
  bool training_ = true;
};

/// Batch-shaped matrix of per-sample rows.
Matrix stack_rows(std::span<const PreparedSample* const> batch, RowVector PreparedSample::*field);

}  // namespace tsnet
