#pragma once

#include "tsnet/config.hpp"
#include "tsnet/data.hpp"
#include "tsnet/model.hpp"

#include "helpers.hpp"

#include <vector>

namespace testing {

/// T_obs 3, T_pred 2, two categories, D_f 4.
inline tsnet::Config tiny_config() {
  tsnet::Config c;
  c.t_obs = 3;
  c.t_pred = 2;
  c.k = 3;
  c.c = 6;
  c.attention_width = 4;
  c.heads = 2;
  c.encoder_width = 5;
  c.decoder_width = 5;
  c.latent_dim = 3;
  c.char_embed_width = 4;
  c.goal_embed_width = 3;
  c.goal_hidden_width = 4;
  c.batch_size = 4;
  c.epochs = 2;
  c.categories = {"a", "b"};
  c.vocab = {3, 4};
  c.seed = 5;
  return c;
}

/// Small widths but the full 45-frame horizon, for pipeline runs that report
/// the 0.5 / 1.0 / 1.5 s rows.
inline tsnet::Config pipeline_config() {
  tsnet::Config c = tiny_config();
  c.t_obs = 4;
  c.t_pred = 45;
  c.encoder_width = 6;
  c.decoder_width = 6;
  c.latent_dim = 2;
  c.batch_size = 16;
  c.epochs = 2;
  return c;
}

inline tsnet::SynthConfig tiny_synth(const tsnet::Config& c, int tracks) {
  tsnet::SynthConfig s;
  s.tracks = tracks;
  s.track_length = c.t_obs + c.t_pred + 2;
  s.observed_length = c.t_obs;
  s.schema = c.full_schema();
  s.informative = {0};
  s.decoy = {1};
  return s;
}

inline std::vector<tsnet::TrackRecord> tiny_records(const tsnet::Config& c, int tracks, std::uint64_t seed) {
  return tsnet::generate_synthetic(tiny_synth(c, tracks), seed);
}

inline std::vector<tsnet::Sample> tiny_samples(const tsnet::Config& c, int tracks, std::uint64_t seed) {
  return tsnet::make_windows(tsnet::generate_synthetic(tiny_synth(c, tracks), seed), c.t_obs, c.t_pred, 1, c.schema());
}

/// Every parameter redrawn uniformly in [-lo, hi] so that no gradient path
/// starts at an exact zero.
inline void randomize(tsnet::Model& model, std::uint64_t seed, double bound = 0.8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto* p : model.params().all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = u(rng);
  }
}

/// Gradient check of the full training loss of a tiny model against central
/// differences. The candidate noise is fixed so that the loss is a
/// deterministic function of the parameters.
inline GradCheck model_grad_check(const tsnet::Config& config, std::uint64_t seed, double* tie_margin = nullptr,
                                  double* xi_margin = nullptr) {
  tsnet::Model model(config);
  randomize(model, seed);
  auto samples = tiny_samples(config, 2, seed);
  std::vector<tsnet::PreparedSample> prepared;
  for (std::size_t i = 0; i < 2 && i < samples.size(); ++i) prepared.push_back(model.prepare(samples[i]));
  std::vector<const tsnet::PreparedSample*> batch;
  for (const auto& p : prepared) batch.push_back(&p);

  {
    tsnet::ad::Tape tape;
    tsnet::Rng rng(seed);
    const auto step = model.forward_train(tape, batch, rng);
    if (tie_margin != nullptr) *tie_margin = step.tie_margin;
    if (xi_margin != nullptr) *xi_margin = step.masks.xi_margin;
  }
  std::vector<tsnet::Parameter*> params = model.params().all();
  return grad_check(params, [&](tsnet::ad::Tape& tape) {
    tsnet::Rng rng(seed);
    return model.forward_train(tape, batch, rng).loss;
  });
}

}  // namespace testing
