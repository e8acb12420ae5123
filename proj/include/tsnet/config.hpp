#pragma once

#include "tsnet/data.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tsnet {

struct Config {
  // horizons and sampling
  int t_obs = 15;
  int t_pred = 45;
  int stride = 1;
  int k = 20;
  int c = 100;
  double xi = 0.5;

  // architecture
  int attention_layers = 1;
  int attention_width = 64;  // D_f, also the query/key width summed over heads
  int heads = 4;
  int gcn_layers = 1;
  int encoder_width = 256;
  int decoder_width = 256;
  int latent_dim = 32;
  int char_embed_width = 256;
  int goal_embed_width = 64;
  int goal_hidden_width = 256;  // 0: linear goal head

  // optimisation
  int batch_size = 128;
  double learning_rate = 1e-3;
  double lr_decay = 0.99;
  int epochs = 50;
  std::uint64_t seed = 0;

  // toggles
  bool use_st = true;
  bool use_sc = true;
  bool use_ftc = true;
  std::vector<std::string> character_subset;  // empty: every category
  std::string kld_direction = "p_q";          // p_q: KL(p||q), q_p: KL(q||p)
  bool asymmetric_norm = false;
  bool per_category_attention = false;
  std::string loss_norm = "flattened";        // flattened | step_mean
  std::string ftc_space = "trajectory";       // trajectory | goal
  bool apply_threshold = true;

  // normalisation divisor and category schema
  double image_width = 1920;
  double image_height = 1080;
  std::vector<std::string> categories{"action", "gesture", "look", "gender", "age"};
  std::vector<int> vocab{3, 7, 3, 3, 5};

  /// Throws ValidationError naming the offending key.
  void validate() const;

  CharacterSchema full_schema() const;
  /// Schema of the categories the model consumes (character_subset applied).
  CharacterSchema schema() const;
  bool uses_characters() const { return use_st || use_sc; }

  std::vector<std::string> keys() const;
  std::string get(const std::string& key) const;
  /// Parses `value` for `key`; throws ArgumentError for unknown keys and
  /// ParseError for malformed values.
  void set(const std::string& key, const std::string& value);

  std::string serialize() const;
  std::map<std::string, std::string> to_map() const;

  /// Keys that may differ between a checkpoint and an evaluation request.
  static bool overridable(const std::string& key);
};

/// `key = value` lines, `#` starts a comment. Unknown keys are parse errors
/// naming the line.
Config parse_config(const std::string& text, Config base = {});
Config load_config(const std::filesystem::path& path, Config base = {});
void save_config(const std::filesystem::path& path, const Config& config);

/// Applies `overrides` on top of a checkpoint config. Any non-overridable key
/// whose value differs raises CompatibilityError.
Config merge_for_evaluation(const Config& checkpoint, const std::map<std::string, std::string>& overrides);

}  // namespace tsnet
