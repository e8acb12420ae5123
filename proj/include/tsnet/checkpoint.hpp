#pragma once

#include "tsnet/config.hpp"
#include "tsnet/params.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tsnet {

struct EpochLog {
  int epoch = 0;
  double loss = 0, trajectory = 0, goal = 0, kld = 0;
  double learning_rate = 0;
  std::int64_t degenerate_groups = 0;  // mask fallbacks seen during the epoch
  double seconds = 0;
};

struct Checkpoint {
  Config config;
  ParamStore params;
  std::string rng_state;  // training generator after the last epoch
  std::vector<EpochLog> curve;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError when unreadable, ParseError when malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string curve_csv(const std::vector<EpochLog>& curve);

}  // namespace tsnet
