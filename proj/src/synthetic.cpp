#include "tsnet/data.hpp"
#include "tsnet/error.hpp"
#include "tsnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace tsnet {

std::string_view to_string(SyntheticMode m) {
  switch (m) {
    case SyntheticMode::Straight: return "straight";
    case SyntheticMode::TurnLeft: return "turn-left";
    case SyntheticMode::TurnRight: return "turn-right";
    case SyntheticMode::Stop: return "stop";
  }
  return "straight";
}

void SynthConfig::validate() const {
  if (tracks < 0) throw ArgumentError("synthetic: track count must be >= 0");
  if (observed_length < 1 || track_length <= observed_length) {
    throw ArgumentError("synthetic: track length must exceed the observed length");
  }
  if (noise_px < 0 || !std::isfinite(noise_px)) throw ArgumentError("synthetic: noise must be finite and >= 0");
  if (mode_jitter < 0 || mode_jitter >= 1) throw ArgumentError("synthetic: mode_jitter must be in [0, 1)");
  if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1) {
    throw ArgumentError("synthetic: split fractions must be >= 0 and sum to at most 1");
  }
  if (informative.empty()) throw ArgumentError("synthetic: at least one informative category is required");
  std::set<int> seen;
  for (int c : informative) {
    if (c < 0 || static_cast<std::size_t>(c) >= schema.size()) throw ArgumentError("synthetic: informative index out of range");
    if (schema.vocab_sizes[static_cast<std::size_t>(c)] < 3) {
      throw ArgumentError("synthetic: informative categories need two labels besides unknown");
    }
    if (!seen.insert(c).second) throw ArgumentError("synthetic: duplicate informative index");
  }
  for (int c : decoy) {
    if (c < 0 || static_cast<std::size_t>(c) >= schema.size()) throw ArgumentError("synthetic: decoy index out of range");
    if (!seen.insert(c).second) throw ArgumentError("synthetic: informative and decoy categories overlap");
  }
}

SyntheticMode synthetic_mode(const TrackRecord& record, const SynthConfig& config) {
  unsigned code = 0;
  for (std::size_t k = 0; k < config.informative.size(); ++k) {
    const std::string& name = config.schema.names[static_cast<std::size_t>(config.informative[k])];
    auto it = std::find(record.character_names.begin(), record.character_names.end(), name);
    if (it == record.character_names.end()) throw ValidationError("record lacks informative category " + name);
    const auto& labels = record.characters[static_cast<std::size_t>(it - record.character_names.begin())];
    const int label = labels.empty() ? 0 : labels.front();
    code += static_cast<unsigned>(label & 1) << k;
  }
  return static_cast<SyntheticMode>(code % 4);
}

namespace {

struct Motion {
  double cx, cy, vx, vy;
};

// Displacement of the box center `tau` frames after the last observed frame.
std::array<double, 2> future_offset(SyntheticMode mode, const Motion& m, int tau, int horizon, double jitter) {
  double dx = 0, dy = 0;
  switch (mode) {
    case SyntheticMode::Straight:
      dx = m.vx * tau;
      dy = m.vy * tau;
      break;
    case SyntheticMode::TurnLeft:
    case SyntheticMode::TurnRight: {
      const double sign = mode == SyntheticMode::TurnLeft ? -1.0 : 1.0;
      const double rate = sign * (std::numbers::pi / 2.0) / horizon * jitter;
      for (int s = 1; s <= tau; ++s) {
        const double a = rate * s;
        dx += m.vx * std::cos(a) - m.vy * std::sin(a);
        dy += m.vx * std::sin(a) + m.vy * std::cos(a);
      }
      break;
    }
    case SyntheticMode::Stop: {
      const double stop_frames = std::max(1.0, 15.0 * jitter);
      for (int s = 1; s <= tau; ++s) {
        const double f = std::max(0.0, 1.0 - s / stop_frames);
        dx += f * m.vx;
        dy += f * m.vy;
      }
      break;
    }
  }
  return {dx, dy};
}

}  // namespace

std::vector<TrackRecord> generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const CharacterSchema& schema = config.schema;
  std::vector<char> is_informative(schema.size(), 0), is_decoy(schema.size(), 0);
  for (int c : config.informative) is_informative[static_cast<std::size_t>(c)] = 1;
  for (int c : config.decoy) is_decoy[static_cast<std::size_t>(c)] = 1;

  const int n_train = static_cast<int>(std::lround(config.tracks * config.train_fraction));
  const int n_val = static_cast<int>(std::lround(config.tracks * config.val_fraction));
  const int len = config.track_length;
  const int t_obs = config.observed_length;

  std::vector<TrackRecord> out;
  out.reserve(static_cast<std::size_t>(config.tracks));
  for (int i = 0; i < config.tracks; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    std::normal_distribution<double> noise(0.0, 1.0);

    TrackRecord r;
    r.track_id = "synth_" + std::to_string(i);
    r.split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    r.image_size = config.image_size;

    // Characters first so that the mode can be derived from them.
    r.character_names = schema.names;
    r.characters.assign(schema.size(), std::vector<int>(static_cast<std::size_t>(len), 0));
    for (std::size_t n = 0; n < schema.size(); ++n) {
      auto& labels = r.characters[n];
      if (is_informative[n]) {
        std::fill(labels.begin(), labels.end(), unit(rng) < 0.5 ? 0 : 1);
      } else if (is_decoy[n]) {
        std::uniform_int_distribution<int> draw(0, schema.vocab_sizes[n] - 1);
        for (int& v : labels) v = draw(rng);
      } else {
        std::fill(labels.begin(), labels.end(), schema.unknown_label(n));
      }
    }
    const SyntheticMode mode = synthetic_mode(r, config);

    const std::int64_t first_frame = static_cast<std::int64_t>(uniform(0.0, 10000.0));
    const double w0 = uniform(30.0, 70.0);
    const double aspect = uniform(2.2, 2.8);
    const double growth = uniform(0.0, 0.004);
    const double speed = uniform(1.5, 3.5);
    const double heading = uniform(0.0, 2.0 * std::numbers::pi);
    const double jitter = uniform(1.0 - config.mode_jitter, 1.0 + config.mode_jitter);
    Motion m{uniform(300.0, config.image_size[0] - 300.0), uniform(350.0, config.image_size[1] - 350.0),
             speed * std::cos(heading), speed * std::sin(heading)};

    const double last_cx = m.cx + m.vx * (t_obs - 1);
    const double last_cy = m.cy + m.vy * (t_obs - 1);
    for (int t = 0; t < len; ++t) {
      double cx, cy;
      if (t < t_obs || mode == SyntheticMode::Straight) {
        cx = m.cx + m.vx * t;
        cy = m.cy + m.vy * t;
      } else {
        const auto [dx, dy] = future_offset(mode, m, t - (t_obs - 1), len - t_obs, jitter);
        cx = last_cx + dx;
        cy = last_cy + dy;
      }
      double w = w0 * (1.0 + growth * t);
      double h = aspect * w;
      if (config.noise_px > 0) {
        cx += config.noise_px * noise(rng);
        cy += config.noise_px * noise(rng);
        w = std::max(1.0, w + config.noise_px * noise(rng));
        h = std::max(1.0, h + config.noise_px * noise(rng));
      }
      r.track.frames.push_back(first_frame + t);
      r.track.boxes.push_back(BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tsnet
