#pragma once

#include "tsnet/data.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace tsnet {

using Trajectory = std::vector<BBox>;

// Squared errors in pixels^2, averaged per coordinate.
double ade(const Trajectory& pred, const Trajectory& truth, int horizon);
double c_ade(const Trajectory& pred, const Trajectory& truth, int horizon);
double fde(const Trajectory& pred, const Trajectory& truth, int horizon);
double c_fde(const Trajectory& pred, const Trajectory& truth, int horizon);

/// Frames per horizon at 30 Hz: 0.5 s -> 15, 1.0 s -> 30, 1.5 s -> 45.
int horizon_frames(double seconds);

struct MetricRow {
  double horizon_s = 0;
  double ade = 0, c_ade = 0, fde = 0, c_fde = 0;
  int k = 0;
  int c = 0;
  std::uint64_t seed = 0;
};

struct BestOfKResult {
  std::vector<MetricRow> rows;   // one per horizon, means over samples
  std::vector<int> selected;     // chosen candidate of each sample
};

/// Per sample, the candidate with the lowest ADE over the full length of the
/// truth is selected and all metrics are reported for it at every horizon.
/// Throws ArgumentError unless every set holds exactly `k` candidates.
BestOfKResult best_of_k_eval(const std::vector<std::vector<Trajectory>>& predictions,
                             const std::vector<Trajectory>& truths, int k,
                             const std::vector<double>& horizons_s = {0.5, 1.0, 1.5});

std::string metrics_csv(const std::vector<MetricRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace tsnet
