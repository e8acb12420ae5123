#pragma once

#include "tsnet/checkpoint.hpp"
#include "tsnet/config.hpp"
#include "tsnet/data.hpp"
#include "tsnet/metrics.hpp"
#include "tsnet/model.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tsnet {

struct TrainOptions {
  /// Where the offending batch is written when the loss turns non-finite.
  std::optional<std::filesystem::path> diagnostic_path;
  /// Called after every epoch.
  std::function<void(const EpochLog&)> on_epoch;
  /// Starting parameters (e.g. from an earlier checkpoint) instead of a fresh draw.
  std::optional<ParamStore> initial_params;
};

/// Trains on the train split of `records`. Throws NumericError (after writing
/// the diagnostic dump) on a non-finite loss.
Checkpoint train(const Config& config, const std::vector<TrackRecord>& records, const TrainOptions& options = {});

/// Windows of one split, prepared for `model`.
std::vector<PreparedSample> prepare_split(const Model& model, const std::vector<TrackRecord>& records, Split split);

/// K final candidates per sample in pixels: prior samples, optionally reduced
/// from C by clustering. Sample i of the split uses seed derive_seed(seed, i).
std::vector<std::vector<Trajectory>> generate(Model& model, std::span<const PreparedSample> samples,
                                              std::size_t first_index = 0);

struct EvalResult {
  std::vector<MetricRow> rows;
  std::vector<int> selected;
  std::size_t samples = 0;
};

EvalResult evaluate(Model& model, const std::vector<TrackRecord>& records, Split split);

/// Per-category mean keep-scores of the category (N x N) and temporal masks
/// over a split, averaged over every node of that category.
struct KeepScores {
  std::vector<std::string> categories;
  std::vector<double> category_graph;  // empty when SC is off
  std::vector<double> temporal_graph;  // empty when ST is off
  ad::MaskStats category_stats, temporal_stats;
};

KeepScores keep_scores(Model& model, std::span<const PreparedSample> samples);

/// JSON dump of one window's K predictions.
std::string predict_json(Model& model, const std::vector<TrackRecord>& records, Split split, std::size_t index);

/// Draws the dump produced by predict_json over `background` (a PNG) or a
/// blank canvas when it is missing.
void plot_prediction(const std::string& prediction_json, const std::optional<std::filesystem::path>& background,
                     const std::filesystem::path& out_png);

enum class AblationAxis { Components, Characters, Threshold, Clustering };

AblationAxis parse_ablation_axis(const std::string& name);

struct AblationTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const;
};

/// Toggle matrix of one ablation axis (configs only, nothing is trained).
struct AblationRun {
  std::vector<std::string> label;  // leading CSV cells
  Config train_config;
  Config eval_config;
};

std::vector<AblationRun> ablation_plan(const Config& base, AblationAxis axis);

/// Trains and evaluates every run of the plan on the test split. Runs that
/// share a training config reuse one model.
AblationTable run_ablation(const Config& base, const std::vector<TrackRecord>& records, AblationAxis axis);

}  // namespace tsnet
