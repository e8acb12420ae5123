#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsnet {

/// Pixel bounding box given by its upper-left and lower-right corners.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool valid() const;
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct BBoxTrack {
  std::vector<std::int64_t> frames;
  std::vector<BBox> boxes;

  std::size_t size() const { return boxes.size(); }
  /// Throws ValidationError unless frames are consecutive and boxes valid.
  void validate() const;
};

/// Names and vocabulary sizes of the character categories. The last index of
/// every vocabulary means "unknown".
struct CharacterSchema {
  std::vector<std::string> names;
  std::vector<int> vocab_sizes;

  static CharacterSchema standard();
  std::size_t size() const { return names.size(); }
  int index_of(std::string_view name) const;  // -1 when absent
  int unknown_label(std::size_t category) const { return vocab_sizes.at(category) - 1; }
  /// Schema restricted to the given category indices, in that order.
  CharacterSchema subset(const std::vector<int>& categories) const;
};

/// N x T_obs categorical labels over the observed window.
struct CharacterSet {
  std::vector<std::string> category_names;
  std::vector<int> vocab_sizes;
  std::vector<std::vector<int>> labels;  // [category][timestep]

  std::size_t categories() const { return labels.size(); }
  std::size_t steps() const { return labels.empty() ? 0 : labels.front().size(); }
  /// Throws EncodingError for out-of-vocabulary labels, ValidationError for shape errors.
  void validate() const;
};

enum class Split { Train, Val, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// One JSONL record: a full track with per-frame characters.
struct TrackRecord {
  std::string track_id;
  Split split = Split::Train;
  BBoxTrack track;
  std::vector<std::string> character_names;       // file order
  std::vector<std::vector<int>> characters;       // [category][frame]
  std::array<double, 2> image_size{1920.0, 1080.0};

  void validate() const;
};

struct Sample {
  BBoxTrack observed;
  BBoxTrack future;
  CharacterSet characters;
  std::string track_id;
  std::array<double, 2> image_size{1920.0, 1080.0};
  std::size_t window_start = 0;
};

/// Parses one JSONL line; `line_number` is 1-based and used in messages.
TrackRecord parse_record(std::string_view line, std::size_t line_number);
std::string serialize_record(const TrackRecord& record);

/// Loads every record, or only those of `split` when given, in file order.
std::vector<TrackRecord> load_dataset(const std::filesystem::path& path, std::optional<Split> split = std::nullopt);
void save_dataset(const std::filesystem::path& path, const std::vector<TrackRecord>& records);

/// Slices a track into (observed, future) windows starting at 0, stride,
/// 2*stride, ...; windows overrunning the track are dropped. Characters are
/// taken from the record in the order of `schema`.
std::vector<Sample> make_windows(const TrackRecord& record, int t_obs, int t_pred, int stride,
                                 const CharacterSchema& schema);

std::vector<Sample> make_windows(const std::vector<TrackRecord>& records, int t_obs, int t_pred, int stride,
                                 const CharacterSchema& schema);

// -- synthetic data -------------------------------------------------------------

enum class SyntheticMode { Straight = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };

std::string_view to_string(SyntheticMode m);

struct SynthConfig {
  int tracks = 2000;
  int track_length = 60;
  int observed_length = 15;
  double noise_px = 1.0;
  /// Relative spread of the unobservable within-mode parameters (turn rate,
  /// stopping distance); 0 makes every track of a mode follow the same rule.
  double mode_jitter = 0.3;
  std::vector<int> informative{0, 1};
  std::vector<int> decoy{2, 3, 4};
  std::array<double, 2> image_size{1920.0, 1080.0};
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  CharacterSchema schema = CharacterSchema::standard();

  void validate() const;
};

/// Future mode of a synthetic record, a function of its informative labels.
SyntheticMode synthetic_mode(const TrackRecord& record, const SynthConfig& config);

/// Deterministic in (config, seed): the same inputs give identical records.
std::vector<TrackRecord> generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace tsnet
