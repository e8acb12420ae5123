#include "tsnet/data.hpp"

#include "tsnet/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace tsnet {

using ordered_json = nlohmann::ordered_json;

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 <= x2 && y1 <= y2;
}

void BBoxTrack::validate() const {
  if (frames.size() != boxes.size()) throw ValidationError("frames and boxes differ in length");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BBox& b = boxes[i];
    if (!(std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2))) {
      throw ValidationError("boxes[" + std::to_string(i) + "]: non-finite coordinate");
    }
    if (b.x1 > b.x2) throw ValidationError("boxes[" + std::to_string(i) + "]: x1 > x2");
    if (b.y1 > b.y2) throw ValidationError("boxes[" + std::to_string(i) + "]: y1 > y2");
    if (i > 0 && frames[i] != frames[i - 1] + 1) {
      throw ValidationError("frames[" + std::to_string(i) + "]: frame indices must be consecutive");
    }
  }
}

CharacterSchema CharacterSchema::standard() {
  // walking/standing, five gestures plus none, looking/not, two genders,
  // four age groups; each with a trailing "unknown".
  return CharacterSchema{{"action", "gesture", "look", "gender", "age"}, {3, 7, 3, 3, 5}};
}

int CharacterSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CharacterSchema CharacterSchema::subset(const std::vector<int>& categories) const {
  CharacterSchema out;
  for (int c : categories) {
    if (c < 0 || static_cast<std::size_t>(c) >= names.size()) {
      throw ArgumentError("character subset index out of range: " + std::to_string(c));
    }
    out.names.push_back(names[static_cast<std::size_t>(c)]);
    out.vocab_sizes.push_back(vocab_sizes[static_cast<std::size_t>(c)]);
  }
  return out;
}

void CharacterSet::validate() const {
  if (category_names.size() != labels.size() || vocab_sizes.size() != labels.size()) {
    throw ValidationError("character set: names, vocabularies and labels differ in length");
  }
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n].size() != steps()) throw ValidationError("character set: ragged label matrix");
    if (vocab_sizes[n] < 1) throw ValidationError("character set: vocabulary size must be positive");
    for (int v : labels[n]) {
      if (v < 0 || v >= vocab_sizes[n]) {
        throw EncodingError("label " + std::to_string(v) + " outside vocabulary of '" + category_names[n] + "' (size " +
                            std::to_string(vocab_sizes[n]) + ")");
      }
    }
  }
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ArgumentError("unknown split '" + std::string(s) + "' (expected train, val or test)");
}

void TrackRecord::validate() const {
  try {
    track.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("record '" + track_id + "': " + e.what());
  }
  if (character_names.size() != characters.size()) {
    throw ValidationError("record '" + track_id + "': characters malformed");
  }
  for (std::size_t n = 0; n < characters.size(); ++n) {
    if (characters[n].size() != track.size()) {
      throw ValidationError("record '" + track_id + "': characters." + character_names[n] +
                            " does not align with frames");
    }
    for (int v : characters[n]) {
      if (v < 0) throw ValidationError("record '" + track_id + "': characters." + character_names[n] + " is negative");
    }
  }
  if (!(image_size[0] > 0 && image_size[1] > 0)) {
    throw ValidationError("record '" + track_id + "': image_size must be positive");
  }
}

namespace {

[[noreturn]] void schema_error(std::size_t line, const std::string& id, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ", record '" + id + "': " + what);
}

const ordered_json& require(const ordered_json& j, const char* field, std::size_t line, const std::string& id) {
  auto it = j.find(field);
  if (it == j.end()) schema_error(line, id, std::string("missing field '") + field + "'");
  return *it;
}

}  // namespace

TrackRecord parse_record(std::string_view line, std::size_t line_number) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_number) + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("line " + std::to_string(line_number) + ": record is not a JSON object");

  TrackRecord r;
  const auto& id = require(j, "track_id", line_number, "?");
  if (!id.is_string()) schema_error(line_number, "?", "track_id must be a string");
  r.track_id = id.get<std::string>();

  const auto& split = require(j, "split", line_number, r.track_id);
  if (!split.is_string()) schema_error(line_number, r.track_id, "split must be a string");
  try {
    r.split = parse_split(split.get<std::string>());
  } catch (const ArgumentError& e) {
    schema_error(line_number, r.track_id, std::string("split: ") + e.what());
  }

  const auto& frames = require(j, "frames", line_number, r.track_id);
  if (!frames.is_array()) schema_error(line_number, r.track_id, "frames must be an array");
  for (const auto& f : frames) {
    if (!f.is_number_integer()) schema_error(line_number, r.track_id, "frames must hold integers");
    r.track.frames.push_back(f.get<std::int64_t>());
  }

  const auto& boxes = require(j, "boxes", line_number, r.track_id);
  if (!boxes.is_array()) schema_error(line_number, r.track_id, "boxes must be an array");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    if (!b.is_array() || b.size() != 4) {
      schema_error(line_number, r.track_id, "boxes[" + std::to_string(i) + "] must be [x1,y1,x2,y2]");
    }
    for (const auto& c : b) {
      if (!c.is_number()) schema_error(line_number, r.track_id, "boxes[" + std::to_string(i) + "] must be numeric");
    }
    r.track.boxes.push_back(BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }

  const auto& chars = require(j, "characters", line_number, r.track_id);
  if (!chars.is_object()) schema_error(line_number, r.track_id, "characters must be an object");
  for (const auto& [name, values] : chars.items()) {
    if (!values.is_array()) schema_error(line_number, r.track_id, "characters." + name + " must be an array");
    std::vector<int> labels;
    for (const auto& v : values) {
      if (!v.is_number_integer()) schema_error(line_number, r.track_id, "characters." + name + " must hold integers");
      labels.push_back(v.get<int>());
    }
    r.character_names.push_back(name);
    r.characters.push_back(std::move(labels));
  }

  const auto& size = require(j, "image_size", line_number, r.track_id);
  if (!size.is_array() || size.size() != 2 || !size[0].is_number() || !size[1].is_number()) {
    schema_error(line_number, r.track_id, "image_size must be [W, H]");
  }
  r.image_size = {size[0].get<double>(), size[1].get<double>()};

  try {
    r.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
  }
  return r;
}

std::string serialize_record(const TrackRecord& r) {
  ordered_json j;
  j["track_id"] = r.track_id;
  j["split"] = std::string(to_string(r.split));
  j["frames"] = r.track.frames;
  ordered_json boxes = ordered_json::array();
  for (const BBox& b : r.track.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
  j["boxes"] = std::move(boxes);
  ordered_json chars = ordered_json::object();
  for (std::size_t n = 0; n < r.characters.size(); ++n) chars[r.character_names[n]] = r.characters[n];
  j["characters"] = std::move(chars);
  j["image_size"] = {r.image_size[0], r.image_size[1]};
  return j.dump();
}

std::vector<TrackRecord> load_dataset(const std::filesystem::path& path, std::optional<Split> split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  std::vector<TrackRecord> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TrackRecord r = parse_record(line, line_number);
    if (!split || r.split == *split) out.push_back(std::move(r));
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<TrackRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path.string());
  for (const auto& r : records) out << serialize_record(r) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Sample> make_windows(const TrackRecord& record, int t_obs, int t_pred, int stride,
                                 const CharacterSchema& schema) {
  if (t_obs < 1 || t_pred < 1) throw ArgumentError("make_windows: T_obs and T_pred must be >= 1");
  if (stride < 1) throw ArgumentError("make_windows: stride must be >= 1");

  std::vector<int> source(schema.size());
  for (std::size_t n = 0; n < schema.size(); ++n) {
    int found = -1;
    for (std::size_t k = 0; k < record.character_names.size(); ++k) {
      if (record.character_names[k] == schema.names[n]) found = static_cast<int>(k);
    }
    if (found < 0) {
      throw ValidationError("record '" + record.track_id + "': missing characters." + schema.names[n]);
    }
    source[n] = found;
  }

  std::vector<Sample> out;
  const std::size_t span = static_cast<std::size_t>(t_obs + t_pred);
  for (std::size_t start = 0; start + span <= record.track.size(); start += static_cast<std::size_t>(stride)) {
    Sample s;
    s.track_id = record.track_id;
    s.image_size = record.image_size;
    s.window_start = start;
    const auto obs_end = start + static_cast<std::size_t>(t_obs);
    s.observed.frames.assign(record.track.frames.begin() + static_cast<std::ptrdiff_t>(start),
                             record.track.frames.begin() + static_cast<std::ptrdiff_t>(obs_end));
    s.observed.boxes.assign(record.track.boxes.begin() + static_cast<std::ptrdiff_t>(start),
                            record.track.boxes.begin() + static_cast<std::ptrdiff_t>(obs_end));
    s.future.frames.assign(record.track.frames.begin() + static_cast<std::ptrdiff_t>(obs_end),
                           record.track.frames.begin() + static_cast<std::ptrdiff_t>(start + span));
    s.future.boxes.assign(record.track.boxes.begin() + static_cast<std::ptrdiff_t>(obs_end),
                          record.track.boxes.begin() + static_cast<std::ptrdiff_t>(start + span));
    s.characters.category_names = schema.names;
    s.characters.vocab_sizes = schema.vocab_sizes;
    for (std::size_t n = 0; n < schema.size(); ++n) {
      const auto& src = record.characters[static_cast<std::size_t>(source[n])];
      s.characters.labels.emplace_back(src.begin() + static_cast<std::ptrdiff_t>(start),
                                       src.begin() + static_cast<std::ptrdiff_t>(obs_end));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> make_windows(const std::vector<TrackRecord>& records, int t_obs, int t_pred, int stride,
                                 const CharacterSchema& schema) {
  std::vector<Sample> out;
  for (const auto& r : records) {
    auto w = make_windows(r, t_obs, t_pred, stride, schema);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace tsnet
