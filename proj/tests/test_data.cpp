#include "tsnet/data.hpp"
#include "tsnet/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <map>

using namespace tsnet;

TEST_CASE("data: record round-trips through JSONL") {
  testing::TempDir dir;
  auto r = testing::straight_record("a", 20, Split::Val);
  r.track.boxes[3].x1 = 0.1 + 0.2;  // not exactly representable in short decimal
  r.image_size = {1280, 720};
  save_dataset(dir / "d.jsonl", {r, testing::straight_record("b", 5, Split::Test)});
  const auto back = load_dataset(dir / "d.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].track_id == "a");
  CHECK(back[0].split == Split::Val);
  CHECK(back[0].track.frames == r.track.frames);
  CHECK(back[0].track.boxes == r.track.boxes);
  CHECK(back[0].characters == r.characters);
  CHECK(back[0].character_names == r.character_names);
  CHECK(back[0].image_size == r.image_size);
  CHECK(load_dataset(dir / "d.jsonl", Split::Test).size() == 1);
  CHECK(load_dataset(dir / "d.jsonl", Split::Train).empty());
}

TEST_CASE("data: empty and single-record files") {
  testing::TempDir dir;
  { std::ofstream(dir / "empty.jsonl"); }
  CHECK(load_dataset(dir / "empty.jsonl").empty());
  save_dataset(dir / "one.jsonl", {testing::straight_record("x", 3)});
  CHECK(load_dataset(dir / "one.jsonl").size() == 1);
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), IoError);
}

TEST_CASE("data: malformed line raises ParseError naming the line") {
  testing::TempDir dir;
  {
    std::ofstream out(dir / "bad.jsonl");
    out << serialize_record(testing::straight_record("ok", 4)) << "\n\n{not json\n";
  }
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_record("[1,2]", 1), ParseError);
}

TEST_CASE("data: schema violations raise ValidationError naming field and record") {
  auto expect = [](const std::string& line, const std::string& a, const std::string& b) {
    try {
      parse_record(line, 7);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK_MESSAGE(msg.find(a) != std::string::npos, msg);
      CHECK_MESSAGE(msg.find(b) != std::string::npos, msg);
      CHECK(msg.find("line 7") != std::string::npos);
    }
  };
  auto r = testing::straight_record("bad_box", 3);
  r.track.boxes[1].x1 = r.track.boxes[1].x2 + 1;
  expect(serialize_record(r), "bad_box", "boxes[1]: x1 > x2");

  r = testing::straight_record("bad_frames", 3);
  r.track.frames[2] += 5;
  expect(serialize_record(r), "bad_frames", "frames[");

  r = testing::straight_record("short_chars", 3);
  r.characters[2].pop_back();
  expect(serialize_record(r), "short_chars", "characters.look");

  expect(R"({"track_id":"nosplit","frames":[],"boxes":[],"characters":{},"image_size":[1,1]})", "nosplit", "split");
  expect(R"({"track_id":"s","split":"dev","frames":[],"boxes":[],"characters":{},"image_size":[1,1]})", "s",
         "split");
}

TEST_CASE("data: window counts for tracks around one window span") {
  const auto schema = CharacterSchema::standard();
  // T_obs 15 + T_pred 45 = 60 frames per window.
  CHECK(make_windows(testing::straight_record("a", 60), 15, 45, 1, schema).size() == 1);
  CHECK(make_windows(testing::straight_record("a", 59), 15, 45, 1, schema).empty());
  CHECK(make_windows(testing::straight_record("a", 61), 15, 45, 1, schema).size() == 2);
  CHECK(make_windows(testing::straight_record("a", 61), 15, 45, 2, schema).size() == 1);
  CHECK(make_windows(testing::straight_record("a", 70), 15, 45, 5, schema).size() == 3);
  CHECK(make_windows(testing::straight_record("a", 10), 15, 45, 1, schema).empty());
  CHECK_THROWS_AS(make_windows(testing::straight_record("a", 60), 15, 45, 0, schema), ArgumentError);
  CHECK_THROWS_AS(make_windows(testing::straight_record("a", 60), 0, 45, 1, schema), ArgumentError);
}

TEST_CASE("data: window contents line up with the track") {
  const auto schema = CharacterSchema::standard();
  auto r = testing::straight_record("w", 70);
  r.characters[1][7] = 5;
  const auto w = make_windows(r, 4, 3, 6, schema);
  REQUIRE(w.size() == 11);
  const auto& s = w[1];
  CHECK(s.window_start == 6);
  REQUIRE(s.observed.size() == 4);
  REQUIRE(s.future.size() == 3);
  CHECK(s.observed.boxes[0] == r.track.boxes[6]);
  CHECK(s.future.boxes[0] == r.track.boxes[10]);
  CHECK(s.future.frames.back() == r.track.frames[12]);
  CHECK(s.characters.labels[1][1] == 5);
  CHECK(s.characters.steps() == 4);
}

TEST_CASE("data: windows follow the schema order and report missing categories") {
  auto r = testing::straight_record("o", 10);
  std::swap(r.character_names[0], r.character_names[4]);
  std::swap(r.characters[0], r.characters[4]);
  r.characters[0].assign(10, 3);  // now "age"
  const auto w = make_windows(r, 5, 5, 1, CharacterSchema::standard());
  REQUIRE(w.size() == 1);
  CHECK(w[0].characters.labels[4][0] == 3);

  const auto sub = CharacterSchema::standard().subset({4, 1});
  CHECK(sub.names == std::vector<std::string>{"age", "gesture"});
  CHECK(make_windows(r, 5, 5, 1, sub)[0].characters.labels[0][0] == 3);

  r.character_names.pop_back();
  r.characters.pop_back();
  try {
    make_windows(r, 5, 5, 1, CharacterSchema::standard());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("missing characters.") != std::string::npos);
  }
}

TEST_CASE("data: out-of-vocabulary labels raise EncodingError") {
  auto r = testing::straight_record("v", 10);
  r.characters[0][2] = 3;  // action vocabulary has 3 entries
  const auto w = make_windows(r, 5, 5, 1, CharacterSchema::standard());
  CHECK_THROWS_AS(w[0].characters.validate(), EncodingError);
}

TEST_CASE("data: split names") {
  CHECK(parse_split("train") == Split::Train);
  CHECK(parse_split("val") == Split::Val);
  CHECK(parse_split("test") == Split::Test);
  CHECK(to_string(Split::Val) == "val");
  CHECK_THROWS_AS(parse_split("dev"), ArgumentError);
}

TEST_CASE("synthetic: identical seeds give identical records") {
  SynthConfig cfg;
  cfg.tracks = 40;
  const auto a = generate_synthetic(cfg, 11);
  const auto b = generate_synthetic(cfg, 11);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(serialize_record(a[i]) == serialize_record(b[i]));
  const auto c = generate_synthetic(cfg, 12);
  CHECK(serialize_record(a[0]) != serialize_record(c[0]));
}

TEST_CASE("synthetic: noiseless straight tracks are exactly linear") {
  SynthConfig cfg;
  cfg.tracks = 200;
  cfg.noise_px = 0;
  int straight = 0;
  for (const auto& r : generate_synthetic(cfg, 3)) {
    r.validate();
    if (synthetic_mode(r, cfg) != SyntheticMode::Straight) continue;
    ++straight;
    const auto& b = r.track.boxes;
    for (std::size_t t = 2; t < b.size(); ++t) {
      CHECK(std::abs(b[t].x1 - 2 * b[t - 1].x1 + b[t - 2].x1) < 1e-9);
      CHECK(std::abs(b[t].y1 - 2 * b[t - 1].y1 + b[t - 2].y1) < 1e-9);
      CHECK(std::abs(b[t].x2 - 2 * b[t - 1].x2 + b[t - 2].x2) < 1e-9);
      CHECK(std::abs(b[t].y2 - 2 * b[t - 1].y2 + b[t - 2].y2) < 1e-9);
    }
  }
  CHECK(straight > 20);
}

TEST_CASE("synthetic: modes are balanced and splits follow the fractions") {
  SynthConfig cfg;
  cfg.tracks = 4000;
  cfg.track_length = 20;
  cfg.observed_length = 5;
  std::map<SyntheticMode, int> count;
  std::map<Split, int> split;
  for (const auto& r : generate_synthetic(cfg, 5)) {
    ++count[synthetic_mode(r, cfg)];
    ++split[r.split];
  }
  for (const auto& [mode, n] : count) CHECK_MESSAGE(std::abs(n / 4000.0 - 0.25) < 0.05, to_string(mode));
  CHECK(count.size() == 4);
  CHECK(split[Split::Train] == 2800);
  CHECK(split[Split::Val] == 400);
  CHECK(split[Split::Test] == 800);
}

TEST_CASE("synthetic: decoy labels vary and informative labels are constant") {
  SynthConfig cfg;
  cfg.tracks = 20;
  for (const auto& r : generate_synthetic(cfg, 9)) {
    for (int c : cfg.informative) {
      const auto& l = r.characters[static_cast<std::size_t>(c)];
      CHECK(std::all_of(l.begin(), l.end(), [&](int v) { return v == l.front(); }));
    }
  }
}

TEST_CASE("synthetic: invalid configurations are rejected") {
  SynthConfig cfg;
  cfg.decoy = {1, 2};
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ArgumentError);
  cfg = SynthConfig{};
  cfg.noise_px = -1;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ArgumentError);
  cfg = SynthConfig{};
  cfg.informative = {};
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ArgumentError);
  cfg = SynthConfig{};
  cfg.track_length = cfg.observed_length;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), ArgumentError);
}
