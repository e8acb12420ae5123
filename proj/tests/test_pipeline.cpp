#include "tsnet/checkpoint.hpp"
#include "tsnet/error.hpp"
#include "tsnet/log.hpp"
#include "tsnet/pipeline.hpp"
#include "tsnet/plot.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace tsnet;

namespace {

struct QuietLog {
  QuietLog() {
    set_log_sink([](LogLevel, const std::string&) {});
  }
  ~QuietLog() { set_log_sink({}); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("pipeline: training reduces the loss and the checkpoint reloads") {
  QuietLog quiet;
  auto cfg = testing::pipeline_config();
  cfg.epochs = 4;
  const auto records = testing::tiny_records(cfg, 24, 1);
  int callbacks = 0;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochLog&) { ++callbacks; };
  const Checkpoint ck = train(cfg, records, opts);
  CHECK(callbacks == 4);
  REQUIRE(ck.curve.size() == 4);
  CHECK(ck.curve.back().loss < ck.curve.front().loss);
  CHECK(ck.curve[1].learning_rate == doctest::Approx(cfg.learning_rate * cfg.lr_decay));

  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", ck);
  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.config.to_map() == ck.config.to_map());
  CHECK(back.rng_state == ck.rng_state);
  REQUIRE(back.curve.size() == 4);
  CHECK(back.curve[2].loss == ck.curve[2].loss);
  for (const Parameter* p : ck.params.all()) CHECK(back.params.at(p->name).value == p->value);
  CHECK(curve_csv(ck.curve).rfind("epoch,loss,trajectory,goal,kld,learning_rate,degenerate_groups,seconds\n", 0) == 0);

  {
    std::ofstream(dir / "bad.ckpt") << R"({"format": "other"})";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), ParseError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("pipeline: identical configs give bitwise-identical loss curves") {
  QuietLog quiet;
  const auto cfg = testing::pipeline_config();
  const auto records = testing::tiny_records(cfg, 16, 2);
  const auto a = train(cfg, records), b = train(cfg, records);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].loss == b.curve[i].loss);
    CHECK(a.curve[i].kld == b.curve[i].kld);
  }
  for (const Parameter* p : a.params.all()) CHECK(b.params.at(p->name).value == p->value);
  auto other = cfg;
  other.seed = 99;
  CHECK(train(other, records).curve.front().loss != a.curve.front().loss);
}

TEST_CASE("pipeline: clustering with C = K reproduces direct sampling exactly") {
  QuietLog quiet;
  const auto cfg = testing::pipeline_config();
  const auto records = testing::tiny_records(cfg, 16, 3);
  const auto ck = train(cfg, records);
  auto direct = cfg;
  direct.use_ftc = false;
  auto same = cfg;
  same.use_ftc = true;
  same.c = same.k;
  Model m1(direct, ck.params), m2(same, ck.params);
  const auto e1 = evaluate(m1, records, Split::Test), e2 = evaluate(m2, records, Split::Test);
  REQUIRE(e1.rows.size() == 3);
  REQUIRE(e2.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(e1.rows[i].ade == e2.rows[i].ade);
    CHECK(e1.rows[i].c_ade == e2.rows[i].c_ade);
    CHECK(e1.rows[i].fde == e2.rows[i].fde);
    CHECK(e1.rows[i].c_fde == e2.rows[i].c_fde);
  }
  CHECK(e1.selected == e2.selected);

  // with C > K every output is one of the C raw candidates
  auto wide = cfg;
  wide.use_ftc = true;
  wide.c = 10;
  Model m3(wide, ck.params);
  const auto samples = prepare_split(m3, records, Split::Test);
  const auto clustered = generate(m3, samples);
  auto raw_cfg = wide;
  raw_cfg.use_ftc = false;
  raw_cfg.k = 10;
  Model m4(raw_cfg, ck.params);
  const auto raw = generate(m4, samples);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    REQUIRE(clustered[s].size() == 3);
    for (const auto& t : clustered[s]) CHECK(std::find(raw[s].begin(), raw[s].end(), t) != raw[s].end());
  }
}

TEST_CASE("pipeline: evaluation rows and overrides") {
  QuietLog quiet;
  const auto cfg = testing::pipeline_config();
  const auto records = testing::tiny_records(cfg, 12, 4);
  const auto ck = train(cfg, records);
  Model model(cfg, ck.params);
  const auto ev = evaluate(model, records, Split::Test);
  REQUIRE(ev.rows.size() == 3);
  CHECK(ev.rows[0].horizon_s == 0.5);
  CHECK(ev.rows[2].horizon_s == 1.5);
  CHECK(ev.rows[2].k == cfg.k);
  CHECK(ev.rows[2].c == cfg.c);
  CHECK(ev.samples == ev.selected.size());
  CHECK_THROWS_AS(Model(merge_for_evaluation(cfg, {{"use_st", "false"}}), ck.params), CompatibilityError);
  auto tiny = testing::tiny_config();
  Model short_model(tiny);
  const auto short_eval = evaluate(short_model, testing::tiny_records(tiny, 12, 4), Split::Test);
  REQUIRE(short_eval.rows.size() == 1);
  CHECK(short_eval.rows[0].horizon_s == doctest::Approx(2.0 / 30));
}

TEST_CASE("pipeline: predictions are deterministic and plot to a PNG") {
  QuietLog quiet;
  const auto cfg = testing::pipeline_config();
  const auto records = testing::tiny_records(cfg, 12, 5);
  const auto ck = train(cfg, records);
  Model model(cfg, ck.params);
  const std::string a = predict_json(model, records, Split::Test, 1);
  const std::string b = predict_json(model, records, Split::Test, 1);
  CHECK(a == b);
  const auto j = nlohmann::json::parse(a);
  CHECK(j["trajectories"].size() == 3);
  CHECK(j["trajectories"][0].size() == 45);
  CHECK(j["observed"].size() == 4);
  CHECK(j["ground_truth"].size() == 45);
  CHECK(j["index"] == 1);
  CHECK_THROWS_AS(predict_json(model, records, Split::Test, 100000), ArgumentError);

  testing::TempDir dir;
  plot_prediction(a, std::nullopt, dir / "p.png");
  const Image img = read_png(dir / "p.png");
  CHECK(img.width == 1920);
  CHECK(img.height == 1080);
  std::size_t coloured = 0;
  for (std::size_t i = 0; i + 2 < img.rgb.size(); i += 3) coloured += img.rgb[i] != 255 || img.rgb[i + 1] != 255 || img.rgb[i + 2] != 255;
  CHECK(coloured > 100);
  // a missing background falls back to a blank canvas
  CHECK_NOTHROW(plot_prediction(a, dir / "nope.png", dir / "q.png"));
  CHECK(std::filesystem::file_size(dir / "q.png") > 0);
  CHECK_THROWS_AS(plot_prediction("{", std::nullopt, dir / "r.png"), ParseError);
}

TEST_CASE("pipeline: non-finite losses stop training with a diagnostic dump") {
  QuietLog quiet;
  auto cfg = testing::pipeline_config();
  cfg.learning_rate = 1e300;
  cfg.epochs = 3;
  const auto records = testing::tiny_records(cfg, 12, 6);
  testing::TempDir dir;
  TrainOptions opts;
  opts.diagnostic_path = dir / "diag.json";
  CHECK_THROWS_AS(train(cfg, records, opts), NumericError);
  const auto j = nlohmann::json::parse(slurp(dir / "diag.json"));
  CHECK(j.contains("samples"));
  CHECK(j["samples"].size() > 0);
  CHECK(!j["reason"].get<std::string>().empty());
}

TEST_CASE("pipeline: keep-scores cover every category") {
  const auto cfg = testing::pipeline_config();
  Model model(cfg);
  const auto samples = prepare_split(model, testing::tiny_records(cfg, 12, 7), Split::Train);
  const auto ks = keep_scores(model, samples);
  CHECK(ks.categories == cfg.categories);
  REQUIRE(ks.category_graph.size() == 2);
  REQUIRE(ks.temporal_graph.size() == 2);
  for (double v : ks.category_graph) {
    CHECK(v > 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("pipeline: ablation plans mirror the toggle tables") {
  const auto cfg = testing::pipeline_config();
  const auto comp = ablation_plan(cfg, AblationAxis::Components);
  REQUIRE(comp.size() == 5);
  CHECK(comp[0].label == std::vector<std::string>{"0", "0", "0"});
  CHECK(comp[4].label == std::vector<std::string>{"1", "1", "1"});
  CHECK(comp[4].train_config.serialize() == comp[3].train_config.serialize());
  CHECK(comp[4].eval_config.use_ftc);
  CHECK(!comp[1].train_config.use_sc);
  const auto chars = ablation_plan(cfg, AblationAxis::Characters);
  REQUIRE(chars.size() == 3);
  CHECK(chars[0].label.front() == "Baseline");
  CHECK(chars[2].train_config.character_subset == std::vector<std::string>{"b"});
  CHECK(ablation_plan(cfg, AblationAxis::Threshold).size() == 4);
  CHECK(ablation_plan(cfg, AblationAxis::Clustering).back().eval_config.c == 100);
  CHECK(parse_ablation_axis("threshold") == AblationAxis::Threshold);
  CHECK_THROWS_AS(parse_ablation_axis("heads"), ArgumentError);
}

TEST_CASE("pipeline: ablation tables have the documented columns") {
  QuietLog quiet;
  auto cfg = testing::pipeline_config();
  cfg.epochs = 1;
  const auto records = testing::tiny_records(cfg, 12, 8);
  const auto comp = run_ablation(cfg, records, AblationAxis::Components);
  CHECK(comp.header == std::vector<std::string>{"ST", "SC", "FTC", "ade_0.5s", "ade_1.0s", "ade_1.5s", "c_ade_1.5s",
                                                "c_fde_1.5s"});
  REQUIRE(comp.rows.size() == 5);
  for (const auto& r : comp.rows) CHECK(r.size() == comp.header.size());
  const auto chars = run_ablation(cfg, records, AblationAxis::Characters);
  CHECK(chars.header == std::vector<std::string>{"character", "c_ade_1.5s", "c_fde_1.5s"});
  CHECK(chars.rows.size() == 3);
  const std::string csv = chars.csv();
  CHECK(csv.rfind("character,c_ade_1.5s,c_fde_1.5s\nBaseline,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  auto short_cfg = cfg;
  short_cfg.t_pred = 15;
  CHECK_THROWS_AS(run_ablation(short_cfg, records, AblationAxis::Threshold), ValidationError);
}
