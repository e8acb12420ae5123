#include "tsnet/pipeline.hpp"

#include "tsnet/cluster.hpp"
#include "tsnet/error.hpp"
#include "tsnet/log.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace tsnet {

using nlohmann::ordered_json;

namespace {

constexpr Eigen::Index kInferenceRows = 4096;

std::vector<const PreparedSample*> pointers(std::span<const PreparedSample> samples) {
  std::vector<const PreparedSample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

ordered_json box_json(const BBox& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

void write_diagnostic(const std::filesystem::path& path, int epoch, std::size_t batch_index,
                      std::span<const PreparedSample* const> batch, const TrainStep* step,
                      const std::string& reason) {
  ordered_json j;
  j["epoch"] = epoch;
  j["batch"] = batch_index;
  j["reason"] = reason;
  if (step) j["loss_terms"] = {{"trajectory", step->trajectory}, {"goal", step->goal}, {"kld", step->kld}};
  ordered_json samples = ordered_json::array();
  for (const PreparedSample* s : batch) {
    ordered_json e;
    e["track_id"] = s->track_id;
    e["window_start"] = s->window_start;
    ordered_json obs = ordered_json::array();
    for (const auto& b : s->observed_px) obs.push_back(box_json(b));
    e["observed"] = std::move(obs);
    samples.push_back(std::move(e));
  }
  j["samples"] = std::move(samples);
  std::ofstream f(path, std::ios::binary);
  if (f) f << j.dump(2) << '\n';
}

struct Generated {
  std::vector<std::vector<Trajectory>> trajectories;
  std::vector<std::vector<BBox>> goals;
};

Generated generate_full(Model& model, std::span<const PreparedSample> samples, std::size_t first_index) {
  const Config& cfg = model.config();
  const bool ftc = cfg.use_ftc && cfg.c > cfg.k;
  const int count = cfg.use_ftc ? cfg.c : cfg.k;
  const std::size_t chunk = static_cast<std::size_t>(std::max<Eigen::Index>(1, kInferenceRows / count));
  Generated out;
  out.trajectories.reserve(samples.size());
  out.goals.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const auto part = samples.subspan(start, std::min(chunk, samples.size() - start));
    const auto ptrs = pointers(part);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < part.size(); ++i) seeds.push_back(derive_seed(cfg.seed, first_index + start + i));
    const Inference inf = model.infer(ptrs, count, seeds);
    for (std::size_t b = 0; b < part.size(); ++b) {
      const auto rows = static_cast<Eigen::Index>(b) * count;
      const Matrix cand = inf.trajectories.middleRows(rows, count);
      const Matrix goals = inf.goals.middleRows(rows, count);
      std::vector<int> pick(static_cast<std::size_t>(count));
      std::iota(pick.begin(), pick.end(), 0);
      if (cfg.use_ftc) {
        // C == K keeps every candidate; clustering would only reorder them.
        const std::uint64_t cseed = derive_seed(seeds[b], 0xc1);
        if (ftc) pick = cluster_predictions(cfg.ftc_space == "goal" ? goals : cand, cfg.k, cseed).selected;
      }
      const BoxNormalizer& norm = part[b].normalizer;
      std::vector<Trajectory> trajs;
      std::vector<BBox> gs;
      for (int idx : pick) {
        trajs.push_back(norm.denormalize_row(cand.row(idx)));
        gs.push_back(norm.denormalize(goals.row(idx).data()));
      }
      out.trajectories.push_back(std::move(trajs));
      out.goals.push_back(std::move(gs));
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::vector<PreparedSample> prepare_split(const Model& model, const std::vector<TrackRecord>& records, Split split) {
  const Config& cfg = model.config();
  std::vector<TrackRecord> subset;
  for (const auto& r : records) {
    if (r.split == split) subset.push_back(r);
  }
  const auto windows = make_windows(subset, cfg.t_obs, cfg.t_pred, cfg.stride, cfg.schema());
  std::vector<PreparedSample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(model.prepare(w));
  return out;
}

Checkpoint train(const Config& config, const std::vector<TrackRecord>& records, const TrainOptions& options) {
  Model model = options.initial_params ? Model(config, *options.initial_params) : Model(config);
  const auto samples = prepare_split(model, records, Split::Train);
  if (samples.empty()) throw ValidationError("the train split yields no windows of T_obs + T_pred frames");
  const Config& cfg = model.config();

  Rng rng(derive_seed(cfg.seed, 2));
  Adam adam(Adam::Options{cfg.learning_rate});
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  Checkpoint ck;
  log(LogLevel::Info, "training on " + std::to_string(samples.size()) + " windows, " +
                          std::to_string(model.params().scalar_count()) + " parameters");
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog el;
    el.epoch = epoch;
    el.learning_rate = adam.learning_rate();
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const PreparedSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[order[i]]);

      model.params().zero_grad();
      ad::Tape tape;
      auto fail = [&](const TrainStep* step, const std::string& reason) {
        std::string where = reason + " at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + " (first track " + batch.front()->track_id + ")";
        if (options.diagnostic_path) {
          write_diagnostic(*options.diagnostic_path, epoch, batch_index, batch, step, reason);
          where += "; batch written to " + options.diagnostic_path->string();
        }
        throw NumericError(where);
      };
      TrainStep step;
      try {
        step = model.forward_train(tape, batch, rng);
      } catch (const NumericError& e) {
        // diverged parameters trip the finiteness checks inside the forward pass
        fail(nullptr, e.what());
      }
      const double loss = step.loss.value()(0, 0);
      if (!std::isfinite(loss)) fail(&step, "non-finite loss");
      tape.backward(step.loss);
      adam.step(model.params());

      const double w = static_cast<double>(batch.size());
      el.loss += loss * w;
      el.trajectory += step.trajectory * w;
      el.goal += step.goal * w;
      el.kld += step.kld * w;
      el.degenerate_groups += step.masks.temporal_stats.degenerate_groups + step.masks.category_stats.degenerate_groups;
    }
    const double n = static_cast<double>(samples.size());
    el.loss /= n;
    el.trajectory /= n;
    el.goal /= n;
    el.kld /= n;
    el.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (el.degenerate_groups > 0) {
      log(LogLevel::Warning, "epoch " + std::to_string(epoch) + ": " + std::to_string(el.degenerate_groups) +
                                 " fully masked graphs fell back to the unmasked softmax");
    }
    log(LogLevel::Info, "epoch " + std::to_string(epoch) + " loss " + fmt(el.loss) + " (trj " + fmt(el.trajectory) +
                            ", goal " + fmt(el.goal) + ", kld " + fmt(el.kld) + ") " + fmt(el.seconds) + " s");
    ck.curve.push_back(el);
    if (options.on_epoch) options.on_epoch(el);
    adam.set_learning_rate(adam.learning_rate() * cfg.lr_decay);
  }

  ck.config = cfg;
  for (const Parameter* p : model.params().all()) ck.params.add(p->name, p->value);
  std::ostringstream rs;
  rs << rng;
  ck.rng_state = rs.str();
  return ck;
}

std::vector<std::vector<Trajectory>> generate(Model& model, std::span<const PreparedSample> samples,
                                              std::size_t first_index) {
  return generate_full(model, samples, first_index).trajectories;
}

EvalResult evaluate(Model& model, const std::vector<TrackRecord>& records, Split split) {
  const Config& cfg = model.config();
  const auto samples = prepare_split(model, records, split);
  if (samples.empty()) {
    throw ValidationError("the " + std::string(to_string(split)) + " split yields no windows to evaluate");
  }
  const auto preds = generate(model, samples);
  std::vector<Trajectory> truths;
  truths.reserve(samples.size());
  for (const auto& s : samples) truths.push_back(s.future_px);
  std::vector<double> horizons;
  for (double h : {0.5, 1.0, 1.5}) {
    if (horizon_frames(h) <= cfg.t_pred) horizons.push_back(h);
  }
  // Short toy horizons: report the full prediction length only.
  if (horizons.empty()) horizons.push_back(cfg.t_pred / 30.0);
  auto r = best_of_k_eval(preds, truths, cfg.k, horizons);
  EvalResult out;
  out.rows = std::move(r.rows);
  out.selected = std::move(r.selected);
  out.samples = samples.size();
  for (auto& row : out.rows) {
    row.c = cfg.use_ftc ? cfg.c : cfg.k;
    row.seed = cfg.seed;
  }
  return out;
}

KeepScores keep_scores(Model& model, std::span<const PreparedSample> samples) {
  const Config& cfg = model.config();
  const auto schema = cfg.schema();
  const int n = static_cast<int>(schema.size());
  const int t = cfg.t_obs;
  KeepScores out;
  out.categories = schema.names;
  std::vector<double> cat_sum(static_cast<std::size_t>(n), 0.0), tem_sum(static_cast<std::size_t>(n), 0.0);
  std::vector<double> cat_cnt(static_cast<std::size_t>(n), 0.0), tem_cnt(static_cast<std::size_t>(n), 0.0);
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const auto part = samples.subspan(start, std::min(chunk, samples.size() - start));
    const auto ptrs = pointers(part);
    std::vector<std::uint64_t> seeds(part.size(), cfg.seed);
    const auto inf = model.infer(ptrs, 1, seeds);
    if (cfg.use_sc) {
      const Eigen::VectorXd keep = inf.masks.category.rowwise().mean();
      for (Eigen::Index r = 0; r < keep.size(); ++r) {
        cat_sum[static_cast<std::size_t>(r % n)] += keep(r);
        cat_cnt[static_cast<std::size_t>(r % n)] += 1;
      }
    }
    if (cfg.use_st) {
      const Eigen::VectorXd keep = inf.masks.temporal.rowwise().mean();
      for (Eigen::Index r = 0; r < keep.size(); ++r) {
        tem_sum[static_cast<std::size_t>((r / t) % n)] += keep(r);
        tem_cnt[static_cast<std::size_t>((r / t) % n)] += 1;
      }
    }
    auto add = [](ad::MaskStats& a, const ad::MaskStats& b) {
      a.groups += b.groups;
      a.degenerate_groups += b.degenerate_groups;
      a.masked_nodes += b.masked_nodes;
    };
    add(out.category_stats, inf.masks.category_stats);
    add(out.temporal_stats, inf.masks.temporal_stats);
  }
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (cfg.use_sc) out.category_graph.push_back(cat_cnt[u] > 0 ? cat_sum[u] / cat_cnt[u] : 0.0);
    if (cfg.use_st) out.temporal_graph.push_back(tem_cnt[u] > 0 ? tem_sum[u] / tem_cnt[u] : 0.0);
  }
  return out;
}

std::string predict_json(Model& model, const std::vector<TrackRecord>& records, Split split, std::size_t index) {
  const Config& cfg = model.config();
  const auto samples = prepare_split(model, records, split);
  if (index >= samples.size()) {
    throw ArgumentError("window index " + std::to_string(index) + " is outside the " + std::string(to_string(split)) +
                        " split (" + std::to_string(samples.size()) + " windows)");
  }
  const auto gen = generate_full(model, std::span<const PreparedSample>(&samples[index], 1), index);
  const PreparedSample& s = samples[index];

  std::array<double, 2> image{cfg.image_width, cfg.image_height};
  for (const auto& r : records) {
    if (r.track_id == s.track_id) image = r.image_size;
  }
  ordered_json j;
  j["track_id"] = s.track_id;
  j["window_start"] = s.window_start;
  j["split"] = std::string(to_string(split));
  j["index"] = index;
  j["k"] = cfg.k;
  j["c"] = cfg.use_ftc ? cfg.c : cfg.k;
  j["use_ftc"] = cfg.use_ftc;
  j["seed"] = cfg.seed;
  j["image_size"] = {image[0], image[1]};
  ordered_json obs = ordered_json::array(), truth = ordered_json::array(), goals = ordered_json::array(),
               trajs = ordered_json::array();
  for (const auto& b : s.observed_px) obs.push_back(box_json(b));
  for (const auto& b : s.future_px) truth.push_back(box_json(b));
  for (const auto& g : gen.goals.front()) goals.push_back(box_json(g));
  for (const auto& tr : gen.trajectories.front()) {
    ordered_json t = ordered_json::array();
    for (const auto& b : tr) t.push_back(box_json(b));
    trajs.push_back(std::move(t));
  }
  j["observed"] = std::move(obs);
  j["ground_truth"] = std::move(truth);
  j["goals"] = std::move(goals);
  j["trajectories"] = std::move(trajs);
  return j.dump(1) + "\n";
}

AblationAxis parse_ablation_axis(const std::string& name) {
  if (name == "components") return AblationAxis::Components;
  if (name == "characters") return AblationAxis::Characters;
  if (name == "threshold") return AblationAxis::Threshold;
  if (name == "clustering") return AblationAxis::Clustering;
  throw ArgumentError("unknown ablation axis '" + name + "' (components, characters, threshold, clustering)");
}

std::string AblationTable::csv() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::vector<AblationRun> ablation_plan(const Config& base, AblationAxis axis) {
  std::vector<AblationRun> plan;
  auto run = [&](std::vector<std::string> label, Config train_cfg, Config eval_cfg) {
    train_cfg.validate();
    eval_cfg.validate();
    plan.push_back(AblationRun{std::move(label), std::move(train_cfg), std::move(eval_cfg)});
  };
  switch (axis) {
    case AblationAxis::Components: {
      const int toggles[5][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 1, 1}};
      for (const auto& tg : toggles) {
        Config c = base;
        c.use_st = tg[0] != 0;
        c.use_sc = tg[1] != 0;
        c.use_ftc = false;
        Config e = c;
        e.use_ftc = tg[2] != 0;
        run({std::to_string(tg[0]), std::to_string(tg[1]), std::to_string(tg[2])}, c, e);
      }
      break;
    }
    case AblationAxis::Characters: {
      Config b = base;
      b.use_st = b.use_sc = false;
      b.character_subset.clear();
      run({"Baseline"}, b, b);
      for (const auto& name : base.categories) {
        Config c = base;
        c.use_st = c.use_sc = true;
        c.character_subset = {name};
        run({name}, c, c);
      }
      break;
    }
    case AblationAxis::Threshold:
      for (double xi : {0.0, 0.25, 0.5, 0.75}) {
        Config c = base;
        c.xi = xi;
        run({fmt(xi)}, c, c);
      }
      break;
    case AblationAxis::Clustering:
      for (int cc : {20, 40, 60, 80, 100}) {
        Config c = base;
        c.use_ftc = false;
        c.c = std::max(c.k, base.c);
        Config e = c;
        e.use_ftc = true;
        e.c = cc;
        run({std::to_string(cc)}, c, e);
      }
      break;
  }
  return plan;
}

AblationTable run_ablation(const Config& base, const std::vector<TrackRecord>& records, AblationAxis axis) {
  AblationTable table;
  const std::vector<std::string> full = {"ade_0.5s", "ade_1.0s", "ade_1.5s", "c_ade_1.5s", "c_fde_1.5s"};
  switch (axis) {
    case AblationAxis::Components: table.header = {"ST", "SC", "FTC"}; break;
    case AblationAxis::Characters: table.header = {"character"}; break;
    case AblationAxis::Threshold: table.header = {"xi"}; break;
    case AblationAxis::Clustering: table.header = {"C"}; break;
  }
  if (axis == AblationAxis::Characters) {
    table.header.insert(table.header.end(), {"c_ade_1.5s", "c_fde_1.5s"});
  } else {
    table.header.insert(table.header.end(), full.begin(), full.end());
  }

  if (horizon_frames(1.5) > base.t_pred) {
    throw ValidationError("ablation needs t_pred >= " + std::to_string(horizon_frames(1.5)) + " (the 1.5 s horizon)");
  }
  std::map<std::string, Checkpoint> trained;
  for (const auto& r : ablation_plan(base, axis)) {
    const std::string key = r.train_config.serialize();
    auto it = trained.find(key);
    if (it == trained.end()) {
      log(LogLevel::Info, "ablation: training run " + std::to_string(trained.size() + 1));
      it = trained.emplace(key, train(r.train_config, records)).first;
    }
    Model model(r.eval_config, it->second.params);
    const auto ev = evaluate(model, records, Split::Test);
    auto at = [&](double h) -> const MetricRow& {
      for (const auto& row : ev.rows) {
        if (std::abs(row.horizon_s - h) < 1e-9) return row;
      }
      throw ValidationError("ablation needs a prediction horizon of at least 1.5 s");
    };
    std::vector<std::string> cells = r.label;
    if (axis == AblationAxis::Characters) {
      cells.push_back(fmt(at(1.5).c_ade));
      cells.push_back(fmt(at(1.5).c_fde));
    } else {
      cells.push_back(fmt(at(0.5).ade));
      cells.push_back(fmt(at(1.0).ade));
      cells.push_back(fmt(at(1.5).ade));
      cells.push_back(fmt(at(1.5).c_ade));
      cells.push_back(fmt(at(1.5).c_fde));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace tsnet
