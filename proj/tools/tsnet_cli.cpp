// Command-line front end; talks to the library through the C interface only.
#include "tsnet/tsnet.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

int check(tsnet_status s) {
  if (s != TSNET_OK) {
    std::fprintf(stderr, "tsnet: %s\n", tsnet_last_error());
    return static_cast<int>(s);
  }
  return 0;
}

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
};

void add_config_args(CLI::App* app, ConfigArgs& args, bool with_file) {
  if (with_file) app->add_option("-c,--config", args.file, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", args.sets, "override one key, e.g. --set epochs=5");
}

// Returns a status; `out` is always created when the call succeeds.
tsnet_status build_config(const ConfigArgs& args, tsnet_config** out) {
  tsnet_status s = tsnet_config_create(out);
  if (s != TSNET_OK) return s;
  if (!args.file.empty() && (s = tsnet_config_load(*out, args.file.c_str())) != TSNET_OK) return s;
  for (const auto& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "tsnet: --set expects key=value, got '%s'\n", kv.c_str());
      return TSNET_ERR_ARGUMENT;
    }
    s = tsnet_config_set(*out, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != TSNET_OK) return s;
  }
  return TSNET_OK;
}

void print_log(tsnet_log_level level, const char* message, void*) {
  static const char* names[] = {"debug", "info", "warning", "error"};
  std::fprintf(stderr, "[%s] %s\n", names[level], message);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tsnet: sparse-character trajectory prediction"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only print warnings and errors");

  auto* synth = app.add_subcommand("synth", "write a synthetic JSONL dataset");
  std::string synth_out, informative = "0,1", decoy = "2,3,4";
  int tracks = 2000;
  double noise = 1.0;
  std::uint64_t seed = 0;
  synth->add_option("-o,--out", synth_out, "output JSONL")->required();
  synth->add_option("--tracks", tracks, "track count")->capture_default_str();
  synth->add_option("--noise", noise, "box noise in pixels")->capture_default_str();
  synth->add_option("--seed", seed, "generator seed")->capture_default_str();
  synth->add_option("--informative", informative, "category indices that determine the future mode")->capture_default_str();
  synth->add_option("--decoy", decoy, "category indices drawn at random")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  ConfigArgs train_cfg;
  std::string train_data, train_out, train_log;
  add_config_args(train, train_cfg, true);
  train->add_option("-d,--data", train_data, "JSONL dataset")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_out, "checkpoint path")->required();
  train->add_option("--log", train_log, "per-epoch loss curve CSV");

  auto* eval = app.add_subcommand("eval", "best-of-K metrics of a checkpoint");
  ConfigArgs eval_cfg;
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  add_config_args(eval, eval_cfg, false);
  eval->add_option("-m,--checkpoint", eval_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("-d,--data", eval_data, "JSONL dataset")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval->add_option("-o,--out", eval_out, "metrics CSV");

  auto* predict = app.add_subcommand("predict", "dump the K predictions of one window as JSON");
  ConfigArgs pred_cfg;
  std::string pred_ckpt, pred_data, pred_split = "test", pred_out;
  std::size_t pred_index = 0;
  add_config_args(predict, pred_cfg, false);
  predict->add_option("-m,--checkpoint", pred_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("-d,--data", pred_data, "JSONL dataset")->required()->check(CLI::ExistingFile);
  predict->add_option("--split", pred_split, "train, val or test")->capture_default_str();
  predict->add_option("--index", pred_index, "window index within the split")->capture_default_str();
  predict->add_option("-o,--out", pred_out, "output JSON")->required();

  auto* plot = app.add_subcommand("plot", "draw a prediction dump as PNG");
  std::string plot_in, plot_bg, plot_out;
  plot->add_option("-p,--prediction", plot_in, "JSON from predict")->required()->check(CLI::ExistingFile);
  plot->add_option("-b,--background", plot_bg, "background PNG");
  plot->add_option("-o,--out", plot_out, "output PNG")->required();

  auto* ablate = app.add_subcommand("ablate", "train and evaluate one ablation axis");
  ConfigArgs abl_cfg;
  std::string abl_data, abl_axis, abl_out;
  add_config_args(ablate, abl_cfg, true);
  ablate->add_option("-d,--data", abl_data, "JSONL dataset")->required()->check(CLI::ExistingFile);
  ablate->add_option("-a,--axis", abl_axis, "components, characters, threshold or clustering")
      ->required()
      ->check(CLI::IsMember({"components", "characters", "threshold", "clustering"}));
  ablate->add_option("-o,--out", abl_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);
  if (quiet) {
    tsnet_set_log_callback(
        [](tsnet_log_level level, const char* message, void* user) {
          if (level >= TSNET_LOG_WARNING) print_log(level, message, user);
        },
        nullptr);
  } else {
    tsnet_set_log_callback(print_log, nullptr);
  }

  if (synth->parsed()) {
    return check(tsnet_synth(synth_out.c_str(), tracks, noise, seed, informative.c_str(), decoy.c_str()));
  }
  if (train->parsed()) {
    tsnet_config* cfg = nullptr;
    int rc = check(build_config(train_cfg, &cfg));
    if (rc == 0) rc = check(tsnet_train(cfg, train_data.c_str(), train_out.c_str(), train_log.empty() ? nullptr : train_log.c_str()));
    tsnet_config_destroy(cfg);
    return rc;
  }
  if (eval->parsed() || predict->parsed()) {
    const bool is_eval = eval->parsed();
    tsnet_model* model = nullptr;
    tsnet_config* overrides = nullptr;
    int rc = check(tsnet_model_load((is_eval ? eval_ckpt : pred_ckpt).c_str(), &model));
    if (rc == 0) rc = check(build_config(is_eval ? eval_cfg : pred_cfg, &overrides));
    if (rc == 0 && is_eval) {
      tsnet_metric_row rows[8];
      std::size_t n = 8;
      rc = check(tsnet_evaluate(model, overrides, eval_data.c_str(), eval_split.c_str(),
                                eval_out.empty() ? nullptr : eval_out.c_str(), rows, &n));
      if (rc == 0) {
        std::printf("horizon_s,ade,c_ade,fde,c_fde,K,C,seed\n");
        for (std::size_t i = 0; i < n; ++i) {
          std::printf("%g,%.6f,%.6f,%.6f,%.6f,%d,%d,%llu\n", rows[i].horizon_s, rows[i].ade, rows[i].c_ade,
                      rows[i].fde, rows[i].c_fde, rows[i].k, rows[i].c, static_cast<unsigned long long>(rows[i].seed));
        }
      }
    } else if (rc == 0) {
      rc = check(tsnet_predict(model, overrides, pred_data.c_str(), pred_split.c_str(), pred_index, pred_out.c_str()));
    }
    tsnet_config_destroy(overrides);
    tsnet_model_destroy(model);
    return rc;
  }
  if (plot->parsed()) {
    return check(tsnet_plot(plot_in.c_str(), plot_bg.empty() ? nullptr : plot_bg.c_str(), plot_out.c_str()));
  }
  if (ablate->parsed()) {
    tsnet_config* cfg = nullptr;
    int rc = check(build_config(abl_cfg, &cfg));
    if (rc == 0) rc = check(tsnet_ablate(cfg, abl_data.c_str(), abl_axis.c_str(), abl_out.c_str()));
    tsnet_config_destroy(cfg);
    return rc;
  }
  return 0;
}
