#include "tsnet/tsnet.h"

#include "tsnet/checkpoint.hpp"
#include "tsnet/config.hpp"
#include "tsnet/error.hpp"
#include "tsnet/log.hpp"
#include "tsnet/pipeline.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

struct tsnet_config {
  tsnet::Config config;
  std::set<std::string> touched;  // keys set explicitly, used as evaluation overrides
};

struct tsnet_model {
  tsnet::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_error;

tsnet_status fail(tsnet_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

template <class F>
tsnet_status guarded(F&& f) {
  try {
    g_error.clear();
    f();
    return TSNET_OK;
  } catch (const tsnet::ArgumentError& e) {
    return fail(TSNET_ERR_ARGUMENT, e.what());
  } catch (const tsnet::ParseError& e) {
    return fail(TSNET_ERR_PARSE, e.what());
  } catch (const tsnet::EncodingError& e) {
    return fail(TSNET_ERR_ENCODING, e.what());
  } catch (const tsnet::ValidationError& e) {
    return fail(TSNET_ERR_VALIDATION, e.what());
  } catch (const tsnet::IoError& e) {
    return fail(TSNET_ERR_IO, e.what());
  } catch (const tsnet::NumericError& e) {
    return fail(TSNET_ERR_NUMERIC, e.what());
  } catch (const tsnet::CompatibilityError& e) {
    return fail(TSNET_ERR_COMPAT, e.what());
  } catch (const tsnet::ModeError& e) {
    return fail(TSNET_ERR_MODE, e.what());
  } catch (const std::exception& e) {
    return fail(TSNET_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TSNET_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw tsnet::ArgumentError(std::string(what) + " must not be null");
}

std::vector<int> parse_indices(const char* s, std::vector<int> fallback) {
  if (s == nullptr) return fallback;
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw tsnet::ParseError("category index list: cannot parse '" + item + "'");
    }
  }
  return out;
}

tsnet::Config evaluation_config(const tsnet_model* model, const tsnet_config* overrides) {
  std::map<std::string, std::string> o;
  if (overrides != nullptr) {
    for (const auto& key : overrides->touched) o[key] = overrides->config.get(key);
  }
  return tsnet::merge_for_evaluation(model->checkpoint.config, o);
}

void write_text(const char* path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw tsnet::IoError(std::string("cannot open ") + path + " for writing");
  f << text;
  if (!f) throw tsnet::IoError(std::string("failed writing ") + path);
}

}  // namespace

extern "C" {

const char* tsnet_last_error(void) { return g_error.c_str(); }

const char* tsnet_version(void) { return "0.1.0"; }

void tsnet_set_log_callback(tsnet_log_fn fn, void* user) {
  if (fn == nullptr) {
    tsnet::set_log_sink({});
    return;
  }
  tsnet::set_log_sink([fn, user](tsnet::LogLevel l, const std::string& m) {
    fn(static_cast<tsnet_log_level>(l), m.c_str(), user);
  });
}

tsnet_status tsnet_config_create(tsnet_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new tsnet_config();
  });
}

void tsnet_config_destroy(tsnet_config* cfg) { delete cfg; }

tsnet_status tsnet_config_load(tsnet_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw tsnet::IoError(std::string("cannot open config ") + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const tsnet::Config parsed = tsnet::parse_config(ss.str(), cfg->config);
    // Track every key named in the file.
    std::set<std::string> keys;
    std::string line;
    std::istringstream is(ss.str());
    while (std::getline(is, line)) {
      line = line.substr(0, line.find('#'));
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      keys.insert(key);
    }
    cfg->config = parsed;
    cfg->touched.insert(keys.begin(), keys.end());
  });
}

tsnet_status tsnet_config_set(tsnet_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    cfg->config.set(key, value);
    cfg->touched.insert(key);
  });
}

tsnet_status tsnet_config_get(const tsnet_config* cfg, const char* key, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    const std::string v = cfg->config.get(key);
    if (needed != nullptr) *needed = v.size() + 1;
    if (buf != nullptr && size > 0) {
      const std::size_t n = std::min(size - 1, v.size());
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
      if (n < v.size()) throw tsnet::ArgumentError("buffer too small for the value of " + std::string(key));
    }
  });
}

tsnet_status tsnet_config_save(const tsnet_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    tsnet::save_config(path, cfg->config);
  });
}

tsnet_status tsnet_config_validate(const tsnet_config* cfg) {
  return guarded([&] {
    need(cfg, "config");
    cfg->config.validate();
  });
}

tsnet_status tsnet_synth(const char* out_path, int tracks, double noise_px, uint64_t seed, const char* informative,
                         const char* decoy) {
  return guarded([&] {
    need(out_path, "out_path");
    tsnet::SynthConfig sc;
    sc.tracks = tracks;
    sc.noise_px = noise_px;
    sc.informative = parse_indices(informative, sc.informative);
    sc.decoy = parse_indices(decoy, sc.decoy);
    tsnet::save_dataset(out_path, tsnet::generate_synthetic(sc, seed));
  });
}

tsnet_status tsnet_train(const tsnet_config* cfg, const char* dataset, const char* checkpoint, const char* log_csv) {
  return guarded([&] {
    need(cfg, "config");
    need(dataset, "dataset");
    need(checkpoint, "checkpoint");
    const auto records = tsnet::load_dataset(dataset);
    tsnet::TrainOptions opt;
    opt.diagnostic_path = std::string(checkpoint) + ".nonfinite.json";
    const auto ck = tsnet::train(cfg->config, records, opt);
    tsnet::save_checkpoint(checkpoint, ck);
    if (log_csv != nullptr) write_text(log_csv, tsnet::curve_csv(ck.curve));
  });
}

tsnet_status tsnet_model_load(const char* checkpoint, tsnet_model** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    auto m = std::make_unique<tsnet_model>();
    m->checkpoint = tsnet::load_checkpoint(checkpoint);
    tsnet::Model probe(m->checkpoint.config, m->checkpoint.params);  // shape check
    *out = m.release();
  });
}

void tsnet_model_destroy(tsnet_model* model) { delete model; }

tsnet_status tsnet_model_config(const tsnet_model* model, tsnet_config** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    auto c = std::make_unique<tsnet_config>();
    c->config = model->checkpoint.config;
    *out = c.release();
  });
}

tsnet_status tsnet_evaluate(tsnet_model* model, const tsnet_config* overrides, const char* dataset, const char* split,
                            const char* metrics_csv, tsnet_metric_row* rows, size_t* row_count) {
  return guarded([&] {
    need(model, "model");
    need(dataset, "dataset");
    need(split, "split");
    if (rows != nullptr) need(row_count, "row_count");
    tsnet::Model m(evaluation_config(model, overrides), model->checkpoint.params);
    const auto records = tsnet::load_dataset(dataset);
    const auto ev = tsnet::evaluate(m, records, tsnet::parse_split(split));
    if (metrics_csv != nullptr) tsnet::write_metrics_csv(metrics_csv, ev.rows);
    if (row_count != nullptr) {
      const std::size_t n = rows == nullptr ? ev.rows.size() : std::min(*row_count, ev.rows.size());
      for (std::size_t i = 0; rows != nullptr && i < n; ++i) {
        const auto& r = ev.rows[i];
        rows[i] = tsnet_metric_row{r.horizon_s, r.ade, r.c_ade, r.fde, r.c_fde, r.k, r.c, r.seed};
      }
      *row_count = n;
    }
  });
}

tsnet_status tsnet_predict(tsnet_model* model, const tsnet_config* overrides, const char* dataset, const char* split,
                           size_t index, const char* out_json) {
  return guarded([&] {
    need(model, "model");
    need(dataset, "dataset");
    need(split, "split");
    need(out_json, "out_json");
    tsnet::Model m(evaluation_config(model, overrides), model->checkpoint.params);
    const auto records = tsnet::load_dataset(dataset);
    write_text(out_json, tsnet::predict_json(m, records, tsnet::parse_split(split), index));
  });
}

tsnet_status tsnet_plot(const char* prediction_json, const char* background_png, const char* out_png) {
  return guarded([&] {
    need(prediction_json, "prediction_json");
    need(out_png, "out_png");
    std::ifstream f(prediction_json, std::ios::binary);
    if (!f) throw tsnet::IoError(std::string("cannot open ") + prediction_json);
    std::stringstream ss;
    ss << f.rdbuf();
    std::optional<std::filesystem::path> bg;
    if (background_png != nullptr) bg = background_png;
    tsnet::plot_prediction(ss.str(), bg, out_png);
  });
}

tsnet_status tsnet_ablate(const tsnet_config* cfg, const char* dataset, const char* axis, const char* out_csv) {
  return guarded([&] {
    need(cfg, "config");
    need(dataset, "dataset");
    need(axis, "axis");
    need(out_csv, "out_csv");
    const auto records = tsnet::load_dataset(dataset);
    const auto table = tsnet::run_ablation(cfg->config, records, tsnet::parse_ablation_axis(axis));
    write_text(out_csv, table.csv());
  });
}

}  // extern "C"
