#include "tsnet/checkpoint.hpp"

#include "tsnet/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace tsnet {

using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "tsnet-checkpoint";
constexpr int kVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = ordered_json::object();
  for (const auto& key : ckpt.config.keys()) j["config"][key] = ckpt.config.get(key);
  j["rng_state"] = ckpt.rng_state;
  ordered_json params = ordered_json::array();
  for (const Parameter* p : ckpt.params.all()) {
    ordered_json e;
    e["name"] = p->name;
    e["rows"] = p->value.rows();
    e["cols"] = p->value.cols();
    e["values"] = std::vector<double>(p->value.data(), p->value.data() + p->value.size());
    params.push_back(std::move(e));
  }
  j["params"] = std::move(params);
  ordered_json curve = ordered_json::array();
  for (const auto& e : ckpt.curve) {
    curve.push_back({{"epoch", e.epoch},
                     {"loss", e.loss},
                     {"trajectory", e.trajectory},
                     {"goal", e.goal},
                     {"kld", e.kld},
                     {"learning_rate", e.learning_rate},
                     {"degenerate_groups", e.degenerate_groups},
                     {"seconds", e.seconds}});
  }
  j["curve"] = std::move(curve);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << j.dump() << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw ParseError("not a tsnet checkpoint: " + path.string());
    if (j.at("version").get<int>() != kVersion) throw CompatibilityError("unsupported checkpoint version");
    Checkpoint ck;
    for (const auto& [key, value] : j.at("config").items()) ck.config.set(key, value.get<std::string>());
    ck.config.validate();
    ck.rng_state = j.at("rng_state").get<std::string>();
    for (const auto& e : j.at("params")) {
      const auto rows = e.at("rows").get<Eigen::Index>();
      const auto cols = e.at("cols").get<Eigen::Index>();
      const auto values = e.at("values").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw ParseError("checkpoint parameter " + e.at("name").get<std::string>() + " has the wrong value count");
      }
      ck.params.add(e.at("name").get<std::string>(), Eigen::Map<const Matrix>(values.data(), rows, cols));
    }
    for (const auto& e : j.at("curve")) {
      EpochLog l;
      l.epoch = e.at("epoch").get<int>();
      l.loss = e.at("loss").get<double>();
      l.trajectory = e.at("trajectory").get<double>();
      l.goal = e.at("goal").get<double>();
      l.kld = e.at("kld").get<double>();
      l.learning_rate = e.at("learning_rate").get<double>();
      l.degenerate_groups = e.at("degenerate_groups").get<std::int64_t>();
      l.seconds = e.at("seconds").get<double>();
      ck.curve.push_back(l);
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
}

std::string curve_csv(const std::vector<EpochLog>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,trajectory,goal,kld,learning_rate,degenerate_groups,seconds\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << e.loss << ',' << e.trajectory << ',' << e.goal << ',' << e.kld << ',' << e.learning_rate
       << ',' << e.degenerate_groups << ',' << e.seconds << '\n';
  }
  return os.str();
}

}  // namespace tsnet
