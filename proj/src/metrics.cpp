#include "tsnet/metrics.hpp"

#include "tsnet/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace tsnet {

namespace {

void check(const Trajectory& pred, const Trajectory& truth, int horizon) {
  if (horizon < 1) throw ArgumentError("metric horizon must be >= 1");
  if (pred.size() < static_cast<std::size_t>(horizon) || truth.size() < static_cast<std::size_t>(horizon)) {
    throw ArgumentError("metric horizon of " + std::to_string(horizon) + " frames exceeds a trajectory of length " +
                        std::to_string(std::min(pred.size(), truth.size())));
  }
  if (pred.size() != truth.size()) throw ArgumentError("prediction and truth lengths differ");
}

double box_se(const BBox& a, const BBox& b) {
  const double d0 = a.x1 - b.x1, d1 = a.y1 - b.y1, d2 = a.x2 - b.x2, d3 = a.y2 - b.y2;
  return (d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3) / 4.0;
}

double center_se(const BBox& a, const BBox& b) {
  const double dx = a.center_x() - b.center_x(), dy = a.center_y() - b.center_y();
  return (dx * dx + dy * dy) / 2.0;
}

}  // namespace

double ade(const Trajectory& pred, const Trajectory& truth, int horizon) {
  check(pred, truth, horizon);
  double s = 0;
  for (int t = 0; t < horizon; ++t) s += box_se(pred[static_cast<std::size_t>(t)], truth[static_cast<std::size_t>(t)]);
  return s / horizon;
}

double c_ade(const Trajectory& pred, const Trajectory& truth, int horizon) {
  check(pred, truth, horizon);
  double s = 0;
  for (int t = 0; t < horizon; ++t) {
    s += center_se(pred[static_cast<std::size_t>(t)], truth[static_cast<std::size_t>(t)]);
  }
  return s / horizon;
}

double fde(const Trajectory& pred, const Trajectory& truth, int horizon) {
  check(pred, truth, horizon);
  return box_se(pred[static_cast<std::size_t>(horizon - 1)], truth[static_cast<std::size_t>(horizon - 1)]);
}

double c_fde(const Trajectory& pred, const Trajectory& truth, int horizon) {
  check(pred, truth, horizon);
  return center_se(pred[static_cast<std::size_t>(horizon - 1)], truth[static_cast<std::size_t>(horizon - 1)]);
}

int horizon_frames(double seconds) {
  const double frames = seconds * 30.0;
  if (!(frames >= 1.0) || std::abs(frames - std::round(frames)) > 1e-9) {
    throw ArgumentError("horizon of " + std::to_string(seconds) + " s is not a whole number of 30 Hz frames");
  }
  return static_cast<int>(std::lround(frames));
}

BestOfKResult best_of_k_eval(const std::vector<std::vector<Trajectory>>& predictions,
                             const std::vector<Trajectory>& truths, int k, const std::vector<double>& horizons_s) {
  if (k < 1) throw ArgumentError("best_of_k_eval: K must be >= 1");
  if (predictions.size() != truths.size()) throw ArgumentError("best_of_k_eval: prediction and truth counts differ");
  if (predictions.empty()) throw ArgumentError("best_of_k_eval: no samples");

  BestOfKResult out;
  out.rows.resize(horizons_s.size());
  for (std::size_t h = 0; h < horizons_s.size(); ++h) {
    out.rows[h].horizon_s = horizons_s[h];
    out.rows[h].k = k;
    out.rows[h].c = k;
  }
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const auto& set = predictions[s];
    const auto& truth = truths[s];
    if (set.size() != static_cast<std::size_t>(k)) {
      throw ArgumentError("best_of_k_eval: sample " + std::to_string(s) + " has " + std::to_string(set.size()) +
                          " candidates, expected " + std::to_string(k));
    }
    const int full = static_cast<int>(truth.size());
    int best = 0;
    double best_ade = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double a = ade(set[static_cast<std::size_t>(c)], truth, full);
      if (a < best_ade) {
        best_ade = a;
        best = c;
      }
    }
    out.selected.push_back(best);
    const auto& pred = set[static_cast<std::size_t>(best)];
    for (std::size_t h = 0; h < horizons_s.size(); ++h) {
      const int f = horizon_frames(horizons_s[h]);
      out.rows[h].ade += ade(pred, truth, f);
      out.rows[h].c_ade += c_ade(pred, truth, f);
      out.rows[h].fde += fde(pred, truth, f);
      out.rows[h].c_fde += c_fde(pred, truth, f);
    }
  }
  const double n = static_cast<double>(predictions.size());
  for (auto& r : out.rows) {
    r.ade /= n;
    r.c_ade /= n;
    r.fde /= n;
    r.c_fde /= n;
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "horizon_s,ade,c_ade,fde,c_fde,K,C,seed\n";
  for (const auto& r : rows) {
    os << r.horizon_s << ',' << r.ade << ',' << r.c_ade << ',' << r.fde << ',' << r.c_fde << ',' << r.k << ','
       << r.c << ',' << r.seed << '\n';
  }
  return os.str();
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << metrics_csv(rows);
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace tsnet
