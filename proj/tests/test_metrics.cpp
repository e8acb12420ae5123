#include "tsnet/error.hpp"
#include "tsnet/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace tsnet;

namespace {

Trajectory random_traj(std::mt19937_64& rng, int len) {
  std::uniform_real_distribution<double> u(0, 500);
  Trajectory t;
  for (int i = 0; i < len; ++i) {
    const double x = u(rng), y = u(rng);
    t.push_back(BBox{x, y, x + 10 + u(rng) / 10, y + 20 + u(rng) / 10});
  }
  return t;
}

oracle::Mat as_mat(const Trajectory& t) {
  oracle::Mat m;
  for (const auto& b : t) m.push_back({b.x1, b.y1, b.x2, b.y2});
  return m;
}

Trajectory shifted(Trajectory t, double dx, double dy) {
  for (auto& b : t) b = BBox{b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy};
  return t;
}

}  // namespace

TEST_CASE("metrics: hand-computed values") {
  std::mt19937_64 rng(30);
  const auto truth = random_traj(rng, 45);
  CHECK(ade(truth, truth, 45) == 0);
  CHECK(c_fde(truth, truth, 45) == 0);
  auto off = truth;
  for (auto& b : off) b = BBox{b.x1 + 2, b.y1 - 2, b.x2 + 2, b.y2 - 2};
  CHECK(ade(off, truth, 45) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(fde(off, truth, 30) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(c_fde(shifted(truth, 3, 4), truth, 45) == doctest::Approx(12.5).epsilon(1e-12));
  auto inflated = truth;
  for (auto& b : inflated) b = BBox{b.x1 - 1.5, b.y1 - 1.5, b.x2 + 1.5, b.y2 + 1.5};
  CHECK(c_ade(inflated, truth, 45) == doctest::Approx(0.0));
  CHECK(c_fde(inflated, truth, 45) == doctest::Approx(0.0));
  CHECK(ade(inflated, truth, 45) == doctest::Approx(2.25));
  CHECK(fde(inflated, truth, 45) == doctest::Approx(2.25));
}

TEST_CASE("metrics: agree with the loop oracles on random trajectories") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = random_traj(rng, 45), t = random_traj(rng, 45);
    const auto pm = as_mat(p), tm = as_mat(t);
    for (int h : {15, 30, 45}) {
      CHECK(oracle::rel_err(ade(p, t, h), oracle::box_ade(pm, tm, h)) < 1e-12);
      CHECK(oracle::rel_err(c_ade(p, t, h), oracle::center_ade(pm, tm, h)) < 1e-12);
      CHECK(oracle::rel_err(fde(p, t, h), oracle::box_fde(pm, tm, h)) < 1e-12);
      CHECK(oracle::rel_err(c_fde(p, t, h), oracle::center_fde(pm, tm, h)) < 1e-12);
    }
  }
}

TEST_CASE("metrics: nonnegative and translation covariant") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 30; ++rep) {
    const auto p = random_traj(rng, 20), t = random_traj(rng, 20);
    const double a = ade(p, t, 20), ca = c_ade(p, t, 20), f = fde(p, t, 20), cf = c_fde(p, t, 20);
    CHECK(a > 0);
    CHECK(ca >= 0);
    CHECK(f >= 0);
    CHECK(cf >= 0);
    const auto ps = shifted(p, 13.25, -7.5), ts = shifted(t, 13.25, -7.5);
    CHECK(oracle::rel_err(ade(ps, ts, 20), a) < 1e-9);
    CHECK(oracle::rel_err(c_ade(ps, ts, 20), ca) < 1e-9);
    CHECK(oracle::rel_err(fde(ps, ts, 20), f) < 1e-9);
    CHECK(oracle::rel_err(c_fde(ps, ts, 20), cf) < 1e-9);
  }
}

TEST_CASE("metrics: horizons at 30 Hz") {
  CHECK(horizon_frames(0.5) == 15);
  CHECK(horizon_frames(1.0) == 30);
  CHECK(horizon_frames(1.5) == 45);
}

TEST_CASE("metrics: length and horizon errors") {
  std::mt19937_64 rng(33);
  const auto a = random_traj(rng, 10), b = random_traj(rng, 9);
  CHECK_THROWS_AS(ade(a, b, 5), ArgumentError);
  CHECK_THROWS_AS(ade(a, a, 11), ArgumentError);
  CHECK_THROWS_AS(c_fde(a, a, 0), ArgumentError);
}

TEST_CASE("metrics: best-of-K picks the lowest full-horizon ADE") {
  std::mt19937_64 rng(34);
  const auto truth = random_traj(rng, 45);
  // candidate ADEs 7, 2, 9 from uniform per-coordinate offsets sqrt(ade)
  std::vector<Trajectory> set;
  for (double e : {7.0, 2.0, 9.0}) {
    auto c = truth;
    const double d = std::sqrt(e);
    for (auto& b : c) b = BBox{b.x1 + d, b.y1 + d, b.x2 + d, b.y2 + d};
    set.push_back(c);
  }
  const auto res = best_of_k_eval({set}, {truth}, 3);
  CHECK(res.selected == std::vector<int>{1});
  REQUIRE(res.rows.size() == 3);
  CHECK(res.rows[2].ade == doctest::Approx(2.0));
  CHECK(res.rows[0].horizon_s == 0.5);
  CHECK(res.rows[2].k == 3);

  set.push_back(truth);
  const auto exact = best_of_k_eval({set}, {truth}, 4);
  for (const auto& r : exact.rows) {
    CHECK(r.ade == 0);
    CHECK(r.c_ade == 0);
    CHECK(r.fde == 0);
    CHECK(r.c_fde == 0);
  }
  CHECK_THROWS_AS(best_of_k_eval({set}, {truth}, 3), ArgumentError);
}

TEST_CASE("metrics: best-of-K matches enumeration and is monotone in nested sets") {
  std::mt19937_64 rng(35);
  std::vector<std::vector<Trajectory>> sets;
  std::vector<Trajectory> truths;
  for (int s = 0; s < 10; ++s) {
    truths.push_back(random_traj(rng, 45));
    std::vector<Trajectory> c;
    for (int k = 0; k < 20; ++k) c.push_back(random_traj(rng, 45));
    sets.push_back(c);
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 20; ++k) {
    std::vector<std::vector<Trajectory>> nested;
    for (const auto& s : sets) nested.emplace_back(s.begin(), s.begin() + k);
    const auto res = best_of_k_eval(nested, truths, k);
    double mean = 0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      double best = std::numeric_limits<double>::infinity();
      int arg = -1;
      for (int j = 0; j < k; ++j) {
        const double a = oracle::box_ade(as_mat(nested[s][static_cast<std::size_t>(j)]), as_mat(truths[s]), 45);
        if (a < best) {
          best = a;
          arg = j;
        }
      }
      CHECK(res.selected[s] == arg);
      mean += best / static_cast<double>(sets.size());
    }
    CHECK(oracle::rel_err(res.rows[2].ade, mean) < 1e-12);
    CHECK(res.rows[2].ade <= prev);
    prev = res.rows[2].ade;
  }
}

TEST_CASE("metrics: CSV layout") {
  MetricRow r{1.5, 1, 2, 3, 4, 20, 100, 7};
  const auto csv = metrics_csv({r});
  CHECK(csv.rfind("horizon_s,ade,c_ade,fde,c_fde,K,C,seed\n", 0) == 0);
  CHECK(csv.find("\n1.5,1,2,3,4,20,100,7") != std::string::npos);
}
