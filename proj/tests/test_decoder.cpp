#include "tsnet/decoder.hpp"
#include "tsnet/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace tsnet;
using oracle::Mat;
using oracle::Vec;
using testing::random_mat;
using testing::to_matrix;

namespace {

RowVector row(const Vec& v) {
  RowVector r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i];
  return r;
}

Vec vec_times(const Vec& x, const Mat& w) {
  Vec out(w[0].size(), 0.0);
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t k = 0; k < x.size(); ++k) out[c] += x[k] * w[k][c];
  return out;
}

Vec plus(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Vec relu(Vec a) {
  for (double& v : a) v = std::max(0.0, v);
  return a;
}

Vec flat(const Matrix& m) { return Vec(m.data(), m.data() + m.size()); }

DecoderParams random_decoder(std::mt19937_64& rng, int cw, int ce, int pw, int ge, int h) {
  DecoderParams p = DecoderParams::zeros(cw, ce, pw, ge, h);
  auto fill = [&](Matrix& m) { m = to_matrix(random_mat(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), rng)); };
  auto fill_row = [&](RowVector& v) { v = row(random_mat(1, static_cast<std::size_t>(v.size()), rng)[0]); };
  if (p.char_embed) {
    fill(p.char_embed->weights);
    fill_row(p.char_embed->bias);
    fill(p.in_char);
    fill(p.init_char);
  }
  fill(p.goal_embed.weights);
  fill_row(p.goal_embed.bias);
  fill(p.in_past);
  fill(p.in_goal);
  fill_row(p.in_bias);
  fill(p.init_past);
  fill(p.init_goal);
  fill_row(p.init_bias);
  fill(p.hidden_weights);
  fill_row(p.hidden_bias);
  fill(p.output.weights);
  fill_row(p.output.bias);
  return p;
}

/// Hand-unrolled decoder: per-block projections, tanh initial state, GRU
/// steps and a running sum of the per-step outputs.
Vec unrolled_decode(const DecoderParams& p, const Vec& chars, const Vec& past, const Vec& goal, int steps) {
  const auto m = [](const Matrix& x) { return testing::to_mat(x); };
  const Vec ge = relu(plus(vec_times(goal, m(p.goal_embed.weights)), flat(p.goal_embed.bias)));
  Vec xin = plus(plus(vec_times(past, m(p.in_past)), vec_times(ge, m(p.in_goal))), flat(p.in_bias));
  Vec h0 = plus(plus(vec_times(past, m(p.init_past)), vec_times(ge, m(p.init_goal))), flat(p.init_bias));
  if (!chars.empty()) {
    const Vec ce = relu(plus(vec_times(chars, m(p.char_embed->weights)), flat(p.char_embed->bias)));
    xin = plus(xin, vec_times(ce, m(p.in_char)));
    h0 = plus(h0, vec_times(ce, m(p.init_char)));
  }
  for (double& v : h0) v = std::tanh(v);
  Vec h = h0, pos(4, 0.0), out;
  for (int t = 0; t < steps; ++t) {
    h = oracle::gru_step(xin, h, m(p.hidden_weights), flat(p.hidden_bias));
    pos = plus(pos, plus(vec_times(h, m(p.output.weights)), flat(p.output.bias)));
    out.insert(out.end(), pos.begin(), pos.end());
  }
  return out;
}

const BoxNormalizer kNorm{BBox{100, 200, 150, 330}, {1920, 1080}};

}  // namespace

TEST_CASE("decoder: zero goal head returns the last observed box") {
  GoalHeadParams head{LinearParams{Matrix::Zero(6, 8), RowVector::Zero(8)},
                      LinearParams{Matrix::Zero(8, 4), RowVector::Zero(4)}};
  const BBox g = predict_goal(RowVector::Ones(4), RowVector::Ones(2), head, kNorm);
  CHECK(g == kNorm.origin);
}

TEST_CASE("decoder: one-layer goal head on a toy input") {
  GoalHeadParams head;
  head.output.weights = Matrix::Zero(3, 4);
  head.output.weights << 1, 0, 0, 0,  //
      0, 2, 0, 0,                     //
      0, 0, -1, 1;
  head.output.bias = row({0.01, 0, 0, 0.5});
  // past (0.1, 0.2), latent (0.3): raw = (0.11, 0.4, -0.3, 0.8)
  const BBox g = predict_goal(row({0.1, 0.2}), row({0.3}), head, kNorm);
  CHECK(g.x1 == doctest::Approx(100 + 0.11 * 1920));
  CHECK(g.y1 == doctest::Approx(200 + 0.4 * 1080));
  CHECK(g.x2 == doctest::Approx(150 - 0.3 * 1920));
  CHECK(g.y2 == doctest::Approx(330 + 0.8 * 1080));
  const BBox again = predict_goal(row({0.1, 0.2}), row({0.3}), head, kNorm);
  CHECK(g == again);
}

TEST_CASE("decoder: zero output weights keep every box at the origin") {
  std::mt19937_64 rng(60);
  auto p = random_decoder(rng, 6, 5, 4, 3, 8);
  p.output.weights.setZero();
  p.output.bias.setZero();
  const auto boxes = decode(RowVector::Ones(4), RowVector::Ones(2), RowVector::Ones(4), BBox{0, 0, 10, 10}, p, kNorm, 45);
  REQUIRE(boxes.size() == 45);
  for (const auto& b : boxes) CHECK(b == kNorm.origin);
}

TEST_CASE("decoder: matches the hand-unrolled recurrence") {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 100; ++rep) {
    const bool with_chars = rep % 2 == 0;
    const int cw = with_chars ? 5 : 0;
    const auto p = random_decoder(rng, cw, 4, 3, 2, 5);
    const Vec chars = with_chars ? random_mat(1, 5, rng)[0] : Vec{};
    const Vec past = random_mat(1, 3, rng)[0];
    const Vec goal = random_mat(1, 4, rng, -0.1, 0.1)[0];
    const int steps = 1 + static_cast<int>(rng() % 4);
    const Vec expect = unrolled_decode(p, chars, past, goal, steps);

    ad::Tape tape;
    ad::Var c;
    if (with_chars) c = tape.constant(Matrix(row(chars)));
    const auto out = decode(place(tape, p), c, tape.constant(Matrix(row(past))), tape.constant(Matrix(row(goal))), 1,
                            steps);
    REQUIRE(out.cols() == 4 * steps);
    for (int i = 0; i < 4 * steps; ++i) CHECK(oracle::rel_err(out.value()(0, i), expect[static_cast<std::size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("decoder: K candidates share the sample part and differ by goal") {
  std::mt19937_64 rng(62);
  const auto p = random_decoder(rng, 0, 0, 3, 6, 4);
  ad::Tape tape;
  Matrix goals = to_matrix(random_mat(6, 4, rng));
  goals.row(4) = goals.row(1);
  const auto out = decode(place(tape, p), ad::Var{}, tape.constant(to_matrix(random_mat(2, 3, rng))),
                          tape.constant(goals), 3, 2);
  REQUIRE(out.rows() == 6);
  CHECK(out.value().row(0) != out.value().row(1));
  CHECK(out.value().row(1) != out.value().row(4));  // same goal, different sample
  CHECK_THROWS_AS(decode(place(tape, p), ad::Var{}, tape.constant(Matrix::Zero(2, 3)), tape.constant(goals), 2, 2),
                  ArgumentError);
  CHECK_THROWS_AS(decode(place(tape, p), tape.constant(Matrix::Zero(2, 1)), tape.constant(Matrix::Zero(2, 3)),
                         tape.constant(goals), 3, 2),
                  ArgumentError);
}

TEST_CASE("decoder: loss on hand-built candidate sets") {
  const std::vector<BBox> truth{{0, 0, 1, 1}, {1, 1, 2, 2}};
  const BBox goal = truth.back();
  LatentGaussian p{row({0.0, 0.0}), row({1.0, 1.0})};
  auto shifted = [&](double d) {
    auto t = truth;
    t[0].x1 += d;
    return t;
  };
  PredictionSet set{{shifted(3.0), shifted(5.0)}, {goal, BBox{0, 0, 0, 1}}, {}};
  auto l = tsnet_loss(set, truth, goal, p, p);
  CHECK(l.trajectory == doctest::Approx(3.0));
  CHECK(l.goal == 0);
  CHECK(l.kld == 0);
  CHECK(l.total == doctest::Approx(3.0));

  set = PredictionSet{{shifted(0.0)}, {BBox{1, 1, 2, 5}}, {}};
  l = tsnet_loss(set, truth, goal, p, p);
  CHECK(l.trajectory == 0);
  CHECK(l.goal == doctest::Approx(3.0));

  CHECK_THROWS_AS(tsnet_loss(PredictionSet{}, truth, goal, p, p), ArgumentError);
  BBoxTrack fut;
  fut.boxes = truth;
  CHECK(goal_ground_truth(fut) == truth.back());
}

TEST_CASE("decoder: best-of-K loss is monotone and bounded by the mean") {
  std::mt19937_64 rng(63);
  for (int rep = 0; rep < 50; ++rep) {
    const auto target = random_mat(1, 12, rng)[0];
    const auto cands = random_mat(8, 12, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 8; ++k) {
      ad::Tape tape;
      const Mat sub(cands.begin(), cands.begin() + k);
      const auto d = ad::best_of_k_distance(tape.constant(to_matrix(sub)), tape.constant(Matrix(row(target))), k);
      const double v = d.value()(0, 0);
      CHECK(oracle::rel_err(v, oracle::best_of_k(sub, target)) < 1e-12);
      double mean = 0;
      for (const auto& c : sub) mean += oracle::l2(c, target) / k;
      CHECK(v <= mean + 1e-12);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("decoder: per-step mean norm variant") {
  ad::Tape tape;
  Matrix pred(1, 8), target = Matrix::Zero(1, 8);
  pred << 3, 4, 0, 0, 0, 0, 6, 8;
  const auto d = ad::best_of_k_distance(tape.constant(pred), tape.constant(target), 1, ad::LossNorm::PerStepMean);
  CHECK(d.value()(0, 0) == doctest::Approx(7.5));
}

TEST_CASE("decoder: gradients through decoding and the best-of-K loss") {
  std::mt19937_64 rng(64);
  const int B = 2, K = 3, cw = 3, pw = 3, ge = 2, H = 4, steps = 3;
  std::vector<Parameter> ps;
  ps.reserve(20);
  auto add = [&](const char* name, std::size_t r, std::size_t c) -> Parameter& {
    ps.push_back(testing::make_param(name, random_mat(r, c, rng)));
    return ps.back();
  };
  Parameter& chars = add("chars", B, cw);
  Parameter& past = add("past", B, pw);
  Parameter& goals = add("goals", B * K, 4);
  Parameter& ce_w = add("ce_w", cw, 4);
  Parameter& ce_b = add("ce_b", 1, 4);
  Parameter& ge_w = add("ge_w", 4, ge);
  Parameter& ge_b = add("ge_b", 1, ge);
  Parameter& in_c = add("in_c", 4, 3 * H);
  Parameter& in_p = add("in_p", pw, 3 * H);
  Parameter& in_g = add("in_g", ge, 3 * H);
  Parameter& in_b = add("in_b", 1, 3 * H);
  Parameter& it_c = add("it_c", 4, H);
  Parameter& it_p = add("it_p", pw, H);
  Parameter& it_g = add("it_g", ge, H);
  Parameter& it_b = add("it_b", 1, H);
  Parameter& wh = add("wh", H, 3 * H);
  Parameter& bh = add("bh", 1, 3 * H);
  Parameter& ow = add("ow", H, 4);
  Parameter& ob = add("ob", 1, 4);
  const Matrix target = to_matrix(random_mat(B, 4 * steps, rng, -3, 3));
  std::vector<Parameter*> all;
  for (auto& p : ps) all.push_back(&p);
  const auto res = testing::grad_check(all, [&](ad::Tape& t) {
    DecoderVars d;
    d.char_embed = LinearVars{t.parameter(ce_w), t.parameter(ce_b)};
    d.goal_embed = LinearVars{t.parameter(ge_w), t.parameter(ge_b)};
    d.in_char = t.parameter(in_c);
    d.in_past = t.parameter(in_p);
    d.in_goal = t.parameter(in_g);
    d.in_bias = t.parameter(in_b);
    d.init_char = t.parameter(it_c);
    d.init_past = t.parameter(it_p);
    d.init_goal = t.parameter(it_g);
    d.init_bias = t.parameter(it_b);
    d.hidden_weights = t.parameter(wh);
    d.hidden_bias = t.parameter(bh);
    d.output = LinearVars{t.parameter(ow), t.parameter(ob)};
    const auto y = decode(d, t.parameter(chars), t.parameter(past), t.parameter(goals), K, steps);
    return ad::sum(ad::best_of_k_distance(y, t.constant(target), K));
  });
  CHECK_MESSAGE(res.max_rel_error < 1e-5, res.worst);
}
