#pragma once

#include "tsnet/data.hpp"
#include "tsnet/tensor.hpp"

#include "oracles.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline tsnet::Matrix to_matrix(const oracle::Mat& m) {
  tsnet::Matrix out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.empty() ? 0 : m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return out;
}

inline oracle::Mat to_mat(const tsnet::Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline oracle::Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  oracle::Mat m(r, oracle::Vec(c));
  for (auto& row : m)
    for (double& v : row) v = u(rng);
  return m;
}

inline double max_rel_err(const tsnet::Matrix& a, const oracle::Mat& b) {
  double e = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      e = std::max(e, oracle::rel_err(a(i, j), b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
  return e;
}

/// A straight track of `length` frames with the standard five categories.
inline tsnet::TrackRecord straight_record(const std::string& id, int length, tsnet::Split split = tsnet::Split::Train) {
  tsnet::TrackRecord r;
  r.track_id = id;
  r.split = split;
  for (int t = 0; t < length; ++t) {
    r.track.frames.push_back(100 + t);
    r.track.boxes.push_back(tsnet::BBox{500.0 + 2 * t, 300.0 + t, 540.0 + 2 * t, 400.0 + t});
  }
  const auto schema = tsnet::CharacterSchema::standard();
  r.character_names = schema.names;
  for (std::size_t n = 0; n < schema.size(); ++n) r.characters.emplace_back(static_cast<std::size_t>(length), static_cast<int>(n % 2));
  return r;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("tsnet_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testing

#include "tsnet/autodiff.hpp"
#include "tsnet/params.hpp"

#include <functional>

namespace testing {

struct GradCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst;  // parameter and entry of the largest error
};

/// Central-difference check of every entry of `params` against the tape
/// gradient of the scalar returned by `loss`. Entries where both gradients
/// are below `floor` in magnitude count as agreeing.
inline GradCheck grad_check(const std::vector<tsnet::Parameter*>& params,
                            const std::function<tsnet::ad::Var(tsnet::ad::Tape&)>& loss, double h = 1e-6,
                            double floor = 1e-5) {
  for (auto* p : params) p->grad = tsnet::Matrix::Zero(p->value.rows(), p->value.cols());
  {
    tsnet::ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    tsnet::ad::Tape tape;
    return loss(tape).value()(0, 0);
  };
  GradCheck out;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + h;
      const double up = eval();
      v = saved - h;
      const double down = eval();
      v = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[i];
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      const double err = scale > floor ? std::abs(numeric - analytic) / scale : 0.0;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                    std::to_string(numeric);
      }
      ++out.checked;
    }
  }
  return out;
}

/// Fixed random projection of `x` to a scalar so that every output entry
/// carries a distinct weight.
inline tsnet::ad::Var project(tsnet::ad::Tape& tape, tsnet::ad::Var x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return tsnet::ad::sum(tsnet::ad::mul(x, tape.constant(to_matrix(random_mat(
                                             static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols()), rng)))));
}

inline tsnet::Parameter make_param(const std::string& name, const oracle::Mat& m) {
  tsnet::Parameter p;
  p.name = name;
  p.value = to_matrix(m);
  return p;
}

}  // namespace testing
