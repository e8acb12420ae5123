#pragma once

#include "tsnet/tensor.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tsnet {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  // Number of times the parameter was placed on a tape since the last
  // reset; used to verify that a code path never reads it.
  std::uint64_t uses = 0;
};

/// Named parameter collection with stable addresses and insertion order.
class ParamStore {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void reset_uses();

 private:
  std::deque<Parameter> params_;
  std::map<std::string, Parameter*, std::less<>> index_;
};

/// Adaptive-moment optimizer state for every parameter of a store.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  explicit Adam(Options options) : options_(options) {}

  void step(ParamStore& store);
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  double learning_rate() const { return options_.learning_rate; }
  std::int64_t steps() const { return t_; }

 private:
  Options options_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>, std::less<>> moments_;
};

}  // namespace tsnet
