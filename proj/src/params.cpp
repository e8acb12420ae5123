#include "tsnet/params.hpp"

#include "tsnet/error.hpp"

#include <cmath>

namespace tsnet {

Parameter& ParamStore::add(std::string name, Matrix init) {
  if (index_.count(name) != 0) {
    throw ArgumentError("duplicate parameter name: " + name);
  }
  Parameter& p = params_.emplace_back();
  p.name = std::move(name);
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  index_.emplace(p.name, &p);
  return p;
}

Parameter& ParamStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter: " + std::string(name));
  return *it->second;
}

const Parameter& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter: " + std::string(name));
  return *it->second;
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParamStore::reset_uses() {
  for (auto& p : params_) p.uses = 0;
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const double step = options_.learning_rate / bc1;
  for (Parameter* p : store.all()) {
    auto [it, inserted] = moments_.try_emplace(p->name);
    auto& [m, v] = it->second;
    if (inserted) {
      m = Matrix::Zero(p->value.rows(), p->value.cols());
      v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    m = options_.beta1 * m + (1.0 - options_.beta1) * p->grad;
    v = options_.beta2 * v + (1.0 - options_.beta2) * p->grad.cwiseAbs2();
    p->value.array() -=
        step * m.array() / ((v.array() / bc2).sqrt() + options_.epsilon);
  }
}

}  // namespace tsnet
