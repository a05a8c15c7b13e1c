#include "lextree/params.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lextree {

void Parameter::touch_row(std::size_t r) {
  if (row_touched.size() != value.rows()) row_touched.assign(value.rows(), 0);
  if (!row_touched[r]) {
    row_touched[r] = 1;
    touched_rows.push_back(r);
  }
}

void Parameter::zero_grad() {
  if (sparse_rows) {
    for (auto r : touched_rows) {
      auto row = grad.row(r);
      std::fill(row.begin(), row.end(), 0.0);
      row_touched[r] = 0;
    }
    touched_rows.clear();
  } else {
    grad.fill(0.0);
  }
}

std::uint64_t param_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, mixed with the run seed.
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

Parameter& ParamSet::add(const std::string& name, const Shape& shape, Init init,
                         std::uint64_t seed) {
  Tensor value(shape);
  if (init.kind != Init::Kind::Zero) {
    double r = init.scale;
    if (init.kind == Init::Kind::Glorot) {
      const double fan_out = static_cast<double>(value.rows());
      const double fan_in = static_cast<double>(value.cols());
      r = std::sqrt(6.0 / (fan_in + fan_out));
    }
    std::mt19937_64 rng(param_seed(seed, name));
    std::uniform_real_distribution<double> dist(-r, r);
    for (auto& v : value.values()) v = dist(rng);
  }
  return add(name, std::move(value));
}

Parameter& ParamSet::add(const std::string& name, Tensor value) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(value.shape());
  p->value = std::move(value);
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParamSet::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParamSet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParamSet::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Parameter& ParamSet::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

std::vector<Parameter*> ParamSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::vector<Tensor> ParamSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamSet::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size())
    throw std::invalid_argument("snapshot has " + std::to_string(values.size()) +
                                " tensors, parameter set has " + std::to_string(params_.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i]->value.shape())
      throw ShapeError("snapshot shape mismatch for " + params_[i]->name);
    params_[i]->value = values[i];
  }
}

}  // namespace lextree
