#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lextree/tensor.hpp"

namespace lextree {

// A named trainable tensor together with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;       // skipped by optimizers
  bool regularized = true;   // included in the L2 penalty
  bool counted = true;       // included in count_params (embeddings are not)
  bool sparse_rows = false;  // lookup table: gradients arrive per row

  // Rows that received gradient since the last zero_grad (sparse_rows only).
  std::vector<std::size_t> touched_rows;
  std::vector<char> row_touched;

  void touch_row(std::size_t r);
  void zero_grad();
};

struct Init {
  enum class Kind { Zero, Glorot, Uniform };
  Kind kind = Kind::Zero;
  double scale = 0.0;  // half-width for Uniform

  static Init zero() { return {Kind::Zero, 0.0}; }
  static Init glorot() { return {Kind::Glorot, 0.0}; }
  static Init uniform(double r) { return {Kind::Uniform, r}; }
};

// Stable seed for a named parameter: the same (seed, name) always draws the
// same values regardless of which other parameters exist in the set.
std::uint64_t param_seed(std::uint64_t seed, std::string_view name);

// Owns every parameter of one model. Parameters have stable addresses.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& add(const std::string& name, const Shape& shape, Init init, std::uint64_t seed);
  Parameter& add(const std::string& name, Tensor value);

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  std::size_t scalar_count() const;

  // Value copies, in parameter order, for best-model bookkeeping.
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lextree
