#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lextree/model.hpp"

namespace lextree {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Frozen parameters are skipped; lookup tables
// only update the rows that received gradient in the current step.
class Adam {
 public:
  explicit Adam(ParamSet& params, AdamOptions options = {});

  // Applies the accumulated gradients and zeroes them.
  void step();
  std::size_t steps() const { return t_; }

 private:
  ParamSet* params_;
  AdamOptions opt_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  ModelConfig model;
  double dropout = 0.5;
  double l2 = 1e-4;
  int epochs = 30;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Supervision supervision = Supervision::AllNodes;
  AdamOptions adam;
  bool shuffle = true;
  // Zero the head gate and keep it frozen (gated strategy then matches averaging).
  bool zero_frozen_head_gate = false;
};

struct EpochMetrics {
  std::uint64_t seed = 0;
  int epoch = 0;
  double train_loss = 0.0;  // mean per-tree objective
  double dev_root_acc = 0.0;
  double dev_node_acc = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct EvalResult {
  std::size_t roots = 0;
  std::size_t roots_correct = 0;
  std::size_t nodes = 0;          // labeled nodes, root included
  std::size_t nodes_correct = 0;
  std::vector<int> root_predictions;

  double root_acc() const { return roots ? static_cast<double>(roots_correct) / roots : 0.0; }
  double node_acc() const { return nodes ? static_cast<double>(nodes_correct) / nodes : 0.0; }
};

// Scores every labeled node. Trees are spread over OpenMP threads; each tree
// builds its own graph over the shared, read-only parameters.
EvalResult evaluate(const Model& model, std::span<const BinaryTree> trees);
// Single-threaded reference of evaluate(); results are identical.
EvalResult evaluate_serial(const Model& model, std::span<const BinaryTree> trees);

class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::uint64_t seed, int epoch, std::size_t example, double loss);
  std::uint64_t seed;
  int epoch;
  std::size_t example;
};

struct TrainResult {
  std::vector<EpochMetrics> trace;
  std::uint64_t best_seed = 0;
  int best_epoch = 0;
  double best_dev_root_acc = -1.0;
  Model best_model;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Per-example Adam updates for `epochs` passes under every seed; the model
// with the best development root accuracy (earliest on ties) is returned.
TrainResult train(const TrainConfig& config, const Vocabulary& vocab, const EmbeddingTable* table,
                  std::span<const BinaryTree> train_set, std::span<const BinaryTree> dev_set,
                  const EpochCallback& on_epoch = {});

// Builds a fresh model for `seed` and applies the config's parameter tweaks.
Model make_model(const TrainConfig& config, const Vocabulary& vocab, const EmbeddingTable* table,
                 std::uint64_t seed);

}  // namespace lextree
