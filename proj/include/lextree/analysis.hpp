#pragma once

// Post-hoc analyses: head words recovered from head-lexicon vectors, accuracy
// broken down by sentence length / gold class / negation, and the head
// strategy comparison.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lextree/model.hpp"
#include "lextree/train.hpp"

namespace lextree {

enum class Child { None, Left, Right };

struct NodeHead {
  Child chosen = Child::None;  // None for leaves
  double sim_left = 0.0;
  double sim_right = 0.0;
  bool tie = false;        // equal similarities, resolved to the left child
  bool zero_norm = false;  // a zero vector made a similarity 0 by definition
  int head_leaf = -1;      // node id of the leaf whose token heads this node
  std::string head_token;
};

using HeadAssignment = std::vector<NodeHead>;  // by node id

double cosine_similarity(std::span<const double> a, std::span<const double> b, bool* zero_norm);

// A branch takes the head of the child whose head vector is most similar to
// its own. Needs the head vectors of a bottom-up pass (enc.up[*].x).
HeadAssignment extract_heads(const BinaryTree& tree, const EncodedTree& enc);

// Indented rendering, one node per line, with the head as "⟨token⟩".
std::string render_heads(const BinaryTree& tree, const HeadAssignment& heads);
// One JSON object per node and line: id, span, label, head, sim_left, sim_right.
std::string head_records(const BinaryTree& tree, const HeadAssignment& heads);

inline constexpr std::array<std::string_view, 4> kNegationCues = {"not", "no", "none", "n't"};
bool has_negation(std::span<const std::string> tokens);

struct SentenceOutcome {
  std::vector<std::string> tokens;
  int gold = 0;
  int predicted = 0;
};

enum class Bucketing { Length, Class, Negation };

struct BucketRow {
  std::string name;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // empty bucket: n/a
};

inline constexpr std::size_t kLengthBucketWidth = 10;

// Length buckets "(0,10]", "(10,20]", ... up to the longest sentence, empty
// ones included. Class buckets follow the gold label, 0..num_classes-1.
std::vector<BucketRow> bucket_accuracy(std::span<const SentenceOutcome> outcomes,
                                       Bucketing bucketing, int num_classes = 0);
std::string length_bucket(std::size_t length);

struct StrategyRow {
  std::string name;
  double dev_root_acc = 0.0;
  std::optional<double> test_root_acc;
  std::optional<double> reference;  // reference root accuracy, display only
  std::uint64_t best_seed = 0;
  int best_epoch = 0;
};

// Reference fine-grained root accuracies of the four strategies.
std::optional<double> reference_strategy_accuracy(HeadStrategy s);

struct CompareOptions {
  std::vector<HeadStrategy> strategies{HeadStrategy::Left, HeadStrategy::Right,
                                       HeadStrategy::Average, HeadStrategy::Gated};
  // Adds a G run with the gate zeroed and frozen (must equal the A run).
  bool zero_gate_control = false;
};

// Runs the training protocol of `base` once per strategy. Every run sees the
// same seeds, so example order and dropout masks are shared across rows.
std::vector<StrategyRow> compare_strategies(const TrainConfig& base, const Vocabulary& vocab,
                                            const EmbeddingTable* table,
                                            std::span<const BinaryTree> train_set,
                                            std::span<const BinaryTree> dev_set,
                                            std::span<const BinaryTree> test_set,
                                            const CompareOptions& options = {},
                                            const EpochCallback& on_epoch = {});

}  // namespace lextree
