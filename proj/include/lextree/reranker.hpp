#pragma once

// Constituent reranking scorer. A candidate parse is encoded with the
// head-lexicalized bottom-up Tree LSTM and every branch A -> B C scores
//
//   O = relu(W_L n_B + W_R n_C + W_H x_A + b),   s(A) = log_softmax(W_out O)[label(A)]
//
// The tree score is the sum over branches. Training uses a structured hinge
// with a bracket-mismatch cost, and reranking interpolates with the base
// parser's score.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "lextree/model.hpp"
#include "lextree/train.hpp"

namespace lextree {

struct RerankConfig {
  std::size_t embed_dim = 300;
  std::size_t hidden_dim = 150;
  std::size_t score_hidden = 128;
  HeadStrategy strategy = HeadStrategy::Gated;
  double margin_scale = 0.1;  // cost per candidate bracket missing from the gold tree
  double alpha = 0.5;         // weight of the model score when interpolating
};

class Reranker {
 public:
  // `labels` is the constituent label inventory; it is fixed from here on.
  Reranker(RerankConfig config, Vocabulary vocab, std::vector<std::string> labels,
           std::uint64_t seed, const EmbeddingTable* table = nullptr);

  const RerankConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<std::string>& labels() const { return labels_; }
  ParamSet& params() { return *params_; }
  const ParamSet& params() const { return *params_; }

  std::size_t label_index(const std::string& label) const;

  std::vector<UpNodeState> encode(Graph& g, const BinaryTree& tree) const;
  Expr node_score(Graph& g, std::size_t label, Expr n_left, Expr n_right, Expr head) const;
  Expr tree_score(Graph& g, const BinaryTree& tree) const;
  double score(const BinaryTree& tree) const;

  // max(0, max_{y != gold} [f(y) + cost(y, gold)] - f(gold)); zero-valued
  // constant when no rival exists or the margin holds.
  Expr margin_loss(Graph& g, const BinaryTree& gold, std::span<const BinaryTree> candidates) const;

 private:
  RerankConfig config_;
  Vocabulary vocab_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> label_ids_;
  std::unique_ptr<ParamSet> params_;
  Parameter* embed_ = nullptr;
  TreeUpParams up_{};
  Parameter *W_L_ = nullptr, *W_R_ = nullptr, *W_H_ = nullptr, *b_ = nullptr, *W_out_ = nullptr;
};

// Labels of every branch node, sorted and unique.
std::vector<std::string> branch_labels(std::span<const BinaryTree> trees);

using Bracket = std::tuple<std::string, std::size_t, std::size_t>;  // label, start, end
// Labeled brackets of the branch nodes (preterminal leaves excluded).
std::vector<Bracket> labeled_brackets(const BinaryTree& tree);
// Candidate brackets with no matching gold bracket (multiset matching).
std::size_t bracket_mismatch(const BinaryTree& candidate, const BinaryTree& gold);

struct Parseval {
  std::size_t matched = 0, candidate = 0, gold = 0;
  double precision() const;
  double recall() const;
  double f1() const;
};
Parseval parseval(const BinaryTree& candidate, const BinaryTree& gold);

struct ScoredTree {
  BinaryTree tree;
  double model_score = 0.0;
  double base_score = 0.0;
  double combined = 0.0;
};

// Fills model_score and combined = alpha * model + (1 - alpha) * base.
void score_candidates(const Reranker& r, std::span<ScoredTree> candidates, double alpha);
// Index of the highest combined score; ties go to the higher base score,
// then to the earlier candidate.
std::size_t rerank(std::span<const ScoredTree> candidates);
// Index of the candidate with the best labeled F1 against `gold`.
std::size_t oracle_select(std::span<const ScoredTree> candidates, const BinaryTree& gold);

// Blocks of "base_score<TAB>s-expression" lines separated by blank lines.
std::vector<std::vector<ScoredTree>> read_candidates(const std::string& path);

struct RerankExample {
  BinaryTree gold;
  std::vector<BinaryTree> candidates;
};

// Per-example Adam updates on the hinge; returns the mean loss of each epoch.
std::vector<double> train_reranker(Reranker& r, std::span<const RerankExample> data, int epochs,
                                   std::uint64_t seed, const AdamOptions& adam = {});

}  // namespace lextree
