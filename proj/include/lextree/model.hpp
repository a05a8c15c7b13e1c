#pragma once

// Sentence / phrase classifiers over binarized trees.
//
// Five variants share one classifier head:
//   BiLSTM          forward and backward sequential LSTMs over the span
//   ConTree         bottom-up Tree LSTM, no lexical input at branches
//   TopDownConTree  head propagation + top-down Tree LSTM only
//   ConTreeLex      bottom-up Tree LSTM with head-lexicalized gates
//   BiConTree       ConTreeLex + top-down Tree LSTM
//
// A node's representation concatenates whatever each pass provides: its
// bottom-up state, its top-down state and the mean top-down state of the
// leaves it spans. The classifier is a ReLU layer followed by log-softmax.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lextree/autodiff.hpp"
#include "lextree/params.hpp"
#include "lextree/seq_lstm.hpp"
#include "lextree/tree_down.hpp"
#include "lextree/tree_up.hpp"
#include "lextree/treebank.hpp"

namespace lextree {

enum class Variant { BiLSTM, ConTree, TopDownConTree, ConTreeLex, BiConTree };

std::string_view variant_name(Variant v);
// Accepts the display names case-insensitively, ignoring '+', '-' and '_'
// ("conTree+lex", "biconTree", "topdown-contree", ...).
Variant parse_variant(std::string_view name);

enum class Supervision { RootOnly, AllNodes };

struct ModelConfig {
  Variant variant = Variant::BiConTree;
  std::size_t embed_dim = 300;
  std::size_t hidden_dim = 150;
  std::size_t output_hidden = 128;
  std::size_t num_classes = 5;
  HeadStrategy strategy = HeadStrategy::Gated;
  bool split_forget_projection = false;
  bool literal_topdown = false;
  bool regularize_embeddings = false;

  bool has_bottom_up_lstm() const;
  bool has_top_down() const;
  bool lexicalized() const;
  bool propagates_heads() const;
  std::size_t representation_dim() const;
  void validate() const;
};

struct EncodedTree {
  std::vector<Expr> leaf_inputs;       // by leaf position
  std::vector<UpNodeState> up;         // by node id; empty for BiLSTM
  std::vector<DownNodeState> down;     // by node id; empty without the top-down pass
  std::vector<Expr> span_cache;        // BiLSTM span representations, by node id
};

// Training passes dropout over the lexical inputs; evaluation does not.
struct RunMode {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  static RunMode eval() { return {}; }
  static RunMode train(double p, std::mt19937_64& rng) { return {p, &rng}; }
  bool training() const { return rng != nullptr && dropout > 0.0; }
};

class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab, std::uint64_t seed,
        const EmbeddingTable* table = nullptr);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamSet& params() { return *params_; }
  const ParamSet& params() const { return *params_; }

  Parameter& embeddings() const { return *embed_; }
  const TreeUpParams& up_params() const { return up_; }
  const TopDownParams& down_params() const { return down_; }

  std::vector<Parameter*> regularized_params() const;

  std::vector<Expr> leaf_inputs(Graph& g, const BinaryTree& tree, const RunMode& mode) const;
  EncodedTree encode(Graph& g, const BinaryTree& tree, const RunMode& mode) const;
  Expr represent(Graph& g, const BinaryTree& tree, EncodedTree& enc, int node) const;
  Expr log_probs(Graph& g, Expr h) const;

  // Negative log-likelihood summed over the supervised nodes, plus
  // (l2 / 2) * ||theta||^2 once.
  Expr tree_loss(Graph& g, const BinaryTree& tree, Supervision supervision, const RunMode& mode,
                 double l2) const;

  int predict_root(const BinaryTree& tree) const;
  // Argmax label per node id; -1 for nodes skipped when `labeled_only`.
  std::vector<int> predict_nodes(const BinaryTree& tree, bool labeled_only) const;

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<ParamSet> params_;
  Parameter* embed_ = nullptr;
  SeqParams seq_fwd_{};
  SeqParams seq_bwd_{};
  TreeUpParams up_{};
  TopDownParams down_{};
  Parameter *W_hl_ = nullptr, *b_hl_ = nullptr, *W_lp_ = nullptr, *b_lp_ = nullptr;
};

int argmax(const Tensor& v);

struct ParamGroupCount {
  std::string group;
  std::size_t count = 0;
};

struct ParamCount {
  std::size_t total = 0;
  std::vector<ParamGroupCount> groups;  // in creation order
};

// Non-embedding trainable scalars, grouped by the name prefix before '.'.
ParamCount count_params(const ModelConfig& config);

// Reference totals for |h| = 150 (ConTree, ConTree+Lex, BiConTree).
std::optional<std::size_t> reference_param_count(Variant v, std::size_t hidden_dim);

}  // namespace lextree
