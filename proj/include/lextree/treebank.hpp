#pragma once

// Binarized constituency trees, question-classification lines, pretrained
// embedding tables and the vocabulary built on top of them.

#include <array>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lextree/tensor.hpp"

namespace lextree {

// Malformed input text (trees, TREC lines, embedding files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TreeNode {
  std::string label;              // bracket label as written
  std::optional<int> class_id;    // label read as an integer class, if numeric
  std::string token;              // leaves only
  int left = -1;
  int right = -1;
  int parent = -1;
  std::size_t start = 0;          // span [start, end) in token positions
  std::size_t end = 0;

  bool is_leaf() const { return left < 0; }
};

// Strictly binary tree stored as a node array. Node ids are array indices;
// nodes may be created in any order as long as children exist before their
// parent, and finish() fixes the root, parents and spans.
class BinaryTree {
 public:
  int add_leaf(std::string label, std::string token);
  int add_branch(std::string label, int left, int right);
  // Validates the structure and computes spans. The root is the only node
  // without a parent.
  void finish();

  std::size_t size() const { return nodes_.size(); }
  int root() const { return root_; }
  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  TreeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  std::size_t num_leaves() const { return leaves_.size(); }
  // Leaf node ids in left-to-right order.
  const std::vector<int>& leaves() const { return leaves_; }
  std::vector<std::string> tokens() const;

  // Children before parents, left subtree before right subtree.
  std::vector<int> postorder() const;
  // Parents before children, left before right.
  std::vector<int> preorder() const;

  // Throws ParseError when a class id lies outside [0, num_classes).
  void check_labels(int num_classes) const;

  std::string to_string() const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<int> leaves_;
  int root_ = -1;
};

// Parses one labeled bracketing: "(label left right)" or "(label token)".
BinaryTree parse_sexpr(std::string_view text);

struct TreeReadOptions {
  // Report and skip malformed lines instead of failing on the first one.
  bool skip_invalid = false;
};

struct TreeFile {
  std::vector<BinaryTree> trees;
  std::vector<std::string> problems;  // "line N: reason" for skipped lines
};

TreeFile read_tree_file(const std::string& path, const TreeReadOptions& options = {});

// Six coarse question types, in this fixed order.
inline constexpr std::array<std::string_view, 6> kTrecLabels = {"ENTY", "HUM", "LOC",
                                                                "DESC", "NUM", "ABBR"};

struct TrecExample {
  std::string label;  // coarse label
  std::vector<std::string> tokens;
};

TrecExample parse_trec_line(std::string_view line);
int trec_class(std::string_view coarse);
std::vector<TrecExample> read_trec_file(const std::string& path);

// Gives each tree the root class of the aligned TREC example and clears all
// other node labels. Token sequences must agree.
void attach_trec_labels(std::vector<BinaryTree>& trees, const std::vector<TrecExample>& examples);

enum class SentimentTask { FineGrained, Binary };

// Fine-grained keeps labels 0..4. Binary maps {0,1}->0 and {3,4}->1, leaves
// neutral nodes unlabeled and drops trees whose root is neutral.
std::vector<BinaryTree> apply_sentiment_task(std::vector<BinaryTree> trees, SentimentTask task);

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool contains(const std::string& word) const { return rows_.contains(word); }
  const std::vector<double>& vector(const std::string& word) const;
  const std::vector<double>& unk_vector() const { return unk_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  void set(const std::string& word, std::vector<double> v);
  void set_unk(std::vector<double> v) { unk_ = std::move(v); }
  void warn(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> rows_;
  std::vector<double> unk_;
  std::vector<std::string> warnings_;
};

// Reads "word v1 ... v_dim" lines. The unknown vector is the mean over every
// vector read. With `keep`, only those words are stored (the mean still
// covers the whole file).
EmbeddingTable load_embeddings(const std::string& path, std::size_t dim,
                               const std::unordered_set<std::string>* keep = nullptr);

std::string lowercase(std::string_view word);

// Exact word, then its lowercase form, then the unknown vector.
const std::vector<double>& lookup(const std::string& word, const EmbeddingTable& table);

// Word <-> row index; row 0 is the unknown token.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  std::size_t add(const std::string& word);
  // Exact match, then lowercase, then kUnk.
  std::size_t index(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.contains(word); }
  const std::string& word(std::size_t i) const { return words_[i]; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Collects every token of the given trees. With a table, a token is stored
// under the form that resolves in the table (itself or its lowercase); tokens
// with neither form map to the unknown row.
Vocabulary build_vocabulary(const std::vector<const std::vector<BinaryTree>*>& corpora,
                            const EmbeddingTable* table);

// Rows aligned with the vocabulary: table vectors where available, the
// table's unknown vector for row 0, uniform(-r, r) otherwise.
Tensor embedding_matrix(const Vocabulary& vocab, std::size_t dim, const EmbeddingTable* table,
                        std::uint64_t seed);

}  // namespace lextree
