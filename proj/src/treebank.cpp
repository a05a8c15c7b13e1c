#include "lextree/treebank.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace lextree {

// ---------------------------------------------------------------- trees

int BinaryTree::add_leaf(std::string label, std::string token) {
  TreeNode n;
  n.label = std::move(label);
  n.token = std::move(token);
  nodes_.push_back(std::move(n));
  root_ = -1;
  return static_cast<int>(nodes_.size()) - 1;
}

int BinaryTree::add_branch(std::string label, int left, int right) {
  const int count = static_cast<int>(nodes_.size());
  if (left < 0 || right < 0 || left >= count || right >= count || left == right)
    throw ParseError("branch children must be two distinct existing nodes");
  TreeNode n;
  n.label = std::move(label);
  n.left = left;
  n.right = right;
  nodes_.push_back(std::move(n));
  root_ = -1;
  return count;
}

namespace {

std::optional<int> numeric_label(const std::string& label) {
  if (label.empty() || label.size() > 9) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
  if (ec != std::errc() || ptr != label.data() + label.size() || value < 0) return std::nullopt;
  return value;
}

}  // namespace

void BinaryTree::finish() {
  if (nodes_.empty()) throw ParseError("empty tree");
  for (auto& n : nodes_) {
    n.parent = -1;
    if (n.label.empty()) throw ParseError("empty label");
    n.class_id = numeric_label(n.label);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) continue;
    for (int c : {n.left, n.right}) {
      auto& child = nodes_[static_cast<std::size_t>(c)];
      if (child.parent >= 0) throw ParseError("node " + std::to_string(c) + " has two parents");
      child.parent = static_cast<int>(i);
    }
  }
  root_ = -1;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].parent >= 0) continue;
    if (root_ >= 0) throw ParseError("tree has more than one root");
    root_ = static_cast<int>(i);
  }
  if (root_ < 0) throw ParseError("tree has no root");

  // Assign spans left to right; also detects unreachable nodes.
  leaves_.clear();
  std::vector<int> order = preorder();
  if (order.size() != nodes_.size()) throw ParseError("tree has unreachable nodes");
  for (int id : order) {
    if (node(id).is_leaf()) {
      node(id).start = leaves_.size();
      node(id).end = leaves_.size() + 1;
      leaves_.push_back(id);
    }
  }
  for (int id : postorder()) {
    auto& n = node(id);
    if (n.is_leaf()) continue;
    n.start = node(n.left).start;
    n.end = node(n.right).end;
  }
}

std::vector<std::string> BinaryTree::tokens() const {
  std::vector<std::string> out;
  out.reserve(leaves_.size());
  for (int id : leaves_) out.push_back(node(id).token);
  return out;
}

std::vector<int> BinaryTree::preorder() const {
  std::vector<int> out;
  if (root_ < 0) return out;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const auto& n = node(id);
    if (!n.is_leaf()) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
    if (out.size() > nodes_.size()) throw ParseError("tree contains a cycle");
  }
  return out;
}

std::vector<int> BinaryTree::postorder() const {
  // Reverse of (root, right, left) preorder is (left, right, root) postorder.
  std::vector<int> mirrored;
  mirrored.reserve(nodes_.size());
  std::vector<int> stack;
  if (root_ >= 0) stack.push_back(root_);
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    mirrored.push_back(id);
    const auto& n = node(id);
    if (!n.is_leaf()) {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  std::reverse(mirrored.begin(), mirrored.end());
  return mirrored;
}

void BinaryTree::check_labels(int num_classes) const {
  for (const auto& n : nodes_)
    if (n.class_id && (*n.class_id < 0 || *n.class_id >= num_classes))
      throw ParseError("label " + n.label + " outside [0, " + std::to_string(num_classes) + ")");
}

std::string BinaryTree::to_string() const {
  std::string out;
  // Explicit stack: (node, stage) where stage 0 opens and stage 1 closes.
  std::vector<std::pair<int, int>> stack{{root_, 0}};
  while (!stack.empty()) {
    auto [id, stage] = stack.back();
    stack.pop_back();
    const auto& n = node(id);
    if (stage == 1) {
      out += ')';
      continue;
    }
    if (!out.empty() && out.back() != '(') out += ' ';
    out += '(';
    out += n.label;
    if (n.is_leaf()) {
      out += ' ';
      out += n.token;
      out += ')';
    } else {
      stack.push_back({id, 1});
      stack.push_back({n.right, 0});
      stack.push_back({n.left, 0});
    }
  }
  return out;
}

namespace {

class SexprReader {
 public:
  explicit SexprReader(std::string_view text) : text_(text) {}

  BinaryTree read() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty input");
    BinaryTree tree;
    read_node(tree);
    skip_space();
    if (pos_ < text_.size()) throw error("trailing text after tree");
    tree.finish();
    return tree;
  }

 private:
  ParseError error(const std::string& what) const {
    return ParseError(what + " at offset " + std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string atom() {
    std::size_t begin = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')')
      ++pos_;
    return std::string(text_.substr(begin, pos_ - begin));
  }

  int read_node(BinaryTree& tree) {
    skip_space();
    if (pos_ >= text_.size()) throw error("unbalanced parentheses: unexpected end");
    if (text_[pos_] != '(') throw error("expected '('");
    ++pos_;
    skip_space();
    std::string label = atom();
    if (label.empty()) throw error("empty label");
    skip_space();
    if (pos_ >= text_.size()) throw error("unbalanced parentheses: unexpected end");

    if (text_[pos_] != '(') {
      std::string token = atom();
      if (token.empty()) throw error("leaf without token");
      skip_space();
      if (pos_ >= text_.size()) throw error("unbalanced parentheses: unexpected end");
      if (text_[pos_] != ')') throw error("leaf (" + label + " " + token + " ...) has extra content");
      ++pos_;
      return tree.add_leaf(std::move(label), std::move(token));
    }

    std::vector<int> children;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) throw error("unbalanced parentheses: unexpected end");
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      if (text_[pos_] != '(') throw error("token mixed with subtrees under " + label);
      children.push_back(read_node(tree));
    }
    if (children.size() != 2)
      throw ParseError("branch " + label + " has " + std::to_string(children.size()) +
                       " children; trees must be binary");
    return tree.add_branch(std::move(label), children[0], children[1]);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace

BinaryTree parse_sexpr(std::string_view text) { return SexprReader(text).read(); }

TreeFile read_tree_file(const std::string& path, const TreeReadOptions& options) {
  auto in = open_input(path);
  TreeFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.trees.push_back(parse_sexpr(line));
    } catch (const ParseError& e) {
      std::string msg = path + ":" + std::to_string(line_no) + ": " + e.what();
      if (!options.skip_invalid) throw ParseError(msg);
      out.problems.push_back(std::move(msg));
    }
  }
  return out;
}

// ---------------------------------------------------------------- TREC

int trec_class(std::string_view coarse) {
  for (std::size_t i = 0; i < kTrecLabels.size(); ++i)
    if (kTrecLabels[i] == coarse) return static_cast<int>(i);
  return -1;
}

TrecExample parse_trec_line(std::string_view line) {
  line = trim(line);
  const auto colon = line.find(':');
  const auto space = line.find_first_of(" \t");
  if (colon == std::string_view::npos || (space != std::string_view::npos && space < colon))
    throw ParseError("TREC line has no COARSE:fine label");
  TrecExample ex;
  ex.label = std::string(line.substr(0, colon));
  if (trec_class(ex.label) < 0) throw ParseError("unknown question type '" + ex.label + "'");
  if (space != std::string_view::npos) ex.tokens = split_ws(line.substr(space));
  return ex;
}

std::vector<TrecExample> read_trec_file(const std::string& path) {
  auto in = open_input(path);
  std::vector<TrecExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse_trec_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void attach_trec_labels(std::vector<BinaryTree>& trees, const std::vector<TrecExample>& examples) {
  if (trees.size() != examples.size())
    throw ParseError("TREC file has " + std::to_string(examples.size()) + " questions but tree file has " +
                     std::to_string(trees.size()) + " trees");
  for (std::size_t i = 0; i < trees.size(); ++i) {
    auto& t = trees[i];
    if (t.tokens() != examples[i].tokens)
      throw ParseError("tree " + std::to_string(i + 1) + " tokens differ from TREC question");
    for (std::size_t n = 0; n < t.size(); ++n) t.node(static_cast<int>(n)).class_id.reset();
    t.node(t.root()).class_id = trec_class(examples[i].label);
  }
}

std::vector<BinaryTree> apply_sentiment_task(std::vector<BinaryTree> trees, SentimentTask task) {
  for (const auto& t : trees) t.check_labels(5);
  if (task == SentimentTask::FineGrained) return trees;
  std::vector<BinaryTree> out;
  for (auto& t : trees) {
    const auto root = t.node(t.root()).class_id;
    if (!root || *root == 2) continue;
    for (std::size_t n = 0; n < t.size(); ++n) {
      auto& id = t.node(static_cast<int>(n)).class_id;
      if (!id) continue;
      if (*id == 2)
        id.reset();
      else
        id = *id < 2 ? 0 : 1;
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------- embeddings

const std::vector<double>& EmbeddingTable::vector(const std::string& word) const {
  return rows_.at(word);
}

void EmbeddingTable::set(const std::string& word, std::vector<double> v) {
  if (v.size() != dim_)
    throw ShapeError("embedding for '" + word + "' has " + std::to_string(v.size()) +
                     " values, table dim is " + std::to_string(dim_));
  rows_[word] = std::move(v);
}

EmbeddingTable load_embeddings(const std::string& path, std::size_t dim,
                               const std::unordered_set<std::string>* keep) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
  auto in = open_input(path);
  EmbeddingTable table(dim);
  std::vector<double> sum(dim, 0.0);
  std::size_t count = 0;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> v(dim);
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    const auto cut = rest.find_first_of(" \t");
    if (cut == std::string_view::npos)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values, found 0");
    std::string word(rest.substr(0, cut));
    rest.remove_prefix(cut);
    std::size_t n = 0;
    const char* p = rest.data();
    const char* end = rest.data() + rest.size();
    while (true) {
      while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
      if (p == end) break;
      double x = 0.0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc())
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number in vector for '" +
                         word + "'");
      if (n < dim) v[n] = x;
      ++n;
      p = next;
    }
    // word2vec text header: "<count> <dim>"
    if (line_no == 1 && dim > 1 && n == 1 && v[0] == static_cast<double>(dim)) continue;
    if (n != dim)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values, found " + std::to_string(n));
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
    ++count;
    if (!seen.insert(word).second)
      table.warn(path + ":" + std::to_string(line_no) + ": duplicate word '" + word +
                 "', keeping the last vector");
    if (keep == nullptr || keep->contains(word)) table.set(word, v);
  }
  if (count == 0) throw ParseError(path + ": no embeddings");
  for (auto& s : sum) s /= static_cast<double>(count);
  table.set_unk(std::move(sum));
  return table;
}

std::string lowercase(std::string_view word) {
  std::string out(word);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

const std::vector<double>& lookup(const std::string& word, const EmbeddingTable& table) {
  if (table.contains(word)) return table.vector(word);
  const std::string lower = lowercase(word);
  if (table.contains(lower)) return table.vector(lower);
  return table.unk_vector();
}

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() { add(std::string(kUnkToken)); }

std::size_t Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.emplace(word, words_.size());
  if (inserted) words_.push_back(word);
  return it->second;
}

std::size_t Vocabulary::index(const std::string& word) const {
  if (auto it = index_.find(word); it != index_.end()) return it->second;
  if (auto it = index_.find(lowercase(word)); it != index_.end()) return it->second;
  return kUnk;
}

Vocabulary build_vocabulary(const std::vector<const std::vector<BinaryTree>*>& corpora,
                            const EmbeddingTable* table) {
  Vocabulary vocab;
  for (const auto* corpus : corpora) {
    for (const auto& tree : *corpus) {
      for (const auto& tok : tree.tokens()) {
        if (table == nullptr) {
          vocab.add(tok);
        } else if (table->contains(tok)) {
          vocab.add(tok);
        } else if (auto lower = lowercase(tok); table->contains(lower)) {
          vocab.add(lower);
        }
      }
    }
  }
  return vocab;
}

Tensor embedding_matrix(const Vocabulary& vocab, std::size_t dim, const EmbeddingTable* table,
                        std::uint64_t seed) {
  if (table != nullptr && table->dim() != dim)
    throw ShapeError("embedding table dim " + std::to_string(table->dim()) + " != model dim " +
                     std::to_string(dim));
  Tensor m({vocab.size(), dim});
  std::mt19937_64 rng(seed);
  const double r = std::sqrt(3.0 / static_cast<double>(dim));
  std::uniform_real_distribution<double> dist(-r, r);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto row = m.row(i);
    const std::vector<double>* src = nullptr;
    if (table != nullptr) {
      if (i == Vocabulary::kUnk)
        src = &table->unk_vector();
      else if (table->contains(vocab.word(i)))
        src = &table->vector(vocab.word(i));
    }
    if (src != nullptr)
      std::copy(src->begin(), src->end(), row.begin());
    else
      for (auto& x : row) x = dist(rng);
  }
  return m;
}

}  // namespace lextree
