#include "lextree/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace lextree {

Reranker::Reranker(RerankConfig config, Vocabulary vocab, std::vector<std::string> labels,
                   std::uint64_t seed, const EmbeddingTable* table)
    : config_(config), vocab_(std::move(vocab)), labels_(std::move(labels)),
      params_(std::make_unique<ParamSet>()) {
  if (labels_.empty()) throw std::invalid_argument("reranker: empty label inventory");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (!label_ids_.emplace(labels_[i], i).second)
      throw std::invalid_argument("reranker: duplicate label '" + labels_[i] + "'");

  ParamSet& ps = *params_;
  const std::size_t e = config_.embed_dim, d = config_.hidden_dim, l = config_.score_hidden;
  embed_ = &ps.add("embed.table", embedding_matrix(vocab_, e, table, param_seed(seed, "embed.table")));
  embed_->sparse_rows = true;
  embed_->counted = false;
  embed_->regularized = false;

  TreeUpParams::Options opt;
  opt.lexicalized = true;
  opt.head_gate = config_.strategy == HeadStrategy::Gated;
  up_ = TreeUpParams::create(ps, e, d, opt, seed);

  W_L_ = &ps.add("rerank.W_L", {l, d}, Init::glorot(), seed);
  W_R_ = &ps.add("rerank.W_R", {l, d}, Init::glorot(), seed);
  W_H_ = &ps.add("rerank.W_H", {l, e}, Init::glorot(), seed);
  b_ = &ps.add("rerank.b", {l}, Init::zero(), seed);
  W_out_ = &ps.add("rerank.W_out", {labels_.size(), l}, Init::glorot(), seed);
}

std::size_t Reranker::label_index(const std::string& label) const {
  auto it = label_ids_.find(label);
  if (it == label_ids_.end()) throw std::invalid_argument("reranker: unknown label '" + label + "'");
  return it->second;
}

std::vector<UpNodeState> Reranker::encode(Graph& g, const BinaryTree& tree) const {
  std::vector<Expr> xs;
  xs.reserve(tree.num_leaves());
  for (int id : tree.leaves()) xs.push_back(g.lookup(*embed_, vocab_.index(tree.node(id).token)));
  UpEncodeOptions opt;
  opt.lexicalized = true;
  opt.strategy = config_.strategy;
  return encode_up(g, tree, xs, up_, opt);
}

Expr Reranker::node_score(Graph& g, std::size_t label, Expr n_left, Expr n_right, Expr head) const {
  if (label >= labels_.size())
    throw std::invalid_argument("reranker: label index " + std::to_string(label) + " out of range");
  const Expr terms[] = {g.param(*W_L_), n_left, g.param(*W_R_), n_right, g.param(*W_H_), head};
  const Expr o = relu(affine(g.param(*b_), terms));
  return pick(log_softmax(matvec(g.param(*W_out_), o)), label);
}

Expr Reranker::tree_score(Graph& g, const BinaryTree& tree) const {
  // check labels first so an unknown one fails before any compute
  std::vector<std::pair<int, std::size_t>> branches;
  for (int id : tree.postorder()) {
    const auto& n = tree.node(id);
    if (!n.is_leaf()) branches.emplace_back(id, label_index(n.label));
  }
  if (branches.empty()) return g.input(Tensor({1}));
  const auto states = encode(g, tree);
  std::vector<Expr> terms;
  for (auto [id, label] : branches) {
    const auto& n = tree.node(id);
    terms.push_back(node_score(g, label, states[static_cast<std::size_t>(n.left)].h,
                               states[static_cast<std::size_t>(n.right)].h,
                               states[static_cast<std::size_t>(id)].x));
  }
  return terms.size() == 1 ? terms[0] : add(terms);
}

double Reranker::score(const BinaryTree& tree) const {
  Graph g;
  return tree_score(g, tree).scalar();
}

namespace {

bool same_tokens(const BinaryTree& a, const BinaryTree& b) { return a.tokens() == b.tokens(); }

}  // namespace

Expr Reranker::margin_loss(Graph& g, const BinaryTree& gold,
                           std::span<const BinaryTree> candidates) const {
  if (candidates.empty()) throw std::invalid_argument("margin_loss: empty candidate list");
  const Expr f_gold = tree_score(g, gold);
  Expr best;
  double best_value = 0.0;
  for (const auto& y : candidates) {
    if (!same_tokens(y, gold))
      throw std::invalid_argument("margin_loss: candidate tokens differ from the gold sentence");
    const std::size_t cost = bracket_mismatch(y, gold);
    // a candidate with the gold bracketing is the gold tree itself
    if (cost == 0 && bracket_mismatch(gold, y) == 0) continue;
    const Expr f = tree_score(g, y);
    const double v = f.scalar() + config_.margin_scale * static_cast<double>(cost);
    if (!best.valid() || v > best_value) {
      best_value = v;
      const Expr parts[] = {f, g.input(Tensor::vector({config_.margin_scale * static_cast<double>(cost)}))};
      best = add(parts);
    }
  }
  if (!best.valid() || best_value - f_gold.scalar() <= 0.0) return g.input(Tensor({1}));
  return add(best, scale(f_gold, -1.0));
}

std::vector<std::string> branch_labels(std::span<const BinaryTree> trees) {
  std::set<std::string> out;
  for (const auto& t : trees)
    for (const auto& n : t.nodes())
      if (!n.is_leaf()) out.insert(n.label);
  return {out.begin(), out.end()};
}

std::vector<Bracket> labeled_brackets(const BinaryTree& tree) {
  std::vector<Bracket> out;
  for (const auto& n : tree.nodes())
    if (!n.is_leaf()) out.emplace_back(n.label, n.start, n.end);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::size_t matched_brackets(const std::vector<Bracket>& a, const std::vector<Bracket>& b) {
  std::vector<Bracket> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.size();
}

}  // namespace

std::size_t bracket_mismatch(const BinaryTree& candidate, const BinaryTree& gold) {
  const auto c = labeled_brackets(candidate);
  return c.size() - matched_brackets(c, labeled_brackets(gold));
}

double Parseval::precision() const { return candidate ? static_cast<double>(matched) / candidate : 0.0; }
double Parseval::recall() const { return gold ? static_cast<double>(matched) / gold : 0.0; }
double Parseval::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Parseval parseval(const BinaryTree& candidate, const BinaryTree& gold) {
  const auto c = labeled_brackets(candidate);
  const auto g = labeled_brackets(gold);
  return {matched_brackets(c, g), c.size(), g.size()};
}

void score_candidates(const Reranker& r, std::span<ScoredTree> candidates, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  // unknown labels fail here, before the parallel region
  for (const auto& c : candidates)
    for (const auto& n : c.tree.nodes())
      if (!n.is_leaf()) r.label_index(n.label);
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& c = candidates[static_cast<std::size_t>(i)];
    c.model_score = r.score(c.tree);
    c.combined = alpha * c.model_score + (1.0 - alpha) * c.base_score;
  }
}

std::size_t rerank(std::span<const ScoredTree> candidates) {
  if (candidates.empty()) throw std::invalid_argument("rerank: empty candidate list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = candidates[i];
    const auto& b = candidates[best];
    if (a.combined > b.combined || (a.combined == b.combined && a.base_score > b.base_score))
      best = i;
  }
  return best;
}

std::size_t oracle_select(std::span<const ScoredTree> candidates, const BinaryTree& gold) {
  if (candidates.empty()) throw std::invalid_argument("oracle_select: empty candidate list");
  std::size_t best = 0;
  double best_f1 = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double f1 = parseval(candidates[i].tree, gold).f1();
    if (f1 > best_f1) {
      best_f1 = f1;
      best = i;
    }
  }
  return best;
}

std::vector<std::vector<ScoredTree>> read_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open candidate file " + path);
  std::vector<std::vector<ScoredTree>> out;
  std::vector<ScoredTree> block;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!block.empty()) out.push_back(std::move(block));
    block.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected base_score<TAB>tree");
    ScoredTree c;
    try {
      std::size_t used = 0;
      c.base_score = std::stod(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad base score '" +
                       line.substr(0, tab) + "'");
    }
    try {
      c.tree = parse_sexpr(std::string_view(line).substr(tab + 1));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    block.push_back(std::move(c));
  }
  flush();
  return out;
}

std::vector<double> train_reranker(Reranker& r, std::span<const RerankExample> data, int epochs,
                                   std::uint64_t seed, const AdamOptions& adam_options) {
  if (data.empty()) throw std::invalid_argument("train_reranker: no examples");
  Adam adam(r.params(), adam_options);
  std::mt19937_64 rng(param_seed(seed, "order"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      Graph g;
      Expr loss = r.margin_loss(g, data[idx].gold, data[idx].candidates);
      const double v = loss.scalar();
      if (!std::isfinite(v)) throw NumericalError(seed, epoch, idx, v);
      if (v > 0.0) {
        g.backward(loss);
        adam.step();
      }
      total += v;
    }
    losses.push_back(total / static_cast<double>(data.size()));
  }
  return losses;
}

}  // namespace lextree
