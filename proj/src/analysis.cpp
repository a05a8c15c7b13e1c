#include "lextree/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lextree {

double cosine_similarity(std::span<const double> a, std::span<const double> b, bool* zero_norm) {
  if (a.size() != b.size())
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (zero_norm) *zero_norm = true;
    return 0.0;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

HeadAssignment extract_heads(const BinaryTree& tree, const EncodedTree& enc) {
  if (enc.up.size() != tree.size())
    throw std::invalid_argument("extract_heads: encoding has no bottom-up pass");
  HeadAssignment out(tree.size());
  for (int id : tree.postorder()) {
    const auto& n = tree.node(id);
    NodeHead& h = out[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      h.head_leaf = id;
      h.head_token = n.token;
      continue;
    }
    const Expr xp = enc.up[static_cast<std::size_t>(id)].x;
    const Expr xl = enc.up[static_cast<std::size_t>(n.left)].x;
    const Expr xr = enc.up[static_cast<std::size_t>(n.right)].x;
    if (!xp.valid() || !xl.valid() || !xr.valid())
      throw std::invalid_argument("extract_heads: head vectors were not propagated");
    h.sim_left = cosine_similarity(xp.value().data(), xl.value().data(), &h.zero_norm);
    h.sim_right = cosine_similarity(xp.value().data(), xr.value().data(), &h.zero_norm);
    h.tie = h.sim_left == h.sim_right;
    h.chosen = h.sim_right > h.sim_left ? Child::Right : Child::Left;
    const auto& from = out[static_cast<std::size_t>(h.chosen == Child::Left ? n.left : n.right)];
    h.head_leaf = from.head_leaf;
    h.head_token = from.head_token;
  }
  return out;
}

namespace {

void render(const BinaryTree& tree, const HeadAssignment& heads, int id, int depth,
            std::ostringstream& os) {
  const auto& n = tree.node(id);
  const auto& h = heads[static_cast<std::size_t>(id)];
  os << std::string(2 * static_cast<std::size_t>(depth), ' ');
  if (n.is_leaf()) {
    os << n.label << ' ' << n.token << '\n';
    return;
  }
  os << n.label << " ⟨" << h.head_token << "⟩";
  os.precision(3);
  os << std::fixed << "  L=" << h.sim_left << " R=" << h.sim_right;
  if (h.tie) os << " tie";
  if (h.zero_norm) os << " zero-norm";
  os << '\n';
  render(tree, heads, n.left, depth + 1, os);
  render(tree, heads, n.right, depth + 1, os);
}

}  // namespace

std::string render_heads(const BinaryTree& tree, const HeadAssignment& heads) {
  std::ostringstream os;
  render(tree, heads, tree.root(), 0, os);
  return os.str();
}

std::string head_records(const BinaryTree& tree, const HeadAssignment& heads) {
  std::string out;
  for (int id : tree.preorder()) {
    const auto& n = tree.node(id);
    const auto& h = heads[static_cast<std::size_t>(id)];
    nlohmann::json j{{"id", id},
                     {"span", {n.start, n.end}},
                     {"label", n.label},
                     {"head", h.head_token}};
    if (!n.is_leaf()) {
      j["sim_left"] = h.sim_left;
      j["sim_right"] = h.sim_right;
      j["child"] = h.chosen == Child::Left ? "left" : "right";
      if (h.tie) j["tie"] = true;
      if (h.zero_norm) j["zero_norm"] = true;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

bool has_negation(std::span<const std::string> tokens) {
  for (const auto& t : tokens) {
    const std::string w = lowercase(t);
    for (auto cue : kNegationCues)
      if (w == cue) return true;
  }
  return false;
}

std::string length_bucket(std::size_t length) {
  const std::size_t hi = length == 0 ? kLengthBucketWidth
                                     : ((length + kLengthBucketWidth - 1) / kLengthBucketWidth) *
                                           kLengthBucketWidth;
  return "(" + std::to_string(hi - kLengthBucketWidth) + "," + std::to_string(hi) + "]";
}

std::vector<BucketRow> bucket_accuracy(std::span<const SentenceOutcome> outcomes,
                                       Bucketing bucketing, int num_classes) {
  std::vector<BucketRow> rows;
  auto named = [](std::string name) {
    BucketRow r;
    r.name = std::move(name);
    return r;
  };
  auto bucket_of = [&](const SentenceOutcome& o) -> std::size_t {
    switch (bucketing) {
      case Bucketing::Length:
        return o.tokens.empty() ? 0 : (o.tokens.size() - 1) / kLengthBucketWidth;
      case Bucketing::Class:
        if (o.gold < 0 || o.gold >= num_classes)
          throw std::invalid_argument("bucket_accuracy: gold class " + std::to_string(o.gold) +
                                      " outside 0.." + std::to_string(num_classes - 1));
        return static_cast<std::size_t>(o.gold);
      case Bucketing::Negation:
        return has_negation(o.tokens) ? 0 : 1;
    }
    return 0;
  };

  switch (bucketing) {
    case Bucketing::Length: {
      std::size_t n = 1;
      for (const auto& o : outcomes) n = std::max(n, bucket_of(o) + 1);
      for (std::size_t b = 0; b < n; ++b) rows.push_back(named(length_bucket((b + 1) * kLengthBucketWidth)));
      break;
    }
    case Bucketing::Class:
      if (num_classes <= 0) throw std::invalid_argument("bucket_accuracy: class bucketing needs num_classes");
      for (int k = 0; k < num_classes; ++k) rows.push_back(named("class " + std::to_string(k)));
      break;
    case Bucketing::Negation:
      rows.push_back(named("negation"));
      rows.push_back(named("no negation"));
      break;
  }
  for (const auto& o : outcomes) {
    auto& row = rows[bucket_of(o)];
    ++row.total;
    if (o.predicted == o.gold) ++row.correct;
  }
  for (auto& row : rows)
    if (row.total) row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.total);
  return rows;
}

std::optional<double> reference_strategy_accuracy(HeadStrategy s) {
  switch (s) {
    case HeadStrategy::Left: return 51.1;
    case HeadStrategy::Right: return 51.6;
    case HeadStrategy::Average: return 51.8;
    case HeadStrategy::Gated: return 53.5;
  }
  return std::nullopt;
}

std::vector<StrategyRow> compare_strategies(const TrainConfig& base, const Vocabulary& vocab,
                                            const EmbeddingTable* table,
                                            std::span<const BinaryTree> train_set,
                                            std::span<const BinaryTree> dev_set,
                                            std::span<const BinaryTree> test_set,
                                            const CompareOptions& options,
                                            const EpochCallback& on_epoch) {
  if (!base.model.propagates_heads())
    throw std::invalid_argument(std::string("compare_strategies: variant ") +
                                std::string(variant_name(base.model.variant)) +
                                " does not use head vectors");
  auto run = [&](std::string name, HeadStrategy s, bool zero_gate) {
    TrainConfig cfg = base;
    cfg.model.strategy = s;
    cfg.zero_frozen_head_gate = zero_gate;
    TrainResult r = train(cfg, vocab, table, train_set, dev_set, on_epoch);
    StrategyRow row{std::move(name), r.best_dev_root_acc, std::nullopt,
                    zero_gate ? std::nullopt : reference_strategy_accuracy(s), r.best_seed,
                    r.best_epoch};
    if (!test_set.empty()) row.test_root_acc = evaluate(r.best_model, test_set).root_acc();
    return row;
  };
  std::vector<StrategyRow> rows;
  for (auto s : options.strategies) rows.push_back(run(std::string(strategy_name(s)), s, false));
  if (options.zero_gate_control) rows.push_back(run("G(zero gate)", HeadStrategy::Gated, true));
  return rows;
}

}  // namespace lextree
