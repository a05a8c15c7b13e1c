#include "lextree/model.hpp"

#include <cctype>
#include <memory>
#include <stdexcept>

namespace lextree {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::BiLSTM: return "biLSTM";
    case Variant::ConTree: return "conTree";
    case Variant::TopDownConTree: return "topDownConTree";
    case Variant::ConTreeLex: return "conTree+lex";
    case Variant::BiConTree: return "biconTree";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string key;
  for (char ch : name)
    if (ch != '+' && ch != '-' && ch != '_')
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (key == "bilstm") return Variant::BiLSTM;
  if (key == "contree") return Variant::ConTree;
  if (key == "topdowncontree" || key == "topdown") return Variant::TopDownConTree;
  if (key == "contreelex" || key == "lex") return Variant::ConTreeLex;
  if (key == "bicontree") return Variant::BiConTree;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected biLSTM, conTree, topDownConTree, conTree+lex, biconTree)");
}

bool ModelConfig::has_bottom_up_lstm() const {
  return variant == Variant::ConTree || variant == Variant::ConTreeLex ||
         variant == Variant::BiConTree;
}

bool ModelConfig::has_top_down() const {
  return variant == Variant::TopDownConTree || variant == Variant::BiConTree;
}

bool ModelConfig::lexicalized() const {
  return variant == Variant::ConTreeLex || variant == Variant::BiConTree;
}

bool ModelConfig::propagates_heads() const { return lexicalized() || has_top_down(); }

std::size_t ModelConfig::representation_dim() const {
  switch (variant) {
    case Variant::BiLSTM: return 2 * hidden_dim;
    case Variant::ConTree:
    case Variant::ConTreeLex: return hidden_dim;
    case Variant::TopDownConTree: return 2 * hidden_dim;
    case Variant::BiConTree: return 3 * hidden_dim;
  }
  return 0;
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0 || output_hidden == 0 || num_classes == 0)
    throw std::invalid_argument("model dimensions must be positive");
}

int argmax(const Tensor& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

Model::Model(ModelConfig config, Vocabulary vocab, std::uint64_t seed, const EmbeddingTable* table)
    : config_(config), vocab_(std::move(vocab)), params_(std::make_unique<ParamSet>()) {
  config_.validate();
  ParamSet& ps = *params_;
  embed_ = &ps.add("embed.table", embedding_matrix(vocab_, config_.embed_dim, table, param_seed(seed, "embed.table")));
  embed_->sparse_rows = true;
  embed_->counted = false;
  embed_->regularized = config_.regularize_embeddings;

  const std::size_t e = config_.embed_dim, d = config_.hidden_dim;
  if (config_.variant == Variant::BiLSTM) {
    seq_fwd_ = LstmCellParams::create(ps, "seq_fwd", e, d, seed);
    seq_bwd_ = LstmCellParams::create(ps, "seq_bwd", e, d, seed);
  }
  if (config_.has_bottom_up_lstm() || config_.has_top_down()) {
    TreeUpParams::Options opt;
    opt.leaf_and_branch = config_.has_bottom_up_lstm();
    opt.lexicalized = config_.lexicalized();
    opt.head_gate = config_.propagates_heads() && config_.strategy == HeadStrategy::Gated;
    opt.split_forget_projection = config_.split_forget_projection;
    up_ = TreeUpParams::create(ps, e, d, opt, seed);
  }
  if (config_.has_top_down()) down_ = TopDownParams::create(ps, e, d, seed);

  const std::size_t D = config_.representation_dim(), l = config_.output_hidden,
                    k = config_.num_classes;
  W_hl_ = &ps.add("classifier.W_hl", {l, D}, Init::glorot(), seed);
  b_hl_ = &ps.add("classifier.b_hl", {l}, Init::zero(), seed);
  W_lp_ = &ps.add("classifier.W_lp", {k, l}, Init::glorot(), seed);
  b_lp_ = &ps.add("classifier.b_lp", {k}, Init::zero(), seed);
}

std::vector<Parameter*> Model::regularized_params() const {
  std::vector<Parameter*> out;
  for (auto* p : params_->all())
    if (p->regularized) out.push_back(p);
  return out;
}

std::vector<Expr> Model::leaf_inputs(Graph& g, const BinaryTree& tree, const RunMode& mode) const {
  std::vector<Expr> out;
  out.reserve(tree.num_leaves());
  for (int id : tree.leaves()) {
    Expr x = g.lookup(*embed_, vocab_.index(tree.node(id).token));
    if (mode.training()) x = dropout(x, mode.dropout, *mode.rng);
    out.push_back(x);
  }
  return out;
}

EncodedTree Model::encode(Graph& g, const BinaryTree& tree, const RunMode& mode) const {
  EncodedTree enc;
  enc.leaf_inputs = leaf_inputs(g, tree, mode);
  if (config_.variant == Variant::BiLSTM) {
    enc.span_cache.resize(tree.size());
    return enc;
  }
  UpEncodeOptions up;
  up.lexicalized = config_.lexicalized();
  up.run_lstm = config_.has_bottom_up_lstm();
  if (config_.propagates_heads()) up.strategy = config_.strategy;
  enc.up = encode_up(g, tree, enc.leaf_inputs, up_, up);

  if (config_.has_top_down()) {
    std::vector<Expr> heads(tree.size());
    for (std::size_t i = 0; i < heads.size(); ++i) heads[i] = enc.up[i].x;
    DownOptions down;
    down.literal_equations = config_.literal_topdown;
    enc.down = encode_down(g, tree, heads, down_, down);
  }
  return enc;
}

Expr Model::represent(Graph& g, const BinaryTree& tree, EncodedTree& enc, int node) const {
  const auto& n = tree.node(node);
  const auto at = static_cast<std::size_t>(node);
  if (config_.variant == Variant::BiLSTM) {
    if (enc.span_cache.size() != tree.size())
      throw std::invalid_argument("represent: encoding does not match the BiLSTM variant");
    if (!enc.span_cache[at].valid()) {
      std::span<const Expr> xs(enc.leaf_inputs.data() + n.start, n.end - n.start);
      auto s = run_bidirectional_summary(g, xs, seq_fwd_, seq_bwd_);
      const Expr parts[] = {s.forward_last, s.backward_first};
      enc.span_cache[at] = concat(parts);
    }
    return enc.span_cache[at];
  }
  if (enc.up.size() != tree.size() ||
      (config_.has_top_down() && enc.down.size() != tree.size()))
    throw std::invalid_argument("represent: encoding lacks a pass required by " +
                                std::string(variant_name(config_.variant)));

  std::vector<Expr> parts;
  if (config_.has_bottom_up_lstm()) parts.push_back(enc.up[at].h);
  if (config_.has_top_down()) {
    parts.push_back(enc.down[at].h);
    std::vector<Expr> leaf_states;
    leaf_states.reserve(n.end - n.start);
    for (std::size_t pos = n.start; pos < n.end; ++pos)
      leaf_states.push_back(enc.down[static_cast<std::size_t>(tree.leaves()[pos])].h);
    parts.push_back(mean(leaf_states));
  }
  return parts.size() == 1 ? parts[0] : concat(parts);
}

Expr Model::log_probs(Graph& g, Expr h) const {
  const Expr hidden_terms[] = {g.param(*W_hl_), h};
  const Expr hidden = relu(affine(g.param(*b_hl_), hidden_terms));
  const Expr out_terms[] = {g.param(*W_lp_), hidden};
  return log_softmax(affine(g.param(*b_lp_), out_terms));
}

Expr Model::tree_loss(Graph& g, const BinaryTree& tree, Supervision supervision,
                      const RunMode& mode, double l2) const {
  EncodedTree enc = encode(g, tree, mode);
  std::vector<Expr> terms;
  auto supervise = [&](int id) {
    const auto cls = tree.node(id).class_id;
    if (!cls) return;
    if (*cls < 0 || static_cast<std::size_t>(*cls) >= config_.num_classes)
      throw std::invalid_argument("label " + std::to_string(*cls) + " outside the " +
                                  std::to_string(config_.num_classes) + "-class inventory");
    const Expr lp = log_probs(g, represent(g, tree, enc, id));
    terms.push_back(scale(pick(lp, static_cast<std::size_t>(*cls)), -1.0));
  };
  if (supervision == Supervision::RootOnly) {
    if (!tree.node(tree.root()).class_id)
      throw std::invalid_argument("root-only supervision on a tree with an unlabeled root");
    supervise(tree.root());
  } else {
    for (int id : tree.postorder()) supervise(id);
  }
  if (l2 > 0.0) {
    auto reg = regularized_params();
    terms.push_back(l2_penalty(g, reg, l2));
  }
  if (terms.empty()) return g.input(Tensor({1}));
  return terms.size() == 1 ? terms[0] : add(terms);
}

int Model::predict_root(const BinaryTree& tree) const {
  Graph g;
  EncodedTree enc = encode(g, tree, RunMode::eval());
  return argmax(log_probs(g, represent(g, tree, enc, tree.root())).value());
}

std::vector<int> Model::predict_nodes(const BinaryTree& tree, bool labeled_only) const {
  Graph g;
  EncodedTree enc = encode(g, tree, RunMode::eval());
  std::vector<int> out(tree.size(), -1);
  for (int id : tree.postorder()) {
    if (labeled_only && !tree.node(id).class_id) continue;
    out[static_cast<std::size_t>(id)] = argmax(log_probs(g, represent(g, tree, enc, id)).value());
  }
  return out;
}

ParamCount count_params(const ModelConfig& config) {
  Model m(config, Vocabulary{}, 0);
  ParamCount out;
  for (const auto* p : std::as_const(m.params()).all()) {
    if (!p->counted) continue;
    const std::string group = p->name.substr(0, p->name.find('.'));
    if (out.groups.empty() || out.groups.back().group != group) out.groups.push_back({group, 0});
    out.groups.back().count += p->value.size();
    out.total += p->value.size();
  }
  return out;
}

std::optional<std::size_t> reference_param_count(Variant v, std::size_t hidden_dim) {
  switch (v) {
    case Variant::ConTree:
      if (hidden_dim == 150) return 538223;
      break;
    case Variant::ConTreeLex:
      if (hidden_dim == 75) return 376673;
      if (hidden_dim == 150) return 763523;
      if (hidden_dim == 215) return 1253493;
      if (hidden_dim == 300) return 2110973;
      break;
    case Variant::BiConTree:
      if (hidden_dim == 75) return 564923;
      if (hidden_dim == 150) return 1297523;
      break;
    default:
      break;
  }
  return std::nullopt;
}

}  // namespace lextree
