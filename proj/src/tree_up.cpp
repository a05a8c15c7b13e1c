#include "lextree/tree_up.hpp"

#include <stdexcept>
#include <string>

#include "lextree/treebank.hpp"

namespace lextree {

std::string_view strategy_name(HeadStrategy s) {
  switch (s) {
    case HeadStrategy::Left: return "L";
    case HeadStrategy::Right: return "R";
    case HeadStrategy::Average: return "A";
    case HeadStrategy::Gated: return "G";
  }
  return "?";
}

HeadStrategy parse_strategy(std::string_view name) {
  if (name == "L" || name == "l") return HeadStrategy::Left;
  if (name == "R" || name == "r") return HeadStrategy::Right;
  if (name == "A" || name == "a") return HeadStrategy::Average;
  if (name == "G" || name == "g") return HeadStrategy::Gated;
  throw std::invalid_argument("unknown head strategy '" + std::string(name) +
                              "' (expected L, R, A or G)");
}

TreeUpParams TreeUpParams::create(ParamSet& ps, std::size_t embed_dim, std::size_t hidden_dim,
                                  const Options& options, std::uint64_t seed) {
  const Shape wx{hidden_dim, embed_dim};
  const Shape wh{hidden_dim, hidden_dim};
  const Shape b{hidden_dim};
  auto mat = [&](const std::string& name, const Shape& s) {
    return &ps.add(name, s, Init::glorot(), seed);
  };
  auto bias = [&](const std::string& name, const Shape& s) {
    return &ps.add(name, s, Init::zero(), seed);
  };

  TreeUpParams p;
  if (options.leaf_and_branch) {
    p.leaf_W_xi = mat("leaf.W_xi", wx);
    p.leaf_W_xo = mat("leaf.W_xo", wx);
    p.leaf_W_xg = mat("leaf.W_xg", wx);
    p.leaf_W_co = mat("leaf.W_co", wh);
    p.leaf_b_i = bias("leaf.b_i", b);
    p.leaf_b_o = bias("leaf.b_o", b);
    p.leaf_b_g = bias("leaf.b_g", b);

    p.W_hi_L = mat("branch.W_hi_L", wh);
    p.W_hi_R = mat("branch.W_hi_R", wh);
    p.W_ci_L = mat("branch.W_ci_L", wh);
    p.W_ci_R = mat("branch.W_ci_R", wh);
    p.b_i = bias("branch.b_i", b);
    p.W_ho_L = mat("branch.W_ho_L", wh);
    p.W_ho_R = mat("branch.W_ho_R", wh);
    p.W_co = mat("branch.W_co", wh);
    p.b_o = bias("branch.b_o", b);
    p.W_hfl_L = mat("branch.W_hfl_L", wh);
    p.W_hfl_R = mat("branch.W_hfl_R", wh);
    p.W_cfl_L = mat("branch.W_cfl_L", wh);
    p.W_cfl_R = mat("branch.W_cfl_R", wh);
    p.b_fl = bias("branch.b_fl", b);
    p.W_hfr_L = mat("branch.W_hfr_L", wh);
    p.W_hfr_R = mat("branch.W_hfr_R", wh);
    p.W_cfr_L = mat("branch.W_cfr_L", wh);
    p.W_cfr_R = mat("branch.W_cfr_R", wh);
    p.b_fr = bias("branch.b_fr", b);
    p.W_hg_L = mat("branch.W_hg_L", wh);
    p.W_hg_R = mat("branch.W_hg_R", wh);
    p.b_g = bias("branch.b_g", b);
  }
  if (options.lexicalized) {
    if (!options.leaf_and_branch)
      throw std::invalid_argument("lexicalized gates need the branch LSTM");
    p.W_xi = mat("lex.W_xi", wx);
    p.W_xf = mat("lex.W_xf", wx);
    if (options.split_forget_projection) p.W_xf_r = mat("lex.W_xf_r", wx);
    p.W_xo = mat("lex.W_xo", wx);
    p.W_xg = mat("lex.W_xg", wx);
  }
  if (options.head_gate) {
    const Shape wz{embed_dim, embed_dim};
    p.W_zx_L = mat("head_gate.W_zx_L", wz);
    p.W_zx_R = mat("head_gate.W_zx_R", wz);
    p.b_z = bias("head_gate.b_z", Shape{embed_dim});
  }
  return p;
}

std::vector<Parameter*> TreeUpParams::head_gate() const {
  if (!has_head_gate()) return {};
  return {W_zx_L, W_zx_R, b_z};
}

UpNodeState leaf_step(Graph& g, Expr x, const TreeUpParams& p) {
  if (p.leaf_W_xi == nullptr) throw std::invalid_argument("leaf_step: parameters lack the leaf LSTM");
  auto P = [&](Parameter* t) { return g.param(*t); };
  const Expr g_terms[] = {P(p.leaf_W_xg), x};
  const Expr gate_g = tanh(affine(P(p.leaf_b_g), g_terms));
  const Expr i_terms[] = {P(p.leaf_W_xi), x};
  const Expr gate_i = sigmoid(affine(P(p.leaf_b_i), i_terms));
  const Expr c = hadamard(gate_i, gate_g);
  const Expr o_terms[] = {P(p.leaf_W_xo), x, P(p.leaf_W_co), c};
  const Expr gate_o = sigmoid(affine(P(p.leaf_b_o), o_terms));
  return {hadamard(gate_o, tanh(c)), c, x, Expr{}};
}

HeadCombination head_combine(Graph& g, Expr x_left, Expr x_right, const TreeUpParams& p) {
  if (!p.has_head_gate()) throw std::invalid_argument("head_combine: no head-gate parameters");
  const Expr terms[] = {g.param(*p.W_zx_L), x_left, g.param(*p.W_zx_R), x_right};
  const Expr z = sigmoid(affine(g.param(*p.b_z), terms));
  const Expr x = add(hadamard(z, x_left), hadamard(complement(z), x_right));
  return {x, z};
}

Expr select_head(Graph& g, HeadStrategy strategy, Expr x_left, Expr x_right,
                 const TreeUpParams& p, Expr* gate) {
  if (x_left.value().shape() != x_right.value().shape())
    throw ShapeError("select_head: children heads differ in shape " +
                     shape_str(x_left.value().shape()) + " vs " + shape_str(x_right.value().shape()));
  switch (strategy) {
    case HeadStrategy::Left: return x_left;
    case HeadStrategy::Right: return x_right;
    case HeadStrategy::Average: return add(scale(x_left, 0.5), scale(x_right, 0.5));
    case HeadStrategy::Gated: {
      auto hc = head_combine(g, x_left, x_right, p);
      if (gate) *gate = hc.z;
      return hc.x;
    }
  }
  throw std::logic_error("unreachable head strategy");
}

UpNodeState branch_step(Graph& g, Expr head, const UpNodeState& left, const UpNodeState& right,
                        const TreeUpParams& p, bool lexicalized) {
  if (p.W_hi_L == nullptr) throw std::invalid_argument("branch_step: parameters lack the branch LSTM");
  if (lexicalized && (!p.lexicalized() || !head.valid()))
    throw std::invalid_argument("branch_step: lexicalized step needs lexical parameters and a head");
  auto P = [&](Parameter* t) { return g.param(*t); };

  // Baseline terms first; the lexical term, when present, is appended last.
  std::vector<Expr> terms;
  auto gate = [&](Parameter* bias, std::initializer_list<Expr> base, Parameter* lex) {
    terms.assign(base.begin(), base.end());
    if (lexicalized) {
      terms.push_back(P(lex));
      terms.push_back(head);
    }
    return affine(P(bias), terms);
  };

  const Expr hl = left.h, hr = right.h, cl = left.c, cr = right.c;
  const Expr gate_i = sigmoid(gate(p.b_i, {P(p.W_hi_L), hl, P(p.W_hi_R), hr, P(p.W_ci_L), cl, P(p.W_ci_R), cr}, p.W_xi));
  const Expr gate_fl = sigmoid(gate(p.b_fl, {P(p.W_hfl_L), hl, P(p.W_hfl_R), hr, P(p.W_cfl_L), cl, P(p.W_cfl_R), cr}, p.W_xf));
  const Expr gate_fr = sigmoid(gate(p.b_fr, {P(p.W_hfr_L), hl, P(p.W_hfr_R), hr, P(p.W_cfr_L), cl, P(p.W_cfr_R), cr},
                                    p.W_xf_r ? p.W_xf_r : p.W_xf));
  const Expr gate_g = tanh(gate(p.b_g, {P(p.W_hg_L), hl, P(p.W_hg_R), hr}, p.W_xg));

  const Expr cell_terms[] = {hadamard(gate_fl, cl), hadamard(gate_fr, cr), hadamard(gate_i, gate_g)};
  const Expr c = add(cell_terms);
  const Expr gate_o = sigmoid(gate(p.b_o, {P(p.W_ho_L), hl, P(p.W_ho_R), hr, P(p.W_co), c}, p.W_xo));
  return {hadamard(gate_o, tanh(c)), c, head, Expr{}};
}

std::vector<UpNodeState> encode_up(Graph& g, const BinaryTree& tree,
                                   std::span<const Expr> leaf_inputs, const TreeUpParams& p,
                                   const UpEncodeOptions& options) {
  if (leaf_inputs.size() != tree.num_leaves())
    throw ShapeError("encode_up: " + std::to_string(leaf_inputs.size()) + " leaf inputs for " +
                     std::to_string(tree.num_leaves()) + " leaves");
  if (options.lexicalized && !options.strategy)
    throw std::invalid_argument("encode_up: lexicalized encoding needs a head strategy");
  if (!options.run_lstm && !options.strategy)
    throw std::invalid_argument("encode_up: nothing to compute");

  std::vector<UpNodeState> states(tree.size());
  for (int id : tree.postorder()) {
    const auto& n = tree.node(id);
    auto& s = states[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      const Expr x = leaf_inputs[n.start];
      if (options.run_lstm)
        s = leaf_step(g, x, p);
      else
        s.x = x;
      continue;
    }
    const auto& left = states[static_cast<std::size_t>(n.left)];
    const auto& right = states[static_cast<std::size_t>(n.right)];
    Expr head, z;
    if (options.strategy) head = select_head(g, *options.strategy, left.x, right.x, p, &z);
    if (options.run_lstm)
      s = branch_step(g, head, left, right, p, options.lexicalized);
    s.x = head;
    s.z = z;
  }
  return states;
}

}  // namespace lextree
