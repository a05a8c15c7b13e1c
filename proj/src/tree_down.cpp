#include "lextree/tree_down.hpp"

#include <stdexcept>
#include <string>

namespace lextree {

TopDownParams TopDownParams::create(ParamSet& ps, std::size_t embed_dim, std::size_t hidden_dim,
                                    std::uint64_t seed) {
  TopDownParams p;
  p.root = LstmCellParams::create(ps, "down_root", embed_dim, hidden_dim, seed);
  p.left = LstmCellParams::create(ps, "down_left", embed_dim, hidden_dim, seed);
  p.right = LstmCellParams::create(ps, "down_right", embed_dim, hidden_dim, seed);
  return p;
}

const LstmCellParams& TopDownParams::for_side(Side side) const {
  switch (side) {
    case Side::Root: return root;
    case Side::Left: return left;
    case Side::Right: return right;
  }
  throw std::logic_error("unreachable side");
}

DownNodeState step_down(Graph& g, Expr x, const DownNodeState& parent, Side side,
                        const TopDownParams& p, const DownOptions& options, Expr parent_head) {
  CellStepOptions cell;
  if (options.literal_equations) {
    cell.output_from_previous_cell = true;
    cell.g_input = parent_head.valid() ? parent_head : x;
  }
  return lstm_cell_step(g, x, parent, p.for_side(side), cell);
}

std::vector<DownNodeState> encode_down(Graph& g, const BinaryTree& tree,
                                       std::span<const Expr> heads, const TopDownParams& p,
                                       const DownOptions& options) {
  if (heads.size() != tree.size())
    throw std::invalid_argument("encode_down: " + std::to_string(heads.size()) + " heads for " +
                                std::to_string(tree.size()) + " nodes");
  for (const auto& h : heads)
    if (!h.valid()) throw std::invalid_argument("encode_down: missing head vector");

  std::vector<DownNodeState> states(tree.size());
  for (int id : tree.preorder()) {
    const auto& n = tree.node(id);
    const auto at = static_cast<std::size_t>(id);
    if (n.parent < 0) {
      states[at] = step_down(g, heads[at], zero_state(g, p.root.hidden_dim()), Side::Root, p, options);
      continue;
    }
    const auto& parent = tree.node(n.parent);
    const Side side = parent.left == id ? Side::Left : Side::Right;
    const auto up = static_cast<std::size_t>(n.parent);
    states[at] = step_down(g, heads[at], states[up], side, p, options, heads[up]);
  }
  return states;
}

}  // namespace lextree
