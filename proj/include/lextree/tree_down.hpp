#pragma once

// Top-down Tree LSTM. Every root-to-node path is a sequential LSTM over the
// head vectors of the nodes on it; the transition into a node uses the
// parameter set of the side it hangs on (left or right of its parent). The
// root starts from a zero state with its own parameter set.

#include <cstdint>
#include <span>
#include <vector>

#include "lextree/seq_lstm.hpp"
#include "lextree/treebank.hpp"

namespace lextree {

enum class Side { Root, Left, Right };

struct TopDownParams {
  LstmCellParams root;
  LstmCellParams left;
  LstmCellParams right;

  static TopDownParams create(ParamSet& ps, std::size_t embed_dim, std::size_t hidden_dim,
                              std::uint64_t seed);
  const LstmCellParams& for_side(Side side) const;
};

using DownNodeState = CellState;

struct DownOptions {
  // Literal variant of the transition: g reads the parent's head instead of
  // the node's own, and h = o * tanh(c_parent). Kept for comparison only.
  bool literal_equations = false;
};

DownNodeState step_down(Graph& g, Expr x, const DownNodeState& parent, Side side,
                        const TopDownParams& p, const DownOptions& options = {},
                        Expr parent_head = {});

// Pre-order encoding; `heads` is indexed by node id and must cover all nodes.
std::vector<DownNodeState> encode_down(Graph& g, const BinaryTree& tree,
                                       std::span<const Expr> heads, const TopDownParams& p,
                                       const DownOptions& options = {});

}  // namespace lextree
