#pragma once

// Bottom-up constituency Tree LSTM with head-lexicon propagation.
//
// Leaves run a predecessor-free LSTM step on their word vector. A branch
// merges its children's cells through separate left/right forget gates:
//
//   c = f_L * c_L + f_R * c_R + i * g
//   h = o * tanh(c)
//
// In lexicalized mode the branch's head vector x additionally feeds i, f_L,
// f_R, o and g. Heads are chosen per branch by one of four strategies: left
// child, right child, average, or a learned sigmoid gate
//
//   z = sigmoid(W_zx_L x_L + W_zx_R x_R + b_z),  x = z * x_L + (1 - z) * x_R.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lextree/autodiff.hpp"
#include "lextree/params.hpp"
#include "lextree/treebank.hpp"

namespace lextree {

enum class HeadStrategy { Left, Right, Average, Gated };

std::string_view strategy_name(HeadStrategy s);
HeadStrategy parse_strategy(std::string_view name);

struct TreeUpParams {
  // leaf step
  Parameter *leaf_W_xi = nullptr, *leaf_W_xo = nullptr, *leaf_W_xg = nullptr;
  Parameter *leaf_W_co = nullptr;
  Parameter *leaf_b_i = nullptr, *leaf_b_o = nullptr, *leaf_b_g = nullptr;

  // baseline branch step
  Parameter *W_hi_L = nullptr, *W_hi_R = nullptr, *W_ci_L = nullptr, *W_ci_R = nullptr;
  Parameter *b_i = nullptr;
  Parameter *W_ho_L = nullptr, *W_ho_R = nullptr, *W_co = nullptr, *b_o = nullptr;
  Parameter *W_hfl_L = nullptr, *W_hfl_R = nullptr, *W_cfl_L = nullptr, *W_cfl_R = nullptr;
  Parameter *b_fl = nullptr;
  Parameter *W_hfr_L = nullptr, *W_hfr_R = nullptr, *W_cfr_L = nullptr, *W_cfr_R = nullptr;
  Parameter *b_fr = nullptr;
  Parameter *W_hg_L = nullptr, *W_hg_R = nullptr, *b_g = nullptr;

  // lexicalized additions; W_xf_r is set only when the forget projection is split
  Parameter *W_xi = nullptr, *W_xf = nullptr, *W_xf_r = nullptr, *W_xo = nullptr,
            *W_xg = nullptr;

  // head gate
  Parameter *W_zx_L = nullptr, *W_zx_R = nullptr, *b_z = nullptr;

  struct Options {
    bool lexicalized = false;
    bool head_gate = false;
    bool split_forget_projection = false;
    bool leaf_and_branch = true;  // false: head gate only (top-down-only models)
  };

  static TreeUpParams create(ParamSet& ps, std::size_t embed_dim, std::size_t hidden_dim,
                             const Options& options, std::uint64_t seed);

  bool lexicalized() const { return W_xi != nullptr; }
  bool has_head_gate() const { return W_zx_L != nullptr; }
  std::vector<Parameter*> head_gate() const;
};

struct UpNodeState {
  Expr h;
  Expr c;
  Expr x;  // head-lexicon vector; invalid when heads are not propagated
  Expr z;  // head gate activation (strategy G branches only)
};

UpNodeState leaf_step(Graph& g, Expr x, const TreeUpParams& p);

struct HeadCombination {
  Expr x;
  Expr z;
};

HeadCombination head_combine(Graph& g, Expr x_left, Expr x_right, const TreeUpParams& p);

// Head of a branch under the given strategy; `gate` receives z for G.
Expr select_head(Graph& g, HeadStrategy strategy, Expr x_left, Expr x_right,
                 const TreeUpParams& p, Expr* gate = nullptr);

// `head` must be valid in lexicalized mode; it is ignored by the baseline gates.
UpNodeState branch_step(Graph& g, Expr head, const UpNodeState& left, const UpNodeState& right,
                        const TreeUpParams& p, bool lexicalized);

struct UpEncodeOptions {
  std::optional<HeadStrategy> strategy;  // unset: heads are not propagated
  bool lexicalized = false;
  bool run_lstm = true;                  // false: propagate heads only
};

// Post-order encoding; result is indexed by node id. `leaf_inputs` holds the
// word vector of each leaf in left-to-right order.
std::vector<UpNodeState> encode_up(Graph& g, const BinaryTree& tree,
                                   std::span<const Expr> leaf_inputs, const TreeUpParams& p,
                                   const UpEncodeOptions& options);

}  // namespace lextree
