#pragma once

// Peephole LSTM cell, the sequential LSTM built from it and its
// bidirectional wrapper.
//
//   g = tanh(W_xg x + W_hg h' + b_g)
//   i = sigmoid(W_xi x + W_hi h' + W_ci c' + b_i)
//   f = sigmoid(W_xf x + W_hf h' + W_cf c' + b_f)
//   c = f * c' + i * g
//   o = sigmoid(W_xo x + W_ho h' + W_co c + b_o)
//   h = o * tanh(c)
//
// where (h', c') is the predecessor state. Peephole weights are full
// matrices.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lextree/autodiff.hpp"
#include "lextree/params.hpp"

namespace lextree {

struct LstmCellParams {
  Parameter *W_xg = nullptr, *W_hg = nullptr, *b_g = nullptr;
  Parameter *W_xi = nullptr, *W_hi = nullptr, *W_ci = nullptr, *b_i = nullptr;
  Parameter *W_xf = nullptr, *W_hf = nullptr, *W_cf = nullptr, *b_f = nullptr;
  Parameter *W_xo = nullptr, *W_ho = nullptr, *W_co = nullptr, *b_o = nullptr;

  // Registers the 15 tensors as "<prefix>.W_xg", ... ; matrices get Glorot
  // uniform values and biases start at zero.
  static LstmCellParams create(ParamSet& ps, const std::string& prefix, std::size_t input_dim,
                               std::size_t hidden_dim, std::uint64_t seed);

  std::size_t input_dim() const { return W_xg->value.cols(); }
  std::size_t hidden_dim() const { return W_xg->value.rows(); }
  std::vector<Parameter*> all() const;
};

using SeqParams = LstmCellParams;

struct CellState {
  Expr h;
  Expr c;
};

CellState zero_state(Graph& g, std::size_t hidden_dim);

struct CellStepOptions {
  // Input used inside g; defaults to the gate input when invalid.
  Expr g_input;
  // Read h from tanh of the predecessor cell instead of the new one.
  bool output_from_previous_cell = false;
};

CellState lstm_cell_step(Graph& g, Expr x, const CellState& prev, const LstmCellParams& p,
                         const CellStepOptions& options = {});

// One step of the sequential LSTM.
CellState seq_step(Graph& g, Expr x, const CellState& prev, const SeqParams& p);

// Runs the forward and backward LSTMs from zero states and returns, for each
// position i, the forward state at i concatenated with the backward state at i.
std::vector<Expr> run_bidirectional(Graph& g, std::span<const Expr> xs, const SeqParams& fwd,
                                    const SeqParams& bwd);

struct BidirectionalSummary {
  Expr forward_last;   // forward state after the last element
  Expr backward_first; // backward state after reading back to the first element
};

BidirectionalSummary run_bidirectional_summary(Graph& g, std::span<const Expr> xs,
                                               const SeqParams& fwd, const SeqParams& bwd);

}  // namespace lextree
