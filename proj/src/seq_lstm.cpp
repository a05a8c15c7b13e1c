#include "lextree/seq_lstm.hpp"

#include <stdexcept>

namespace lextree {

LstmCellParams LstmCellParams::create(ParamSet& ps, const std::string& prefix,
                                      std::size_t input_dim, std::size_t hidden_dim,
                                      std::uint64_t seed) {
  const Shape wx{hidden_dim, input_dim};
  const Shape wh{hidden_dim, hidden_dim};
  const Shape b{hidden_dim};
  auto mat = [&](const char* name, const Shape& s) {
    return &ps.add(prefix + "." + name, s, Init::glorot(), seed);
  };
  auto bias = [&](const char* name) { return &ps.add(prefix + "." + name, b, Init::zero(), seed); };

  LstmCellParams p;
  p.W_xg = mat("W_xg", wx);
  p.W_hg = mat("W_hg", wh);
  p.b_g = bias("b_g");
  p.W_xi = mat("W_xi", wx);
  p.W_hi = mat("W_hi", wh);
  p.W_ci = mat("W_ci", wh);
  p.b_i = bias("b_i");
  p.W_xf = mat("W_xf", wx);
  p.W_hf = mat("W_hf", wh);
  p.W_cf = mat("W_cf", wh);
  p.b_f = bias("b_f");
  p.W_xo = mat("W_xo", wx);
  p.W_ho = mat("W_ho", wh);
  p.W_co = mat("W_co", wh);
  p.b_o = bias("b_o");
  return p;
}

std::vector<Parameter*> LstmCellParams::all() const {
  return {W_xg, W_hg, b_g, W_xi, W_hi, W_ci, b_i, W_xf, W_hf, W_cf, b_f, W_xo, W_ho, W_co, b_o};
}

CellState zero_state(Graph& g, std::size_t hidden_dim) {
  return {g.input(Tensor({hidden_dim})), g.input(Tensor({hidden_dim}))};
}

CellState lstm_cell_step(Graph& g, Expr x, const CellState& prev, const LstmCellParams& p,
                         const CellStepOptions& options) {
  auto P = [&](Parameter* t) { return g.param(*t); };
  const Expr xg = options.g_input.valid() ? options.g_input : x;

  const Expr g_terms[] = {P(p.W_xg), xg, P(p.W_hg), prev.h};
  const Expr gate_g = tanh(affine(P(p.b_g), g_terms));

  const Expr i_terms[] = {P(p.W_xi), x, P(p.W_hi), prev.h, P(p.W_ci), prev.c};
  const Expr gate_i = sigmoid(affine(P(p.b_i), i_terms));

  const Expr f_terms[] = {P(p.W_xf), x, P(p.W_hf), prev.h, P(p.W_cf), prev.c};
  const Expr gate_f = sigmoid(affine(P(p.b_f), f_terms));

  const Expr c = add(hadamard(gate_f, prev.c), hadamard(gate_i, gate_g));

  const Expr o_terms[] = {P(p.W_xo), x, P(p.W_ho), prev.h, P(p.W_co), c};
  const Expr gate_o = sigmoid(affine(P(p.b_o), o_terms));

  const Expr h = hadamard(gate_o, tanh(options.output_from_previous_cell ? prev.c : c));
  return {h, c};
}

CellState seq_step(Graph& g, Expr x, const CellState& prev, const SeqParams& p) {
  return lstm_cell_step(g, x, prev, p);
}

namespace {

void check_pair(std::span<const Expr> xs, const SeqParams& fwd, const SeqParams& bwd) {
  if (xs.empty()) throw std::invalid_argument("bidirectional LSTM over an empty sequence");
  if (fwd.hidden_dim() != bwd.hidden_dim())
    throw ShapeError("forward and backward LSTMs differ in hidden size");
}

}  // namespace

std::vector<Expr> run_bidirectional(Graph& g, std::span<const Expr> xs, const SeqParams& fwd,
                                    const SeqParams& bwd) {
  check_pair(xs, fwd, bwd);
  const std::size_t n = xs.size();
  std::vector<Expr> forward(n), backward(n);
  CellState s = zero_state(g, fwd.hidden_dim());
  for (std::size_t i = 0; i < n; ++i) {
    s = seq_step(g, xs[i], s, fwd);
    forward[i] = s.h;
  }
  s = zero_state(g, bwd.hidden_dim());
  for (std::size_t i = n; i-- > 0;) {
    s = seq_step(g, xs[i], s, bwd);
    backward[i] = s.h;
  }
  std::vector<Expr> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Expr parts[] = {forward[i], backward[i]};
    out[i] = concat(parts);
  }
  return out;
}

BidirectionalSummary run_bidirectional_summary(Graph& g, std::span<const Expr> xs,
                                               const SeqParams& fwd, const SeqParams& bwd) {
  check_pair(xs, fwd, bwd);
  CellState s = zero_state(g, fwd.hidden_dim());
  for (const auto& x : xs) s = seq_step(g, x, s, fwd);
  BidirectionalSummary out;
  out.forward_last = s.h;
  s = zero_state(g, bwd.hidden_dim());
  for (std::size_t i = xs.size(); i-- > 0;) s = seq_step(g, xs[i], s, bwd);
  out.backward_first = s.h;
  return out;
}

}  // namespace lextree
