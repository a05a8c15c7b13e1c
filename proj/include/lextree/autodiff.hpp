#pragma once

// Define-by-run reverse-mode differentiation over dense vectors and matrices.
//
// A Graph is an append-only tape. Every operation computes its value eagerly
// when it is recorded, so inputs always precede their consumers and backward
// is a single reverse sweep. Parameters are referenced, not copied; their
// gradients accumulate straight into Parameter::grad.

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "lextree/params.hpp"
#include "lextree/tensor.hpp"

namespace lextree {

enum class OpKind {
  Input,
  Param,
  Lookup,
  MatVec,
  Add,
  Hadamard,
  Scale,
  Complement,
  Concat,
  Mean,
  Sigmoid,
  Tanh,
  Relu,
  Affine,
  LogSoftmax,
  Pick,
  SumElements,
  Dropout,
  L2Penalty,
};

std::string_view op_name(OpKind op);

class Graph;

// Handle to a node of a graph.
struct Expr {
  Graph* graph = nullptr;
  std::size_t id = 0;

  bool valid() const { return graph != nullptr; }
  // Reference into the tape: recording further nodes may invalidate it.
  const Tensor& value() const;
  double scalar() const;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Expr input(Tensor value);
  // One node per parameter per graph; repeated calls return the same node.
  Expr param(Parameter& p);
  Expr lookup(Parameter& table, std::size_t row);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  std::span<const std::size_t> args(std::size_t id) const { return nodes_[id].args; }
  const Tensor& value(std::size_t id) const;

  // Node gradient after backward; empty when the node was not reached.
  std::span<const double> grad(std::size_t id) const;

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Parameter
  // gradients are added to whatever Parameter::grad already holds.
  void backward(Expr loss);

 private:
  struct Node {
    OpKind kind = OpKind::Input;
    std::vector<std::size_t> args;
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::size_t row = 0;
    double scalar = 0.0;
    std::vector<double> aux;
  };

  Expr record(Node node);
  std::span<double> grad_buffer(std::size_t id);
  void backprop(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<std::pair<const Parameter*, std::size_t>> param_nodes_;

  friend Expr matvec(Expr, Expr);
  friend Expr add(std::span<const Expr>);
  friend Expr hadamard(Expr, Expr);
  friend Expr scale(Expr, double);
  friend Expr complement(Expr);
  friend Expr concat(std::span<const Expr>);
  friend Expr mean(std::span<const Expr>);
  friend Expr sigmoid(Expr);
  friend Expr tanh(Expr);
  friend Expr relu(Expr);
  friend Expr affine(Expr, std::span<const Expr>);
  friend Expr log_softmax(Expr);
  friend Expr pick(Expr, std::size_t);
  friend Expr sum_elements(Expr);
  friend Expr dropout(Expr, double, std::mt19937_64&);
  friend Expr l2_penalty(Graph&, std::span<Parameter* const>, double);
};

Expr matvec(Expr w, Expr x);
Expr add(std::span<const Expr> terms);
Expr add(Expr a, Expr b);
Expr hadamard(Expr a, Expr b);
Expr scale(Expr a, double factor);
// 1 - a, elementwise.
Expr complement(Expr a);
Expr concat(std::span<const Expr> parts);
Expr mean(std::span<const Expr> terms);
Expr sigmoid(Expr a);
Expr tanh(Expr a);
Expr relu(Expr a);
// bias + sum_k W_k x_k; `terms` alternates W_0, x_0, W_1, x_1, ...
Expr affine(Expr bias, std::span<const Expr> terms);
Expr log_softmax(Expr logits);
Expr pick(Expr v, std::size_t index);
Expr sum_elements(Expr a);
// Inverted dropout: keeps each coordinate with probability 1-p and scales
// survivors by 1/(1-p). Callers skip it entirely at evaluation time.
Expr dropout(Expr a, double p, std::mt19937_64& rng);
// (lambda/2) * sum of squared values over the given parameters.
Expr l2_penalty(Graph& g, std::span<Parameter* const> params, double lambda);

double sigmoid_value(double x);

}  // namespace lextree
