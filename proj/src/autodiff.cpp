#include "lextree/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lextree/kernels.hpp"

namespace lextree {

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::Lookup: return "lookup";
    case OpKind::MatVec: return "matvec";
    case OpKind::Add: return "add";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Scale: return "scale";
    case OpKind::Complement: return "complement";
    case OpKind::Concat: return "concat";
    case OpKind::Mean: return "mean";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Affine: return "affine";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::Pick: return "pick";
    case OpKind::SumElements: return "sum_elements";
    case OpKind::Dropout: return "dropout";
    case OpKind::L2Penalty: return "l2_penalty";
  }
  return "?";
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const Tensor& Expr::value() const { return graph->value(id); }

double Expr::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("expected a scalar, got " + shape_str(v.shape()));
  return v[0];
}

namespace {

[[noreturn]] void shape_fail(OpKind op, std::initializer_list<const Tensor*> operands) {
  std::string msg = std::string(op_name(op)) + ": shape mismatch";
  for (const auto* t : operands) msg += " " + shape_str(t->shape());
  throw ShapeError(msg);
}

Graph& graph_of(std::span<const Expr> es, OpKind op) {
  if (es.empty()) throw ShapeError(std::string(op_name(op)) + ": no operands");
  Graph* g = es[0].graph;
  for (const auto& e : es)
    if (e.graph != g || g == nullptr)
      throw std::invalid_argument(std::string(op_name(op)) + ": operands from different graphs");
  return *g;
}

bool is_vector(const Tensor& t) { return t.rank() == 1; }

kernels::MatrixView view(const Tensor& m) { return {m.data().data(), m.rows(), m.cols()}; }

}  // namespace

Expr Graph::record(Node node) {
  if (node.kind == OpKind::Param || node.kind == OpKind::Lookup) {
    node.requires_grad = true;
  } else {
    for (auto a : node.args) node.requires_grad = node.requires_grad || nodes_[a].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Expr Graph::input(Tensor value) {
  Node n;
  n.kind = OpKind::Input;
  n.value = std::move(value);
  return record(std::move(n));
}

Expr Graph::param(Parameter& p) {
  for (const auto& [ptr, id] : param_nodes_)
    if (ptr == &p) return {this, id};
  Node n;
  n.kind = OpKind::Param;
  n.param = &p;
  auto e = record(std::move(n));
  param_nodes_.emplace_back(&p, e.id);
  return e;
}

Expr Graph::lookup(Parameter& table, std::size_t row) {
  if (table.value.rank() != 2 || row >= table.value.rows())
    throw ShapeError("lookup: row " + std::to_string(row) + " outside table " +
                     shape_str(table.value.shape()));
  Node n;
  n.kind = OpKind::Lookup;
  n.param = &table;
  n.row = row;
  auto r = table.value.row(row);
  n.value = Tensor::vector(std::vector<double>(r.begin(), r.end()));
  return record(std::move(n));
}

const Tensor& Graph::value(std::size_t id) const {
  const auto& n = nodes_[id];
  return n.kind == OpKind::Param ? n.param->value : n.value;
}

std::span<const double> Graph::grad(std::size_t id) const {
  const auto& n = nodes_[id];
  if (n.kind == OpKind::Param) return n.param->grad.data();
  return n.grad;
}

std::span<double> Graph::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.kind == OpKind::Param) return n.param->grad.data();
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Graph::backward(Expr loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss belongs to another graph");
  const auto& lv = value(loss.id);
  if (lv.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_str(lv.shape()));
  for (auto& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.kind == OpKind::Param || n.kind == OpKind::Input) continue;
    if (n.grad.empty() || !n.requires_grad) continue;
    backprop(id);
  }
}

void Graph::backprop(std::size_t id) {
  // Copy what we need; grad_buffer may grow other nodes' vectors but never
  // reallocates nodes_ itself.
  Node& n = nodes_[id];
  const std::span<const double> g = n.grad;
  auto wants = [&](std::size_t k) { return nodes_[n.args[k]].requires_grad; };

  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Param:
      break;
    case OpKind::Lookup: {
      auto row = n.param->grad.row(n.row);
      for (std::size_t i = 0; i < g.size(); ++i) row[i] += g[i];
      n.param->touch_row(n.row);
      break;
    }
    case OpKind::MatVec: {
      const auto& w = value(n.args[0]);
      const auto& x = value(n.args[1]);
      if (wants(0)) kernels::outer_acc(g, x.data(), grad_buffer(n.args[0]));
      if (wants(1)) kernels::matvec_t_acc(view(w), g, grad_buffer(n.args[1]));
      break;
    }
    case OpKind::Add: {
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        if (!wants(k)) continue;
        auto ga = grad_buffer(n.args[k]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      break;
    }
    case OpKind::Hadamard: {
      const auto& a = value(n.args[0]);
      const auto& b = value(n.args[1]);
      if (wants(0)) {
        auto ga = grad_buffer(n.args[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto gb = grad_buffer(n.args[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case OpKind::Scale: {
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      break;
    }
    case OpKind::Complement: {
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
      break;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        const std::size_t len = value(n.args[k]).size();
        if (wants(k)) {
          auto ga = grad_buffer(n.args[k]);
          for (std::size_t i = 0; i < len; ++i) ga[i] += g[offset + i];
        }
        offset += len;
      }
      break;
    }
    case OpKind::Mean: {
      const double inv = 1.0 / static_cast<double>(n.args.size());
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        if (!wants(k)) continue;
        auto ga = grad_buffer(n.args[k]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * inv;
      }
      break;
    }
    case OpKind::Sigmoid: {
      const auto& y = n.value;
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case OpKind::Tanh: {
      const auto& y = n.value;
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case OpKind::Relu: {
      const auto& x = value(n.args[0]);
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) ga[i] += g[i];
      break;
    }
    case OpKind::Affine: {
      if (wants(0)) {
        auto gb = grad_buffer(n.args[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
      for (std::size_t k = 1; k + 1 < n.args.size(); k += 2) {
        const auto& w = value(n.args[k]);
        const auto& x = value(n.args[k + 1]);
        if (wants(k)) kernels::outer_acc(g, x.data(), grad_buffer(n.args[k]));
        if (wants(k + 1)) kernels::matvec_t_acc(view(w), g, grad_buffer(n.args[k + 1]));
      }
      break;
    }
    case OpKind::LogSoftmax: {
      const auto& y = n.value;
      double total = 0.0;
      for (double gi : g) total += gi;
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(y[i]) * total;
      break;
    }
    case OpKind::Pick: {
      grad_buffer(n.args[0])[n.row] += g[0];
      break;
    }
    case OpKind::SumElements: {
      auto ga = grad_buffer(n.args[0]);
      for (auto& v : ga) v += g[0];
      break;
    }
    case OpKind::Dropout: {
      auto ga = grad_buffer(n.args[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux[i];
      break;
    }
    case OpKind::L2Penalty: {
      const double coef = n.scalar * g[0];
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        const auto& theta = value(n.args[k]);
        auto gt = grad_buffer(n.args[k]);
        for (std::size_t i = 0; i < theta.size(); ++i) gt[i] += coef * theta[i];
        Parameter* p = nodes_[n.args[k]].param;
        if (p->sparse_rows)
          for (std::size_t r = 0; r < p->value.rows(); ++r) p->touch_row(r);
      }
      break;
    }
  }
}

Expr matvec(Expr w, Expr x) {
  Expr es[] = {w, x};
  Graph& g = graph_of(es, OpKind::MatVec);
  const auto& wv = w.value();
  const auto& xv = x.value();
  if (wv.rank() != 2 || !is_vector(xv) || wv.cols() != xv.size())
    shape_fail(OpKind::MatVec, {&wv, &xv});
  Graph::Node n;
  n.kind = OpKind::MatVec;
  n.args = {w.id, x.id};
  n.value = Tensor({wv.rows()});
  kernels::matvec_acc(view(wv), xv.data(), n.value.data());
  return g.record(std::move(n));
}

Expr add(std::span<const Expr> terms) {
  Graph& g = graph_of(terms, OpKind::Add);
  const auto& first = terms[0].value();
  Graph::Node n;
  n.kind = OpKind::Add;
  n.value = first;
  n.args.push_back(terms[0].id);
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const auto& v = terms[k].value();
    if (v.shape() != first.shape()) shape_fail(OpKind::Add, {&first, &v});
    for (std::size_t i = 0; i < v.size(); ++i) n.value[i] += v[i];
    n.args.push_back(terms[k].id);
  }
  return g.record(std::move(n));
}

Expr add(Expr a, Expr b) {
  Expr es[] = {a, b};
  return add(std::span<const Expr>(es));
}

Expr hadamard(Expr a, Expr b) {
  Expr es[] = {a, b};
  Graph& g = graph_of(es, OpKind::Hadamard);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail(OpKind::Hadamard, {&av, &bv});
  Graph::Node n;
  n.kind = OpKind::Hadamard;
  n.args = {a.id, b.id};
  n.value = av;
  for (std::size_t i = 0; i < bv.size(); ++i) n.value[i] *= bv[i];
  return g.record(std::move(n));
}

Expr scale(Expr a, double factor) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::Scale);
  Graph::Node n;
  n.kind = OpKind::Scale;
  n.args = {a.id};
  n.scalar = factor;
  n.value = a.value();
  for (auto& v : n.value.values()) v *= factor;
  return g.record(std::move(n));
}

Expr complement(Expr a) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::Complement);
  Graph::Node n;
  n.kind = OpKind::Complement;
  n.args = {a.id};
  n.value = a.value();
  for (auto& v : n.value.values()) v = 1.0 - v;
  return g.record(std::move(n));
}

Expr concat(std::span<const Expr> parts) {
  Graph& g = graph_of(parts, OpKind::Concat);
  std::vector<double> out;
  Graph::Node n;
  n.kind = OpKind::Concat;
  for (const auto& p : parts) {
    const auto& v = p.value();
    if (!is_vector(v)) shape_fail(OpKind::Concat, {&v});
    out.insert(out.end(), v.values().begin(), v.values().end());
    n.args.push_back(p.id);
  }
  n.value = Tensor::vector(std::move(out));
  return g.record(std::move(n));
}

Expr mean(std::span<const Expr> terms) {
  Graph& g = graph_of(terms, OpKind::Mean);
  const auto& first = terms[0].value();
  Graph::Node n;
  n.kind = OpKind::Mean;
  n.value = first;
  n.args.push_back(terms[0].id);
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const auto& v = terms[k].value();
    if (v.shape() != first.shape()) shape_fail(OpKind::Mean, {&first, &v});
    for (std::size_t i = 0; i < v.size(); ++i) n.value[i] += v[i];
    n.args.push_back(terms[k].id);
  }
  const double count = static_cast<double>(terms.size());
  for (auto& v : n.value.values()) v /= count;
  return g.record(std::move(n));
}

Expr sigmoid(Expr a) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::Sigmoid);
  Graph::Node n;
  n.kind = OpKind::Sigmoid;
  n.args = {a.id};
  n.value = a.value();
  for (auto& v : n.value.values()) v = sigmoid_value(v);
  return g.record(std::move(n));
}

Expr tanh(Expr a) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::Tanh);
  Graph::Node n;
  n.kind = OpKind::Tanh;
  n.args = {a.id};
  n.value = a.value();
  for (auto& v : n.value.values()) v = std::tanh(v);
  return g.record(std::move(n));
}

Expr relu(Expr a) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::Relu);
  Graph::Node n;
  n.kind = OpKind::Relu;
  n.args = {a.id};
  n.value = a.value();
  for (auto& v : n.value.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return g.record(std::move(n));
}

Expr affine(Expr bias, std::span<const Expr> terms) {
  if (terms.size() % 2 != 0) throw ShapeError("affine: terms must come in (matrix, vector) pairs");
  std::vector<Expr> all{bias};
  all.insert(all.end(), terms.begin(), terms.end());
  Graph& g = graph_of(all, OpKind::Affine);
  const auto& b = bias.value();
  if (!is_vector(b)) shape_fail(OpKind::Affine, {&b});
  Graph::Node n;
  n.kind = OpKind::Affine;
  n.value = b;
  n.args.push_back(bias.id);
  for (std::size_t k = 0; k < terms.size(); k += 2) {
    const auto& w = terms[k].value();
    const auto& x = terms[k + 1].value();
    if (w.rank() != 2 || !is_vector(x) || w.rows() != b.size() || w.cols() != x.size())
      shape_fail(OpKind::Affine, {&b, &w, &x});
    kernels::matvec_acc(view(w), x.data(), n.value.data());
    n.args.push_back(terms[k].id);
    n.args.push_back(terms[k + 1].id);
  }
  return g.record(std::move(n));
}

Expr log_softmax(Expr logits) {
  Expr es[] = {logits};
  Graph& g = graph_of(es, OpKind::LogSoftmax);
  const auto& x = logits.value();
  if (!is_vector(x) || x.empty()) shape_fail(OpKind::LogSoftmax, {&x});
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x.values()) m = std::max(m, v);
  double s = 0.0;
  for (double v : x.values()) s += std::exp(v - m);
  const double lse = m + std::log(s);
  Graph::Node n;
  n.kind = OpKind::LogSoftmax;
  n.args = {logits.id};
  n.value = x;
  for (auto& v : n.value.values()) v -= lse;
  return g.record(std::move(n));
}

Expr pick(Expr v, std::size_t index) {
  Expr es[] = {v};
  Graph& g = graph_of(es, OpKind::Pick);
  const auto& x = v.value();
  if (!is_vector(x) || index >= x.size())
    throw ShapeError("pick: index " + std::to_string(index) + " outside " + shape_str(x.shape()));
  Graph::Node n;
  n.kind = OpKind::Pick;
  n.args = {v.id};
  n.row = index;
  n.value = Tensor::vector({x[index]});
  return g.record(std::move(n));
}

Expr sum_elements(Expr a) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::SumElements);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  Graph::Node n;
  n.kind = OpKind::SumElements;
  n.args = {a.id};
  n.value = Tensor::vector({s});
  return g.record(std::move(n));
}

Expr dropout(Expr a, double p, std::mt19937_64& rng) {
  Expr es[] = {a};
  Graph& g = graph_of(es, OpKind::Dropout);
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Graph::Node n;
  n.kind = OpKind::Dropout;
  n.args = {a.id};
  n.value = a.value();
  n.aux.resize(n.value.size());
  for (std::size_t i = 0; i < n.aux.size(); ++i) {
    n.aux[i] = u(rng) < p ? 0.0 : keep_scale;
    n.value[i] *= n.aux[i];
  }
  return g.record(std::move(n));
}

Expr l2_penalty(Graph& g, std::span<Parameter* const> params, double lambda) {
  Graph::Node n;
  n.kind = OpKind::L2Penalty;
  n.scalar = lambda;
  double s = 0.0;
  for (Parameter* p : params) {
    n.args.push_back(g.param(*p).id);
    s += p->value.squared_norm();
  }
  n.value = Tensor::vector({0.5 * lambda * s});
  return g.record(std::move(n));
}

}  // namespace lextree
