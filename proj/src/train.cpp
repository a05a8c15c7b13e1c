#include "lextree/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

namespace lextree {

Adam::Adam(ParamSet& params, AdamOptions options) : params_(&params), opt_(options) {
  for (const auto* p : std::as_const(params).all()) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double t = static_cast<double>(t_);
  const double c1 = 1.0 - std::pow(opt_.beta1, t);
  const double c2 = 1.0 - std::pow(opt_.beta2, t);
  const double b1 = opt_.beta1, b2 = opt_.beta2, lr = opt_.learning_rate, eps = opt_.epsilon;

  auto update = [&](std::span<double> w, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  };

  for (std::size_t k = 0; k < params_->size(); ++k) {
    Parameter& p = (*params_)[k];
    if (!p.frozen) {
      if (p.sparse_rows) {
        for (auto r : p.touched_rows) update(p.value.row(r), p.grad.row(r), m_[k].row(r), v_[k].row(r));
      } else {
        update(p.value.data(), p.grad.data(), m_[k].data(), v_[k].data());
      }
    }
    p.zero_grad();
  }
}

namespace {

void score_tree(const Model& model, const BinaryTree& tree, EvalResult& out, std::size_t index) {
  const auto preds = model.predict_nodes(tree, /*labeled_only=*/true);
  const int root = tree.root();
  out.root_predictions[index] = preds[static_cast<std::size_t>(root)];
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const auto gold = tree.node(static_cast<int>(id)).class_id;
    if (!gold) continue;
    ++out.nodes;
    if (preds[id] == *gold) ++out.nodes_correct;
    if (static_cast<int>(id) == root) {
      ++out.roots;
      if (preds[id] == *gold) ++out.roots_correct;
    }
  }
}

}  // namespace

EvalResult evaluate_serial(const Model& model, std::span<const BinaryTree> trees) {
  EvalResult out;
  out.root_predictions.assign(trees.size(), -1);
  for (std::size_t i = 0; i < trees.size(); ++i) score_tree(model, trees[i], out, i);
  return out;
}

EvalResult evaluate(const Model& model, std::span<const BinaryTree> trees) {
  EvalResult out;
  out.root_predictions.assign(trees.size(), -1);
  const auto n = static_cast<std::ptrdiff_t>(trees.size());
  std::size_t roots = 0, roots_correct = 0, nodes = 0, nodes_correct = 0;
#pragma omp parallel reduction(+ : roots, roots_correct, nodes, nodes_correct)
  {
    EvalResult local;
    local.root_predictions.assign(trees.size(), -1);
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      score_tree(model, trees[idx], local, idx);
      out.root_predictions[idx] = local.root_predictions[idx];
    }
    roots += local.roots;
    roots_correct += local.roots_correct;
    nodes += local.nodes;
    nodes_correct += local.nodes_correct;
  }
  out.roots = roots;
  out.roots_correct = roots_correct;
  out.nodes = nodes;
  out.nodes_correct = nodes_correct;
  return out;
}

namespace {

std::string numerical_message(std::uint64_t seed, int epoch, std::size_t example, double loss) {
  std::ostringstream os;
  os << "non-finite loss " << loss << " (seed " << seed << ", epoch " << epoch << ", example "
     << example << ")";
  return os.str();
}

}  // namespace

NumericalError::NumericalError(std::uint64_t seed_, int epoch_, std::size_t example_, double loss)
    : std::runtime_error(numerical_message(seed_, epoch_, example_, loss)),
      seed(seed_),
      epoch(epoch_),
      example(example_) {}

Model make_model(const TrainConfig& config, const Vocabulary& vocab, const EmbeddingTable* table,
                 std::uint64_t seed) {
  Model model(config.model, vocab, seed, table);
  if (config.zero_frozen_head_gate) {
    for (auto* p : model.up_params().head_gate()) {
      p->value.fill(0.0);
      p->frozen = true;
    }
  }
  return model;
}

TrainResult train(const TrainConfig& config, const Vocabulary& vocab, const EmbeddingTable* table,
                  std::span<const BinaryTree> train_set, std::span<const BinaryTree> dev_set,
                  const EpochCallback& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (dev_set.empty()) throw std::invalid_argument("development set is empty");
  if (config.seeds.empty()) throw std::invalid_argument("no seeds given");
  if (config.epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0))
    throw std::invalid_argument("dropout must lie in [0, 1)");

  std::vector<EpochMetrics> trace;
  std::optional<std::vector<Tensor>> best_values;
  std::uint64_t best_seed = 0;
  int best_epoch = 0;
  double best_acc = -1.0;

  for (std::uint64_t seed : config.seeds) {
    Model model = make_model(config, vocab, table, seed);
    Adam adam(model.params(), config.adam);
    std::mt19937_64 order_rng(param_seed(seed, "order"));
    std::mt19937_64 dropout_rng(param_seed(seed, "dropout"));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      if (config.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
      double total = 0.0;
      for (std::size_t idx : order) {
        Graph g;
        const RunMode mode = RunMode::train(config.dropout, dropout_rng);
        Expr loss = model.tree_loss(g, train_set[idx], config.supervision, mode, config.l2);
        const double value = loss.scalar();
        if (!std::isfinite(value)) throw NumericalError(seed, epoch, idx, value);
        g.backward(loss);
        adam.step();
        total += value;
      }
      const EvalResult dev = evaluate(model, dev_set);
      EpochMetrics m{seed, epoch, total / static_cast<double>(train_set.size()), dev.root_acc(),
                     dev.node_acc()};
      trace.push_back(m);
      if (on_epoch) on_epoch(m);
      if (m.dev_root_acc > best_acc) {
        best_acc = m.dev_root_acc;
        best_seed = seed;
        best_epoch = epoch;
        best_values = model.params().snapshot();
      }
    }
  }

  Model best = make_model(config, vocab, table, best_seed);
  best.params().restore(*best_values);
  return TrainResult{std::move(trace), best_seed, best_epoch, best_acc, std::move(best)};
}

}  // namespace lextree
