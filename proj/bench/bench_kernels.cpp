// Serial reference vs OpenMP kernels, and serial vs parallel evaluation.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lextree/kernels.hpp"
#include "lextree/train.hpp"

using namespace lextree;
namespace k = lextree::kernels;

namespace {

struct Operands {
  std::vector<double> w, x, y;
  k::MatrixView view;

  explicit Operands(std::size_t n) : w(n * n), x(n), y(n) {
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : w) v = u(rng);
    for (auto& v : x) v = u(rng);
    view = {w.data(), n, n};
  }
};

template <void (*Kernel)(k::MatrixView, std::span<const double>, std::span<double>)>
void BM_matvec(benchmark::State& state) {
  Operands op(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Kernel(op.view, op.x, op.y);
    benchmark::DoNotOptimize(op.y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <void (*Kernel)(std::span<const double>, std::span<const double>, std::span<double>)>
void BM_outer(benchmark::State& state) {
  Operands op(static_cast<std::size_t>(state.range(0)));
  std::vector<double> grad(op.w.size());
  for (auto _ : state) {
    Kernel(op.x, op.x, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

BENCHMARK(BM_matvec<k::reference::matvec_acc>)->Name("matvec/reference")->Arg(150)->Arg(300)->Arg(1024);
BENCHMARK(BM_matvec<k::parallel::matvec_acc>)->Name("matvec/parallel")->Arg(150)->Arg(300)->Arg(1024);
BENCHMARK(BM_matvec<k::reference::matvec_t_acc>)->Name("matvec_t/reference")->Arg(150)->Arg(1024);
BENCHMARK(BM_matvec<k::parallel::matvec_t_acc>)->Name("matvec_t/parallel")->Arg(150)->Arg(1024);
BENCHMARK(BM_outer<k::reference::outer_acc>)->Name("outer/reference")->Arg(150)->Arg(1024);
BENCHMARK(BM_outer<k::parallel::outer_acc>)->Name("outer/parallel")->Arg(150)->Arg(1024);

struct EvalFixture {
  std::vector<BinaryTree> trees;
  Vocabulary vocab;
  ModelConfig config;

  EvalFixture() {
    trees = read_tree_file(std::string(LEXTREE_TEST_DATA) + "/sst_train50.txt").trees;
    vocab = build_vocabulary({&trees}, nullptr);
    config.variant = Variant::BiConTree;
    config.embed_dim = 100;
    config.hidden_dim = 64;
    config.output_hidden = 64;
  }
};

template <bool Parallel>
void BM_evaluate(benchmark::State& state) {
  static const EvalFixture fx;
  const Model model(fx.config, fx.vocab, 1);
  for (auto _ : state) {
    const auto r = Parallel ? evaluate(model, fx.trees) : evaluate_serial(model, fx.trees);
    benchmark::DoNotOptimize(r.nodes_correct);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fx.trees.size()));
}

BENCHMARK(BM_evaluate<false>)->Name("evaluate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate<true>)->Name("evaluate/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
