#include <doctest.h>

#include <cmath>
#include <random>

#include "lextree/autodiff.hpp"
#include "lextree/gradcheck.hpp"

using namespace lextree;

namespace {

Parameter& random_param(ParamSet& ps, const std::string& name, Shape shape, std::uint64_t seed) {
  return ps.add(name, shape, Init::uniform(1.0), seed);
}

}  // namespace

TEST_CASE("matvec value") {
  Graph g;
  Expr w = g.input(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Expr x = g.input(Tensor::vector({1, 0, -1}));
  const Tensor& y = matvec(w, x).value();
  CHECK(y[0] == -2.0);
  CHECK(y[1] == -2.0);
}

TEST_CASE("shape errors name the op and shapes") {
  Graph g;
  Expr w = g.input(Tensor({2, 3}));
  Expr x = g.input(Tensor({2}));
  try {
    matvec(w, x);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matvec") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(hadamard(g.input(Tensor({2})), g.input(Tensor({3}))), ShapeError);
}

TEST_CASE("log_softmax normalizes within 1e-12") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + trial % 9);
    for (auto& x : v) x = u(rng);
    Graph g;
    const Tensor& lp = log_softmax(g.input(Tensor::vector(v))).value();
    double total = 0.0;
    for (double x : lp.data()) total += std::exp(x);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("log_softmax is stable for huge logits") {
  Graph g;
  const Tensor& lp = log_softmax(g.input(Tensor::vector({1000.0, 0.0, -1000.0}))).value();
  CHECK(lp[0] == doctest::Approx(0.0));
  CHECK(std::isfinite(lp[2]));
}

TEST_CASE("sigmoid_value saturates without overflow") {
  CHECK(sigmoid_value(800.0) == 1.0);
  CHECK(sigmoid_value(-800.0) >= 0.0);
  CHECK(sigmoid_value(0.0) == 0.5);
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  Expr x = g.input(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(tanh(x)), ShapeError);
}

TEST_CASE("param nodes are shared within a graph") {
  ParamSet ps;
  Parameter& w = ps.add("w", {2}, Init::uniform(1.0), 1);
  Graph g;
  CHECK(g.param(w).id == g.param(w).id);
}

TEST_CASE("gradients accumulate across graphs until zeroed") {
  ParamSet ps;
  Parameter& w = ps.add("w", Tensor::vector({0.5, -1.0}));
  for (int i = 0; i < 2; ++i) {
    Graph g;
    g.backward(sum_elements(g.param(w)));
  }
  CHECK(w.grad[0] == 2.0);
  ps.zero_grad();
  CHECK(w.grad[0] == 0.0);
}

TEST_CASE("lookup tracks touched rows") {
  ParamSet ps;
  Parameter& table = ps.add("emb", {4, 3}, Init::uniform(1.0), 3);
  table.sparse_rows = true;
  Graph g;
  Expr a = g.lookup(table, 2);
  Expr b = g.lookup(table, 2);
  Expr c = g.lookup(table, 0);
  const Expr terms[] = {a, b, c};
  g.backward(sum_elements(add(terms)));
  CHECK(table.touched_rows.size() == 2);
  CHECK(table.grad.at(2, 1) == 2.0);
  CHECK(table.grad.at(1, 1) == 0.0);
  CHECK_THROWS(g.lookup(table, 4));
}

TEST_CASE("dropout keeps expectation and is inactive at p = 0") {
  std::mt19937_64 rng(5);
  Graph g;
  Expr x = g.input(Tensor({20000}, 1.0));
  const Tensor& y = dropout(x, 0.5, rng).value();
  double sum = 0.0;
  for (double v : y.data()) {
    CHECK((v == 0.0 || v == 2.0));
    sum += v;
  }
  CHECK(sum / 20000.0 == doctest::Approx(1.0).epsilon(0.03));
  const Tensor kept = dropout(x, 0.0, rng).value();
  CHECK(kept == x.value());
}

TEST_CASE("l2_penalty value") {
  ParamSet ps;
  Parameter& a = ps.add("a", Tensor::vector({1, 2}));
  Parameter& b = ps.add("b", Tensor::vector({3}));
  Parameter* list[] = {&a, &b};
  Graph g;
  CHECK(l2_penalty(g, list, 0.5).scalar() == doctest::Approx(0.25 * 14.0));
}

// Each op composed into a scalar; gradients compared with central differences
// at many random points.
TEST_CASE("finite differences agree for every op") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    ParamSet ps;
    Parameter& W = random_param(ps, "W", {3, 4}, seed);
    Parameter& V = random_param(ps, "V", {3, 3}, seed);
    Parameter& x = random_param(ps, "x", {4}, seed);
    Parameter& y = random_param(ps, "y", {3}, seed);
    Parameter& b = random_param(ps, "b", {3}, seed);
    Parameter& emb = random_param(ps, "emb", {5, 4}, seed);
    emb.sparse_rows = true;
    std::vector<Parameter*> reg = {&W, &y};

    auto build = [&](Graph& g) {
      Expr h = matvec(g.param(W), g.param(x));
      Expr e = g.lookup(emb, seed % 5);
      Expr s = sigmoid(h);
      Expr t = tanh(add(h, g.param(y)));
      Expr u = hadamard(s, complement(t));
      const Expr aff_terms[] = {g.param(V), u, g.param(W), e};
      Expr a = affine(g.param(b), aff_terms);
      const Expr parts[] = {relu(a), scale(t, -0.7)};
      Expr c = concat(parts);
      const Expr avg[] = {s, t, u};
      Expr m = mean(avg);
      Expr lp = log_softmax(c);
      const Expr total[] = {pick(lp, seed % 6), sum_elements(m), l2_penalty(g, reg, 0.3)};
      return add(total);
    };
    const auto report = grad_check(ps, build, 1e-6);
    INFO("seed " << seed << " worst " << report.worst << " err " << report.max_rel_err);
    CHECK(report.failure.empty());
    CHECK(report.pass);
  }
}

TEST_CASE("finite differences agree through a fixed dropout mask") {
  ParamSet ps;
  Parameter& x = random_param(ps, "x", {6}, 4);
  Parameter& w = random_param(ps, "w", {2, 6}, 4);
  auto build = [&](Graph& g) {
    std::mt19937_64 rng(99);
    return sum_elements(tanh(matvec(g.param(w), dropout(g.param(x), 0.4, rng))));
  };
  CHECK(grad_check(ps, build, 1e-6).pass);
}

TEST_CASE("grad_check catches a wrong gradient") {
  // A loss whose recorded value is not a function of the parameter, so the
  // numeric derivative is zero while the analytic one is not.
  ParamSet ps;
  Parameter& w = ps.add("w", Tensor::vector({0.3}));
  int calls = 0;
  auto build = [&](Graph& g) {
    Expr e = sum_elements(g.param(w));
    ++calls;
    return calls == 1 ? e : g.input(Tensor::vector({0.3}));
  };
  const auto r = grad_check(ps, build, 1e-4);
  CHECK_FALSE(r.pass);
  CHECK(r.worst == "w[0]");
}
