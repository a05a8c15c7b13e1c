#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "lextree/gradcheck.hpp"
#include "lextree/reranker.hpp"

using namespace lextree;

namespace {

RerankConfig tiny_rerank() {
  RerankConfig c;
  c.embed_dim = 5;
  c.hidden_dim = 4;
  c.score_hidden = 3;
  return c;
}

Vocabulary words(std::initializer_list<const char*> ws) {
  Vocabulary v;
  for (auto* w : ws) v.add(w);
  return v;
}

void zero_all(Reranker& r) {
  for (auto* p : r.params().all()) p->value.fill(0.0);
}

const std::vector<std::string> kLabels{"NP", "S", "VP"};

}  // namespace

TEST_CASE("zero parameters give a uniform label distribution") {
  Reranker r(tiny_rerank(), words({"dogs", "bark", "loudly"}), kLabels, 1);
  zero_all(r);
  const auto t = parse_sexpr("(S (NP dogs) (VP (VBP bark) (RB loudly)))");
  const double m = static_cast<double>(kLabels.size());
  CHECK(r.score(t) == doctest::Approx(-2.0 * std::log(m)));
  Graph g;
  const Expr z = g.input(Tensor({4}));
  CHECK(r.node_score(g, 1, z, z, g.input(Tensor({5}))).scalar() == doctest::Approx(-std::log(m)));
  CHECK(r.score(parse_sexpr("(NN dogs)")) == 0.0);
}

TEST_CASE("a saturated output row drives its label score to zero") {
  Reranker r(tiny_rerank(), words({"dogs"}), kLabels, 2);
  zero_all(r);
  r.params().at("rerank.b").value.fill(1.0);  // O = relu(b) > 0
  auto& out = r.params().at("rerank.W_out").value;
  for (std::size_t j = 0; j < out.cols(); ++j) out.at(1, j) = 10.0;
  Graph g;
  const Expr z = g.input(Tensor({4}));
  CHECK(r.node_score(g, 1, z, z, g.input(Tensor({5}))).scalar() > -1e-12);
}

TEST_CASE("label scores normalize") {
  Reranker r(tiny_rerank(), words({"a"}), kLabels, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Tensor a({4}), b({4}), h({5});
    for (auto* t : {&a, &b}) for (auto& v : t->data()) v = n(rng);
    for (auto& v : h.data()) v = n(rng);
    double total = 0.0;
    for (std::size_t k = 0; k < kLabels.size(); ++k)
      total += std::exp(r.node_score(g, k, g.input(a), g.input(b), g.input(h)).scalar());
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("unknown labels are rejected") {
  Reranker r(tiny_rerank(), words({"a"}), kLabels, 3);
  CHECK_THROWS_AS(r.score(parse_sexpr("(PP (IN a) (NN a))")), std::invalid_argument);
  CHECK_THROWS_AS(Reranker(tiny_rerank(), words({"a"}), {}, 1), std::invalid_argument);
}

TEST_CASE("tree score is additive over branches") {
  Reranker r(tiny_rerank(), words({"dogs", "bark", "loudly"}), kLabels, 5);
  const auto t = parse_sexpr("(S (NP dogs) (VP (VBP bark) (RB loudly)))");
  Graph g;
  const auto st = r.encode(g, t);
  double total = 0.0;
  for (int id : t.postorder()) {
    const auto& n = t.node(id);
    if (n.is_leaf()) continue;
    total += r.node_score(g, r.label_index(n.label), st[static_cast<std::size_t>(n.left)].h,
                          st[static_cast<std::size_t>(n.right)].h, st[static_cast<std::size_t>(id)].x)
                 .scalar();
  }
  CHECK(r.score(t) == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("reranker gradients agree with finite differences") {
  Reranker r(tiny_rerank(), words({"dogs", "bark", "loudly", "the"}), kLabels, 6);
  const auto t = parse_sexpr("(S (NP (DT the) (NNS dogs)) (VP (VBP bark) (RB loudly)))");
  const auto rep = grad_check(r.params(), [&](Graph& g) { return r.tree_score(g, t); }, 1e-4);
  INFO(rep.worst << " " << rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("brackets and PARSEVAL") {
  const auto gold = parse_sexpr("(S (NP (DT the) (NNS dogs)) (VP (VBP bark) (RB loudly)))");
  const auto cand = parse_sexpr("(S (DT the) (VP (NNS dogs) (VP (VBP bark) (RB loudly))))");
  CHECK(labeled_brackets(gold).size() == 3);
  CHECK(bracket_mismatch(cand, gold) == 1);  // VP over dogs bark loudly
  CHECK(bracket_mismatch(gold, gold) == 0);
  const auto p = parseval(cand, gold);
  CHECK(p.matched == 2);
  CHECK(p.f1() == doctest::Approx(2.0 / 3.0));
  CHECK(parseval(gold, gold).f1() == 1.0);
}

TEST_CASE("margin loss") {
  Reranker r(tiny_rerank(), words({"dogs", "bark", "loudly", "the"}), kLabels, 7);
  const auto gold = parse_sexpr("(S (NP (DT the) (NNS dogs)) (VP (VBP bark) (RB loudly)))");
  const auto rival = parse_sexpr("(S (DT the) (VP (NNS dogs) (VP (VBP bark) (RB loudly))))");
  {
    Graph g;
    const BinaryTree only[] = {gold};
    CHECK(r.margin_loss(g, gold, only).scalar() == 0.0);
  }
  {
    Graph g;
    const BinaryTree both[] = {gold, rival};
    const double expected = std::max(0.0, r.score(rival) + 0.1 * 1 - r.score(gold));
    CHECK(r.margin_loss(g, gold, both).scalar() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(r.margin_loss(g, gold, both).scalar() >= 0.0);
  }
  {
    Graph g;
    CHECK_THROWS_AS(r.margin_loss(g, gold, {}), std::invalid_argument);
    const BinaryTree other[] = {parse_sexpr("(S (NP dogs) (VP bark))")};
    CHECK_THROWS_AS(r.margin_loss(g, gold, other), std::invalid_argument);
  }
  // gradient of the active hinge
  const BinaryTree both[] = {gold, rival};
  const auto rep = grad_check(r.params(), [&](Graph& g) { return r.margin_loss(g, gold, both); }, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("margin loss vanishes once gold wins by the margin") {
  const auto gold = parse_sexpr("(S (NP (DT the) (NNS dogs)) (VP (VBP bark) (RB loudly)))");
  const auto rival = parse_sexpr("(S (DT the) (VP (NNS dogs) (VP (VBP bark) (RB loudly))))");
  Reranker r(tiny_rerank(), words({"dogs", "bark", "loudly", "the"}), kLabels, 8);
  const std::vector<RerankExample> data{{gold, {gold, rival}}};
  const auto losses = train_reranker(r, data, 60, 1, {0.05, 0.9, 0.999, 1e-8});
  CHECK(losses.back() == 0.0);
  CHECK(r.score(gold) >= r.score(rival) + 0.1);
}

TEST_CASE("interpolation and reranking") {
  Reranker r(tiny_rerank(), words({"dogs", "bark"}), kLabels, 9);
  std::vector<ScoredTree> c(3);
  c[0].tree = parse_sexpr("(S (NP dogs) (VP bark))");
  c[1].tree = parse_sexpr("(S (VP dogs) (NP bark))");
  c[2].tree = parse_sexpr("(NP (NP dogs) (NP bark))");
  c[0].base_score = -1.0;
  c[1].base_score = -0.5;
  c[2].base_score = -3.0;
  score_candidates(r, c, 0.0);
  CHECK(rerank(c) == 1);  // base 1-best
  score_candidates(r, c, 1.0);
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (c[i].model_score > c[best].model_score) best = i;
  CHECK(rerank(c) == best);
  score_candidates(r, c, 0.3);
  for (const auto& s : c) CHECK(s.combined == doctest::Approx(0.3 * s.model_score + 0.7 * s.base_score));
  CHECK_THROWS_AS(score_candidates(r, c, 1.5), std::invalid_argument);

  // equal combined scores go to the higher base score
  std::vector<ScoredTree> tie(2);
  tie[0].combined = tie[1].combined = 1.0;
  tie[0].base_score = -2.0;
  tie[1].base_score = -1.0;
  CHECK(rerank(tie) == 1);
  CHECK(oracle_select(c, c[2].tree) == 2);
}

TEST_CASE("candidate file blocks") {
  const std::string path = "/tmp/lextree_cands_" + std::to_string(std::random_device{}());
  std::ofstream(path) << "-1.5\t(S (NP dogs) (VP bark))\n-2\t(S (VP dogs) (NP bark))\n\n"
                         "-0.1\t(NN cats)\n";
  const auto blocks = read_candidates(path);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].size() == 2);
  CHECK(blocks[0][1].base_score == -2.0);
  CHECK(blocks[1][0].tree.tokens() == std::vector<std::string>{"cats"});
  std::ofstream(path) << "x\t(NN cats)\n";
  CHECK_THROWS_AS(read_candidates(path), ParseError);
  std::remove(path.c_str());
}
