#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "lextree/analysis.hpp"

using namespace lextree;
using lextree::testing::tiny_config;

namespace {

void zero_gate(Model& m) {
  for (auto* p : m.up_params().head_gate()) p->value.fill(0.0);
}

}  // namespace

TEST_CASE("cosine similarity") {
  bool zero = false;
  const std::vector<double> a{1, 0}, b{0, 2}, c{3, 0}, z{0, 0};
  CHECK(cosine_similarity(a, b, &zero) == 0.0);
  CHECK(cosine_similarity(a, c, &zero) == doctest::Approx(1.0));
  CHECK_FALSE(zero);
  CHECK(cosine_similarity(a, z, &zero) == 0.0);
  CHECK(zero);
}

TEST_CASE("saturated left gate makes the left token the head") {
  Model m(tiny_config(Variant::ConTreeLex), testing::small_vocab(), 3);
  zero_gate(m);
  m.up_params().b_z->value.fill(20.0);
  const auto tree = parse_sexpr("(3 (2 fun) (2 film))");
  Graph g;
  const auto enc = m.encode(g, tree, RunMode::eval());
  const auto heads = extract_heads(tree, enc);
  const auto& root = heads[static_cast<std::size_t>(tree.root())];
  CHECK(root.head_token == "fun");
  CHECK(root.chosen == Child::Left);
  CHECK(root.sim_left == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("averaging orthonormal children ties, resolved left") {
  const auto tree = parse_sexpr("(3 (2 good) (2 bad))");
  TreeUpParams none;
  Graph g;
  std::vector<Expr> xs{g.input(Tensor::vector({1, 0, 0})), g.input(Tensor::vector({0, 1, 0}))};
  EncodedTree enc;
  enc.up = encode_up(g, tree, xs, none, {HeadStrategy::Average, false, false});
  const auto heads = extract_heads(tree, enc);
  const auto& root = heads[static_cast<std::size_t>(tree.root())];
  CHECK(root.sim_left == root.sim_right);
  CHECK(root.tie);
  CHECK(root.head_token == "good");
}

TEST_CASE("head of every node is a token of its span and of its chosen child") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    const auto tree = testing::random_tree(rng, 9, 5);
    Model m(tiny_config(Variant::BiConTree), testing::small_vocab(), static_cast<std::uint64_t>(trial));
    Graph g;
    const auto enc = m.encode(g, tree, RunMode::eval());
    const auto heads = extract_heads(tree, enc);
    for (std::size_t id = 0; id < tree.size(); ++id) {
      const auto& n = tree.node(static_cast<int>(id));
      const auto& h = heads[id];
      const auto& leaf = tree.node(h.head_leaf);
      CHECK(leaf.start >= n.start);
      CHECK(leaf.end <= n.end);
      CHECK(leaf.token == h.head_token);
      if (!n.is_leaf()) {
        const int child = h.chosen == Child::Left ? n.left : n.right;
        CHECK(heads[static_cast<std::size_t>(child)].head_leaf == h.head_leaf);
      }
    }
    const auto text = render_heads(tree, heads);
    if (tree.size() > 1) CHECK(text.find("⟨") != std::string::npos);
    std::size_t lines = 0;
    for (char c : head_records(tree, heads)) lines += c == '\n';
    CHECK(lines == tree.size());
  }
}

TEST_CASE("extract_heads needs propagated heads") {
  Model m(tiny_config(Variant::ConTree), testing::small_vocab(), 3);
  const auto tree = parse_sexpr("(3 (2 fun) (2 film))");
  Graph g;
  const auto enc = m.encode(g, tree, RunMode::eval());
  CHECK_THROWS_AS(extract_heads(tree, enc), std::invalid_argument);
}

TEST_CASE("length buckets") {
  CHECK(length_bucket(35) == "(30,40]");
  CHECK(length_bucket(40) == "(30,40]");
  CHECK(length_bucket(41) == "(40,50]");
  CHECK(length_bucket(1) == "(0,10]");
  std::vector<SentenceOutcome> one{{std::vector<std::string>(35, "w"), 1, 1}};
  const auto rows = bucket_accuracy(one, Bucketing::Length);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].name == "(30,40]");
  CHECK(rows[3].accuracy == 1.0);
  CHECK_FALSE(rows[0].accuracy.has_value());
}

TEST_CASE("negation and class buckets") {
  std::vector<SentenceOutcome> data{
      {{"it", "is", "not", "good"}, 1, 1},
      {{"None", "of", "it"}, 0, 1},
      {{"is", "n't", "bad"}, 2, 2},
      {{"nice"}, 3, 3},
  };
  const auto neg = bucket_accuracy(data, Bucketing::Negation);
  CHECK(neg[0].total == 3);
  CHECK(neg[0].correct == 2);
  CHECK(neg[1].accuracy == 1.0);
  const auto cls = bucket_accuracy(data, Bucketing::Class, 5);
  REQUIRE(cls.size() == 5);
  CHECK(cls[0].accuracy == 0.0);
  CHECK_FALSE(cls[4].accuracy.has_value());
  CHECK_THROWS_AS(bucket_accuracy(data, Bucketing::Class, 2), std::invalid_argument);
}

TEST_CASE("majority predictor on a balanced set scores a fifth per length bucket") {
  std::vector<SentenceOutcome> data;
  for (int len = 1; len <= 50; ++len)
    for (int k = 0; k < 5; ++k) data.push_back({std::vector<std::string>(static_cast<std::size_t>(len), "w"), k, 2});
  for (const auto& row : bucket_accuracy(data, Bucketing::Length)) CHECK(*row.accuracy == doctest::Approx(0.2));
}

TEST_CASE("bucket accuracies aggregate back to the overall accuracy") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 60), cls(0, 4), neg(0, 9);
  std::vector<SentenceOutcome> data;
  std::size_t correct = 0;
  for (int i = 0; i < 300; ++i) {
    SentenceOutcome o{std::vector<std::string>(static_cast<std::size_t>(len(rng)), "w"), cls(rng), cls(rng)};
    if (neg(rng) == 0) o.tokens[0] = "not";
    correct += o.gold == o.predicted;
    data.push_back(std::move(o));
  }
  for (auto b : {Bucketing::Length, Bucketing::Class, Bucketing::Negation}) {
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& row : bucket_accuracy(data, b, 5)) {
      if (row.accuracy) weighted += *row.accuracy * static_cast<double>(row.total);
      total += row.total;
    }
    CHECK(total == data.size());
    CHECK(weighted / static_cast<double>(total) ==
          doctest::Approx(static_cast<double>(correct) / static_cast<double>(data.size())));
  }
}

TEST_CASE("strategy comparison with the zero-gate control") {
  std::mt19937_64 rng(3);
  std::vector<BinaryTree> train_set, dev_set;
  for (int i = 0; i < 8; ++i) train_set.push_back(testing::random_tree(rng, 5, 5));
  for (int i = 0; i < 4; ++i) dev_set.push_back(testing::random_tree(rng, 5, 5));
  TrainConfig cfg;
  cfg.model = tiny_config(Variant::ConTreeLex);
  cfg.epochs = 2;
  cfg.seeds = {1};
  CompareOptions opt;
  opt.zero_gate_control = true;
  const auto rows = compare_strategies(cfg, testing::small_vocab(), nullptr, train_set, dev_set,
                                       dev_set, opt);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].name == "L");
  CHECK(rows[0].reference == 51.1);
  CHECK(rows[3].reference == 53.5);
  CHECK_FALSE(rows[4].reference.has_value());
  CHECK(rows[4].dev_root_acc == rows[2].dev_root_acc);
  CHECK(rows[4].test_root_acc == rows[2].test_root_acc);

  cfg.model.variant = Variant::ConTree;
  CHECK_THROWS_AS(compare_strategies(cfg, testing::small_vocab(), nullptr, train_set, dev_set, {}),
                  std::invalid_argument);
}
