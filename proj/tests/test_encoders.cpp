#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "lextree/gradcheck.hpp"
#include "lextree/seq_lstm.hpp"
#include "lextree/tree_down.hpp"
#include "lextree/tree_up.hpp"

using namespace lextree;

namespace {

std::vector<Expr> leaf_vectors(Graph& g, std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Expr> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t({dim});
    for (auto& v : t.data()) v = u(rng);
    out.push_back(g.input(std::move(t)));
  }
  return out;
}

void zero(const std::vector<Parameter*>& ps) {
  for (auto* p : ps) p->value.fill(0.0);
}

}  // namespace

TEST_CASE("sequential LSTM step shapes and zero-parameter state") {
  ParamSet ps;
  auto p = LstmCellParams::create(ps, "seq", 5, 4, 1);
  CHECK(p.all().size() == 15);
  CHECK(ps.size() == 15);
  Graph g;
  auto xs = leaf_vectors(g, 3, 5, 2);
  auto s = seq_step(g, xs[0], zero_state(g, 4), p);
  CHECK(s.h.value().shape() == Shape{4});
  CHECK(s.c.value().shape() == Shape{4});

  // all-zero weights: g = 0 so the cell never leaves zero
  zero(p.all());
  Graph g2;
  auto ys = leaf_vectors(g2, 3, 5, 2);
  auto z = seq_step(g2, ys[0], zero_state(g2, 4), p);
  for (double v : z.c.value().data()) CHECK(v == 0.0);
}

TEST_CASE("bidirectional summary matches per-position outputs") {
  ParamSet ps;
  auto f = LstmCellParams::create(ps, "f", 5, 4, 1);
  auto b = LstmCellParams::create(ps, "b", 5, 4, 1);
  Graph g;
  auto xs = leaf_vectors(g, 4, 5, 3);
  auto per = run_bidirectional(g, xs, f, b);
  auto sum = run_bidirectional_summary(g, xs, f, b);
  REQUIRE(per.size() == 4);
  CHECK(per[0].value().size() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(per[3].value()[i] == sum.forward_last.value()[i]);
    CHECK(per[0].value()[4 + i] == sum.backward_first.value()[i]);
  }
  CHECK_THROWS_AS(run_bidirectional(g, leaf_vectors(g, 2, 3, 1), f, b), ShapeError);
}

TEST_CASE("parameters are drawn per name") {
  ParamSet a, b;
  a.add("other", {7, 7}, Init::glorot(), 9);
  auto pa = LstmCellParams::create(a, "seq", 5, 4, 9);
  auto pb = LstmCellParams::create(b, "seq", 5, 4, 9);
  CHECK(pa.W_xg->value == pb.W_xg->value);
  auto pc = LstmCellParams::create(b, "seq2", 5, 4, 9);
  CHECK_FALSE(pc.W_xg->value == pb.W_xg->value);
}

TEST_CASE("head strategies") {
  ParamSet ps;
  TreeUpParams::Options opt;
  opt.lexicalized = true;
  opt.head_gate = true;
  auto p = TreeUpParams::create(ps, 5, 4, opt, 1);
  Graph g;
  auto xs = leaf_vectors(g, 2, 5, 4);
  CHECK(select_head(g, HeadStrategy::Left, xs[0], xs[1], p).id == xs[0].id);
  CHECK(select_head(g, HeadStrategy::Right, xs[0], xs[1], p).id == xs[1].id);
  const auto& avg = select_head(g, HeadStrategy::Average, xs[0], xs[1], p).value();
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(avg[i] == doctest::Approx((xs[0].value()[i] + xs[1].value()[i]) / 2));

  // saturated gate copies the left child
  zero(p.head_gate());
  p.b_z->value.fill(40.0);
  Expr z;
  const auto& sat = select_head(g, HeadStrategy::Gated, xs[0], xs[1], p, &z).value();
  for (std::size_t i = 0; i < 5; ++i) CHECK(sat[i] == doctest::Approx(xs[0].value()[i]));
  CHECK(z.valid());
  CHECK(parse_strategy("g") == HeadStrategy::Gated);
  CHECK_THROWS_AS(parse_strategy("X"), std::invalid_argument);
}

TEST_CASE("zero gate equals averaging bit for bit over whole encodings") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tree = testing::random_tree(rng, 8, 5);
    ParamSet ps;
    TreeUpParams::Options opt;
    opt.lexicalized = true;
    opt.head_gate = true;
    auto p = TreeUpParams::create(ps, 5, 4, opt, static_cast<std::uint64_t>(trial));
    zero(p.head_gate());
    Graph g;
    auto xs = leaf_vectors(g, tree.num_leaves(), 5, static_cast<std::uint64_t>(trial));
    UpEncodeOptions gated{HeadStrategy::Gated, true, true};
    UpEncodeOptions avg{HeadStrategy::Average, true, true};
    const auto a = encode_up(g, tree, xs, p, gated);
    const auto b = encode_up(g, tree, xs, p, avg);
    for (std::size_t i = 0; i < tree.size(); ++i) {
      CHECK(a[i].h.value() == b[i].h.value());
      CHECK(a[i].c.value() == b[i].c.value());
      CHECK(a[i].x.value() == b[i].x.value());
    }
  }
}

TEST_CASE("lexicalized branch with zero lexical weights equals the baseline bit for bit") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tree = testing::random_tree(rng, 8, 5);
    ParamSet ps;
    TreeUpParams::Options opt;
    opt.lexicalized = true;
    opt.split_forget_projection = trial % 2 == 1;
    auto p = TreeUpParams::create(ps, 5, 4, opt, static_cast<std::uint64_t>(trial));
    zero({p.W_xi, p.W_xf, p.W_xo, p.W_xg});
    if (p.W_xf_r) p.W_xf_r->value.fill(0.0);
    Graph g;
    auto xs = leaf_vectors(g, tree.num_leaves(), 5, static_cast<std::uint64_t>(trial) + 100);
    const auto lex = encode_up(g, tree, xs, p, {HeadStrategy::Average, true, true});
    const auto base = encode_up(g, tree, xs, p, {std::nullopt, false, true});
    for (std::size_t i = 0; i < tree.size(); ++i) {
      CHECK(lex[i].h.value() == base[i].h.value());
      CHECK(lex[i].c.value() == base[i].c.value());
    }
  }
}

TEST_CASE("branch step input checks") {
  ParamSet ps;
  auto p = TreeUpParams::create(ps, 5, 4, {}, 1);
  Graph g;
  auto xs = leaf_vectors(g, 2, 5, 1);
  auto l = leaf_step(g, xs[0], p);
  auto r = leaf_step(g, xs[1], p);
  CHECK_THROWS_AS(branch_step(g, xs[0], l, r, p, true), std::invalid_argument);
  CHECK_NOTHROW(branch_step(g, Expr{}, l, r, p, false));
  const auto tree = parse_sexpr("(1 (2 a) (3 b))");
  CHECK_THROWS_AS(encode_up(g, tree, std::span<const Expr>(xs.data(), 1), p, {}), ShapeError);
}

TEST_CASE("top-down states follow the root-to-node path") {
  ParamSet ps;
  auto p = TopDownParams::create(ps, 5, 4, 3);
  const auto tree = parse_sexpr("(1 (2 a) (3 (0 b) (4 c)))");
  Graph g;
  std::vector<Expr> heads;
  auto xs = leaf_vectors(g, tree.size(), 5, 7);
  for (std::size_t i = 0; i < tree.size(); ++i) heads.push_back(xs[i]);
  const auto states = encode_down(g, tree, heads, p);

  // recompute the path to the last leaf by hand
  const int root = tree.root();
  const int right = tree.node(root).right;
  const int leaf = tree.node(right).right;
  auto s0 = lstm_cell_step(g, heads[static_cast<std::size_t>(root)], zero_state(g, 4), p.root);
  auto s1 = lstm_cell_step(g, heads[static_cast<std::size_t>(right)], s0, p.right);
  auto s2 = lstm_cell_step(g, heads[static_cast<std::size_t>(leaf)], s1, p.right);
  CHECK(states[static_cast<std::size_t>(leaf)].h.value() == s2.h.value());
  const int left = tree.node(root).left;
  auto sl = lstm_cell_step(g, heads[static_cast<std::size_t>(left)], s0, p.left);
  CHECK(states[static_cast<std::size_t>(left)].h.value() == sl.h.value());

  CHECK_THROWS_AS(encode_down(g, tree, std::span<const Expr>(heads.data(), 2), p),
                  std::invalid_argument);
}

TEST_CASE("literal top-down transition reads the parent cell for h") {
  ParamSet ps;
  auto p = TopDownParams::create(ps, 5, 4, 3);
  Graph g;
  auto xs = leaf_vectors(g, 2, 5, 8);
  auto parent = lstm_cell_step(g, xs[0], zero_state(g, 4), p.root);
  DownOptions lit;
  lit.literal_equations = true;
  auto s = step_down(g, xs[1], parent, Side::Left, p, lit, xs[0]);
  auto normal = step_down(g, xs[1], parent, Side::Left, p, {}, xs[0]);
  CHECK_FALSE(s.h.value() == normal.h.value());
}

TEST_CASE("encoder gradients agree with finite differences") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const auto tree = testing::random_tree(rng, 5, 5);
    ParamSet ps;
    TreeUpParams::Options opt;
    opt.lexicalized = true;
    opt.head_gate = true;
    auto up = TreeUpParams::create(ps, 5, 4, opt, static_cast<std::uint64_t>(trial));
    auto down = TopDownParams::create(ps, 5, 4, static_cast<std::uint64_t>(trial));
    Parameter& emb = ps.add("emb", {static_cast<std::size_t>(tree.num_leaves()), 5}, Init::uniform(1.0), 5);
    auto build = [&](Graph& g) {
      std::vector<Expr> xs;
      for (std::size_t i = 0; i < tree.num_leaves(); ++i) xs.push_back(g.lookup(emb, i));
      auto st = encode_up(g, tree, xs, up, {HeadStrategy::Gated, true, true});
      std::vector<Expr> heads;
      for (auto& s : st) heads.push_back(s.x);
      auto ds = encode_down(g, tree, heads, down);
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < tree.size(); ++i) {
        terms.push_back(sum_elements(st[i].h));
        terms.push_back(sum_elements(ds[i].h));
      }
      return add(terms);
    };
    const auto r = grad_check(ps, build, 1e-5);
    INFO("worst " << r.worst << " err " << r.max_rel_err);
    CHECK(r.pass);
  }
}
