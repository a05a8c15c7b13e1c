#pragma once

#include <random>
#include <string>
#include <vector>

#include "lextree/model.hpp"
#include "lextree/treebank.hpp"

namespace lextree::testing {

inline const std::vector<std::string>& small_words() {
  static const std::vector<std::string> w = {"good", "bad", "not", "film", "the", "dull", "fun", "a"};
  return w;
}

// Random binary tree with 1..max_leaves leaves, tokens from small_words()
// and every node labeled in [0, classes).
inline BinaryTree random_tree(std::mt19937_64& rng, std::size_t max_leaves, int classes) {
  std::uniform_int_distribution<std::size_t> nleaf(1, max_leaves);
  std::uniform_int_distribution<std::size_t> pick_word(0, small_words().size() - 1);
  std::uniform_int_distribution<int> pick_label(0, classes - 1);
  BinaryTree t;
  std::vector<int> pending;
  const std::size_t n = nleaf(rng);
  for (std::size_t i = 0; i < n; ++i)
    pending.push_back(t.add_leaf(std::to_string(pick_label(rng)), small_words()[pick_word(rng)]));
  while (pending.size() > 1) {
    std::uniform_int_distribution<std::size_t> at(0, pending.size() - 2);
    const std::size_t k = at(rng);
    const int merged = t.add_branch(std::to_string(pick_label(rng)), pending[k], pending[k + 1]);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k), pending.begin() + static_cast<std::ptrdiff_t>(k) + 2);
    pending.insert(pending.begin() + static_cast<std::ptrdiff_t>(k), merged);
  }
  t.finish();
  return t;
}

inline Vocabulary small_vocab() {
  Vocabulary v;
  for (const auto& w : small_words()) v.add(w);
  return v;
}

inline ModelConfig tiny_config(Variant v, HeadStrategy s = HeadStrategy::Gated) {
  ModelConfig c;
  c.variant = v;
  c.embed_dim = 5;
  c.hidden_dim = 4;
  c.output_hidden = 3;
  c.num_classes = 5;
  c.strategy = s;
  return c;
}

inline constexpr Variant kAllVariants[] = {Variant::BiLSTM, Variant::ConTree,
                                           Variant::TopDownConTree, Variant::ConTreeLex,
                                           Variant::BiConTree};

inline std::string fixture(const std::string& name) {
  return std::string(LEXTREE_TEST_DATA) + "/" + name;
}

}  // namespace lextree::testing
