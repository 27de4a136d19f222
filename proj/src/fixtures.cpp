#include "martinbench/fixtures.hpp"

#include <cmath>

#include "martinbench/error.hpp"

namespace martinbench {

namespace {

std::vector<Word> letters_as_labels(int count) {
  std::vector<Word> k;
  for (int i = 0; i < count; ++i) k.push_back({static_cast<Letter>(i)});
  return k;
}

ExtensionSystem bernoulli(GroupModel g, std::vector<double> p, std::vector<Word> kappa,
                          std::string name) {
  const int A = static_cast<int>(p.size());
  std::vector<double> table;
  for (double v : p) table.push_back(std::log(v));
  BaseSystem base(Subshift::full(A), Potential(A, 1, table));
  return ExtensionSystem(std::move(base), std::move(g), std::move(kappa), std::move(name));
}

}  // namespace

ExtensionSystem srw_fixture() {
  return bernoulli(GroupModel::free(2), {0.25, 0.25, 0.25, 0.25}, letters_as_labels(4), "srw");
}

ExtensionSystem asymmetric_fixture() {
  return bernoulli(GroupModel::free(2), {0.4, 0.1, 0.3, 0.2}, letters_as_labels(4), "asymmetric");
}

ExtensionSystem memory_fixture() {
  // symbol i is letter i of F2, whose inverse is i ^ 1
  std::vector<double> table(64);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        double w = 1.0 + 0.15 * a;
        if (b == (a ^ 1)) w *= 0.3;
        if (c == a) w *= 1.7;
        table[static_cast<std::size_t>(16 * a + 4 * b + c)] = std::log(w);
      }
  BaseSystem base(Subshift::full(4), Potential(4, 3, table));
  return ExtensionSystem(std::move(base), GroupModel::free(2), letters_as_labels(4), "memory");
}

ExtensionSystem no_backtracking_fixture() {
  std::vector<std::vector<int>> t(4, std::vector<int>(4, 1));
  for (int a = 0; a < 4; ++a) t[static_cast<std::size_t>(a)][static_cast<std::size_t>(a ^ 1)] = 0;
  std::vector<double> table(16, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) table[static_cast<std::size_t>(4 * a + b)] = std::log(1.0 + 0.5 * ((a + 2 * b) % 3));
  BaseSystem base(Subshift(4, t), Potential(4, 2, table));
  return ExtensionSystem(std::move(base), GroupModel::free(2), letters_as_labels(4), "no-backtracking");
}

ExtensionSystem trivial_fixture() {
  return bernoulli(GroupModel::free(2), {0.25, 0.25, 0.25, 0.25}, std::vector<Word>(4), "trivial");
}

ExtensionSystem z_fixture() {
  return bernoulli(GroupModel::free(1), {0.5, 0.5}, letters_as_labels(2), "z");
}

ExtensionSystem z2z3_fixture() {
  return bernoulli(GroupModel::free_product({2, 3}), {0.5, 0.25, 0.25}, letters_as_labels(3), "z2z3");
}

ExtensionSystem fixture_by_name(std::string_view name) {
  if (name == "srw") return srw_fixture();
  if (name == "asymmetric") return asymmetric_fixture();
  if (name == "memory") return memory_fixture();
  if (name == "no-backtracking") return no_backtracking_fixture();
  if (name == "trivial") return trivial_fixture();
  if (name == "z") return z_fixture();
  if (name == "z2z3") return z2z3_fixture();
  throw ConfigError("unknown fixture '" + std::string(name) + "'");
}

std::vector<std::string> fixture_names() {
  return {"srw", "asymmetric", "memory", "no-backtracking", "trivial", "z", "z2z3"};
}

}  // namespace martinbench
