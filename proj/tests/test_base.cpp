#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "martinbench/base.hpp"
#include "martinbench/error.hpp"

using namespace martinbench;

namespace {

Subshift no_backtracking() {
  // letters a, A, b, B; forbid a symbol followed by its inverse
  std::vector<std::vector<int>> T(4, std::vector<int>(4, 1));
  T[0][1] = T[1][0] = T[2][3] = T[3][2] = 0;
  return Subshift(4, T);
}

}  // namespace

TEST_CASE("admissible words") {
  CHECK(Subshift::full(4).admissible_words(2).size() == 16);
  CHECK(no_backtracking().admissible_words(2).size() == 12);
  CHECK(no_backtracking().admissible_words(1).size() == 4);
  CHECK(no_backtracking().count_words(5) == 4 * 81);
  CHECK_THROWS_AS(Subshift(2, {{1, 0}, {0, 1}}), PreconditionError);
}

TEST_CASE("cylinder weights") {
  BaseSystem bern(Subshift::full(4), Potential::constant(4, 1, std::log(0.25)));
  SymbolWord x{0};
  CHECK(bern.cylinder_weight(SymbolWord{1, 2, 3}, x) == doctest::Approx(1.0 / 64));
  CHECK(bern.cylinder_weight(SymbolWord{}, x) == 1.0);

  // depth-2 Markov potential: exp(phi(a b)) = P(a | b) with columns summing to one
  std::vector<double> P{0.7, 0.2, 0.3, 0.8};  // index a * 2 + b
  std::vector<double> table;
  for (double p : P) table.push_back(std::log(p));
  BaseSystem markov(Subshift::full(2), Potential(2, 2, table));
  double direct = P[0 * 2 + 1] * P[1 * 2 + 1] * P[1 * 2 + 0];
  CHECK(markov.cylinder_weight(SymbolWord{0, 1, 1}, SymbolWord{0}) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(markov.row_sum_error() < 1e-12);
}

TEST_CASE("ruelle normalization") {
  BaseSystem bern(Subshift::full(4), Potential::constant(4, 1, std::log(0.25)));
  CHECK(bern.normalization().lambda == doctest::Approx(1.0));
  BaseSystem halves(Subshift::full(4), Potential::constant(4, 1, std::log(0.5)));
  CHECK(halves.normalization().lambda == doctest::Approx(2.0));
  for (double h : halves.normalization().h) CHECK(h == doctest::Approx(1.0));

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> table(9);
  for (double& t : table) t = U(rng);
  Potential raw(3, 2, table);
  auto [norm, phi] = ruelle_normalize(Subshift::full(3), raw);
  CHECK(norm.residual < 1e-12);

  // Perron root of the depth-1 transfer matrix M[b][c] = sum_a exp(raw(a b)) [a == c]
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3, 3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) M(b, a) = std::exp(raw(SymbolWord{static_cast<Symbol>(a), static_cast<Symbol>(b)}));
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  double perron = 0;
  for (int i = 0; i < 3; ++i) perron = std::max(perron, es.eigenvalues()[i].real());
  CHECK(norm.lambda == doctest::Approx(perron).epsilon(1e-10));

  BaseSystem sys(Subshift::full(3), raw);
  CHECK(sys.row_sum_error() < 1e-12);
}

TEST_CASE("D_alpha seminorm") {
  BaseSystem bern(Subshift::full(4), Potential::constant(4, 1, std::log(0.25)), 0.5, 1.0);
  const int m = 2;
  std::size_t nwords = 16;
  std::vector<double> constant(nwords, 3.0);
  for (double v : dalpha_seminorm(bern, m, constant, 1, 1.0)) CHECK(v == 0.0);

  std::vector<double> ind(nwords, 0.0);
  ind[0 * 4 + 1] = 1;  // cylinder [0 1]
  auto s = dalpha_seminorm(bern, m, ind, 1, 1.0);
  CHECK(s[0] == doctest::Approx(2.0));
  CHECK(s[1] == 0.0);

  std::vector<double> depth1(nwords);
  for (std::size_t i = 0; i < nwords; ++i) depth1[i] = static_cast<double>(i / 4);
  for (double v : dalpha_seminorm(bern, m, depth1, 1, 1.0)) CHECK(v == 0.0);
}

TEST_CASE("transfer operator fixes constants after normalization") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  std::vector<double> table(16);
  for (double& t : table) t = U(rng);
  BaseSystem sys(Subshift::full(4), Potential(4, 2, table));
  std::vector<double> ones(sys.shift().admissible_words(2).size(), 1.0);
  for (double v : sys.transfer(ones, 2)) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}
