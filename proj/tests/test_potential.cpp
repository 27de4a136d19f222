#include <doctest.h>

#include <random>

#include "martinbench/error.hpp"
#include "martinbench/fixtures.hpp"
#include "martinbench/potential.hpp"
#include "oracles.hpp"

using namespace martinbench;

namespace {

struct Toy {
  ExtensionSystem sys = asymmetric_fixture();
  std::shared_ptr<TruncatedOperator> op = TruncatedOperator::on_ball(sys, 1, 2);
  Eigen::MatrixXd M = oracle::dense(*op);
  AtomSet A = atoms_over(*op, {0, 1});

  Eigen::MatrixXd dense_of(const LinearAction& a) const { return oracle::dense(a); }
  Eigen::MatrixXd diag(const AtomSet& S) const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(S.size()));
    for (std::size_t i = 0; i < S.size(); ++i) d(static_cast<Eigen::Index>(i)) = S[i] ? 1 : 0;
    return d.asDiagonal();
  }
};

AtomSet complement_of(const AtomSet& A) {
  AtomSet B(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) B[i] = !A[i];
  return B;
}

Measure random_measure(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Measure m(n);
  for (double& v : m) v = U(rng);
  return m;
}

}  // namespace

TEST_CASE("first entry and last exit identities") {
  Toy t;
  const double r = 1.0;
  const auto n = static_cast<Eigen::Index>(t.op->size());
  Eigen::MatrixXd G = oracle::resolvent(t.M, r);
  AtomSet B = complement_of(t.A);
  Eigen::MatrixXd DB = t.diag(B);
  Eigen::MatrixXd GB = (Eigen::MatrixXd::Identity(n, n) - r * DB * t.M * DB).inverse() * DB;

  // restricted green against its closed form
  auto f = random_measure(t.op->size(), 1);
  auto gb = restricted_green(*t.op, B, f, r);
  Eigen::VectorXd gb_ref = GB * oracle::vec(f);
  for (Eigen::Index i = 0; i < n; ++i) CHECK(gb[static_cast<std::size_t>(i)] == doctest::Approx(gb_ref(i)).epsilon(1e-12));

  FirstEntryOperator F(*t.op, t.A, r);
  LastExitOperator R(*t.op, t.A, r);
  Eigen::MatrixXd FA = t.dense_of(F), RA = t.dense_of(R);
  CHECK((G - GB - G * FA).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((G * FA - RA * G).cwiseAbs().maxCoeff() < 1e-12);
  // G^* = I + r L^* G^*
  Eigen::MatrixXd Gs = G.transpose();
  CHECK((r * t.M.transpose() * Gs - (Gs - Eigen::MatrixXd::Identity(n, n))).cwiseAbs().maxCoeff() < 1e-12);

  // adjoint actions are transposes
  std::vector<double> e(t.op->size(), 0.0), out(t.op->size());
  for (std::size_t j = 0; j < t.op->size(); j += 5) {
    e[j] = 1;
    F.apply_adjoint(e, out);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(FA(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))).epsilon(1e-12));
    R.apply_adjoint(e, out);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(RA(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))).epsilon(1e-12));
    e[j] = 0;
  }
}

TEST_CASE("first entry mass on the SRW tree") {
  // The walk from a reaches the identity with generating function 1/3 at
  // r = 1; a ball of radius 10 loses only a tiny fraction of that.
  auto sys = srw_fixture();
  auto op = TruncatedOperator::on_ball(sys, 1, 10);
  AtomSet A = atoms_over(*op, {0});
  FirstEntryOperator F(*op, A, 1.0, 1e-14);
  // F_A^*(1_A) at (x, a) is the weight of orbits from (x, a) entering A
  std::vector<double> out(op->size());
  F.apply_adjoint(std::vector<double>(A.begin(), A.end()), out);
  auto pos = *op->position_of(sys.group.parse("a"));
  double total = 0;
  for (std::size_t x = 0; x < op->word_count(); ++x) total += out[op->state(x, pos)];
  total /= static_cast<double>(op->word_count());
  CHECK(total == doctest::Approx(1.0 / 3).epsilon(1e-3));
  CHECK(total < 1.0 / 3);
}

TEST_CASE("excessive measures and Riesz decomposition") {
  Toy t;
  const double r = 1.0;
  const std::size_t n = t.op->size();
  Eigen::MatrixXd Gs = oracle::resolvent(t.M, r).transpose();

  // a potential G^*(nu) is excessive and decomposes with zero conformal part
  auto nu = random_measure(n, 3);
  Eigen::VectorXd p = Gs * oracle::vec(nu);
  Measure mu(p.data(), p.data() + p.size());
  CHECK(check_excessive(*t.op, mu, r).excessive);
  auto d = riesz_decompose(*t.op, mu, r);
  CHECK(d.residual <= 1e-10);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(d.nu[i] == doctest::Approx(nu[i]).epsilon(1e-9));
    CHECK(std::abs(d.mu0[i]) <= 1e-9 * oracle::vec(mu).maxCoeff());
  }

  // L^* m - m / r > 0 at some atom
  Measure spike(n, 0.0);
  spike[0] = 1;
  Measure bad(n, 0.0);
  adjoint_apply(*t.op, spike).swap(bad);
  auto ex = check_excessive(*t.op, bad, r);
  CHECK_FALSE(ex.excessive);
  CHECK(ex.worst > 0);
  CHECK_THROWS_AS(riesz_decompose(*t.op, bad, r), PreconditionError);

  // a measure with a conformal part: the trivial skew product keeps the
  // stationary Bernoulli measure conformal at r = 1 away from the ball edge
  auto triv = trivial_fixture();
  auto top = TruncatedOperator::on_ball(triv, 1, 2);
  Measure stat(top->size(), 0.0);
  for (std::size_t x = 0; x < top->word_count(); ++x) stat[top->state(x, 0)] = 0.25;
  auto dt = riesz_decompose(*top, stat, 1.0);
  for (std::size_t i = 0; i < top->size(); ++i) {
    CHECK(dt.nu[i] == doctest::Approx(0.0));
    CHECK(dt.mu0[i] == doctest::Approx(stat[i]));
  }
  CHECK(dt.conformal_residual < 1e-12);
}

TEST_CASE("reduced measure matches a linear program") {
  Toy t;
  const double r = 1.0;
  const std::size_t n = t.op->size();
  auto nu = random_measure(n, 9);
  Eigen::VectorXd p = oracle::resolvent(t.M, r).transpose() * oracle::vec(nu);
  Measure mu(p.data(), p.data() + p.size());
  auto red = reduce_measure(*t.op, mu, t.A, r);
  CHECK(red.ok);
  CHECK(red.above_mu <= 1e-12);
  CHECK(red.off_on_A <= 1e-12);

  // Reduced measure = smallest excessive measure agreeing with mu on A. Its
  // value at atom k solves min m_k over {m >= 0, r L^* m <= m, m = mu on A}.
  Eigen::MatrixXd Lt = t.M.transpose();
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j)
      row[j] = r * Lt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - (i == j ? 1.0 : 0.0);
    A.push_back(row);
    b.push_back(0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!t.A[i]) continue;
    std::vector<double> up(n, 0.0), down(n, 0.0);
    up[i] = 1;
    down[i] = -1;
    A.push_back(up);
    b.push_back(mu[i]);
    A.push_back(down);
    b.push_back(-mu[i]);
  }
  for (std::size_t k = 0; k < n; k += 3) {
    std::vector<double> c(n, 0.0);
    c[k] = 1;
    auto lp = oracle::lp_minimize(c, A, b);
    REQUIRE(lp.feasible);
    REQUIRE(lp.bounded);
    CHECK(red.value[k] == doctest::Approx(lp.value).epsilon(1e-8));
  }
}

TEST_CASE("infimum and domination") {
  Measure a{1, 5, 3}, b{2, 4, 3};
  CHECK(measure_infimum({a, b}) == Measure{1, 4, 3});
  CHECK_THROWS_AS(measure_infimum({}), PreconditionError);

  Toy t;
  const double r = 1.0;
  const std::size_t n = t.op->size();
  Eigen::MatrixXd Gs = oracle::resolvent(t.M, r).transpose();
  Measure charge(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (t.A[i]) charge[i] = 0.1 * static_cast<double>(i % 3 + 1);
  Eigen::VectorXd p = Gs * oracle::vec(charge);
  // mu = G^*(charge) + extra potential is dominated
  auto extra = random_measure(n, 4);
  Eigen::VectorXd q = p + Gs * oracle::vec(extra);
  Measure mu(q.data(), q.data() + q.size());
  auto rep = domination_check(*t.op, mu, charge, t.A, r);
  CHECK(rep.dominated);
  CHECK(rep.margin >= -1e-12);

  // without excessiveness the conclusion fails: keep the potential on A only
  for (std::size_t i = 0; i < n; ++i) mu[i] = t.A[i] ? p(static_cast<Eigen::Index>(i)) : 0.0;
  auto bad = domination_check(*t.op, mu, charge, t.A, r);
  CHECK_FALSE(bad.dominated);
  CHECK(bad.margin_on_A >= -1e-12);
  CHECK_FALSE(t.A[bad.worst_atom]);

  for (std::size_t i = 0; i < n; ++i) mu[i] = 0.5 * p(static_cast<Eigen::Index>(i));
  CHECK_THROWS_AS(domination_check(*t.op, mu, charge, t.A, r), PreconditionError);

  Measure off(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (!t.A[i]) {
      off[i] = 1;
      break;
    }
  CHECK_THROWS_AS(domination_check(*t.op, mu, off, t.A, r), PreconditionError);
}
