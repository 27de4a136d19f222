#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/Eigenvalues>

#include "martinbench/cache.hpp"
#include "martinbench/error.hpp"
#include "martinbench/extension.hpp"
#include "martinbench/fixtures.hpp"
#include "martinbench/parallel.hpp"
#include "oracles.hpp"

using namespace martinbench;

namespace {

const ExtensionSystem& srw() {
  static const ExtensionSystem s = srw_fixture();
  return s;
}

Word w(const char* s) { return srw().group.parse(s); }

}  // namespace

TEST_CASE("truncated operator structure") {
  SUBCASE("ball of radius 0 has no one-step returns") {
    auto op = TruncatedOperator::on_ball(srw(), 1, 0);
    CHECK(op->size() == 4);
    std::vector<double> out(4);
    op->apply(op->ones(), out);
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("one step from the identity") {
    auto op = TruncatedOperator::on_ball(srw(), 1, 1);
    std::vector<double> out(op->size());
    op->apply(op->indicator_group({}), out);
    auto pos = *op->position_of(w("a"));
    for (std::size_t x = 0; x < op->word_count(); ++x) CHECK(out[op->state(x, pos)] == doctest::Approx(0.25));
  }
  SUBCASE("state counts") {
    auto op = TruncatedOperator::on_ball(no_backtracking_fixture(), 1, 8);
    CHECK(op->size() == 4 * 13121);
    auto memory = TruncatedOperator::on_ball(memory_fixture(), 2, 3);
    CHECK(memory->word_count() == 16);
  }
  SUBCASE("restricted Omega") {
    auto ball = Ball::enumerate(srw().group, 3);
    std::vector<std::uint32_t> omega;
    for (std::size_t i = 0; i < ball->size(); ++i)
      if (ball->length(i) != 1) omega.push_back(static_cast<std::uint32_t>(i));
    TruncatedOperator op(srw(), 1, ball, omega);
    CHECK_FALSE(op.full_ball());
    CHECK(op.size() == 4 * omega.size());
    CHECK_FALSE(op.position_of(w("a")).has_value());
  }
}

TEST_CASE("transfer iterates") {
  auto op = TruncatedOperator::on_ball(srw(), 1, 4);
  auto f = op->indicator_group({});
  auto same = transfer_iterate(*op, f, 0);
  CHECK(same == f);
  auto two = transfer_iterate(*op, f, 2);
  for (std::size_t x = 0; x < 4; ++x) CHECK(two[op->state(x, 0)] == doctest::Approx(0.25));
  auto ones = transfer_iterate(*op, op->ones(), 1);
  for (std::size_t s = 0; s < op->size(); ++s)
    if (op->interior(s)) CHECK(ones[s] == doctest::Approx(1.0));
}

TEST_CASE("adjoint is the transpose") {
  auto op = TruncatedOperator::on_ball(asymmetric_fixture(), 1, 2);
  Eigen::MatrixXd M = oracle::dense(*op);
  std::vector<double> e(op->size(), 0.0), out(op->size());
  for (std::size_t j = 0; j < op->size(); j += 7) {
    e[j] = 1;
    op->apply_adjoint(e, out);
    for (std::size_t i = 0; i < op->size(); ++i)
      CHECK(out[i] == doctest::Approx(M(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))).epsilon(1e-14));
    e[j] = 0;
  }
  CsrMatrix csr = CsrMatrix::materialize(*op);
  Eigen::MatrixXd C = oracle::dense(csr);
  CHECK((C - M).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("green operator against a dense resolvent") {
  auto op = TruncatedOperator::on_ball(asymmetric_fixture(), 1, 2);
  Eigen::MatrixXd M = oracle::dense(*op);
  for (double r : {0.5, 1.0, 1.3}) {
    Eigen::MatrixXd Rz = oracle::resolvent(M, r);
    auto f = op->indicator_group(w("ab"));
    auto g = green_apply(*op, f, r, 1e-14);
    Eigen::VectorXd ref = Rz * oracle::vec(f);
    for (std::size_t i = 0; i < op->size(); ++i)
      CHECK(g.values[i] == doctest::Approx(ref(static_cast<Eigen::Index>(i))).epsilon(1e-11));
    auto m = op->indicator_state(3);
    auto ga = green_adjoint(*op, m, r, 1e-14);
    Eigen::VectorXd refa = Rz.transpose() * oracle::vec(m);
    for (std::size_t i = 0; i < op->size(); ++i)
      CHECK(ga.values[i] == doctest::Approx(refa(static_cast<Eigen::Index>(i))).epsilon(1e-11));
  }
}

TEST_CASE("green of constants below one") {
  auto op = TruncatedOperator::on_ball(trivial_fixture(), 1, 1);
  for (double r : {0.3, 0.8}) {
    auto g = green_apply(*op, op->ones(), r, 1e-13);
    for (std::size_t s = 0; s < op->size(); ++s)
      if (op->interior(s)) CHECK(g.values[s] == doctest::Approx(1 / (1 - r)).epsilon(1e-10));
  }
}

TEST_CASE("SRW green function on a ball matches the radial chain") {
  auto op = TruncatedOperator::on_ball(srw(), 1, 8);
  auto g = green_apply(*op, op->indicator_group({}), 1.0, 1e-13);
  double chain = oracle::radial_green_series(4, 8, 1.0, 10000);
  for (std::size_t x = 0; x < 4; ++x) CHECK(g.values[op->state(x, 0)] == doctest::Approx(chain).epsilon(1e-10));
  double full = oracle::tree_green(4, 1.0);
  CHECK(full == doctest::Approx(1.5));
  // the exit bound is an estimate of the truncation gap, not a rigorous bound
  CHECK(full - g.values[0] > 0);
  CHECK(g.cert.exit_bound == doctest::Approx(full - g.values[0]).epsilon(0.01));
  // sphere values follow G F^n
  double F = oracle::tree_first_passage(4, 1.0);
  CHECK(F == doctest::Approx(1.0 / 3));
  auto pos = *op->position_of(w("ab"));
  CHECK(g.values[op->state(1, pos)] / g.values[op->state(1, 0)] == doctest::Approx(F * F).epsilon(2e-3));
}

TEST_CASE("neumann series options") {
  auto op = TruncatedOperator::on_ball(srw(), 1, 3);
  auto f = op->indicator_group({});
  SeriesOptions plain;
  plain.accelerate = false;
  plain.tol = 1e-13;
  auto a = neumann(*op, f, 1.0, plain);
  SeriesOptions acc = plain;
  acc.accelerate = true;
  auto b = neumann(*op, f, 1.0, acc);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-10));

  std::vector<char> mask(op->size(), 1);
  for (std::size_t s = 0; s < op->size(); ++s)
    if (op->group_length(s) == 3) mask[s] = 0;
  SeriesOptions masked = plain;
  masked.mask = &mask;
  auto c = neumann(*op, f, 1.0, masked);
  auto op2 = TruncatedOperator::on_ball(srw(), 1, 2);
  auto d = green_apply(*op2, op2->indicator_group({}), 1.0, 1e-13);
  CHECK(c.values[0] == doctest::Approx(d.values[0]).epsilon(1e-11));

  CHECK_THROWS_AS(neumann(*op, std::vector<double>(3), 1.0), PreconditionError);
  auto z = TruncatedOperator::on_ball(trivial_fixture(), 1, 1);
  CHECK_THROWS_AS(neumann(*z, z->ones(), 1.5, plain), ConvergenceError);
}

TEST_CASE("H_r composition") {
  auto op = TruncatedOperator::on_ball(asymmetric_fixture(), 1, 2);
  Eigen::MatrixXd Rz = oracle::resolvent(oracle::dense(*op), 1.0);
  auto f1 = op->indicator_group({}), f2 = op->indicator_group(w("a"));
  auto h = hr_apply(*op, f1, f2, 1.0, 1e-14);
  Eigen::VectorXd inner = Rz * oracle::vec(f2);
  Eigen::VectorXd ref = Rz * (oracle::vec(f1).cwiseProduct(inner));
  for (std::size_t i = 0; i < op->size(); ++i)
    CHECK(h.values[i] == doctest::Approx(ref(static_cast<Eigen::Index>(i))).epsilon(1e-10));
  auto zero = hr_apply(*op, f1, op->zeros(), 1.0);
  for (double v : zero.values) CHECK(v == 0.0);
}

TEST_CASE("spectral radius") {
  auto op = TruncatedOperator::on_ball(srw(), 1, 3);
  Eigen::EigenSolver<Eigen::MatrixXd> es(oracle::dense(*op));
  double lead = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) lead = std::max(lead, std::abs(es.eigenvalues()[i]));
  auto p = perron_root(*op, 1e-12);
  CHECK(p.lower <= lead + 1e-9);
  CHECK(p.upper >= lead - 1e-9);
  CHECK(p.value == doctest::Approx(lead).epsilon(1e-8));

  CHECK(*radial_upper_bound(srw()) == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-9));
  auto triv = rho_estimate(trivial_fixture(), 1, 3);
  CHECK(triv.estimate == doctest::Approx(1.0).epsilon(1e-8));

  auto z = rho_estimate(z_fixture(), 1, 12);
  CHECK(z.lower.back() < 1.0);
  CHECK(z.estimate > z.lower.back());
  CHECK(z.estimate == doctest::Approx(1.0).epsilon(5e-3));

  auto est = rho_estimate(srw(), 1, 8);
  for (std::size_t i = 1; i < est.lower.size(); ++i) CHECK(est.lower[i] >= est.lower[i - 1] - 1e-12);
  CHECK(est.has_upper);
  CHECK(est.lower.back() <= est.upper);
  CHECK(est.R_certified);
  CHECK(est.R_hat <= 2 / std::sqrt(3.0));
}

TEST_CASE("extrapolation models") {
  auto harmonic = [](double n) { return 3.0 - 6.0 / (n + 3.0); };
  CHECK(extrapolate_harmonic(harmonic(6), harmonic(7), harmonic(8)) == doctest::Approx(3.0).epsilon(1e-12));
  auto geometric = [](double n) { return 1.5 - 0.2 * std::pow(0.4, n); };
  CHECK(extrapolate_aitken(geometric(3), geometric(4), geometric(5)) == doctest::Approx(1.5).epsilon(1e-12));
  auto lim = green_limit(srw(), 1, 8, 2 / std::sqrt(3.0) * (1 - 1e-12), true);
  CHECK(lim.radii == std::vector<int>{6, 7, 8});
  CHECK(lim.estimate == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("green cache memoization and disk persistence") {
  auto dir = std::filesystem::temp_directory_path() / "martinbench-test-cache";
  std::filesystem::remove_all(dir);
  set_cache_dir(dir.string());
  auto op = TruncatedOperator::on_ball(srw(), 1, 4);
  GreenCache c1(op);
  auto a = c1.forward_group(w("a"), 1.0);
  CHECK(a.get() == c1.forward_group(w("a"), 1.0).get());
  CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator{}) == 1);
  GreenCache c2(op);
  auto b = c2.forward_group(w("a"), 1.0);
  CHECK(b->values == a->values);
  CHECK(b->cert.iterations == a->cert.iterations);
  set_cache_dir("");
  std::filesystem::remove_all(dir);
}

TEST_CASE("translated kernels agree with direct solves") {
  auto op = TruncatedOperator::on_ball(asymmetric_fixture(), 1, 6);
  GreenCache cache(op, 1e-13);
  TranslatedKernel K(cache, 1.0);
  // G(X_(y,z))(x,g) with z^-1 g well inside the ball, compared with a solve centred at z = id
  auto direct = cache.forward_state(op->state(2, 0), 1.0);
  auto g = w("ab");
  auto v = K.value(1, 2, {}, g);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(direct->values[op->state(1, *op->position_of(g))]).epsilon(1e-12));
  CHECK_FALSE(K.value(0, 0, w("aaaa"), w("BBBB")).has_value());
}

TEST_CASE("parallel application is deterministic") {
  auto op = TruncatedOperator::on_ball(memory_fixture(), 2, 5);
  std::vector<double> f(op->size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(static_cast<double>(i));
  int saved = thread_count();
  set_thread_count(1);
  auto a = green_apply(*op, f, 1.0, 1e-12);
  set_thread_count(4);
  auto b = green_apply(*op, f, 1.0, 1e-12);
  set_thread_count(saved);
  CHECK(a.values == b.values);
}

TEST_CASE("diagnostics on the SRW fixture") {
  auto op = TruncatedOperator::on_ball(srw(), 1, 7);
  GreenCache cache(op, 1e-13);
  auto rev = reversibility_check(cache, 1.0, 3);
  CHECK(rev.min_ratio == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(rev.max_ratio == doctest::Approx(1.0).epsilon(1e-8));
  // Killing at the sphere of radius 7 makes the ratio a gambler's-ruin
  // quotient; it tends to 3 as the margin grows.
  for (int margin : {1, 2, 3}) {
    auto d = distortion_scan(cache, w("a"), 1.0, 0, margin);
    double ruin = (std::pow(3.0, margin + 2) - 1) / (std::pow(3.0, margin + 1) - 1);
    CHECK(d.K_hat == doctest::Approx(ruin).epsilon(1e-9));
    CHECK(d.N_hat == 1);
  }
  auto did = distortion_scan(cache, {}, 1.0, 1, 2);
  CHECK(did.K_hat == doctest::Approx(1.0).epsilon(1e-9));

  auto aop = TruncatedOperator::on_ball(asymmetric_fixture(), 1, 6);
  GreenCache acache(aop, 1e-13);
  auto arev = reversibility_check(acache, 1.0, 3);
  CHECK(arev.max_ratio > 1.01);
  CHECK(std::isfinite(arev.max_ratio));

  auto tr = TruncatedOperator::on_ball(trivial_fixture(), 1, 2);
  GreenCache tcache(tr);
  auto rho = rho_estimate(trivial_fixture(), 1, 2);
  auto wit = erho_witness(tcache, rho);
  CHECK(wit.constant);
  CHECK(wit.violation == doctest::Approx(0.0));

  auto t = transitivity_report(*op);
  CHECK(t.components >= 1);
  CHECK(t.core_fraction > 0);
}
