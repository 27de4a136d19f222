#include "martinbench/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "martinbench/error.hpp"

namespace martinbench {

namespace {

double sup(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void check_size(const LinearAction& op, std::size_t n) {
  if (n != op.size()) throw PreconditionError("index mismatch");
}

AtomSet complement(const AtomSet& A) {
  AtomSet B(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) B[i] = A[i] ? 0 : 1;
  return B;
}

}  // namespace

Measure adjoint_apply(const LinearAction& op, std::span<const double> m) {
  check_size(op, m.size());
  Measure out(m.size());
  op.apply_adjoint(m, out);
  return out;
}

ExcessiveReport check_excessive(const LinearAction& op, std::span<const double> m, double r,
                                double tol) {
  if (!(r > 0)) throw PreconditionError("r must be positive");
  Measure Lm = adjoint_apply(op, m);
  const double scale = tol * sup(m);
  ExcessiveReport rep;
  rep.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    double d = Lm[i] - m[i] / r;
    if (d > rep.worst) {
      rep.worst = d;
      rep.worst_atom = i;
    }
    if (std::abs(d) <= scale) rep.conformal.push_back(i);
  }
  if (m.empty()) rep.worst = 0;
  rep.excessive = rep.worst <= scale;
  return rep;
}

RieszDecomposition riesz_decompose(const LinearAction& op, std::span<const double> mu, double r,
                                   const AtomSet& interior, double tol) {
  check_size(op, mu.size());
  if (!interior.empty() && interior.size() != mu.size()) throw PreconditionError("mask size mismatch");
  const std::size_t n = mu.size();
  const double scale = sup(mu);
  RieszDecomposition d;
  Measure Lmu = adjoint_apply(op, mu);
  d.nu.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = mu[i] - r * Lmu[i];
    if (std::abs(v) <= tol * scale) v = 0;
    if (v < 0) {
      throw PreconditionError("measure is not excessive at atom " + std::to_string(i));
    }
    d.nu[i] = v;
  }
  SeriesOptions o;
  o.tol = std::min(tol, 1e-13);
  o.adjoint = true;
  o.accelerate = false;
  Measure p = neumann(op, d.nu, r, o).values;
  d.mu0.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.mu0[i] = mu[i] - p[i];
    if (d.mu0[i] < -tol * std::max(scale, 1e-300)) {
      throw ConvergenceError("excessivity/truncation inconsistency at atom " + std::to_string(i));
    }
  }
  Measure Lp = adjoint_apply(op, p);
  double nun = sup(d.nu);
  double res = 0;
  for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(p[i] - r * Lp[i] - d.nu[i]));
  d.residual = nun > 0 ? res / nun : res;
  Measure Lm0 = adjoint_apply(op, d.mu0);
  double cres = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!interior.empty() && !interior[i]) continue;
    cres = std::max(cres, std::abs(r * Lm0[i] - d.mu0[i]));
  }
  d.conformal_residual = scale > 0 ? cres / scale : cres;
  return d;
}

std::vector<double> restricted_green(const LinearAction& op, const AtomSet& A,
                                     std::span<const double> f, double r, bool adjoint, double tol) {
  check_size(op, f.size());
  if (A.size() != f.size()) throw PreconditionError("mask size mismatch");
  SeriesOptions o;
  o.tol = tol;
  o.adjoint = adjoint;
  o.accelerate = false;
  o.mask = &A;
  return neumann(op, f, r, o).values;
}

FirstEntryOperator::FirstEntryOperator(const LinearAction& op, AtomSet A, double r, double tol)
    : op_(&op), A_(std::move(A)), B_(complement(A_)), r_(r), tol_(tol) {
  if (A_.size() != op.size()) throw PreconditionError("mask size mismatch");
}

void FirstEntryOperator::apply(std::span<const double> in, std::span<double> out) const {
  // F_A f = 1_A (f + r L G^B f)
  auto g = restricted_green(*op_, B_, in, r_, false, tol_);
  std::vector<double> Lg(size());
  op_->apply(g, Lg);
  for (std::size_t i = 0; i < size(); ++i) out[i] = A_[i] ? in[i] + r_ * Lg[i] : 0.0;
}

void FirstEntryOperator::apply_adjoint(std::span<const double> in, std::span<double> out) const {
  // F_A^* m = 1_A m + r G^B* L^* (1_A m)
  std::vector<double> mA(size()), LmA(size());
  for (std::size_t i = 0; i < size(); ++i) mA[i] = A_[i] ? in[i] : 0.0;
  op_->apply_adjoint(mA, LmA);
  auto g = restricted_green(*op_, B_, LmA, r_, true, tol_);
  for (std::size_t i = 0; i < size(); ++i) out[i] = mA[i] + r_ * g[i];
}

LastExitOperator::LastExitOperator(const LinearAction& op, AtomSet A, double r, double tol)
    : op_(&op), A_(std::move(A)), B_(complement(A_)), r_(r), tol_(tol) {
  if (A_.size() != op.size()) throw PreconditionError("mask size mismatch");
}

void LastExitOperator::apply(std::span<const double> in, std::span<double> out) const {
  // R_A f = 1_A f + r G^B (L 1_A f)
  std::vector<double> fA(size()), LfA(size());
  for (std::size_t i = 0; i < size(); ++i) fA[i] = A_[i] ? in[i] : 0.0;
  op_->apply(fA, LfA);
  auto g = restricted_green(*op_, B_, LfA, r_, false, tol_);
  for (std::size_t i = 0; i < size(); ++i) out[i] = fA[i] + r_ * g[i];
}

void LastExitOperator::apply_adjoint(std::span<const double> in, std::span<double> out) const {
  // R_A^* m = 1_A (m + r L^* G^B* m)
  auto g = restricted_green(*op_, B_, in, r_, true, tol_);
  std::vector<double> Lg(size());
  op_->apply_adjoint(g, Lg);
  for (std::size_t i = 0; i < size(); ++i) out[i] = A_[i] ? in[i] + r_ * Lg[i] : 0.0;
}

ReducedMeasure reduce_measure(const LinearAction& op, std::span<const double> mu, const AtomSet& A,
                              double r, double tol) {
  check_size(op, mu.size());
  FirstEntryOperator F(op, A, r);
  ReducedMeasure red;
  red.value.resize(mu.size());
  F.apply_adjoint(mu, red.value);
  const double scale = std::max(sup(mu), 1e-300);
  red.above_mu = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    red.above_mu = std::max(red.above_mu, red.value[i] - mu[i]);
    if (A[i]) red.off_on_A = std::max(red.off_on_A, std::abs(red.value[i] - mu[i]));
  }
  if (mu.empty()) red.above_mu = 0;
  auto ex = check_excessive(op, red.value, r, tol);
  red.excess_violation = ex.worst;
  red.ok = red.above_mu <= tol * scale && red.off_on_A <= tol * scale &&
           red.excess_violation <= tol * scale;
  return red;
}

Measure measure_infimum(const std::vector<Measure>& measures) {
  if (measures.empty()) throw PreconditionError("infimum of an empty family");
  Measure out = measures.front();
  for (const auto& m : measures) {
    if (m.size() != out.size()) throw PreconditionError("measures live on different atom spaces");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], m[i]);
  }
  return out;
}

DominationReport domination_check(const LinearAction& op, std::span<const double> mu,
                                  std::span<const double> nu, const AtomSet& A, double r,
                                  double tol) {
  check_size(op, mu.size());
  check_size(op, nu.size());
  if (A.size() != mu.size()) throw PreconditionError("mask size mismatch");
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (nu[i] < 0) throw PreconditionError("charge must be nonnegative");
    if (nu[i] != 0 && !A[i]) throw PreconditionError("charge is not supported on A");
  }
  SeriesOptions o;
  o.tol = std::min(tol, 1e-13);
  o.adjoint = true;
  o.accelerate = false;
  Measure p = neumann(op, nu, r, o).values;
  const double scale = std::max({sup(mu), sup(p), 1e-300});
  DominationReport rep;
  rep.margin = std::numeric_limits<double>::infinity();
  rep.margin_on_A = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double d = mu[i] - p[i];
    if (A[i]) rep.margin_on_A = std::min(rep.margin_on_A, d);
    if (d < rep.margin) {
      rep.margin = d;
      rep.worst_atom = i;
    }
  }
  if (rep.margin_on_A < -tol * scale) throw PreconditionError("hypothesis violated on A");
  if (mu.empty()) rep.margin = 0;
  rep.dominated = rep.margin >= -tol * scale;
  return rep;
}

AtomSet atoms_over(const TruncatedOperator& op, const std::vector<std::size_t>& ball_indices) {
  AtomSet A(op.size(), 0);
  for (std::size_t b : ball_indices) {
    std::int64_t p = op.position(b);
    if (p < 0) continue;
    for (std::size_t w = 0; w < op.word_count(); ++w) A[op.state(w, static_cast<std::size_t>(p))] = 1;
  }
  return A;
}

}  // namespace martinbench
