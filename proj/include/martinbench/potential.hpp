#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "martinbench/extension.hpp"

namespace martinbench {

/// Nonnegative mass per atom of an operator's state space.
using Measure = std::vector<double>;
/// Atom subset as a 0/1 mask over states.
using AtomSet = std::vector<char>;

/// L^* m.
Measure adjoint_apply(const LinearAction& op, std::span<const double> m);

struct ExcessiveReport {
  bool excessive = true;
  double worst = 0;              // max over atoms of L^* m - m / r
  std::size_t worst_atom = 0;
  std::vector<std::size_t> conformal;  // atoms where L^* m = m / r within tolerance
};

/// Checks L^* m <= m / r atomwise, with tolerance tol * |m|_inf.
ExcessiveReport check_excessive(const LinearAction& op, std::span<const double> m, double r,
                                double tol = 1e-10);

struct RieszDecomposition {
  Measure mu0;  // conformal part
  Measure nu;   // charge
  double residual = 0;             // |(I - r L^*) G^*(nu) - nu|_inf / |nu|_inf
  double conformal_residual = 0;   // max over interior atoms of |r L^* mu0 - mu0| / |mu|_inf
};

/// mu = mu0 + G_r^*(nu) with nu = mu - r L^* mu.
///
/// `interior` marks the atoms where conformality of mu0 is checked; empty means all.
RieszDecomposition riesz_decompose(const LinearAction& op, std::span<const double> mu, double r,
                                   const AtomSet& interior = {}, double tol = 1e-10);

/// sum_n r^n (D_A L D_A)^n D_A f, the Green operator of orbits confined to A.
std::vector<double> restricted_green(const LinearAction& op, const AtomSet& A,
                                     std::span<const double> f, double r, bool adjoint = false,
                                     double tol = 1e-15);

/// First-entry operator F_A = 1_A sum_n r^n (L 1_{A^c})^n.
class FirstEntryOperator : public LinearAction {
 public:
  FirstEntryOperator(const LinearAction& op, AtomSet A, double r, double tol = 1e-15);
  std::size_t size() const override { return op_->size(); }
  void apply(std::span<const double> in, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> in, std::span<double> out) const override;

 private:
  const LinearAction* op_;
  AtomSet A_, B_;
  double r_, tol_;
};

/// Last-exit operator R_A = sum_n r^n (1_{A^c} L)^n 1_A.
class LastExitOperator : public LinearAction {
 public:
  LastExitOperator(const LinearAction& op, AtomSet A, double r, double tol = 1e-15);
  std::size_t size() const override { return op_->size(); }
  void apply(std::span<const double> in, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> in, std::span<double> out) const override;

 private:
  const LinearAction* op_;
  AtomSet A_, B_;
  double r_, tol_;
};

struct ReducedMeasure {
  Measure value;
  double above_mu = 0;        // max(value - mu), should be <= 0
  double off_on_A = 0;        // max over A of |value - mu|
  double excess_violation = 0;  // max(L^* value - value / r)
  bool ok = true;
};

/// The reduced measure of mu on A, computed as F_A^*(mu).
ReducedMeasure reduce_measure(const LinearAction& op, std::span<const double> mu, const AtomSet& A,
                              double r, double tol = 1e-10);

/// Atomwise minimum.
Measure measure_infimum(const std::vector<Measure>& measures);

struct DominationReport {
  bool dominated = true;
  double margin = 0;          // min over atoms of mu - G^*(nu)
  std::size_t worst_atom = 0;
  double margin_on_A = 0;
};

/// Checks mu >= G_r^*(nu) everywhere given that it holds on A, for nu charged on A.
DominationReport domination_check(const LinearAction& op, std::span<const double> mu,
                                  std::span<const double> nu, const AtomSet& A, double r,
                                  double tol = 1e-10);

/// Atoms of Sigma x {g} for g in the given ball indices.
AtomSet atoms_over(const TruncatedOperator& op, const std::vector<std::size_t>& ball_indices);

}  // namespace martinbench
