#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "martinbench/base.hpp"
#include "martinbench/group.hpp"

namespace martinbench {

/// Skew product T(x, g) = (shift x, g kappa(x_0)).
struct ExtensionSystem {
  BaseSystem base;
  GroupModel group;
  std::vector<Word> kappa;  // one normalized group element per symbol
  std::string name;

  ExtensionSystem(BaseSystem b, GroupModel g, std::vector<Word> k, std::string n = "");

  int max_kappa_length() const;
  std::uint64_t fingerprint() const;
};

/// Anything with a matrix action and its transpose.
class LinearAction {
 public:
  virtual ~LinearAction() = default;
  virtual std::size_t size() const = 0;
  virtual void apply(std::span<const double> in, std::span<double> out) const = 0;
  virtual void apply_adjoint(std::span<const double> in, std::span<double> out) const = 0;
};

/// Transfer operator on (depth-m cylinder x Omega) atoms, restricted to orbits
/// that stay in Sigma x Omega.
///
/// States are ordered word-major: index = word * |Omega| + position of the
/// group element in Omega (breadth-first order).
class TruncatedOperator : public LinearAction {
 public:
  /// Omega is given as sorted ball indices; empty means the whole ball.
  TruncatedOperator(const ExtensionSystem& sys, int m, std::shared_ptr<const Ball> ball,
                    std::vector<std::uint32_t> omega = {});

  static std::shared_ptr<TruncatedOperator> on_ball(const ExtensionSystem& sys, int m, int radius);

  std::size_t size() const override { return words_.size() * omega_.size(); }
  void apply(std::span<const double> in, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> in, std::span<double> out) const override;

  const ExtensionSystem& system() const { return *sys_; }
  const Ball& ball() const { return *ball_; }
  std::shared_ptr<const Ball> ball_ptr() const { return ball_; }
  int depth() const { return m_; }
  const std::vector<SymbolWord>& words() const { return words_; }
  std::size_t word_count() const { return words_.size(); }
  std::size_t omega_size() const { return omega_.size(); }
  bool full_ball() const { return full_ball_; }

  std::size_t state(std::size_t word, std::size_t pos) const { return word * omega_.size() + pos; }
  std::size_t word_of(std::size_t state) const { return state / omega_.size(); }
  std::size_t pos_of(std::size_t state) const { return state % omega_.size(); }
  std::uint32_t ball_index(std::size_t pos) const { return omega_[pos]; }
  /// Position in Omega of a ball element, or -1.
  std::int64_t position(std::size_t ball_index) const { return omega_pos_[ball_index]; }
  std::optional<std::size_t> position_of(std::span<const Letter> g) const;
  std::optional<std::size_t> state_of(std::span<const Symbol> w, std::span<const Letter> g) const;
  int group_length(std::size_t state) const { return ball_->length(omega_[pos_of(state)]); }
  std::string describe_state(std::size_t state) const;

  /// Action entries of one state: (preimage state, weight).
  std::vector<std::pair<std::size_t, double>> row(std::size_t state) const;
  /// True when every preimage of the state in the untruncated system lies in Omega.
  bool interior(std::size_t state) const;

  std::vector<double> zeros() const { return std::vector<double>(size(), 0.0); }
  std::vector<double> ones() const { return std::vector<double>(size(), 1.0); }
  /// Indicator of Sigma x {g}; zero if g is outside Omega.
  std::vector<double> indicator_group(std::span<const Letter> g) const;
  std::vector<double> indicator_state(std::size_t state) const;

  std::uint64_t fingerprint() const;

 private:
  struct Pre {
    std::int32_t word;  // index of trunc_m(a w), -1 if inadmissible
    double weight;
  };
  struct Succ {
    std::int32_t word;   // w with trunc_m(a w) = w'
    std::uint8_t table;  // group table of symbol a = w'[0]
    double weight;
  };

  std::shared_ptr<const ExtensionSystem> sys_;
  int m_;
  std::shared_ptr<const Ball> ball_;
  std::vector<std::uint32_t> omega_;
  std::vector<std::int64_t> omega_pos_;
  bool full_ball_ = true;
  std::vector<SymbolWord> words_;
  std::vector<Pre> pre_;                    // [word * alphabet + a]
  std::vector<std::vector<Succ>> succ_;     // per word
  std::vector<int> table_of_symbol_;        // symbol -> distinct kappa table
  std::vector<std::vector<std::int32_t>> back_;  // per table: pos of g kappa^-1
  std::vector<std::vector<std::int32_t>> fwd_;   // per table: pos of g kappa
  std::uint64_t fingerprint_ = 0;
};

/// Dense-ready sparse matrix in compressed rows, also a LinearAction.
class CsrMatrix : public LinearAction {
 public:
  CsrMatrix() = default;
  explicit CsrMatrix(std::size_t n) : ptr_(n + 1, 0) {}
  static CsrMatrix from_rows(std::size_t n,
                             const std::vector<std::vector<std::pair<std::size_t, double>>>& rows);
  static CsrMatrix materialize(const TruncatedOperator& op);

  std::size_t size() const override { return ptr_.empty() ? 0 : ptr_.size() - 1; }
  void apply(std::span<const double> in, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> in, std::span<double> out) const override;
  std::size_t nonzeros() const { return col_.size(); }
  double at(std::size_t i, std::size_t j) const;

  const std::vector<std::size_t>& ptr() const { return ptr_; }
  const std::vector<std::size_t>& cols() const { return col_; }
  const std::vector<double>& vals() const { return val_; }

 private:
  std::vector<std::size_t> ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> val_;
};

/// r^n L^n f.
std::vector<double> transfer_iterate(const LinearAction& op, std::span<const double> f, int steps,
                                     double r = 1.0);

struct SeriesOptions {
  double tol = 1e-10;           // relative to the sup norm of the sum
  int max_iter = 2'000'000;
  bool accelerate = true;       // elementwise Aitken on every other partial sum
  bool adjoint = false;         // sum r^n (L^T)^n instead
  const std::vector<char>* mask = nullptr;  // restrict to atoms with mask != 0
  int divergence_window = 50;
};

struct TailCertificate {
  int iterations = 0;
  double last_increment = 0;   // sup norm of the last series term
  double contraction = 0;      // geometric rate over the last 10 terms
  double series_tail = 0;      // geometric bound on the neglected terms
  double accelerated_change = 0;
  double exit_bound = 0;       // ball-exit estimate (truncated operators only)
  double exit_rate = 0;        // measured sphere-crossing contraction
  bool accelerated = false;

  double total() const { return series_tail + exit_bound; }
};

struct GreenResult {
  std::vector<double> values;
  double r = 0;
  std::string spec;
  TailCertificate cert;

  double operator[](std::size_t i) const { return values[i]; }
  /// Absolute error bound at one atom: the sup-norm certificate.
  double error() const { return cert.total(); }
};

/// sum_n r^n (D L D)^n D f with D the optional mask.
GreenResult neumann(const LinearAction& op, std::span<const double> f, double r,
                    const SeriesOptions& opts = {});

/// Green operator on a truncated operator with the ball-exit estimate attached.
GreenResult green_apply(const TruncatedOperator& op, std::span<const double> f, double r,
                        double tol = 1e-10, const std::string& spec = "");

/// G_r^* m, the adjoint series.
GreenResult green_adjoint(const TruncatedOperator& op, std::span<const double> m, double r,
                          double tol = 1e-10, const std::string& spec = "");

/// H_r(f1, f2) = G_r(f1 * G_r(f2)).
GreenResult hr_apply(const TruncatedOperator& op, std::span<const double> f1,
                     std::span<const double> f2, double r, double tol = 1e-10);

/// Memoized forward/adjoint solves on one operator, optionally persisted on disk.
class GreenCache {
 public:
  explicit GreenCache(std::shared_ptr<const TruncatedOperator> op, double tol = 1e-11);

  const TruncatedOperator& op() const { return *op_; }
  std::shared_ptr<const TruncatedOperator> op_ptr() const { return op_; }
  double tol() const { return tol_; }

  /// G_r(X_g).
  std::shared_ptr<const GreenResult> forward_group(std::span<const Letter> g, double r);
  /// G_r(X_state).
  std::shared_ptr<const GreenResult> forward_state(std::size_t state, double r);
  /// G_r^* delta_state: entry t is G_r(X_t)(state).
  std::shared_ptr<const GreenResult> adjoint_state(std::size_t state, double r);

 private:
  std::shared_ptr<const GreenResult> get(const std::string& key, bool adjoint,
                                         const std::vector<double>& f, double r);

  std::shared_ptr<const TruncatedOperator> op_;
  double tol_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const GreenResult>> memo_;
};

/// Per-base-atom translated kernels K_y = G_r(X_(y,id)).
///
/// By left invariance G_r(X_(y,z))(x,g) = K_y(x, z^-1 g), which gives Green
/// values for arbitrary pairs of group elements from |words| solves.
class TranslatedKernel {
 public:
  TranslatedKernel(GreenCache& cache, double r);

  double r() const { return r_; }
  const TruncatedOperator& op() const { return *op_; }
  /// G_r(X_(y,z))(x,g); nullopt when z^-1 g is outside the ball.
  std::optional<double> value(std::size_t x, std::size_t y, std::span<const Letter> z,
                              std::span<const Letter> g) const;
  /// G_r(X_z)(x,g) summed over y.
  std::optional<double> group_value(std::size_t x, std::span<const Letter> z,
                                    std::span<const Letter> g) const;
  /// Value for a translated ball index gamma = z^-1 g.
  double at(std::size_t x, std::size_t y, std::size_t gamma_ball) const;
  double error() const { return error_; }

 private:
  const TruncatedOperator* op_;
  double r_;
  std::vector<std::shared_ptr<const GreenResult>> kernels_;
  double error_ = 0;
};

struct RhoEstimate {
  std::vector<int> radii;
  std::vector<double> lower;         // certified lower bounds for each truncation's Perron root
  std::vector<double> truncated;     // midpoint estimate of each truncation's Perron root
  std::vector<double> extrapolated;  // 1/n^2 Richardson from consecutive radii
  double estimate = 0;               // point estimate of rho
  double upper = 0;                  // certified upper bound on rho (if available)
  bool has_upper = false;
  double R_hat = 0;                  // convergence radius used by scans
  bool R_certified = false;          // R_hat <= R guaranteed
};

/// Perron root of one truncation, by power iteration on L^2 with Collatz-Wielandt bounds.
struct PerronResult {
  double lower = 0;
  double upper = 0;
  double value = 0;
  int iterations = 0;
  std::vector<double> vector;
};
PerronResult perron_root(const LinearAction& op, double tol = 1e-10, int max_iter = 100000);

/// Collatz-Wielandt upper bound on rho from test functions t^{|g|}.
std::optional<double> radial_upper_bound(const ExtensionSystem& sys);

RhoEstimate rho_estimate(const ExtensionSystem& sys, int m, int n, double tol = 1e-10);

/// Restricted values at consecutive radii and their extrapolation.
struct GreenLimit {
  std::vector<int> radii;
  std::vector<double> values;
  double geometric = 0;  // Aitken on the three values
  double critical = 0;   // exact for v_n = A - B/(n + c)
  double estimate = 0;
  std::string model;
};

double extrapolate_aitken(double v0, double v1, double v2);
double extrapolate_harmonic(double v0, double v1, double v2);

/// Full-space estimate of G_r(X_id)(x, id) from radii n-2, n-1, n.
GreenLimit green_limit(const ExtensionSystem& sys, int m, int n, double r, bool critical,
                       double tol = 1e-10);

struct DistortionReport {
  double K_hat = 0;
  int N_hat = 0;  // steps needed to reach g h from g in the truncated core
  std::size_t samples = 0;
};

/// max over (x, y, g) and f in {X_w : |w| <= family_radius} of G_r(f)(x,g)/G_r(f)(y,g h).
DistortionReport distortion_scan(GreenCache& cache, std::span<const Letter> h, double r,
                                 int family_radius, int margin);

struct ReversibilityReport {
  double min_ratio = 0;
  double max_ratio = 0;
  std::size_t samples = 0;
};

ReversibilityReport reversibility_check(GreenCache& cache, double r, int radius);

struct ErhoWitness {
  std::vector<double> h;
  double violation = 0;  // max over interior atoms of (L h - rho h)/h
  double rho = 0;
  bool constant = false;
  bool positive = true;
};

ErhoWitness erho_witness(GreenCache& cache, const RhoEstimate& rho);

struct TransitivityReport {
  std::size_t components = 0;
  std::size_t largest = 0;
  double core_fraction = 0;
};

TransitivityReport transitivity_report(const TruncatedOperator& op);

}  // namespace martinbench
