#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace martinbench {

using Symbol = std::uint8_t;
using SymbolWord = std::vector<Symbol>;

/// Subshift of finite type given by a 0/1 transition matrix.
class Subshift {
 public:
  /// Throws PreconditionError unless the matrix is square, 0/1, irreducible and aperiodic.
  Subshift(int alphabet, std::vector<std::vector<int>> transitions);
  static Subshift full(int alphabet);

  int alphabet() const { return alphabet_; }
  bool allowed(Symbol a, Symbol b) const { return allowed_[a * alphabet_ + b] != 0; }
  bool admissible(std::span<const Symbol> w) const;
  const std::vector<std::vector<int>>& matrix() const { return rows_; }

  /// Admissible words of length n in lexicographic order.
  std::vector<SymbolWord> admissible_words(int n) const;
  /// Sum of the entries of A^(n-1).
  std::uint64_t count_words(int n) const;

 private:
  int alphabet_;
  std::vector<std::vector<int>> rows_;
  std::vector<char> allowed_;
};

/// Depth-k locally constant log-weight: a value per word of length k.
///
/// The table has alphabet^k entries in base-alphabet lexicographic order;
/// entries of inadmissible words are ignored.
class Potential {
 public:
  Potential() = default;
  Potential(int alphabet, int depth, std::vector<double> table);
  static Potential constant(int alphabet, int depth, double value);

  int alphabet() const { return alphabet_; }
  int depth() const { return depth_; }
  const std::vector<double>& table() const { return table_; }
  /// Log weight of the first depth() symbols of w.
  double operator()(std::span<const Symbol> w) const;
  std::size_t index(std::span<const Symbol> w) const;

  /// Same potential viewed at a larger depth (ignores the extra symbols).
  Potential lifted(int depth) const;

 private:
  int alphabet_ = 0;
  int depth_ = 0;
  std::vector<double> table_;
};

struct Normalization {
  double lambda = 1;
  std::vector<SymbolWord> words;  // admissible words of length depth-1
  std::vector<double> h;          // Perron eigenvector on `words`, max entry 1
  int iterations = 0;
  double residual = 0;  // ||L h - lambda h||_inf / ||h||_inf
};

/// Ruelle normalization: returns (lambda, h) and the conjugated potential
/// phi + log h(shifted) - log h - log lambda whose transfer operator fixes 1.
std::pair<Normalization, Potential> ruelle_normalize(const Subshift& shift, const Potential& raw,
                                                    double tol = 1e-13, int max_iter = 200000);

/// Finite-type base dynamics with a normalized potential.
class BaseSystem {
 public:
  BaseSystem(Subshift shift, Potential raw, double r_shift = 0.5, double alpha_reg = 1.0);

  const Subshift& shift() const { return shift_; }
  int alphabet() const { return shift_.alphabet(); }
  const Potential& raw() const { return raw_; }
  const Potential& normalized() const { return phi_; }
  const Normalization& normalization() const { return norm_; }
  /// Depth of the normalized potential, max(k, 2).
  int depth() const { return phi_.depth(); }
  double r_shift() const { return r_shift_; }
  double alpha_reg() const { return alpha_reg_; }

  /// exp(phi(a x)) for x with at least depth()-1 symbols.
  double weight(Symbol a, std::span<const Symbol> x) const;

  /// Product of normalized weights along the orbit of w x. Throws
  /// PreconditionError("not in domain of tau_w") for inadmissible concatenations.
  double cylinder_weight(std::span<const Symbol> w, std::span<const Symbol> x) const;

  /// Base transfer operator on tables over admissible words of length m.
  std::vector<double> transfer(std::span<const double> f, int m) const;

  /// max_x |sum_a weight(a,x) - 1|.
  double row_sum_error() const;

  std::uint64_t fingerprint() const;

 private:
  Subshift shift_;
  Potential raw_;
  Potential phi_;
  Normalization norm_;
  double r_shift_;
  double alpha_reg_;
};

/// Index of a word among admissible_words(|w|), or -1.
long word_index(const std::vector<SymbolWord>& words, std::span<const Symbol> w);

/// D_alpha seminorm of a locally constant function.
///
/// `f` is indexed [word * groups + g] over admissible words of length m. The
/// result is indexed [symbol * groups + g].
std::vector<double> dalpha_seminorm(const BaseSystem& base, int m, std::span<const double> f,
                                    std::size_t groups, double alpha_reg);

}  // namespace martinbench
