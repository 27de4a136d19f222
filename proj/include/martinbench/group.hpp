#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace martinbench {

using Letter = std::uint8_t;
using Word = std::vector<Letter>;

/// A value in (1/2)Z, stored as twice its value.
struct HalfInteger {
  int twice = 0;

  double value() const { return 0.5 * twice; }
  bool operator==(const HalfInteger&) const = default;
  auto operator<=>(const HalfInteger&) const = default;
};

/// Finitely generated group with a symmetric generating set.
///
/// Letters are indices into the generator list; every letter has an inverse
/// letter (possibly itself, for involutions). Elements are words in normal
/// form, the identity being the empty word.
class GroupModel {
 public:
  enum class Kind { free, free_product, presented };

  /// Free group of the given rank; letter 2i is the i-th generator, 2i+1 its inverse.
  static GroupModel free(int rank);

  /// Free product of cyclic groups. An order of 0 means an infinite cyclic factor.
  static GroupModel free_product(std::vector<int> orders);

  /// Group given by generators and relators, reduced with Dehn's algorithm.
  ///
  /// `names` holds one character per letter and `inverse[i]` is the inverse
  /// letter of `i`. With `dehn_verified` false every reduction that needs a
  /// relator is rejected with NormalFormError. Normal forms are the
  /// shortlex-least word among Dehn-reduced words related by half-relator
  /// swaps, which makes them unique for small-cancellation presentations.
  static GroupModel presented(std::string names, std::vector<int> inverse,
                              std::vector<Word> relators, bool dehn_verified);

  Kind kind() const { return kind_; }
  int letter_count() const { return static_cast<int>(inverse_.size()); }
  Letter inverse_letter(Letter l) const { return inverse_[l]; }
  char letter_name(Letter l) const { return names_[l]; }
  bool dehn_verified() const { return dehn_verified_; }
  const std::vector<int>& factor_orders() const { return orders_; }
  const std::vector<Word>& relators() const { return relators_; }

  /// Identity prints as "1".
  std::string format(std::span<const Letter> w) const;
  /// Parses a word of letter names ("1" or "" is the identity) and normalizes it.
  Word parse(std::string_view text) const;
  /// Parses without normalizing.
  Word parse_raw(std::string_view text) const;

  Word inverse(std::span<const Letter> w) const;
  Word normalize(std::span<const Letter> w) const;
  Word multiply(std::span<const Letter> g, std::span<const Letter> h) const;
  bool equal(std::span<const Letter> g, std::span<const Letter> h) const;

  /// Word length of an element. Presented models need a Ball for exact lengths.
  int length(std::span<const Letter> w) const;
  int distance(std::span<const Letter> g, std::span<const Letter> h) const;

  /// True if normal forms are geodesic and unique (free and free-product models).
  bool exact_metric() const { return kind_ != Kind::presented; }

  /// Stable 64-bit fingerprint of the model.
  std::uint64_t fingerprint() const;
  std::string describe() const;

 private:
  GroupModel() = default;

  Word normalize_free(std::span<const Letter> w) const;
  Word normalize_product(std::span<const Letter> w) const;
  Word normalize_presented(std::span<const Letter> w) const;
  Word free_reduce(std::span<const Letter> w) const;
  bool dehn_step(Word& w) const;

  Kind kind_ = Kind::free;
  std::string names_;
  std::vector<Letter> inverse_;
  // free products: factor of each letter, and +1/-1 exponent sign
  std::vector<int> orders_;
  std::vector<int> factor_of_;
  std::vector<int> sign_of_;
  std::vector<Letter> pos_letter_;  // per factor
  std::vector<Letter> neg_letter_;  // per factor
  // presented
  std::vector<Word> relators_;
  std::vector<Word> cyclic_relators_;  // all cyclic permutations of relators and inverses
  bool dehn_verified_ = true;
};

int gromov_twice(int dxo, int dyo, int dxy);

/// (x.y)_o = (d(x,o) + d(y,o) - d(x,y)) / 2.
HalfInteger gromov_product(const GroupModel& model, std::span<const Letter> x,
                           std::span<const Letter> y, std::span<const Letter> o);

/// Enumerated ball B(id, radius) in breadth-first order.
class Ball {
 public:
  static std::shared_ptr<const Ball> enumerate(const GroupModel& model, int radius);

  const GroupModel& model() const { return model_; }
  int radius() const { return radius_; }
  std::size_t size() const { return offsets_.size() - 1; }

  std::span<const Letter> element(std::size_t i) const {
    return {letters_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  Word word(std::size_t i) const {
    auto e = element(i);
    return Word(e.begin(), e.end());
  }
  int length(std::size_t i) const { return levels_[i]; }

  /// Index of an element given by any word representing it.
  std::optional<std::size_t> find(std::span<const Letter> w) const;
  /// Like find, but throws RangeError("ball too small") when absent.
  std::size_t index_of(std::span<const Letter> w) const;

  /// Index of element(i) * letter, or -1 when it leaves the ball.
  std::int32_t neighbor(std::size_t i, Letter l) const {
    return neighbors_[i * letter_count_ + l];
  }

  std::size_t sphere_begin(int n) const { return sphere_start_[n]; }
  std::size_t sphere_end(int n) const { return sphere_start_[n + 1]; }
  std::vector<std::size_t> sphere_sizes() const;

  /// Distance between two ball elements. For presented models both elements
  /// must be close enough that g^-1 h lies in this ball.
  int distance(std::size_t i, std::size_t j) const;

  std::uint64_t fingerprint() const;

 private:
  Ball(const GroupModel& model, int radius) : model_(model), radius_(radius) {}

  GroupModel model_;
  int radius_;
  int letter_count_ = 0;
  std::vector<Letter> letters_;
  std::vector<std::size_t> offsets_{0};
  std::vector<int> levels_;
  std::vector<std::size_t> sphere_start_;
  std::vector<std::int32_t> neighbors_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

/// Eventually periodic infinite geodesic word prefix * period^infinity.
class BoundaryRay {
 public:
  /// Throws PreconditionError if some prefix is not geodesic.
  BoundaryRay(const GroupModel& model, Word prefix, Word period);

  /// Letter at position n (0-based).
  Letter letter(std::size_t n) const;
  /// Element reached after n steps.
  Word at(std::size_t n) const;

  const Word& prefix() const { return prefix_; }
  const Word& period() const { return period_; }
  std::string describe(const GroupModel& model) const;

 private:
  Word prefix_;
  Word period_;
};

struct DeltaEstimate {
  HalfInteger delta;
  std::uint64_t quadruples = 0;
  bool exhaustive = true;
  std::size_t points = 0;
};

/// Four-point hyperbolicity constant over the elements of a ball.
///
/// Exhaustive for radius <= 5; above that `samples` random quadruples are used.
DeltaEstimate delta_estimate(const Ball& ball, std::uint64_t samples = 2'000'000,
                             std::uint64_t seed = 1);

/// Geodesic words u with g u = h, |u| = d(g,h), all inside the ball. At most `limit`.
std::vector<Word> geodesics(const Ball& ball, std::span<const Letter> g,
                            std::span<const Letter> h, std::size_t limit);

/// Rooted tree built by single linkage on Gromov products.
struct TreeApproximation {
  struct Node {
    int parent = -1;
    HalfInteger depth;
  };
  std::vector<Node> nodes;  // nodes[0] is the root, the image of o
  std::vector<int> leaf;    // image of each input point
  int k = 0;
  HalfInteger delta;
  bool radial_ok = true;
  bool bounds_ok = true;
  std::vector<std::pair<std::size_t, std::size_t>> violations;
  int max_slack_twice = 0;  // max over pairs of 2*(d - d_T)

  HalfInteger tree_distance(std::size_t i, std::size_t j) const;
  bool ok() const { return radial_ok && bounds_ok; }
};

TreeApproximation tree_approximation(const Ball& ball, const std::vector<Word>& points,
                                     std::span<const Letter> o, HalfInteger delta);

struct VisualReport {
  double value = 0;
  HalfInteger product;
  double uncertainty = 0;  // additive uncertainty 2 delta on the product
  double lower = 0;
  double upper = 0;
  bool saturated = false;  // product reached the working depth
};

VisualReport visual_r(const GroupModel& model, const BoundaryRay& xi, const BoundaryRay& eta,
                      int depth, double lambda_visual, double delta = 0.0);

struct GrowthReport {
  std::vector<std::size_t> sphere_sizes;
  std::vector<double> roots;  // |S_n|^(1/n), n >= 1
  double ratio_estimate = 0;  // |S_N| / |S_{N-1}|
  double root_estimate = 0;   // |S_N|^(1/N)
  double estimate = 0;
};

GrowthReport growth_rate(const Ball& ball);

}  // namespace martinbench
