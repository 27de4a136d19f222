#include "martinbench/group.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "martinbench/error.hpp"
#include "martinbench/hash.hpp"
#include "martinbench/parallel.hpp"

namespace martinbench {

namespace {

std::string key_of(std::span<const Letter> w) {
  return std::string(reinterpret_cast<const char*>(w.data()), w.size());
}

}  // namespace

GroupModel GroupModel::free(int rank) {
  if (rank < 1 || rank > 13) throw PreconditionError("free group rank must be in [1, 13]");
  GroupModel g;
  g.kind_ = Kind::free;
  for (int i = 0; i < rank; ++i) {
    g.names_.push_back(static_cast<char>('a' + i));
    g.names_.push_back(static_cast<char>('A' + i));
    g.inverse_.push_back(static_cast<Letter>(2 * i + 1));
    g.inverse_.push_back(static_cast<Letter>(2 * i));
  }
  return g;
}

GroupModel GroupModel::free_product(std::vector<int> orders) {
  if (orders.empty() || orders.size() > 13) {
    throw PreconditionError("free product needs between 1 and 13 factors");
  }
  GroupModel g;
  g.kind_ = Kind::free_product;
  g.orders_ = orders;
  for (std::size_t f = 0; f < orders.size(); ++f) {
    int n = orders[f];
    if (n == 1 || n < 0) throw PreconditionError("cyclic factor order must be 0 or >= 2");
    Letter pos = static_cast<Letter>(g.names_.size());
    g.names_.push_back(static_cast<char>('a' + f));
    g.factor_of_.push_back(static_cast<int>(f));
    g.sign_of_.push_back(1);
    if (n == 2) {
      g.inverse_.push_back(pos);
      g.pos_letter_.push_back(pos);
      g.neg_letter_.push_back(pos);
    } else {
      Letter neg = static_cast<Letter>(pos + 1);
      g.names_.push_back(static_cast<char>('A' + f));
      g.factor_of_.push_back(static_cast<int>(f));
      g.sign_of_.push_back(-1);
      g.inverse_.push_back(neg);
      g.inverse_.push_back(pos);
      g.pos_letter_.push_back(pos);
      g.neg_letter_.push_back(neg);
    }
  }
  return g;
}

GroupModel GroupModel::presented(std::string names, std::vector<int> inverse,
                                 std::vector<Word> relators, bool dehn_verified) {
  if (names.size() != inverse.size() || names.empty()) {
    throw PreconditionError("presented model needs one inverse entry per generator name");
  }
  GroupModel g;
  g.kind_ = Kind::presented;
  g.names_ = std::move(names);
  for (std::size_t i = 0; i < inverse.size(); ++i) {
    int j = inverse[i];
    if (j < 0 || j >= static_cast<int>(inverse.size()) || inverse[j] != static_cast<int>(i)) {
      throw PreconditionError("inverse table is not an involution");
    }
    if (g.names_[i] == '1' || std::isdigit(static_cast<unsigned char>(g.names_[i]))) {
      throw PreconditionError("generator names must not be digits");
    }
    g.inverse_.push_back(static_cast<Letter>(j));
  }
  g.dehn_verified_ = dehn_verified;
  for (auto& r : relators) {
    Word red = g.free_reduce(r);
    // cyclic reduction
    while (red.size() >= 2 && g.inverse_[red.front()] == red.back()) {
      red.erase(red.begin());
      red.pop_back();
    }
    if (red.empty()) continue;
    g.relators_.push_back(red);
    for (int pass = 0; pass < 2; ++pass) {
      Word base = pass == 0 ? red : g.inverse(red);
      for (std::size_t s = 0; s < base.size(); ++s) {
        Word rot(base.begin() + static_cast<std::ptrdiff_t>(s), base.end());
        rot.insert(rot.end(), base.begin(), base.begin() + static_cast<std::ptrdiff_t>(s));
        g.cyclic_relators_.push_back(std::move(rot));
      }
    }
  }
  std::sort(g.cyclic_relators_.begin(), g.cyclic_relators_.end());
  g.cyclic_relators_.erase(std::unique(g.cyclic_relators_.begin(), g.cyclic_relators_.end()),
                           g.cyclic_relators_.end());
  return g;
}

std::string GroupModel::format(std::span<const Letter> w) const {
  if (w.empty()) return "1";
  std::string s;
  s.reserve(w.size());
  for (Letter l : w) s.push_back(names_[l]);
  return s;
}

Word GroupModel::parse_raw(std::string_view text) const {
  Word w;
  if (text == "1") return w;
  for (char c : text) {
    auto pos = names_.find(c);
    if (pos == std::string::npos) {
      throw PreconditionError(std::string("unknown generator '") + c + "' in word '" +
                              std::string(text) + "'");
    }
    w.push_back(static_cast<Letter>(pos));
  }
  return w;
}

Word GroupModel::parse(std::string_view text) const { return normalize(parse_raw(text)); }

Word GroupModel::inverse(std::span<const Letter> w) const {
  Word out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = inverse_[w[w.size() - 1 - i]];
  return out;
}

Word GroupModel::free_reduce(std::span<const Letter> w) const {
  Word out;
  out.reserve(w.size());
  for (Letter l : w) {
    if (l >= inverse_.size()) throw PreconditionError("letter out of range");
    if (!out.empty() && inverse_[out.back()] == l) {
      out.pop_back();
    } else {
      out.push_back(l);
    }
  }
  return out;
}

Word GroupModel::normalize_free(std::span<const Letter> w) const { return free_reduce(w); }

Word GroupModel::normalize_product(std::span<const Letter> w) const {
  // syllables (factor, exponent), merged on the fly
  std::vector<std::pair<int, long long>> syl;
  for (Letter l : w) {
    if (l >= inverse_.size()) throw PreconditionError("letter out of range");
    int f = factor_of_[l];
    int s = sign_of_[l];
    if (!syl.empty() && syl.back().first == f) {
      syl.back().second += s;
      int n = orders_[f];
      if (n > 0) syl.back().second = ((syl.back().second % n) + n) % n;
      if (syl.back().second == 0) syl.pop_back();
    } else {
      int n = orders_[f];
      long long e = s;
      if (n > 0) e = ((e % n) + n) % n;
      syl.emplace_back(f, e);
    }
  }
  Word out;
  for (auto [f, e] : syl) {
    int n = orders_[f];
    long long k = e;
    if (n > 0) {
      // canonical representative in (-n/2, n/2]
      if (k > n / 2) k -= n;
    }
    Letter l = k > 0 ? pos_letter_[f] : neg_letter_[f];
    for (long long i = 0; i < std::llabs(k); ++i) out.push_back(l);
  }
  return out;
}

bool GroupModel::dehn_step(Word& w) const {
  // Replace a subword u that is a prefix of a cyclic relator r = u v with
  // |u| > |r|/2 by v^-1.
  for (const Word& r : cyclic_relators_) {
    std::size_t len = r.size();
    std::size_t need = len / 2 + 1;
    if (w.size() < need) continue;
    for (std::size_t start = 0; start + need <= w.size(); ++start) {
      std::size_t k = 0;
      while (k < len && start + k < w.size() && w[start + k] == r[k]) ++k;
      if (k >= need) {
        if (!dehn_verified_) {
          throw NormalFormError("normal form not certified: relator reduction needed for " +
                                format(w));
        }
        Word v(r.begin() + static_cast<std::ptrdiff_t>(k), r.end());
        Word repl = inverse(v);
        Word next(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(start));
        next.insert(next.end(), repl.begin(), repl.end());
        next.insert(next.end(), w.begin() + static_cast<std::ptrdiff_t>(start + k), w.end());
        w = free_reduce(next);
        return true;
      }
    }
  }
  return false;
}

Word GroupModel::normalize_presented(std::span<const Letter> w) const {
  Word out = free_reduce(w);
  while (dehn_step(out)) {
  }
  if (!dehn_verified_) return out;
  // Dehn-reduced words are unique only up to swapping exactly half of a
  // cyclic relator for the inverse of its other half (even-length relators).
  // Close under those swaps and keep the shortlex-least word.
  std::set<Word> seen{out};
  std::vector<Word> todo{out};
  while (!todo.empty() && seen.size() < 4096) {
    Word cur = std::move(todo.back());
    todo.pop_back();
    for (const Word& r : cyclic_relators_) {
      if (r.size() % 2 != 0) continue;
      const std::size_t half = r.size() / 2;
      if (cur.size() < half) continue;
      for (std::size_t start = 0; start + half <= cur.size(); ++start) {
        if (!std::equal(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(half),
                        cur.begin() + static_cast<std::ptrdiff_t>(start))) {
          continue;
        }
        Word repl = inverse(std::span<const Letter>(r).subspan(half));
        Word next(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(start));
        next.insert(next.end(), repl.begin(), repl.end());
        next.insert(next.end(), cur.begin() + static_cast<std::ptrdiff_t>(start + half), cur.end());
        next = free_reduce(next);
        while (dehn_step(next)) {
        }
        if (seen.insert(next).second) todo.push_back(std::move(next));
      }
    }
  }
  auto shortlex = [](const Word& a, const Word& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  };
  return *std::min_element(seen.begin(), seen.end(), shortlex);
}

Word GroupModel::normalize(std::span<const Letter> w) const {
  switch (kind_) {
    case Kind::free:
      return normalize_free(w);
    case Kind::free_product:
      return normalize_product(w);
    case Kind::presented:
      return normalize_presented(w);
  }
  return {};
}

Word GroupModel::multiply(std::span<const Letter> g, std::span<const Letter> h) const {
  Word w(g.begin(), g.end());
  w.insert(w.end(), h.begin(), h.end());
  return normalize(w);
}

bool GroupModel::equal(std::span<const Letter> g, std::span<const Letter> h) const {
  if (kind_ != Kind::presented) return normalize(g) == normalize(h);
  Word hi = inverse(h);
  return multiply(g, hi).empty();
}

int GroupModel::length(std::span<const Letter> w) const {
  if (kind_ == Kind::presented) {
    throw PreconditionError("word length in a presented model needs an enumerated ball");
  }
  return static_cast<int>(normalize(w).size());
}

int GroupModel::distance(std::span<const Letter> g, std::span<const Letter> h) const {
  Word gi = inverse(g);
  gi.insert(gi.end(), h.begin(), h.end());
  return length(gi);
}

std::uint64_t GroupModel::fingerprint() const {
  Fnv1a hs;
  hs.add(static_cast<int>(kind_));
  hs.add(names_);
  for (Letter l : inverse_) hs.add(static_cast<int>(l));
  for (int o : orders_) hs.add(o);
  for (const auto& r : relators_) {
    hs.add(static_cast<int>(r.size()));
    for (Letter l : r) hs.add(static_cast<int>(l));
  }
  hs.add(dehn_verified_ ? 1 : 0);
  return hs.value();
}

std::string GroupModel::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::free:
      os << "free(" << letter_count() / 2 << ")";
      break;
    case Kind::free_product: {
      os << "free_product(";
      for (std::size_t i = 0; i < orders_.size(); ++i) {
        os << (i ? "," : "") << (orders_[i] == 0 ? std::string("Z") : "Z" + std::to_string(orders_[i]));
      }
      os << ")";
      break;
    }
    case Kind::presented:
      os << "presented(" << names_ << "; " << relators_.size() << " relators)";
      break;
  }
  return os.str();
}

int gromov_twice(int dxo, int dyo, int dxy) { return dxo + dyo - dxy; }

HalfInteger gromov_product(const GroupModel& model, std::span<const Letter> x,
                           std::span<const Letter> y, std::span<const Letter> o) {
  return {gromov_twice(model.distance(x, o), model.distance(y, o), model.distance(x, y))};
}

// ---------------------------------------------------------------------------

std::shared_ptr<const Ball> Ball::enumerate(const GroupModel& model, int radius) {
  if (radius < 0) throw PreconditionError("ball radius must be nonnegative");
  std::shared_ptr<Ball> b(new Ball(model, radius));
  const int L = model.letter_count();
  b->letter_count_ = L;
  b->levels_.push_back(0);
  b->offsets_.push_back(0);
  b->lookup_.emplace(std::string(), 0u);
  b->sphere_start_.push_back(0);
  const bool presented = model.kind() == GroupModel::Kind::presented;
  std::vector<std::int32_t> nb;  // filled as we go; entries for level == radius set later

  std::size_t level_begin = 0;
  for (int level = 0; level <= radius; ++level) {
    std::size_t level_end = b->size();
    b->sphere_start_.push_back(level_end);
    if (level == radius) break;
    if (level_begin == level_end) break;
    for (std::size_t i = level_begin; i < level_end; ++i) {
      Word base = b->word(i);
      for (int l = 0; l < L; ++l) {
        base.push_back(static_cast<Letter>(l));
        Word w = model.normalize(base);
        base.pop_back();
        if (b->find(w)) continue;
        if (b->size() >= (1u << 31) - 1) throw RangeError("ball too large");
        b->letters_.insert(b->letters_.end(), w.begin(), w.end());
        b->offsets_.push_back(b->letters_.size());
        b->levels_.push_back(level + 1);
        b->lookup_.emplace(key_of(w), static_cast<std::uint32_t>(b->size() - 1));
        if (presented && b->size() > 200000) {
          throw RangeError("presented ball enumeration exceeds 200000 elements");
        }
      }
    }
    level_begin = level_end;
  }
  // sphere_start_ has radius+2 entries when the loop ran to completion
  while (static_cast<int>(b->sphere_start_.size()) < radius + 2) {
    b->sphere_start_.push_back(b->size());
  }
  b->sphere_start_.resize(static_cast<std::size_t>(radius) + 2);

  b->neighbors_.assign(b->size() * static_cast<std::size_t>(L), -1);
  const std::size_t n = b->size();
  parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
    Word base;
    for (std::size_t i = lo; i < hi; ++i) {
      auto e = b->element(i);
      base.assign(e.begin(), e.end());
      for (int l = 0; l < L; ++l) {
        base.push_back(static_cast<Letter>(l));
        auto j = b->find(base);
        base.pop_back();
        b->neighbors_[i * L + l] = j ? static_cast<std::int32_t>(*j) : -1;
      }
    }
  });
  return b;
}

std::optional<std::size_t> Ball::find(std::span<const Letter> w) const {
  Word nf = model_.normalize(w);
  auto it = lookup_.find(key_of(nf));
  if (it != lookup_.end()) return it->second;
  return std::nullopt;
}

std::size_t Ball::index_of(std::span<const Letter> w) const {
  auto i = find(w);
  if (!i) throw RangeError("ball too small: " + model_.format(model_.normalize(w)) +
                           " is outside B(id," + std::to_string(radius_) + ")");
  return *i;
}

std::vector<std::size_t> Ball::sphere_sizes() const {
  std::vector<std::size_t> s;
  for (int n = 0; n <= radius_; ++n) s.push_back(sphere_end(n) - sphere_begin(n));
  return s;
}

int Ball::distance(std::size_t i, std::size_t j) const {
  if (model_.exact_metric()) return model_.distance(element(i), element(j));
  Word w = model_.inverse(element(i));
  auto e = element(j);
  w.insert(w.end(), e.begin(), e.end());
  return levels_[index_of(w)];
}

std::uint64_t Ball::fingerprint() const {
  Fnv1a hs;
  hs.add(model_.fingerprint());
  hs.add(radius_);
  hs.add(static_cast<std::uint64_t>(size()));
  return hs.value();
}

// ---------------------------------------------------------------------------

BoundaryRay::BoundaryRay(const GroupModel& model, Word prefix, Word period)
    : prefix_(std::move(prefix)), period_(std::move(period)) {
  if (period_.empty()) throw PreconditionError("boundary ray needs a nonempty period");
  if (!model.exact_metric()) {
    throw PreconditionError("boundary rays need a free or free-product model");
  }
  std::size_t check = prefix_.size() + 3 * period_.size() + 2;
  Word w;
  for (std::size_t n = 0; n < check; ++n) {
    w.push_back(letter(n));
    if (model.length(w) != static_cast<int>(n + 1)) {
      throw PreconditionError("ray " + model.format(prefix_) + "(" + model.format(period_) +
                              ")^inf is not geodesic at step " + std::to_string(n + 1));
    }
  }
}

Letter BoundaryRay::letter(std::size_t n) const {
  if (n < prefix_.size()) return prefix_[n];
  return period_[(n - prefix_.size()) % period_.size()];
}

Word BoundaryRay::at(std::size_t n) const {
  Word w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = letter(i);
  return w;
}

std::string BoundaryRay::describe(const GroupModel& model) const {
  std::string p = prefix_.empty() ? "" : model.format(prefix_);
  return p + "(" + model.format(period_) + ")^inf";
}

// ---------------------------------------------------------------------------

namespace {

int four_point_twice(const std::vector<int>& d, std::size_t n, std::size_t x, std::size_t y,
                     std::size_t z, std::size_t w) {
  int s1 = d[x * n + y] + d[z * n + w];
  int s2 = d[x * n + z] + d[y * n + w];
  int s3 = d[x * n + w] + d[y * n + z];
  int hi = std::max({s1, s2, s3});
  int lo = std::min({s1, s2, s3});
  int mid = s1 + s2 + s3 - hi - lo;
  return hi - mid;  // twice delta for this quadruple
}

}  // namespace

DeltaEstimate delta_estimate(const Ball& ball, std::uint64_t samples, std::uint64_t seed) {
  DeltaEstimate out;
  // Presented models only know distances inside the ball, so restrict to the half ball.
  int r = ball.model().exact_metric() ? ball.radius() : ball.radius() / 2;
  std::size_t n = ball.sphere_end(r);
  out.points = n;
  std::vector<int> d(n * n, 0);
  parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = i == j ? 0 : ball.distance(i, j);
  });
  int best = 0;
  if (r <= 5) {
    // Exhaustive over unordered quadruples, parallel over the first index.
    std::vector<int> per(n, 0);
    std::vector<std::uint64_t> counts(n, 0);
    parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t x = lo; x < hi; ++x) {
        int m = 0;
        std::uint64_t c = 0;
        for (std::size_t y = x + 1; y < n; ++y)
          for (std::size_t z = y + 1; z < n; ++z)
            for (std::size_t w = z + 1; w < n; ++w) {
              m = std::max(m, four_point_twice(d, n, x, y, z, w));
              ++c;
            }
        per[x] = m;
        counts[x] = c;
      }
    }, 1);
    best = *std::max_element(per.begin(), per.end());
    out.quadruples = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    out.exhaustive = true;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::uint64_t s = 0; s < samples; ++s) {
      best = std::max(best, four_point_twice(d, n, pick(rng), pick(rng), pick(rng), pick(rng)));
    }
    out.quadruples = samples;
    out.exhaustive = false;
  }
  out.delta = {best};
  return out;
}

std::vector<Word> geodesics(const Ball& ball, std::span<const Letter> g, std::span<const Letter> h,
                            std::size_t limit) {
  if (limit < 1) throw PreconditionError("geodesics: limit must be >= 1");
  std::size_t gi = ball.index_of(g);
  std::size_t hi = ball.index_of(h);
  const int L = ball.model().letter_count();
  std::vector<Word> out;
  int total = ball.distance(gi, hi);
  Word path;
  // depth-first search over letters that decrease the distance to h
  std::vector<std::pair<std::size_t, int>> stack;  // (current index, next letter to try)
  stack.emplace_back(gi, 0);
  while (!stack.empty() && out.size() < limit) {
    auto& [cur, next] = stack.back();
    int remaining = total - static_cast<int>(path.size());
    if (remaining == 0) {
      out.push_back(path);
      stack.pop_back();
      if (!path.empty()) path.pop_back();
      continue;
    }
    if (next >= L) {
      stack.pop_back();
      if (!path.empty()) path.pop_back();
      continue;
    }
    Letter l = static_cast<Letter>(next++);
    std::int32_t nb = ball.neighbor(cur, l);
    if (nb < 0) continue;
    if (ball.distance(static_cast<std::size_t>(nb), hi) != remaining - 1) continue;
    path.push_back(l);
    stack.emplace_back(static_cast<std::size_t>(nb), 0);
  }
  return out;
}

HalfInteger TreeApproximation::tree_distance(std::size_t i, std::size_t j) const {
  int a = leaf[i], b = leaf[j];
  std::vector<int> anc;
  for (int x = a; x >= 0; x = nodes[x].parent) anc.push_back(x);
  int lca = 0;
  for (int y = b; y >= 0; y = nodes[y].parent) {
    if (std::find(anc.begin(), anc.end(), y) != anc.end()) {
      lca = y;
      break;
    }
  }
  return {nodes[a].depth.twice + nodes[b].depth.twice - 2 * nodes[lca].depth.twice};
}

TreeApproximation tree_approximation(const Ball& ball, const std::vector<Word>& points,
                                     std::span<const Letter> o, HalfInteger delta) {
  TreeApproximation t;
  t.delta = delta;
  const std::size_t n = points.size();
  int k = 0;
  while ((std::size_t{1} << k) + 2 < n) ++k;
  t.k = k;
  t.nodes.push_back({-1, {0}});
  if (n == 0) return t;

  std::size_t oi = ball.index_of(o);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = ball.index_of(points[i]);
  std::vector<int> radial(n);
  for (std::size_t i = 0; i < n; ++i) radial[i] = ball.distance(idx[i], oi);
  std::vector<int> dist(n * n, 0), prod(n * n, 0);  // products stored twice
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      dist[i * n + j] = i == j ? 0 : ball.distance(idx[i], idx[j]);
      prod[i * n + j] = gromov_twice(radial[i], radial[j], dist[i * n + j]);
    }

  // maximin products via a Floyd-Warshall style closure
  std::vector<int> mm = prod;
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        mm[i * n + j] = std::max(mm[i * n + j], std::min(mm[i * n + m], mm[m * n + j]));

  // Single-linkage dendrogram. Maximin products satisfy mm(i,j) >= min(mm(i,m), mm(m,j)),
  // so "mm >= level" is an equivalence relation and each level merges whole classes.
  struct Cluster {
    std::size_t rep;
    int node;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < n; ++i) {
    t.nodes.push_back({-1, {2 * radial[i]}});
    t.leaf.push_back(static_cast<int>(t.nodes.size() - 1));
    clusters.push_back({i, static_cast<int>(t.nodes.size() - 1)});
  }
  std::vector<int> levels(mm.begin(), mm.end());
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  for (int lev : levels) {
    if (lev <= 0) break;
    std::vector<Cluster> next;
    std::vector<bool> used(clusters.size(), false);
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      if (used[a]) continue;
      used[a] = true;
      std::vector<std::size_t> group{a};
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        if (!used[b] && mm[clusters[a].rep * n + clusters[b].rep] >= lev) {
          used[b] = true;
          group.push_back(b);
        }
      }
      if (group.size() == 1) {
        next.push_back(clusters[a]);
        continue;
      }
      int node = static_cast<int>(t.nodes.size());
      t.nodes.push_back({-1, {lev}});
      for (auto c : group) t.nodes[clusters[c].node].parent = node;
      next.push_back({clusters[a].rep, node});
    }
    clusters = std::move(next);
  }
  for (auto& c : clusters) t.nodes[c.node].parent = 0;

  for (std::size_t i = 0; i < n; ++i) {
    if (t.nodes[t.leaf[i]].depth.twice != 2 * radial[i]) t.radial_ok = false;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      int dt = t.tree_distance(i, j).twice;
      int d2 = 2 * dist[i * n + j];
      t.max_slack_twice = std::max(t.max_slack_twice, d2 - dt);
      if (dt > d2 || dt < d2 - 2 * k * delta.twice) {
        t.bounds_ok = false;
        t.violations.emplace_back(i, j);
      }
    }
  return t;
}

VisualReport visual_r(const GroupModel& model, const BoundaryRay& xi, const BoundaryRay& eta,
                      int depth, double lambda_visual, double delta) {
  if (depth < 2) throw PreconditionError("insufficient depth");
  if (!(lambda_visual > 0 && lambda_visual < 1)) {
    throw PreconditionError("lambda_visual must lie in (0,1)");
  }
  if (delta > 0 && lambda_visual <= std::pow(0.5, 1.0 / (2.0 * delta))) {
    throw PreconditionError("lambda_visual below the admissible bound for the measured delta");
  }
  Word x = xi.at(static_cast<std::size_t>(depth));
  Word y = eta.at(static_cast<std::size_t>(depth));
  Word id;
  VisualReport rep;
  rep.product = gromov_product(model, x, y, id);
  rep.uncertainty = 2.0 * delta;
  double p = rep.product.value();
  rep.value = std::pow(lambda_visual, p);
  rep.lower = std::pow(lambda_visual, p + rep.uncertainty);
  rep.upper = std::pow(lambda_visual, std::max(0.0, p - rep.uncertainty));
  rep.saturated = rep.product.twice >= 2 * depth;
  return rep;
}

GrowthReport growth_rate(const Ball& ball) {
  if (ball.radius() < 3) throw PreconditionError("growth_rate needs radius >= 3");
  GrowthReport g;
  g.sphere_sizes = ball.sphere_sizes();
  for (int n = 1; n <= ball.radius(); ++n) {
    g.roots.push_back(std::pow(static_cast<double>(g.sphere_sizes[n]), 1.0 / n));
  }
  int N = ball.radius();
  g.ratio_estimate =
      static_cast<double>(g.sphere_sizes[N]) / static_cast<double>(g.sphere_sizes[N - 1]);
  g.root_estimate = g.roots.back();
  g.estimate = g.ratio_estimate;
  return g;
}

}  // namespace martinbench
