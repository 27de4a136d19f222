#include "martinbench/base.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "martinbench/error.hpp"
#include "martinbench/hash.hpp"

namespace martinbench {

namespace {

using Mat = std::vector<std::uint64_t>;

Mat mat_mul(const Mat& x, const Mat& y, int n) {
  Mat z(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      auto v = x[i * n + k];
      if (!v) continue;
      for (int j = 0; j < n; ++j) z[i * n + j] += v * y[k * n + j];
    }
  return z;
}

}  // namespace

Subshift::Subshift(int alphabet, std::vector<std::vector<int>> transitions)
    : alphabet_(alphabet), rows_(std::move(transitions)) {
  if (alphabet < 1 || alphabet > 64) throw PreconditionError("alphabet size must be in [1, 64]");
  if (static_cast<int>(rows_.size()) != alphabet) {
    throw PreconditionError("transition matrix must be alphabet x alphabet");
  }
  allowed_.assign(static_cast<std::size_t>(alphabet) * alphabet, 0);
  for (int i = 0; i < alphabet; ++i) {
    if (static_cast<int>(rows_[i].size()) != alphabet) {
      throw PreconditionError("transition matrix must be alphabet x alphabet");
    }
    for (int j = 0; j < alphabet; ++j) {
      int v = rows_[i][j];
      if (v != 0 && v != 1) throw PreconditionError("transition matrix entries must be 0 or 1");
      allowed_[i * alphabet + j] = static_cast<char>(v);
    }
  }
  // Primitive iff some power is positive; Wielandt's bound (n-1)^2 + 1.
  const int n = alphabet;
  Mat a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n * n; ++i) a[i] = static_cast<std::uint64_t>(allowed_[i]);
  Mat p = a;
  bool primitive = false;
  for (int k = 1; k <= (n - 1) * (n - 1) + 1; ++k) {
    if (std::all_of(p.begin(), p.end(), [](auto v) { return v > 0; })) {
      primitive = true;
      break;
    }
    p = mat_mul(p, a, n);
    for (auto& v : p) v = v ? 1 : 0;
  }
  if (!primitive) {
    throw PreconditionError("transition matrix is not irreducible and aperiodic");
  }
}

Subshift Subshift::full(int alphabet) {
  return Subshift(alphabet, std::vector<std::vector<int>>(alphabet, std::vector<int>(alphabet, 1)));
}

bool Subshift::admissible(std::span<const Symbol> w) const {
  for (Symbol s : w)
    if (s >= alphabet_) return false;
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if (!allowed(w[i], w[i + 1])) return false;
  return true;
}

std::vector<SymbolWord> Subshift::admissible_words(int n) const {
  if (n < 1) throw PreconditionError("word length must be >= 1");
  std::vector<SymbolWord> cur;
  for (int a = 0; a < alphabet_; ++a) cur.push_back({static_cast<Symbol>(a)});
  for (int len = 2; len <= n; ++len) {
    std::vector<SymbolWord> next;
    for (const auto& w : cur)
      for (int b = 0; b < alphabet_; ++b)
        if (allowed(w.back(), static_cast<Symbol>(b))) {
          SymbolWord x = w;
          x.push_back(static_cast<Symbol>(b));
          next.push_back(std::move(x));
        }
    cur = std::move(next);
  }
  return cur;
}

std::uint64_t Subshift::count_words(int n) const {
  if (n < 1) throw PreconditionError("word length must be >= 1");
  const int m = alphabet_;
  Mat a(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m * m; ++i) a[i] = static_cast<std::uint64_t>(allowed_[i]);
  Mat p(static_cast<std::size_t>(m) * m, 0);
  for (int i = 0; i < m; ++i) p[i * m + i] = 1;
  for (int k = 1; k < n; ++k) p = mat_mul(p, a, m);
  return std::accumulate(p.begin(), p.end(), std::uint64_t{0});
}

// ---------------------------------------------------------------------------

Potential::Potential(int alphabet, int depth, std::vector<double> table)
    : alphabet_(alphabet), depth_(depth), table_(std::move(table)) {
  if (depth < 1) throw PreconditionError("potential depth must be >= 1");
  std::size_t expect = 1;
  for (int i = 0; i < depth; ++i) expect *= static_cast<std::size_t>(alphabet);
  if (table_.size() != expect) {
    throw PreconditionError("potential table must have alphabet^depth entries (" +
                            std::to_string(expect) + " expected, got " +
                            std::to_string(table_.size()) + ")");
  }
}

Potential Potential::constant(int alphabet, int depth, double value) {
  std::size_t n = 1;
  for (int i = 0; i < depth; ++i) n *= static_cast<std::size_t>(alphabet);
  return Potential(alphabet, depth, std::vector<double>(n, value));
}

std::size_t Potential::index(std::span<const Symbol> w) const {
  if (static_cast<int>(w.size()) < depth_) {
    throw PreconditionError("potential needs " + std::to_string(depth_) + " symbols");
  }
  std::size_t idx = 0;
  for (int i = 0; i < depth_; ++i) idx = idx * static_cast<std::size_t>(alphabet_) + w[i];
  return idx;
}

double Potential::operator()(std::span<const Symbol> w) const { return table_[index(w)]; }

Potential Potential::lifted(int depth) const {
  if (depth <= depth_) return *this;
  std::size_t extra = 1;
  for (int i = depth_; i < depth; ++i) extra *= static_cast<std::size_t>(alphabet_);
  std::vector<double> t(table_.size() * extra);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = table_[i / extra];
  return Potential(alphabet_, depth, std::move(t));
}

long word_index(const std::vector<SymbolWord>& words, std::span<const Symbol> w) {
  auto it = std::lower_bound(words.begin(), words.end(), w, [](const SymbolWord& a, auto b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  if (it == words.end() || !std::equal(it->begin(), it->end(), w.begin(), w.end())) return -1;
  return static_cast<long>(it - words.begin());
}

std::pair<Normalization, Potential> ruelle_normalize(const Subshift& shift, const Potential& raw,
                                                    double tol, int max_iter) {
  if (raw.alphabet() != shift.alphabet()) {
    throw PreconditionError("potential alphabet does not match the subshift");
  }
  const int k = std::max(raw.depth(), 2);
  Potential phi = raw.lifted(k);
  const int d = k - 1;
  Normalization nm;
  nm.words = shift.admissible_words(d);
  const std::size_t n = nm.words.size();
  const int A = shift.alphabet();

  // Row u: (L f)(u) = sum_a exp(phi(a u)) f(trunc_d(a u)).
  struct Entry {
    std::size_t col;
    double w;
  };
  std::vector<std::vector<Entry>> rows(n);
  SymbolWord au(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = nm.words[i];
    for (int a = 0; a < A; ++a) {
      if (!shift.allowed(static_cast<Symbol>(a), u[0])) continue;
      au[0] = static_cast<Symbol>(a);
      std::copy(u.begin(), u.end(), au.begin() + 1);
      double lw = phi(au);
      if (!std::isfinite(lw)) throw PreconditionError("potential must be finite on admissible words");
      long j = word_index(nm.words, std::span<const Symbol>(au.data(), static_cast<std::size_t>(d)));
      rows[i].push_back({static_cast<std::size_t>(j), std::exp(lw)});
    }
  }
  auto apply = [&](const std::vector<double>& f) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& e : rows[i]) out[i] += e.w * f[e.col];
    return out;
  };

  // Shifted power iteration (L + I) avoids oscillation; Collatz-Wielandt stop.
  std::vector<double> h(n, 1.0);
  double lambda = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    auto lh = apply(h);
    double lo = INFINITY, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double q = lh[i] / h[i];
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    lambda = 0.5 * (lo + hi);
    if (hi - lo <= tol * hi) break;
    double mx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = h[i] + lh[i];
      mx = std::max(mx, h[i]);
    }
    for (auto& v : h) v /= mx;
  }
  if (it >= max_iter) throw ConvergenceError("spectral iteration failed");
  double mx = *std::max_element(h.begin(), h.end());
  for (auto& v : h) v /= mx;
  auto lh = apply(h);
  double res = 0;
  for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(lh[i] - lambda * h[i]));
  nm.lambda = lambda;
  nm.h = h;
  nm.iterations = it;
  nm.residual = res;

  std::vector<double> table = phi.table();
  std::vector<Symbol> w(static_cast<std::size_t>(k));
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    std::size_t rem = idx;
    for (int i = k - 1; i >= 0; --i) {
      w[static_cast<std::size_t>(i)] = static_cast<Symbol>(rem % static_cast<std::size_t>(A));
      rem /= static_cast<std::size_t>(A);
    }
    if (!shift.admissible(w)) continue;
    long hu = word_index(nm.words, std::span<const Symbol>(w.data() + 1, static_cast<std::size_t>(d)));
    long hv = word_index(nm.words, std::span<const Symbol>(w.data(), static_cast<std::size_t>(d)));
    table[idx] += std::log(h[static_cast<std::size_t>(hv)]) - std::log(h[static_cast<std::size_t>(hu)]) -
                  std::log(lambda);
  }
  return {nm, Potential(A, k, std::move(table))};
}

// ---------------------------------------------------------------------------

BaseSystem::BaseSystem(Subshift shift, Potential raw, double r_shift, double alpha_reg)
    : shift_(std::move(shift)), raw_(std::move(raw)), r_shift_(r_shift), alpha_reg_(alpha_reg) {
  if (!(r_shift > 0 && r_shift < 1)) throw PreconditionError("r_shift must lie in (0,1)");
  if (!(alpha_reg > 0)) throw PreconditionError("alpha_reg must be positive");
  auto [nm, phi] = ruelle_normalize(shift_, raw_);
  norm_ = std::move(nm);
  phi_ = std::move(phi);
}

double BaseSystem::weight(Symbol a, std::span<const Symbol> x) const {
  const int k = phi_.depth();
  Symbol buf[16];
  if (k > 16) throw PreconditionError("potential depth above 16 is not supported");
  buf[0] = a;
  for (int i = 1; i < k; ++i) buf[i] = x[static_cast<std::size_t>(i - 1)];
  return std::exp(phi_(std::span<const Symbol>(buf, static_cast<std::size_t>(k))));
}

double BaseSystem::cylinder_weight(std::span<const Symbol> w, std::span<const Symbol> x) const {
  SymbolWord wx(w.begin(), w.end());
  wx.insert(wx.end(), x.begin(), x.end());
  if (!shift_.admissible(wx)) throw PreconditionError("not in domain of tau_w");
  if (w.empty()) return 1.0;
  if (static_cast<int>(x.size()) < depth() - 1) {
    throw PreconditionError("class word too short for the potential depth");
  }
  double lw = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    lw += phi_(std::span<const Symbol>(wx.data() + i, wx.size() - i));
  }
  return std::exp(lw);
}

std::vector<double> BaseSystem::transfer(std::span<const double> f, int m) const {
  if (m < depth() - 1) throw PreconditionError("function space not invariant");
  auto words = shift_.admissible_words(m);
  if (f.size() != words.size()) throw PreconditionError("index mismatch");
  std::vector<double> out(words.size(), 0.0);
  SymbolWord aw(static_cast<std::size_t>(m) + 1);
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (int a = 0; a < alphabet(); ++a) {
      if (!shift_.allowed(static_cast<Symbol>(a), words[i][0])) continue;
      aw[0] = static_cast<Symbol>(a);
      std::copy(words[i].begin(), words[i].end(), aw.begin() + 1);
      long j = word_index(words, std::span<const Symbol>(aw.data(), static_cast<std::size_t>(m)));
      out[i] += weight(static_cast<Symbol>(a), words[i]) * f[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

double BaseSystem::row_sum_error() const {
  const int d = depth() - 1;
  double err = 0;
  for (const auto& u : shift_.admissible_words(d)) {
    double s = 0;
    for (int a = 0; a < alphabet(); ++a)
      if (shift_.allowed(static_cast<Symbol>(a), u[0])) s += weight(static_cast<Symbol>(a), u);
    err = std::max(err, std::abs(s - 1.0));
  }
  return err;
}

std::uint64_t BaseSystem::fingerprint() const {
  Fnv1a h;
  h.add(alphabet());
  for (const auto& row : shift_.matrix())
    for (int v : row) h.add(v);
  h.add(raw_.depth());
  for (double v : raw_.table()) h.add(v);
  h.add(r_shift_);
  h.add(alpha_reg_);
  return h.value();
}

std::vector<double> dalpha_seminorm(const BaseSystem& base, int m, std::span<const double> f,
                                    std::size_t groups, double alpha_reg) {
  auto words = base.shift().admissible_words(m);
  if (f.size() != words.size() * groups) throw PreconditionError("index mismatch");
  const int A = base.alphabet();
  std::vector<double> out(static_cast<std::size_t>(A) * groups, 0.0);
  const double r = base.r_shift();
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      if (words[i][0] != words[j][0]) continue;
      std::size_t k = 1;
      while (words[i][k] == words[j][k]) ++k;  // distinct words of equal length
      double dist = std::pow(std::pow(r, static_cast<double>(k)), alpha_reg);
      std::size_t a = words[i][0];
      for (std::size_t g = 0; g < groups; ++g) {
        double q = std::abs(f[i * groups + g] - f[j * groups + g]) / dist;
        out[a * groups + g] = std::max(out[a * groups + g], q);
      }
    }
  return out;
}

}  // namespace martinbench
