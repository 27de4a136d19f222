#include "martinbench/extension.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "martinbench/cache.hpp"
#include "martinbench/error.hpp"
#include "martinbench/hash.hpp"
#include "martinbench/parallel.hpp"

namespace martinbench {

namespace {

double sup_norm(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string hex_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

ExtensionSystem::ExtensionSystem(BaseSystem b, GroupModel g, std::vector<Word> k, std::string n)
    : base(std::move(b)), group(std::move(g)), kappa(std::move(k)), name(std::move(n)) {
  if (static_cast<int>(kappa.size()) != base.alphabet()) {
    throw PreconditionError("kappa needs one group element per base symbol");
  }
  for (auto& w : kappa) w = group.normalize(w);
}

int ExtensionSystem::max_kappa_length() const {
  int m = 0;
  for (const auto& w : kappa) m = std::max(m, static_cast<int>(w.size()));
  return m;
}

std::uint64_t ExtensionSystem::fingerprint() const {
  Fnv1a h;
  h.add(base.fingerprint());
  h.add(group.fingerprint());
  for (const auto& w : kappa) {
    h.add(static_cast<int>(w.size()));
    for (Letter l : w) h.add(static_cast<int>(l));
  }
  return h.value();
}

// ---------------------------------------------------------------------------

TruncatedOperator::TruncatedOperator(const ExtensionSystem& sys, int m,
                                     std::shared_ptr<const Ball> ball,
                                     std::vector<std::uint32_t> omega)
    : sys_(std::make_shared<const ExtensionSystem>(sys)), m_(m), ball_(std::move(ball)), omega_(std::move(omega)) {
  if (m < 1 || m < sys.base.depth() - 1) throw PreconditionError("function space not invariant");
  if (ball_->model().fingerprint() != sys.group.fingerprint()) {
    throw PreconditionError("ball was enumerated for a different group model");
  }
  const std::size_t B = ball_->size();
  if (omega_.empty()) {
    omega_.resize(B);
    std::iota(omega_.begin(), omega_.end(), 0u);
  } else {
    std::sort(omega_.begin(), omega_.end());
    omega_.erase(std::unique(omega_.begin(), omega_.end()), omega_.end());
    if (omega_.back() >= B) throw PreconditionError("Omega is not contained in the ball");
  }
  full_ball_ = omega_.size() == B;
  omega_pos_.assign(B, -1);
  for (std::size_t p = 0; p < omega_.size(); ++p) omega_pos_[omega_[p]] = static_cast<std::int64_t>(p);

  const int A = sys.base.alphabet();
  const GroupModel& G = sys.group;
  // one neighbor table per distinct kappa value
  std::vector<Word> distinct;
  table_of_symbol_.assign(static_cast<std::size_t>(A), 0);
  for (int a = 0; a < A; ++a) {
    auto it = std::find(distinct.begin(), distinct.end(), sys.kappa[static_cast<std::size_t>(a)]);
    if (it == distinct.end()) {
      distinct.push_back(sys.kappa[static_cast<std::size_t>(a)]);
      it = distinct.end() - 1;
    }
    table_of_symbol_[static_cast<std::size_t>(a)] = static_cast<int>(it - distinct.begin());
  }
  const std::size_t n = omega_.size();
  auto build_table = [&](const Word& k) {
    std::vector<std::int32_t> t(n, -1);
    parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
      Word tmp;
      for (std::size_t p = lo; p < hi; ++p) {
        std::int64_t cur = omega_[p];
        for (Letter l : k) {
          if (cur < 0) break;
          cur = ball_->neighbor(static_cast<std::size_t>(cur), l);
        }
        if (cur < 0 && !k.empty()) {
          // leaving the ball midway does not rule out returning to it
          auto e = ball_->element(omega_[p]);
          tmp.assign(e.begin(), e.end());
          tmp.insert(tmp.end(), k.begin(), k.end());
          auto idx = ball_->find(tmp);
          cur = idx ? static_cast<std::int64_t>(*idx) : -1;
        }
        t[p] = cur < 0 ? -1 : static_cast<std::int32_t>(omega_pos_[static_cast<std::size_t>(cur)]);
      }
    });
    return t;
  };
  for (const auto& k : distinct) {
    back_.push_back(build_table(G.inverse(k)));
    fwd_.push_back(build_table(k));
  }

  words_ = sys.base.shift().admissible_words(m);
  const std::size_t W = words_.size();
  pre_.assign(W * static_cast<std::size_t>(A), {-1, 0.0});
  succ_.assign(W, {});
  SymbolWord aw(static_cast<std::size_t>(m) + 1);
  for (std::size_t w = 0; w < W; ++w) {
    for (int a = 0; a < A; ++a) {
      if (!sys.base.shift().allowed(static_cast<Symbol>(a), words_[w][0])) continue;
      aw[0] = static_cast<Symbol>(a);
      std::copy(words_[w].begin(), words_[w].end(), aw.begin() + 1);
      long j = word_index(words_, std::span<const Symbol>(aw.data(), static_cast<std::size_t>(m)));
      double wt = sys.base.weight(static_cast<Symbol>(a), words_[w]);
      pre_[w * A + a] = {static_cast<std::int32_t>(j), wt};
      succ_[static_cast<std::size_t>(j)].push_back(
          {static_cast<std::int32_t>(w),
           static_cast<std::uint8_t>(table_of_symbol_[static_cast<std::size_t>(a)]), wt});
    }
  }

  Fnv1a h;
  h.add(sys.fingerprint());
  h.add(m);
  h.add(ball_->fingerprint());
  h.add(static_cast<std::uint64_t>(omega_.size()));
  for (auto o : omega_) h.add(static_cast<std::uint64_t>(o));
  fingerprint_ = h.value();
}

std::shared_ptr<TruncatedOperator> TruncatedOperator::on_ball(const ExtensionSystem& sys, int m,
                                                              int radius) {
  auto ball = Ball::enumerate(sys.group, radius);
  return std::make_shared<TruncatedOperator>(sys, m, ball);
}

void TruncatedOperator::apply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = omega_.size();
  if (in.size() != size() || out.size() != size()) throw PreconditionError("index mismatch");
  const std::size_t A = static_cast<std::size_t>(sys_->base.alphabet());
  const std::size_t W = words_.size();
  constexpr std::size_t chunk = 8192;
  const std::size_t per_word = (n + chunk - 1) / chunk;
  parallel_for(0, W * per_word, [&](std::size_t lo_blk, std::size_t hi_blk) {
    for (std::size_t blk = lo_blk; blk < hi_blk; ++blk) {
      std::size_t w = blk / per_word;
      std::size_t lo = (blk % per_word) * chunk;
      std::size_t hi = std::min(n, lo + chunk);
      double* o = out.data() + w * n;
      std::fill(o + lo, o + hi, 0.0);
      for (std::size_t a = 0; a < A; ++a) {
        const Pre& p = pre_[w * A + a];
        if (p.word < 0) continue;
        const double* src = in.data() + static_cast<std::size_t>(p.word) * n;
        const std::int32_t* bk = back_[static_cast<std::size_t>(table_of_symbol_[a])].data();
        const double wt = p.weight;
        for (std::size_t j = lo; j < hi; ++j) {
          std::int32_t b = bk[j];
          if (b >= 0) o[j] += wt * src[b];
        }
      }
    }
  }, 1);
}

void TruncatedOperator::apply_adjoint(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = omega_.size();
  if (in.size() != size() || out.size() != size()) throw PreconditionError("index mismatch");
  const std::size_t W = words_.size();
  constexpr std::size_t chunk = 8192;
  const std::size_t per_word = (n + chunk - 1) / chunk;
  parallel_for(0, W * per_word, [&](std::size_t lo_blk, std::size_t hi_blk) {
    for (std::size_t blk = lo_blk; blk < hi_blk; ++blk) {
      std::size_t w = blk / per_word;
      std::size_t lo = (blk % per_word) * chunk;
      std::size_t hi = std::min(n, lo + chunk);
      double* o = out.data() + w * n;
      std::fill(o + lo, o + hi, 0.0);
      for (const Succ& s : succ_[w]) {
        const double* src = in.data() + static_cast<std::size_t>(s.word) * n;
        const std::int32_t* fw = fwd_[s.table].data();
        const double wt = s.weight;
        for (std::size_t j = lo; j < hi; ++j) {
          std::int32_t f = fw[j];
          if (f >= 0) o[j] += wt * src[f];
        }
      }
    }
  }, 1);
}

std::optional<std::size_t> TruncatedOperator::position_of(std::span<const Letter> g) const {
  auto i = ball_->find(g);
  if (!i) return std::nullopt;
  auto p = omega_pos_[*i];
  if (p < 0) return std::nullopt;
  return static_cast<std::size_t>(p);
}

std::optional<std::size_t> TruncatedOperator::state_of(std::span<const Symbol> w,
                                                       std::span<const Letter> g) const {
  long wi = word_index(words_, w);
  if (wi < 0) return std::nullopt;
  auto p = position_of(g);
  if (!p) return std::nullopt;
  return state(static_cast<std::size_t>(wi), *p);
}

std::string TruncatedOperator::describe_state(std::size_t s) const {
  std::string out;
  for (Symbol c : words_[word_of(s)]) out.push_back(c < 10 ? static_cast<char>('0' + c) : static_cast<char>('a' + c - 10));
  out.push_back('|');
  out += ball_->model().format(ball_->element(omega_[pos_of(s)]));
  return out;
}

std::vector<std::pair<std::size_t, double>> TruncatedOperator::row(std::size_t s) const {
  std::vector<std::pair<std::size_t, double>> out;
  const std::size_t A = static_cast<std::size_t>(sys_->base.alphabet());
  std::size_t w = word_of(s), j = pos_of(s);
  for (std::size_t a = 0; a < A; ++a) {
    const Pre& p = pre_[w * A + a];
    if (p.word < 0) continue;
    std::int32_t b = back_[static_cast<std::size_t>(table_of_symbol_[a])][j];
    if (b < 0) continue;
    out.emplace_back(state(static_cast<std::size_t>(p.word), static_cast<std::size_t>(b)), p.weight);
  }
  return out;
}

bool TruncatedOperator::interior(std::size_t s) const {
  const std::size_t A = static_cast<std::size_t>(sys_->base.alphabet());
  std::size_t w = word_of(s), j = pos_of(s);
  for (std::size_t a = 0; a < A; ++a) {
    if (pre_[w * A + a].word < 0) continue;
    if (back_[static_cast<std::size_t>(table_of_symbol_[a])][j] < 0) return false;
  }
  return true;
}

std::vector<double> TruncatedOperator::indicator_group(std::span<const Letter> g) const {
  std::vector<double> f(size(), 0.0);
  auto p = position_of(g);
  if (!p) return f;
  for (std::size_t w = 0; w < words_.size(); ++w) f[state(w, *p)] = 1.0;
  return f;
}

std::vector<double> TruncatedOperator::indicator_state(std::size_t s) const {
  std::vector<double> f(size(), 0.0);
  f.at(s) = 1.0;
  return f;
}

std::uint64_t TruncatedOperator::fingerprint() const { return fingerprint_; }

// ---------------------------------------------------------------------------

CsrMatrix CsrMatrix::from_rows(std::size_t n,
                               const std::vector<std::vector<std::pair<std::size_t, double>>>& rows) {
  CsrMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = rows[i];
    std::sort(r.begin(), r.end());
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (k > 0 && r[k].first == r[k - 1].first) {
        c.val_.back() += r[k].second;
        continue;
      }
      if (r[k].first >= n) throw PreconditionError("column index out of range");
      c.col_.push_back(r[k].first);
      c.val_.push_back(r[k].second);
    }
    c.ptr_[i + 1] = c.col_.size();
  }
  return c;
}

CsrMatrix CsrMatrix::materialize(const TruncatedOperator& op) {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(op.size());
  for (std::size_t s = 0; s < op.size(); ++s) rows[s] = op.row(s);
  return from_rows(op.size(), rows);
}

void CsrMatrix::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != size() || out.size() != size()) throw PreconditionError("index mismatch");
  parallel_for(0, size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double s = 0;
      for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) s += val_[k] * in[col_[k]];
      out[i] = s;
    }
  });
}

void CsrMatrix::apply_adjoint(std::span<const double> in, std::span<double> out) const {
  if (in.size() != size() || out.size() != size()) throw PreconditionError("index mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k) out[col_[k]] += val_[k] * in[i];
}

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  for (std::size_t k = ptr_[i]; k < ptr_[i + 1]; ++k)
    if (col_[k] == j) return val_[k];
  return 0.0;
}

// ---------------------------------------------------------------------------

std::vector<double> transfer_iterate(const LinearAction& op, std::span<const double> f, int steps,
                                     double r) {
  if (f.size() != op.size()) throw PreconditionError("index mismatch");
  if (steps < 0) throw PreconditionError("steps must be nonnegative");
  std::vector<double> cur(f.begin(), f.end()), next(f.size());
  for (int s = 0; s < steps; ++s) {
    op.apply(cur, next);
    for (auto& v : next) v *= r;
    cur.swap(next);
  }
  return cur;
}


GreenResult neumann(const LinearAction& op, std::span<const double> f, double r,
                    const SeriesOptions& opts) {
  const std::size_t N = op.size();
  if (f.size() != N) throw PreconditionError("index mismatch");
  if (!(r >= 0)) throw PreconditionError("r must be nonnegative");
  if (!(opts.tol > 0)) throw PreconditionError("tol must be positive");
  const std::vector<char>* mask = opts.mask;
  if (mask && mask->size() != N) throw PreconditionError("mask size mismatch");

  std::vector<double> t(f.begin(), f.end()), next(N);
  if (mask)
    for (std::size_t i = 0; i < N; ++i)
      if (!(*mask)[i]) t[i] = 0;
  std::vector<double> S = t;
  std::vector<double> inc{sup_norm(t)};
  GreenResult res;
  res.r = r;
  if (inc[0] == 0 || r == 0) {
    res.values = std::move(S);
    return res;
  }

  // Sm2 = S_{n-2}, Sm4 = S_{n-4} at even n; A holds the latest accelerated sum.
  std::vector<double> Sm2, Sm4, A, Anew;
  const double inf = std::numeric_limits<double>::infinity();
  double tail = inf, q = 1, acc_change = inf;
  bool use_acc = false;
  int growth = 0;
  int n = 1;
  for (; n <= opts.max_iter; ++n) {
    if (opts.adjoint)
      op.apply_adjoint(t, next);
    else
      op.apply(t, next);
    double e = 0;
    for (std::size_t i = 0; i < N; ++i) {
      double v = (mask && !(*mask)[i]) ? 0.0 : r * next[i];
      t[i] = v;
      S[i] += v;
      e = std::max(e, std::abs(v));
    }
    inc.push_back(e);
    const double snorm = sup_norm(S);
    if (e == 0 || e <= 1e-17 * snorm) {
      tail = e;
      break;
    }
    if (n >= 2 && e > inc[static_cast<std::size_t>(n) - 2]) {
      if (++growth >= opts.divergence_window) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "r beyond convergence radius for this truncation (r = %.12g)", r);
        throw ConvergenceError(buf);
      }
    } else {
      growth = 0;
    }
    if (n >= 10) {
      q = std::pow(e / inc[static_cast<std::size_t>(n) - 10], 0.1);
      tail = q < 1 ? e * q / (1 - q) : inf;
    }
    if (tail <= opts.tol * snorm) break;

    if (opts.accelerate && n % 2 == 0) {
      if (!Sm4.empty()) {
        Anew.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
          double d0 = Sm2[i] - Sm4[i], d1 = S[i] - Sm2[i];
          double v = S[i];
          if (d0 * d1 > 0 && std::abs(d1) < std::abs(d0)) v -= d1 * d1 / (d1 - d0);
          Anew[i] = v;
        }
        if (!A.empty()) {
          double ch = 0;
          for (std::size_t i = 0; i < N; ++i) ch = std::max(ch, std::abs(Anew[i] - A[i]));
          acc_change = ch;
        }
        A.swap(Anew);
        if (n >= 20 && q < 1 && acc_change <= opts.tol * sup_norm(A)) {
          use_acc = true;
          break;
        }
      }
      Sm4.swap(Sm2);
      Sm2 = S;
    }
  }
  if (n > opts.max_iter) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "Green series did not converge within %d iterations (r = %.12g)",
                  opts.max_iter, r);
    throw ConvergenceError(buf);
  }
  res.values = use_acc ? std::move(A) : std::move(S);
  res.cert.iterations = n;
  res.cert.last_increment = inc.back();
  res.cert.contraction = q;
  res.cert.accelerated = use_acc;
  res.cert.accelerated_change = use_acc ? acc_change : 0;
  res.cert.series_tail = use_acc ? acc_change : tail;
  return res;
}

namespace {

int support_reach(const TruncatedOperator& op, std::span<const double> f) {
  int reach = -1;
  for (std::size_t s = 0; s < f.size(); ++s)
    if (f[s] != 0) reach = std::max(reach, op.group_length(s));
  return reach;
}

// Sphere-crossing decay of the solution past the support of the source,
// extrapolated to the mass that would have returned from outside the ball.
void attach_exit_bound(const TruncatedOperator& op, int reach, GreenResult& g) {
  if (!op.full_ball() || reach < 0) return;
  const int n = op.ball().radius();
  std::vector<double> M(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::size_t s = 0; s < g.values.size(); ++s) {
    auto k = static_cast<std::size_t>(op.group_length(s));
    M[k] = std::max(M[k], std::abs(g.values[s]));
  }
  double F = 0;
  bool measured = false;
  for (int k = reach; k <= n - 2; ++k) {
    if (M[static_cast<std::size_t>(k)] <= 0) continue;
    F = std::max(F, M[static_cast<std::size_t>(k) + 1] / M[static_cast<std::size_t>(k)]);
    measured = true;
  }
  if (!measured) F = 1;
  g.cert.exit_rate = F;
  g.cert.exit_bound = sup_norm(g.values) * std::pow(std::min(F, 1.0), n + 1 - reach);
}

}  // namespace

GreenResult green_apply(const TruncatedOperator& op, std::span<const double> f, double r, double tol,
                        const std::string& spec) {
  SeriesOptions o;
  o.tol = tol;
  GreenResult g = neumann(op, f, r, o);
  g.spec = spec;
  attach_exit_bound(op, support_reach(op, f), g);
  return g;
}

GreenResult green_adjoint(const TruncatedOperator& op, std::span<const double> m, double r,
                          double tol, const std::string& spec) {
  SeriesOptions o;
  o.tol = tol;
  o.adjoint = true;
  GreenResult g = neumann(op, m, r, o);
  g.spec = spec;
  attach_exit_bound(op, support_reach(op, m), g);
  return g;
}

GreenResult hr_apply(const TruncatedOperator& op, std::span<const double> f1,
                     std::span<const double> f2, double r, double tol) {
  GreenResult g2 = green_apply(op, f2, r, tol, "inner");
  std::vector<double> prod(op.size());
  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prod.size(); ++i) {
    prod[i] = f1[i] * g2.values[i];
    if (f1[i] != 0) floor = std::min(floor, g2.values[i]);
  }
  GreenResult g1 = green_apply(op, prod, r, tol, "H_r");
  if (std::isfinite(floor)) {
    double e2 = g2.error();
    double extra = floor > 0 ? e2 * sup_norm(g1.values) / floor
                             : (e2 > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    g1.cert.series_tail += extra;
  }
  g1.cert.iterations += g2.cert.iterations;
  return g1;
}

// ---------------------------------------------------------------------------

GreenCache::GreenCache(std::shared_ptr<const TruncatedOperator> op, double tol)
    : op_(std::move(op)), tol_(tol) {
  if (!op_) throw PreconditionError("null operator");
}

std::shared_ptr<const GreenResult> GreenCache::get(const std::string& key, bool adjoint,
                                                   const std::vector<double>& f, double r) {
  {
    std::lock_guard lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  Fnv1a h;
  h.add(op_->fingerprint());
  h.add(tol_);
  h.add(std::string_view(key));
  h.add(r);
  const std::uint64_t disk_key = h.value();
  std::shared_ptr<const GreenResult> out;
  if (auto hit = cache_load(disk_key); hit && hit->values.size() == op_->size()) {
    hit->spec = key;
    out = std::make_shared<GreenResult>(std::move(*hit));
  } else {
    GreenResult g = adjoint ? green_adjoint(*op_, f, r, tol_, key) : green_apply(*op_, f, r, tol_, key);
    cache_store(disk_key, g);
    out = std::make_shared<GreenResult>(std::move(g));
  }
  std::lock_guard lock(mutex_);
  return memo_.emplace(key, out).first->second;
}

std::shared_ptr<const GreenResult> GreenCache::forward_group(std::span<const Letter> g, double r) {
  const GroupModel& G = op_->system().group;
  std::string key = "F:g=" + G.format(G.normalize(g)) + ":r=" + hex_double(r);
  return get(key, false, op_->indicator_group(g), r);
}

std::shared_ptr<const GreenResult> GreenCache::forward_state(std::size_t state, double r) {
  std::string key = "S:" + std::to_string(state) + ":r=" + hex_double(r);
  return get(key, false, op_->indicator_state(state), r);
}

std::shared_ptr<const GreenResult> GreenCache::adjoint_state(std::size_t state, double r) {
  std::string key = "A:" + std::to_string(state) + ":r=" + hex_double(r);
  return get(key, true, op_->indicator_state(state), r);
}

// ---------------------------------------------------------------------------

TranslatedKernel::TranslatedKernel(GreenCache& cache, double r) : op_(&cache.op()), r_(r) {
  if (!op_->full_ball()) throw PreconditionError("translated kernels need the full ball");
  for (std::size_t y = 0; y < op_->word_count(); ++y) {
    kernels_.push_back(cache.forward_state(op_->state(y, 0), r));
    error_ = std::max(error_, kernels_.back()->error());
  }
}

double TranslatedKernel::at(std::size_t x, std::size_t y, std::size_t gamma_ball) const {
  return kernels_[y]->values[op_->state(x, gamma_ball)];
}

std::optional<double> TranslatedKernel::value(std::size_t x, std::size_t y, std::span<const Letter> z,
                                              std::span<const Letter> g) const {
  const GroupModel& G = op_->system().group;
  auto idx = op_->ball().find(G.multiply(G.inverse(z), g));
  if (!idx) return std::nullopt;
  return at(x, y, *idx);
}

std::optional<double> TranslatedKernel::group_value(std::size_t x, std::span<const Letter> z,
                                                    std::span<const Letter> g) const {
  const GroupModel& G = op_->system().group;
  auto idx = op_->ball().find(G.multiply(G.inverse(z), g));
  if (!idx) return std::nullopt;
  double s = 0;
  for (std::size_t y = 0; y < kernels_.size(); ++y) s += at(x, y, *idx);
  return s;
}

// ---------------------------------------------------------------------------

PerronResult perron_root(const LinearAction& op, double tol, int max_iter) {
  const std::size_t N = op.size();
  PerronResult res;
  if (N == 0) return res;
  std::vector<double> v(N, 1.0), mid(N), w(N);
  double lo = 0, hi = std::numeric_limits<double>::infinity();
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    op.apply(v, mid);
    op.apply(mid, w);
    double l = std::numeric_limits<double>::infinity(), u = 0, top = 0;
    for (std::size_t i = 0; i < N; ++i) {
      top = std::max(top, w[i]);
      if (v[i] <= 0) continue;
      double q = w[i] / v[i];
      l = std::min(l, q);
      u = std::max(u, q);
    }
    lo = std::max(lo, std::isfinite(l) ? l : 0.0);
    hi = std::min(hi, u);
    if (top <= 0) {
      lo = hi = 0;
      break;
    }
    for (std::size_t i = 0; i < N; ++i) v[i] = w[i] / top;
    if (hi - lo <= tol * hi) break;
  }
  res.iterations = std::min(it, max_iter);
  res.lower = std::sqrt(lo);
  res.upper = std::sqrt(std::max(lo, hi));
  res.value = 0.5 * (res.lower + res.upper);
  res.vector = std::move(v);
  return res;
}

std::optional<double> radial_upper_bound(const ExtensionSystem& sys) {
  const GroupModel& G = sys.group;
  if (!G.exact_metric()) return std::nullopt;
  const int kmax = sys.max_kappa_length();
  int syllable = 0;
  if (G.kind() == GroupModel::Kind::free_product) {
    for (int o : G.factor_orders()) syllable = std::max(syllable, o == 0 ? kmax + 1 : o / 2);
  }
  auto ball = Ball::enumerate(G, 2 * kmax + syllable + 2);
  const int A = sys.base.alphabet();
  std::vector<Word> inv_kappa;
  for (const auto& k : sys.kappa) inv_kappa.push_back(G.inverse(k));
  std::vector<std::vector<int>> patterns;
  for (std::size_t i = 0; i < ball->size(); ++i) {
    auto g = ball->element(i);
    std::vector<int> p(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a)
      p[static_cast<std::size_t>(a)] =
          G.length(G.multiply(g, inv_kappa[static_cast<std::size_t>(a)])) - static_cast<int>(g.size());
    patterns.push_back(std::move(p));
  }
  std::sort(patterns.begin(), patterns.end());
  patterns.erase(std::unique(patterns.begin(), patterns.end()), patterns.end());

  const int d = sys.base.depth() - 1;
  auto xs = sys.base.shift().admissible_words(d);
  std::vector<std::vector<double>> weights;
  for (const auto& x : xs) {
    std::vector<double> w(static_cast<std::size_t>(A), 0.0);
    for (int a = 0; a < A; ++a)
      if (sys.base.shift().allowed(static_cast<Symbol>(a), x[0]))
        w[static_cast<std::size_t>(a)] = sys.base.weight(static_cast<Symbol>(a), x);
    weights.push_back(std::move(w));
  }
  auto objective = [&](double s) {
    double best = 0;
    for (const auto& w : weights)
      for (const auto& p : patterns) {
        double v = 0;
        for (std::size_t a = 0; a < w.size(); ++a)
          if (w[a] > 0) v += w[a] * std::exp(s * p[a]);
        best = std::max(best, v);
      }
    return best;
  };
  const double phi = 0.5 * (std::sqrt(5.0) - 1);
  double a = -10, b = 2;
  double c = b - phi * (b - a), e = a + phi * (b - a);
  double fc = objective(c), fe = objective(e);
  for (int i = 0; i < 200 && b - a > 1e-14; ++i) {
    if (fc <= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + phi * (b - a);
      fe = objective(e);
    }
  }
  return std::min({fc, fe, objective(0.0)});
}

RhoEstimate rho_estimate(const ExtensionSystem& sys, int m, int n, double tol) {
  if (n < 1) throw PreconditionError("ball radius must be positive");
  RhoEstimate est;
  for (int k = 1; k <= n; ++k) {
    auto op = TruncatedOperator::on_ball(sys, m, k);
    PerronResult p = perron_root(*op, tol);
    est.radii.push_back(k);
    est.lower.push_back(p.lower);
    est.truncated.push_back(p.value);
    if (k == 1) {
      est.extrapolated.push_back(p.value);
    } else {
      double v0 = est.truncated[est.truncated.size() - 2];
      double n2 = static_cast<double>(k) * k, m2 = static_cast<double>(k - 1) * (k - 1);
      est.extrapolated.push_back((n2 * p.value - m2 * v0) / (n2 - m2));
    }
  }
  est.estimate = est.extrapolated.back();
  if (auto up = radial_upper_bound(sys)) {
    est.upper = *up;
    est.has_upper = true;
  }
  if (est.has_upper && est.upper > 0) {
    est.R_hat = (1 - 1e-12) / est.upper;
    est.R_certified = true;
  } else {
    est.R_hat = 1 / est.estimate;
    est.R_certified = false;
  }
  return est;
}

double extrapolate_aitken(double v0, double v1, double v2) {
  double d1 = v2 - v1, d0 = v1 - v0;
  double den = d1 - d0;
  if (den == 0 || d0 * d1 <= 0) return v2;
  return v2 - d1 * d1 / den;
}

double extrapolate_harmonic(double v0, double v1, double v2) {
  double den = 2 * v1 - v0 - v2;
  if (den == 0) return v2;
  return (v1 * (v0 + v2) - 2 * v0 * v2) / den;
}

GreenLimit green_limit(const ExtensionSystem& sys, int m, int n, double r, bool critical, double tol) {
  if (n < 2) throw PreconditionError("green_limit needs radius at least 2");
  GreenLimit out;
  for (int k = n - 2; k <= n; ++k) {
    auto op = TruncatedOperator::on_ball(sys, m, k);
    GreenResult g = green_apply(*op, op->indicator_group({}), r, tol);
    out.radii.push_back(k);
    out.values.push_back(g.values[op->state(0, 0)]);
  }
  out.geometric = extrapolate_aitken(out.values[0], out.values[1], out.values[2]);
  out.critical = extrapolate_harmonic(out.values[0], out.values[1], out.values[2]);
  out.estimate = critical ? out.critical : out.geometric;
  out.model = critical ? "critical" : "geometric";
  return out;
}

// ---------------------------------------------------------------------------

DistortionReport distortion_scan(GreenCache& cache, std::span<const Letter> h, double r,
                                 int family_radius, int margin) {
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  const GroupModel& G = op.system().group;
  const int limit = ball.radius() - margin;
  if (family_radius < 0 || limit < 0) throw PreconditionError("family radius and margin exceed the ball");
  const std::size_t W = op.word_count();
  DistortionReport rep;
  rep.K_hat = 0;
  Word hn = G.normalize(h);
  // pairs (g, g h) both within the inner ball
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < ball.sphere_end(limit); ++i) {
    auto j = ball.find(G.multiply(ball.element(i), hn));
    if (j && ball.length(*j) <= limit) pairs.emplace_back(i, *j);
  }
  const std::size_t fam_end = ball.sphere_end(std::min(family_radius, ball.radius()));
  for (std::size_t wi = 0; wi < fam_end; ++wi) {
    auto g = cache.forward_group(ball.element(wi), r);
    for (auto [i, j] : pairs) {
      auto pi = static_cast<std::size_t>(op.position(i)), pj = static_cast<std::size_t>(op.position(j));
      double num = 0, den = std::numeric_limits<double>::infinity();
      for (std::size_t x = 0; x < W; ++x) {
        num = std::max(num, g->values[op.state(x, pi)]);
        den = std::min(den, g->values[op.state(x, pj)]);
      }
      if (num <= 0) continue;
      ++rep.samples;
      rep.K_hat = std::max(rep.K_hat, den > 0 ? num / den : std::numeric_limits<double>::infinity());
    }
  }
  // steps until every (x, id) receives mass from Sigma x {h}
  auto f = op.indicator_group(hn);
  std::vector<double> next(f.size());
  rep.N_hat = -1;
  const int cap = 4 * ball.radius() + 10;
  for (int k = 0; k <= cap; ++k) {
    bool all = true;
    for (std::size_t x = 0; x < W && all; ++x) all = f[op.state(x, 0)] > 0;
    if (all) {
      rep.N_hat = k;
      break;
    }
    op.apply(f, next);
    f.swap(next);
  }
  return rep;
}

ReversibilityReport reversibility_check(GreenCache& cache, double r, int radius) {
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  if (radius > ball.radius()) throw PreconditionError("radius exceeds the ball");
  ReversibilityReport rep;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  rep.max_ratio = 0;
  auto fwd = cache.forward_group({}, r);
  const std::size_t W = op.word_count();
  for (std::size_t x = 0; x < W; ++x) {
    auto adj = cache.adjoint_state(op.state(x, 0), r);
    for (std::size_t i = 0; i < ball.sphere_end(radius); ++i) {
      auto p = static_cast<std::size_t>(op.position(i));
      double to_id = 0;
      for (std::size_t y = 0; y < W; ++y) to_id += adj->values[op.state(y, p)];
      double from_id = fwd->values[op.state(x, p)];
      if (from_id <= 0 || to_id <= 0) continue;
      double q = to_id / from_id;
      rep.min_ratio = std::min(rep.min_ratio, q);
      rep.max_ratio = std::max(rep.max_ratio, q);
      ++rep.samples;
    }
  }
  return rep;
}

ErhoWitness erho_witness(GreenCache& cache, const RhoEstimate& rho) {
  const TruncatedOperator& op = cache.op();
  ErhoWitness w;
  std::vector<double> Lh(op.size());
  if (rho.estimate >= 1 - 1e-9) {
    w.constant = true;
    w.rho = 1;
    w.h = op.ones();
  } else {
    if (!(rho.R_hat > 0)) throw PreconditionError("E_rho witness unavailable");
    w.rho = 1 / rho.R_hat;
    w.h = cache.forward_group({}, rho.R_hat)->values;
  }
  op.apply(w.h, Lh);
  w.violation = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < op.size(); ++s) {
    if (!op.interior(s)) continue;
    if (!(w.h[s] > 0)) {
      w.positive = false;
      continue;
    }
    w.violation = std::max(w.violation, (Lh[s] - w.rho * w.h[s]) / w.h[s]);
  }
  if (!std::isfinite(w.violation)) w.violation = 0;
  return w;
}

TransitivityReport transitivity_report(const TruncatedOperator& op) {
  const std::size_t N = op.size();
  constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(N, unvisited), low(N, 0);
  std::vector<char> on_stack(N, 0);
  std::vector<std::size_t> stack;
  struct Frame {
    std::size_t v;
    std::vector<std::pair<std::size_t, double>> edges;
    std::size_t next;
  };
  std::vector<Frame> call;
  std::size_t counter = 0;
  TransitivityReport rep;
  for (std::size_t root = 0; root < N; ++root) {
    if (index[root] != unvisited) continue;
    call.push_back({root, op.row(root), 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& fr = call.back();
      if (fr.next < fr.edges.size()) {
        std::size_t u = fr.edges[fr.next++].first;
        if (index[u] == unvisited) {
          index[u] = low[u] = counter++;
          stack.push_back(u);
          on_stack[u] = 1;
          call.push_back({u, op.row(u), 0});
        } else if (on_stack[u]) {
          low[fr.v] = std::min(low[fr.v], index[u]);
        }
        continue;
      }
      std::size_t v = fr.v;
      if (low[v] == index[v]) {
        std::size_t size = 0;
        for (;;) {
          std::size_t u = stack.back();
          stack.pop_back();
          on_stack[u] = 0;
          ++size;
          if (u == v) break;
        }
        ++rep.components;
        rep.largest = std::max(rep.largest, size);
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  rep.core_fraction = N ? static_cast<double>(rep.largest) / static_cast<double>(N) : 0.0;
  return rep;
}

}  // namespace martinbench
