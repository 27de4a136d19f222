#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "martinbench/error.hpp"
#include "martinbench/lab.hpp"
#include "martinbench/martin.hpp"

namespace martinbench {

namespace {

template <class T>
T param(const Json& p, const char* key, T fallback) {
  if (!p.contains(key)) return fallback;
  try {
    return p.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("scans[" + p.value("kind", std::string("?")) + "]." + key + ": " + e.what());
  }
}

Word word_param(const Lab& lab, const Json& p, const char* key, const std::string& fallback) {
  std::string text = param<std::string>(p, key, fallback);
  try {
    return lab.system().group.parse(text);
  } catch (const Error& e) {
    throw ConfigError(std::string("scans[].") + key + ": " + e.what());
  }
}

std::vector<double> r_values(Lab& lab, const Json& p, const Json& fallback) {
  if (p.contains("r_grid")) return lab.resolve_grid(p.at("r_grid"));
  if (p.contains("r")) return {lab.resolve_r(p.at("r"))};
  return lab.resolve_grid(fallback);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mass_at(const TruncatedOperator& op, std::span<const double> m, std::size_t ball_index) {
  std::int64_t p = op.position(ball_index);
  if (p < 0) return 0;
  double s = 0;
  for (std::size_t w = 0; w < op.word_count(); ++w) s += m[op.state(w, static_cast<std::size_t>(p))];
  return s;
}

// Vertices of up to `limit` geodesics between two ball elements.
std::vector<std::size_t> geodesic_vertices(const Ball& ball, std::size_t from, std::size_t to,
                                           std::size_t limit) {
  std::set<std::size_t> verts{from};
  for (const Word& path : geodesics(ball, ball.element(from), ball.element(to), limit)) {
    std::size_t cur = from;
    for (Letter l : path) {
      cur = static_cast<std::size_t>(ball.neighbor(cur, l));
      verts.insert(cur);
    }
  }
  return {verts.begin(), verts.end()};
}

// Ball indices within `radius` steps of the seeds; false if the neighbourhood leaves the ball.
bool neighbourhood(const Ball& ball, std::vector<std::size_t> seeds, int radius,
                   std::vector<std::size_t>& out) {
  std::set<std::size_t> seen(seeds.begin(), seeds.end());
  std::vector<std::size_t> frontier(seeds.begin(), seeds.end());
  const int L = ball.model().letter_count();
  bool inside = true;
  for (int step = 0; step < radius; ++step) {
    std::vector<std::size_t> next;
    for (std::size_t v : frontier)
      for (int l = 0; l < L; ++l) {
        std::int32_t nb = ball.neighbor(v, static_cast<Letter>(l));
        if (nb < 0) {
          inside = false;
          continue;
        }
        if (seen.insert(static_cast<std::size_t>(nb)).second) next.push_back(static_cast<std::size_t>(nb));
      }
    frontier.swap(next);
  }
  out.assign(seen.begin(), seen.end());
  return inside;
}

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
  bool ok = false;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  const std::size_t n = x.size();
  if (n < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.ok = true;
  return f;
}

Json ray_json(const GroupModel& G, const BoundaryRay& ray) { return ray.describe(G); }

BoundaryRay ray_param(const Lab& lab, const Json& p, const char* key) {
  const GroupModel& G = lab.system().group;
  Json r = p.contains(key) ? p.at(key) : Json::object();
  try {
    Word prefix = G.parse_raw(r.value("prefix", std::string("1")));
    Word period = G.parse_raw(r.value("period", std::string(1, G.letter_name(0))));
    return BoundaryRay(G, prefix, period);
  } catch (const Error& e) {
    throw ConfigError(std::string("scans[].") + key + ": " + e.what());
  }
}

}  // namespace

std::optional<double> ancona_ratio(const TranslatedKernel& k, std::size_t x, std::span<const Letter> u,
                                   std::span<const Letter> v) {
  const TruncatedOperator& op = k.op();
  const GroupModel& G = op.system().group;
  const Ball& ball = op.ball();
  auto ui = ball.find(u), vi = ball.find(v), wi = ball.find(G.multiply(G.inverse(v), u));
  if (!ui || !vi || !wi) return std::nullopt;
  const std::size_t W = op.word_count();
  double num = 0, den = 0;
  for (std::size_t y = 0; y < W; ++y) {
    num += k.at(x, y, *ui);
    double through = 0;
    for (std::size_t y2 = 0; y2 < W; ++y2) through += k.at(y, y2, *vi);
    den += k.at(x, y, *wi) * through;
  }
  if (!(den > 0)) return std::nullopt;
  return num / den;
}

Json ancona_scan(Lab& lab, const Json& p) {
  const int radius = param<int>(p, "radius", lab.config().radius);
  const int margin = param<int>(p, "margin", 4);
  const int max_length = param<int>(p, "max_length", 7);
  const int D = param<int>(p, "D", 0);
  const auto cap = param<std::size_t>(p, "cap", 10000);
  const int inner = radius - margin;
  if (inner < 0 || D < 0 || max_length < 0) throw ConfigError("scans[ancona]: radius, margin, D or max_length out of range");
  auto rs = r_values(lab, p, lab.config().r_grid);
  GreenCache& cache = lab.cache(radius);
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  const GroupModel& G = op.system().group;
  const int u_max = std::min(2 * max_length, inner);

  for (int L = inner + 1; L <= 2 * max_length; ++L) {
    Json rec{{"kind", "skip"}, {"u_length", L}, {"reason", "ball margin"}};
    if (L <= radius) rec["skipped"] = ball.sphere_end(L) - ball.sphere_begin(L);
    lab.emit("ancona", rec);
  }

  struct Cand {
    std::size_t u, v, vu;
  };
  std::vector<Cand> cands;
  std::size_t skipped_v = 0;
  for (std::size_t ui = 0; ui < ball.sphere_end(u_max); ++ui) {
    auto verts = geodesic_vertices(ball, 0, ui, 16);
    if (D > 0) neighbourhood(ball, verts, D, verts);
    for (std::size_t vi : verts) {
      auto vu = ball.find(G.multiply(G.inverse(ball.element(vi)), ball.element(ui)));
      if (ball.length(vi) > inner || !vu || ball.length(*vu) > inner) {
        ++skipped_v;
        continue;
      }
      cands.push_back({ui, vi, *vu});
    }
  }
  if (skipped_v > 0) {
    lab.emit("ancona", Json{{"kind", "skip"}, {"reason", "z neighbourhood beyond margin"}, {"skipped", skipped_v}});
  }
  auto chosen = stratified_sample(cands.size(), cap, lab.config().seed, [&](std::size_t i) {
    return ball.length(cands[i].u) * 1000 + ball.length(cands[i].v);
  });

  Json per_r = Json::array();
  const std::size_t W = op.word_count();
  for (double r : rs) {
    TranslatedKernel K(cache, r);
    double cmax = 0, cmin = std::numeric_limits<double>::infinity();
    for (std::size_t ci : chosen) {
      const Cand& c = cands[ci];
      double hi = 0, lo = std::numeric_limits<double>::infinity();
      for (std::size_t x = 0; x < W; ++x) {
        double num = 0, den = 0;
        for (std::size_t y = 0; y < W; ++y) {
          num += K.at(x, y, c.u);
          double through = 0;
          for (std::size_t y2 = 0; y2 < W; ++y2) through += K.at(y, y2, c.v);
          den += K.at(x, y, c.vu) * through;
        }
        double q = den > 0 ? num / den : std::numeric_limits<double>::infinity();
        hi = std::max(hi, q);
        lo = std::min(lo, q);
      }
      cmax = std::max(cmax, hi);
      cmin = std::min(cmin, lo);
      lab.emit("ancona", Json{{"u", G.format(ball.element(c.u))},
                              {"z", G.format(ball.element(c.v))},
                              {"r", r},
                              {"ratio_max", hi},
                              {"ratio_min", lo},
                              {"err", K.error()}});
    }
    lab.assert_that("ancona", "C_max finite at r=" + num(r), std::isfinite(cmax) && cmax > 0);
    lab.add_csv_row("ancona_c.csv", "radius,r,C_max", std::to_string(radius) + "," + num(r) + "," + num(cmax));
    per_r.push_back(Json{{"r", r}, {"C_max", cmax}, {"ratio_min", cmin}, {"kernel_error", K.error()}});
  }
  Json out{{"radius", radius}, {"margin", margin}, {"D", D}, {"candidates", cands.size()},
           {"sampled", chosen.size()}, {"skipped_z", skipped_v}, {"per_r", per_r}};
  lab.fitted["C_max"]["ball" + std::to_string(radius)] = per_r;
  return out;
}

Json relative_ancona_scan(Lab& lab, const Json& p) {
  const int radius = param<int>(p, "radius", lab.config().radius);
  const int M = param<int>(p, "M", 2);
  const int max_length = param<int>(p, "max_length", 3);
  const auto cap = param<std::size_t>(p, "cap", 200);
  const std::string omega_mode = param<std::string>(p, "omega", "hull");
  if (omega_mode != "hull" && omega_mode != "full") throw ConfigError("scans[relative_ancona].omega: expected hull or full");
  auto rs = r_values(lab, p, Json::array({1.0}));
  GreenCache& cache = lab.cache(radius);
  const TruncatedOperator& full = cache.op();
  auto ball_ptr = full.ball_ptr();
  const Ball& ball = *ball_ptr;
  const GroupModel& G = full.system().group;
  if (max_length > radius) throw ConfigError("scans[relative_ancona].max_length exceeds the ball");

  struct Triple {
    std::size_t g, z, h;
  };
  std::vector<Triple> triples;
  const std::size_t end = ball.sphere_end(max_length);
  for (std::size_t g = 0; g < end; ++g)
    for (std::size_t h = 0; h < end; ++h) {
      if (g == h) continue;
      for (std::size_t z : geodesic_vertices(ball, g, h, 4)) triples.push_back({g, z, h});
    }
  auto chosen = stratified_sample(triples.size(), cap, lab.config().seed,
                                  [&](std::size_t i) { return ball.distance(triples[i].g, triples[i].h); });
  const std::size_t W = full.word_count();
  double cmax = 0;
  std::size_t lower_violations = 0, skipped = 0, evaluated = 0;
  for (std::size_t ti : chosen) {
    const Triple& t = triples[ti];
    std::shared_ptr<const TruncatedOperator> op;
    if (omega_mode == "full") {
      op = cache.op_ptr();
    } else {
      std::vector<std::size_t> hull = geodesic_vertices(ball, t.g, t.h, 16), omega;
      if (!neighbourhood(ball, hull, M, omega)) {
        ++skipped;
        lab.emit("relative_ancona", Json{{"kind", "skip"},
                                         {"g", G.format(ball.element(t.g))},
                                         {"z", G.format(ball.element(t.z))},
                                         {"h", G.format(ball.element(t.h))},
                                         {"reason", "Omega too small for the M-neighbourhood"}});
        continue;
      }
      std::vector<std::uint32_t> om(omega.begin(), omega.end());
      op = std::make_shared<TruncatedOperator>(lab.system(), full.depth(), ball_ptr, om);
    }
    const auto pg = static_cast<std::size_t>(op->position(t.g));
    for (double r : rs) {
      auto gh = green_apply(*op, op->indicator_group(ball.element(t.h)), r, 1e-13);
      auto f = op->indicator_group(ball.element(t.z));
      for (std::size_t i = 0; i < f.size(); ++i) f[i] *= gh.values[i];
      auto outer = green_apply(*op, f, r, 1e-13);
      auto gz = green_apply(*op, op->indicator_state(op->state(0, static_cast<std::size_t>(op->position(t.z)))), r, 1e-13);
      double hi = 0, lo = std::numeric_limits<double>::infinity();
      bool lower_ok = true;
      for (std::size_t x = 0; x < W; ++x) {
        double a = gh.values[op->state(x, pg)], b = outer.values[op->state(x, pg)];
        if (!(b > 0)) continue;
        hi = std::max(hi, a / b);
        lo = std::min(lo, a / b);
        if (b > a * (1 + 1e-9)) lower_ok = false;
      }
      if (!lower_ok) ++lower_violations;
      cmax = std::max(cmax, hi);
      ++evaluated;
      double gzz = 0;
      for (std::size_t y = 0; y < W; ++y) gzz = std::max(gzz, gz.values[op->state(y, static_cast<std::size_t>(op->position(t.z)))]);
      lab.emit("relative_ancona", Json{{"g", G.format(ball.element(t.g))},
                                       {"z", G.format(ball.element(t.z))},
                                       {"h", G.format(ball.element(t.h))},
                                       {"r", r},
                                       {"omega_size", op->omega_size()},
                                       {"ratio_max", hi},
                                       {"ratio_min", lo},
                                       {"lower_bound_holds", lower_ok},
                                       {"return_weight", gzz}});
    }
  }
  return Json{{"radius", radius},       {"M", M},
              {"omega", omega_mode},    {"triples", triples.size()},
              {"sampled", chosen.size()}, {"evaluated", evaluated},
              {"skipped", skipped},     {"C_max", cmax},
              {"lower_bound_violations", lower_violations}};
}

Json gl_scan(Lab& lab, const Json& p) {
  const ExtensionSystem& sys = lab.system();
  const GroupModel& G = sys.group;
  const int radius = param<int>(p, "radius", lab.config().radius);
  const int depth = param<int>(p, "depth", lab.config().depth);
  const int n_min = param<int>(p, "n_min", 2), n_max = param<int>(p, "n_max", 6);
  const int tail = param<int>(p, "tail", 1);
  Word g = word_param(lab, p, "g", std::string(1, G.letter_name(0)));
  if (g.empty()) throw ConfigError("scans[gl].g: must not be the identity");
  Word g2;
  if (p.contains("g2")) {
    g2 = word_param(lab, p, "g2", "");
  } else {
    for (int l = 0; l < G.letter_count() && g2.empty(); ++l) {
      Word cand = g;
      cand.push_back(static_cast<Letter>(l));
      cand = G.normalize(cand);
      if (G.length(cand) == G.length(g) + 1 && cand[0] == g[0]) g2 = cand;
    }
  }
  if (g2.empty() || g2[0] != g[0]) throw ConfigError("scans[gl].g2: must lie in the branch of g");
  if (n_max + tail > radius || n_min < 1 || tail < 1) throw ConfigError("scans[gl]: n range and tail exceed the ball");
  auto rs = r_values(lab, p, Json::array({1.0}));
  GreenCache& cache = lab.cache(radius, depth);
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  const std::size_t W = op.word_count();
  const auto x = param<std::size_t>(p, "x", 0), y = param<std::size_t>(p, "y", W - 1);
  if (x >= W || y >= W) throw ConfigError("scans[gl]: base word index out of range");
  const Letter c = g[0];
  const double solve_tol = param<double>(p, "tol", 1e-15);

  Json per_r = Json::array();
  for (double r : rs) {
    // The double ratios reach 1e-9 and below, so the solves need more digits than the cache keeps.
    auto ma = std::make_shared<GreenResult>(
        green_adjoint(op, op.indicator_state(op.state(x, *op.position_of(g))), r, solve_tol));
    auto mb = std::make_shared<GreenResult>(
        green_adjoint(op, op.indicator_state(op.state(y, *op.position_of(g2))), r, solve_tol));
    // Q is a statement about the truncated system here, so only the series error counts.
    const double ea = ma->cert.series_tail * static_cast<double>(W);
    const double eb = mb->cert.series_tail * static_cast<double>(W);
    std::vector<double> ns, logs;
    Json maxima = Json::array();
    double overall = 0;
    std::size_t inconclusive = 0, count = 0;
    for (int n = n_min; n <= n_max; ++n) {
      double qmax = 0;
      for (std::size_t wi = ball.sphere_begin(n); wi < ball.sphere_end(n); ++wi) {
        auto w = ball.element(wi);
        if (w[0] == c) continue;
        std::vector<std::pair<std::size_t, std::size_t>> ext;  // (tail index, h index)
        for (std::size_t vi = ball.sphere_begin(tail); vi < ball.sphere_end(tail); ++vi) {
          Word h = G.multiply(w, ball.element(vi));
          auto hi = ball.find(h);
          if (hi && ball.length(*hi) == n + tail) ext.emplace_back(vi, *hi);
        }
        for (std::size_t i = 0; i < ext.size(); ++i)
          for (std::size_t j = i + 1; j < ext.size(); ++j) {
            if (ball.element(ext[i].first)[0] == ball.element(ext[j].first)[0]) continue;
            double A = mass_at(op, ma->values, ext[i].second), B = mass_at(op, mb->values, ext[i].second);
            double C = mass_at(op, ma->values, ext[j].second), D = mass_at(op, mb->values, ext[j].second);
            double q = std::abs((A / B) / (C / D) - 1);
            double rel = ea / A + eb / B + ea / C + eb / D;
            bool inc = q <= (1 + q) * rel;
            inconclusive += inc;
            ++count;
            qmax = std::max(qmax, q);
            lab.emit("gl", Json{{"n", n},
                                {"w", G.format(w)},
                                {"v1", G.format(ball.element(ext[i].first))},
                                {"v2", G.format(ball.element(ext[j].first))},
                                {"r", r},
                                {"value", q},
                                {"err", (1 + q) * rel},
                                {"inconclusive", inc}});
          }
      }
      maxima.push_back(Json{{"n", n}, {"max", qmax}});
      overall = std::max(overall, qmax);
      if (qmax > 1e-12) {
        ns.push_back(n);
        logs.push_back(std::log(qmax));
      }
    }
    Json s{{"r", r}, {"maxima", maxima}, {"max_value", overall}, {"quadruples", count},
           {"inconclusive", inconclusive}, {"exact_tree", overall <= 1e-10}};
    LineFit f = fit_line(ns, logs);
    if (f.ok && ns.size() >= 3) {
      s["lambda_gl"] = std::exp(f.slope);
      s["C"] = std::exp(f.intercept);
      s["r_squared"] = f.r2;
      lab.assert_that("gl", "lambda_GL < 1 at r=" + num(r), std::exp(f.slope) < 1);
      if (!lab.fitted.contains("lambda_gl")) lab.fitted["lambda_gl"] = std::exp(f.slope);
    }
    per_r.push_back(s);
  }
  return Json{{"radius", radius}, {"depth", depth}, {"g", G.format(g)}, {"g2", G.format(g2)},
              {"per_r", per_r}};
}

Json superexp_decay_scan(Lab& lab, const Json& p) {
  const ExtensionSystem& sys = lab.system();
  const GroupModel& G = sys.group;
  const int radius = param<int>(p, "radius", lab.config().radius);
  const int n_min = param<int>(p, "n_min", 2), n_max = param<int>(p, "n_max", 5);
  std::string a(1, G.letter_name(0)), A(1, G.letter_name(G.inverse_letter(0)));
  std::string gdef, hdef;
  for (int i = 0; i <= n_max; ++i) {
    gdef += A;
    hdef += a;
  }
  Word g = word_param(lab, p, "g", gdef), h = word_param(lab, p, "h", hdef);
  if (G.length(g) <= n_max || G.length(h) <= n_max || G.distance(g, h) != G.length(g) + G.length(h)) {
    throw ConfigError("scans[superexp]: need g, id, h on a geodesic with |g|, |h| > n_max");
  }
  const double r = lab.resolve_r(p.value("r", Json("R")));
  const auto x = param<std::size_t>(p, "x", 0);
  auto ball = lab.cache(radius).op().ball_ptr();
  if (!ball->find(g) || !ball->find(h)) throw ConfigError("scans[superexp]: g or h outside the ball");
  std::vector<double> ns, ll;
  bool increasing = true, all_defined = true;
  double prev = -std::numeric_limits<double>::infinity();
  for (int n = n_min; n <= n_max; ++n) {
    std::vector<std::uint32_t> omega;
    for (std::size_t i = 0; i < ball->size(); ++i)
      if (ball->length(i) > n) omega.push_back(static_cast<std::uint32_t>(i));
    TruncatedOperator op(sys, lab.config().depth, ball, omega);
    auto res = green_apply(op, op.indicator_group(h), r, 1e-12);
    double v = res.values[op.state(x, *op.position_of(g))];
    Json rec{{"n", n}, {"r", r}, {"err", res.error()}};
    if (v > 1e-300 && v < 1) {
      double q = std::log2(-std::log2(v));
      rec["value"] = v;
      rec["loglog"] = q;
      ns.push_back(n);
      ll.push_back(q);
      if (!(q > prev)) increasing = false;
      prev = q;
    } else {
      rec["value"] = v <= 1e-300 ? Json("< floor") : Json(v);
      all_defined = false;
    }
    lab.emit("superexp", rec);
  }
  lab.assert_that("superexp", "log2(-log2 value) strictly increasing", all_defined && increasing,
                  all_defined ? "" : "values below the floating floor or >= 1");
  Json out{{"radius", radius}, {"r", r}, {"defined", ns.size()}, {"increasing", all_defined && increasing}};
  LineFit f = fit_line(ns, ll);
  if (f.ok) out["slope"] = f.slope;
  return out;
}

Json sphere_hr_scan(Lab& lab, const Json& p) {
  const int radius = param<int>(p, "radius", lab.config().radius);
  const int margin = param<int>(p, "margin", 2);
  const int k_max = param<int>(p, "k_max", std::min(6, radius - margin));
  if (k_max < 0 || k_max > radius) throw ConfigError("scans[sphere_hr].k_max out of range");
  const double r = lab.resolve_r(p.value("r", Json("R")));
  const auto x = param<std::size_t>(p, "x", 0);
  GreenCache& cache = lab.cache(radius);
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  auto inner = cache.forward_group({}, r);
  std::vector<double> ks, logs;
  Json sums = Json::array();
  for (int k = 0; k <= k_max; ++k) {
    std::vector<double> f(op.size(), 0.0);
    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t i = ball.sphere_begin(k); i < ball.sphere_end(k); ++i) {
      auto pos = static_cast<std::size_t>(op.position(i));
      for (std::size_t w = 0; w < op.word_count(); ++w) {
        std::size_t s = op.state(w, pos);
        f[s] = inner->values[s];
        floor = std::min(floor, inner->values[s]);
      }
    }
    auto outer = green_apply(op, f, r, cache.tol());
    double sup = 0;
    for (double v : outer.values) sup = std::max(sup, std::abs(v));
    double err = outer.error() + (floor > 0 ? inner->error() * sup / floor : 0.0);
    double v = outer.values[op.state(x, 0)];
    lab.emit("sphere_hr", Json{{"k", k}, {"r", r}, {"value", v}, {"err", err}});
    sums.push_back(v);
    if (k >= 1 && v > 0) {
      ks.push_back(k);
      logs.push_back(std::log(v));
    }
  }
  LineFit f = fit_line(ks, logs);
  bool bounded = !f.ok || f.slope <= 0.05;
  lab.assert_that("sphere_hr", "no growth trend in k", bounded);
  Json out{{"radius", radius}, {"r", r}, {"sums", sums}, {"bounded", bounded}};
  if (f.ok) out["log_slope"] = f.slope;
  return out;
}

Json decay_scan(Lab& lab, const Json& p) {
  const int radius = param<int>(p, "radius", lab.config().radius);
  Word g = word_param(lab, p, "g", "1");
  const int max_n = param<int>(p, "max_n", std::max(1, radius - 4 - lab.system().group.length(g)));
  auto rs = r_values(lab, p, lab.config().r_grid);
  GreenCache& cache = lab.cache(radius);
  Json per_r = Json::array();
  for (double r : rs) {
    DecayScan d = green_decay_scan(cache, g, r, max_n);
    for (int n = 0; n <= max_n; ++n) {
      auto i = static_cast<std::size_t>(n);
      Json rec{{"n", n}, {"r", r}, {"max", d.maxima[i]}, {"err", d.error}};
      if (n > 0) rec["root"] = d.roots[i];
      lab.emit("decay", rec);
      if (n > 0) lab.add_csv_row("decay.csv", "r,n,max,root", num(r) + "," + std::to_string(n) + "," + num(d.maxima[i]) + "," + num(d.roots[i]));
    }
    double last = d.roots.back();
    lab.assert_that("decay", "root below one at r=" + num(r), last < 1);
    per_r.push_back(Json{{"r", r}, {"root", last}, {"max_n", max_n}});
  }
  return Json{{"radius", radius}, {"per_r", per_r}};
}

Json rho_scan(Lab& lab, const Json& p) {
  const RhoEstimate* est = nullptr;
  RhoEstimate local;
  if (p.contains("radius") || p.contains("depth")) {
    local = rho_estimate(lab.system(), param<int>(p, "depth", lab.config().depth),
                         param<int>(p, "radius", lab.config().radius));
    est = &local;
  } else {
    est = &lab.rho();
  }
  bool monotone = true;
  for (std::size_t i = 0; i < est->radii.size(); ++i) {
    lab.emit("rho", Json{{"n", est->radii[i]},
                         {"lower", est->lower[i]},
                         {"truncated", est->truncated[i]},
                         {"extrapolated", est->extrapolated[i]}});
    if (i > 0 && est->lower[i] < est->lower[i - 1] * (1 - 1e-12)) monotone = false;
  }
  lab.assert_that("rho", "truncated roots nondecreasing in radius", monotone);
  lab.fitted["rho_hat"] = est->estimate;
  Json out{{"estimate", est->estimate}, {"R_hat", est->R_hat}, {"R_certified", est->R_certified},
           {"monotone", monotone}};
  if (est->has_upper) out["upper"] = est->upper;
  return out;
}

Json green_scan(Lab& lab, const Json& p) {
  const GroupModel& G = lab.system().group;
  const int radius = param<int>(p, "radius", lab.config().radius);
  Word f = word_param(lab, p, "f", "1"), at = word_param(lab, p, "at", "1");
  const auto x = param<std::size_t>(p, "x", 0);
  const bool extrapolate = param<bool>(p, "extrapolate", false);
  auto rs = r_values(lab, p, lab.config().r_grid);
  GreenCache& cache = lab.cache(radius);
  const TruncatedOperator& op = cache.op();
  auto pos = op.position_of(at);
  if (!pos) throw ConfigError("scans[green].at: outside the ball");
  Json per_r = Json::array();
  for (double r : rs) {
    auto g = cache.forward_group(f, r);
    double v = g->values[op.state(x, *pos)];
    Json rec{{"f", G.format(f)}, {"at", G.format(at)}, {"r", r}, {"value", v},
             {"series_tail", g->cert.series_tail}, {"exit_bound", g->cert.exit_bound},
             {"iterations", g->cert.iterations}, {"accelerated", g->cert.accelerated}};
    if (extrapolate && f.empty() && at.empty()) {
      bool critical = param<bool>(p, "critical", r >= lab.R_hat() * (1 - 1e-9));
      GreenLimit lim = green_limit(lab.system(), op.depth(), radius, r, critical);
      rec["limit"] = lim.estimate;
      rec["limit_model"] = lim.model;
      rec["limit_values"] = lim.values;
    }
    lab.emit("green", rec);
    per_r.push_back(rec);
  }
  return Json{{"radius", radius}, {"per_r", per_r}};
}

Json kernel_scan(Lab& lab, const Json& p) {
  const GroupModel& G = lab.system().group;
  const int radius = param<int>(p, "radius", lab.config().radius);
  BoundaryRay ray = ray_param(lab, p, "ray");
  std::vector<Word> hs;
  if (p.contains("h")) {
    for (const auto& t : param<std::vector<std::string>>(p, "h", {})) hs.push_back(G.parse(t));
  } else {
    for (int l = 0; l < G.letter_count(); ++l) hs.push_back(G.normalize(Word{static_cast<Letter>(l)}));
  }
  int hmax = 0;
  for (const auto& h : hs) hmax = std::max(hmax, G.length(h));
  std::vector<int> depths;
  if (p.contains("depths")) {
    depths = param<std::vector<int>>(p, "depths", {});
  } else {
    for (int d = 1; d + hmax + 2 <= radius; ++d) depths.push_back(d);
  }
  auto rs = r_values(lab, p, lab.config().r_grid);
  GreenCache& cache = lab.cache(radius);
  Json out = Json::array();
  for (double r : rs)
    for (const auto& h : hs) {
      RayKernelReport rep = kernel_along_ray(cache, h, ray, depths, r);
      for (std::size_t i = 0; i < rep.depths.size(); ++i)
        lab.emit("kernel", Json{{"h", G.format(h)},
                                {"ray", ray_json(G, ray)},
                                {"depth", rep.depths[i]},
                                {"r", r},
                                {"value", rep.values[i]},
                                {"err", rep.errors[i]}});
      out.push_back(Json{{"h", G.format(h)}, {"r", r}, {"last", rep.values.empty() ? 0.0 : rep.values.back()},
                         {"cauchy_gap", rep.cauchy_gap}, {"decay_rate", rep.decay_rate}});
    }
  return Json{{"radius", radius}, {"ray", ray_json(G, ray)}, {"kernels", out}};
}

Json boundary_measure_scan(Lab& lab, const Json& p) {
  const GroupModel& G = lab.system().group;
  const int radius = param<int>(p, "radius", lab.config().radius);
  BoundaryRay ray = ray_param(lab, p, "ray");
  const int test_radius = param<int>(p, "test_radius", 3);
  auto depths = param<std::vector<int>>(p, "depths", {std::max(1, radius - 4), radius - 2});
  const double tol = param<double>(p, "conformality_tol", 1e-3);
  auto rs = r_values(lab, p, Json::array({1.0}));
  GreenCache& cache = lab.cache(radius);
  const TruncatedOperator& op = cache.op();
  Json per_r = Json::array();
  for (double r : rs) {
    auto est = boundary_measure(cache, ray, r, depths, test_radius);
    for (std::size_t d = 0; d < est.depths.size(); ++d)
      for (std::size_t t = 0; t < est.test_ball.size(); ++t)
        lab.emit("boundary_measure", Json{{"ray", ray_json(G, ray)},
                                          {"depth", est.depths[d]},
                                          {"h", G.format(op.ball().element(est.test_ball[t]))},
                                          {"r", r},
                                          {"value", est.group_values[d][t]},
                                          {"err", est.error}});
    double residual = conformality_residual(op, est);
    // counting measure on the test ball: far from conformal, so the residual must be large
    std::vector<double> control_measure(op.size(), 0.0);
    for (std::size_t s = 0; s < op.size(); ++s)
      if (op.group_length(s) <= test_radius) control_measure[s] = 1;
    double control = conformality_residual(op, control_measure, r, test_radius);
    lab.assert_that("boundary_measure", "conformality residual below tolerance at r=" + num(r), residual < tol);
    per_r.push_back(Json{{"r", r}, {"residual", residual}, {"control_residual", control},
                         {"converged", est.converged}, {"gaps", est.gaps}});
  }
  return Json{{"radius", radius}, {"ray", ray_json(G, ray)}, {"per_r", per_r}};
}

Json holder_scan(Lab& lab, const Json& p) {
  const GroupModel& G = lab.system().group;
  if (!G.exact_metric()) throw ConfigError("scans[holder]: needs a free or free-product model");
  const int radius = param<int>(p, "radius", lab.config().radius);
  const int depth = param<int>(p, "depth", radius - 2);
  const int coef_radius = param<int>(p, "coef_radius", radius - 2);
  const int k_max = param<int>(p, "k_max", 4);
  const auto per_k = param<std::size_t>(p, "pairs_per_k", 5);
  double lambda = param<double>(p, "lambda_gl", lab.fitted.value("lambda_gl", 0.5));
  const double lambda_visual = param<double>(p, "lambda_visual", std::exp(-1.0));
  const double eps = param<double>(p, "eps", 0.1);
  const double r = lab.resolve_r(p.value("r", Json(1.0)));
  GreenCache& cache = lab.cache(radius);
  const Ball& ball = cache.op().ball();
  const double growth = param<double>(p, "growth", growth_rate(ball).estimate);
  if (k_max + 2 > depth || depth + 1 > radius) throw ConfigError("scans[holder]: depth budget too small");
  CoefficientScheme scheme = coefficients(cache, lambda, r, coef_radius);

  std::vector<std::pair<BoundaryRay, BoundaryRay>> rays;
  std::vector<int> ks;
  for (int k = 0; k <= k_max; ++k) {
    std::vector<std::pair<BoundaryRay, BoundaryRay>> level;
    for (std::size_t wi = ball.sphere_begin(k); wi < ball.sphere_end(k); ++wi) {
      Word w = ball.word(wi);
      for (int c1 = 0; c1 < G.letter_count(); ++c1)
        for (int c2 = c1 + 1; c2 < G.letter_count(); ++c2) {
          try {
            Word p1 = w, p2 = w;
            p1.push_back(static_cast<Letter>(c1));
            p2.push_back(static_cast<Letter>(c2));
            BoundaryRay a(G, p1, {static_cast<Letter>(c1)}), b(G, p2, {static_cast<Letter>(c2)});
            level.emplace_back(a, b);
          } catch (const PreconditionError&) {
          }
        }
    }
    for (std::size_t i = 0; i < per_k && !level.empty(); ++i) {
      std::size_t idx = level.size() <= per_k ? i : i * (level.size() - 1) / (per_k - 1);
      if (idx >= level.size()) break;
      rays.push_back(level[idx]);
      ks.push_back(k);
    }
  }
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    auto vis = visual_r(G, rays[i].first, rays[i].second, depth, lambda_visual);
    auto dm = martin_distance_along_rays(cache, rays[i].first, rays[i].second, r, scheme, {depth});
    double d = dm.values.back();
    pairs.emplace_back(vis.value, d);
    lab.emit("holder", Json{{"k", ks[i]},
                            {"ray1", ray_json(G, rays[i].first)},
                            {"ray2", ray_json(G, rays[i].second)},
                            {"d_visual", vis.value},
                            {"d_martin", d},
                            {"tail", dm.tails.back()}});
    lab.add_csv_row("holder.csv", "d_visual,d_martin", num(vis.value) + "," + num(d));
  }
  HolderFit fit = holder_fit(pairs, lambda, lambda_visual, growth, eps);
  lab.assert_that("holder", "slope within [alpha, beta]", fit.within,
                  "slope " + num(fit.slope) + " alpha " + num(fit.alpha) + " beta " + num(fit.beta));
  lab.assert_that("holder", "fit R^2 >= 0.9", fit.r_squared >= 0.9);
  lab.fitted["holder_slope"] = fit.slope;
  lab.fitted["growth"] = growth;
  return Json{{"radius", radius},     {"depth", depth},
              {"pairs", pairs.size()}, {"lambda_gl", lambda},
              {"lambda_visual", lambda_visual}, {"growth", growth},
              {"eps", eps},           {"slope", fit.slope},
              {"slope_error", fit.slope_error}, {"r_squared", fit.r_squared},
              {"alpha", fit.alpha},   {"beta", fit.beta},
              {"within", fit.within}, {"within_error", fit.within_error}};
}

Json diagnostics_scan(Lab& lab, const Json& p) {
  const GroupModel& G = lab.system().group;
  const int radius = param<int>(p, "radius", lab.config().radius);
  const double r = lab.resolve_r(p.value("r", Json(1.0)));
  GreenCache& cache = lab.cache(radius);
  Json out{{"radius", radius}, {"r", r}};
  auto rev = reversibility_check(cache, r, param<int>(p, "reversibility_radius", std::min(3, radius)));
  lab.emit("diagnostics", Json{{"check", "reversibility"}, {"r", r}, {"min_ratio", rev.min_ratio},
                               {"max_ratio", rev.max_ratio}, {"samples", rev.samples}});
  out["reversibility"] = {rev.min_ratio, rev.max_ratio};
  Word h = word_param(lab, p, "h", std::string(1, G.letter_name(0)));
  auto dist = distortion_scan(cache, h, r, param<int>(p, "family_radius", 1), param<int>(p, "margin", 2));
  lab.emit("diagnostics", Json{{"check", "distortion"}, {"h", G.format(h)}, {"r", r}, {"K_hat", dist.K_hat},
                               {"N_hat", dist.N_hat}, {"samples", dist.samples}});
  out["K_hat"] = dist.K_hat;
  out["N_hat"] = dist.N_hat;
  if (param<bool>(p, "erho", true)) {
    auto w = erho_witness(cache, lab.rho());
    lab.emit("diagnostics", Json{{"check", "erho"}, {"violation", w.violation}, {"rho", w.rho},
                                 {"constant", w.constant}, {"positive", w.positive}});
    out["erho_violation"] = w.violation;
  }
  auto small = TruncatedOperator::on_ball(lab.system(), lab.config().depth,
                                          param<int>(p, "transitivity_radius", std::min(radius, 4)));
  auto tr = transitivity_report(*small);
  lab.emit("diagnostics", Json{{"check", "transitivity"}, {"components", tr.components},
                               {"largest", tr.largest}, {"core_fraction", tr.core_fraction}});
  out["core_fraction"] = tr.core_fraction;
  return out;
}

}  // namespace martinbench
