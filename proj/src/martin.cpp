#include "martinbench/martin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "martinbench/error.hpp"

namespace martinbench {

namespace {

int symbol_for_letter(const ExtensionSystem& sys, Letter l) {
  for (std::size_t a = 0; a < sys.kappa.size(); ++a)
    if (sys.kappa[a].size() == 1 && sys.kappa[a][0] == l) return static_cast<int>(a);
  return -1;
}

// Sum over cylinders of a measure's mass on Sigma x {ball element}.
double mass_over(const TruncatedOperator& op, std::span<const double> m, std::size_t ball_index) {
  std::int64_t p = op.position(ball_index);
  if (p < 0) return 0;
  double s = 0;
  for (std::size_t w = 0; w < op.word_count(); ++w) s += m[op.state(w, static_cast<std::size_t>(p))];
  return s;
}

void require_depth(const TruncatedOperator& op, const BoundaryRay& ray, int depth, int extra) {
  const GroupModel& G = op.system().group;
  int len = G.length(ray.at(static_cast<std::size_t>(depth)));
  if (len + extra > op.ball().radius()) {
    throw RangeError("ball too small for depth " + std::to_string(depth));
  }
}

}  // namespace

std::size_t ray_state(const TruncatedOperator& op, const BoundaryRay& ray, int depth) {
  if (depth < 0) throw PreconditionError("depth must be nonnegative");
  const ExtensionSystem& sys = op.system();
  SymbolWord cyl;
  for (int i = 0; i < op.depth(); ++i) {
    int a = symbol_for_letter(sys, ray.letter(static_cast<std::size_t>(depth + i)));
    if (a < 0) {
      cyl.clear();
      break;
    }
    cyl.push_back(static_cast<Symbol>(a));
  }
  long wi = cyl.empty() ? -1 : word_index(op.words(), cyl);
  if (wi < 0) wi = 0;
  auto pos = op.position_of(ray.at(static_cast<std::size_t>(depth)));
  if (!pos) throw RangeError("ball too small for depth " + std::to_string(depth));
  return op.state(static_cast<std::size_t>(wi), *pos);
}

MartinKernelSample martin_kernel(GreenCache& cache, std::span<const Letter> h, std::size_t state,
                                 double r) {
  const GroupModel& G = cache.op().system().group;
  MartinKernelSample k;
  k.h = G.normalize(h);
  k.state = state;
  k.r = r;
  if (k.h.empty()) {
    k.value = 1;
    return k;
  }
  auto num = cache.forward_group(k.h, r);
  auto den = cache.forward_group({}, r);
  double a = num->values.at(state), b = den->values.at(state);
  double ea = num->error(), eb = den->error();
  if (b <= eb || b <= 0) throw RangeError("state effectively disconnected at this truncation");
  k.value = a / b;
  k.error = k.value * (ea / std::max(a, 1e-300) + eb / b);
  return k;
}

RayKernelReport kernel_along_ray(GreenCache& cache, std::span<const Letter> h, const BoundaryRay& ray,
                                 const std::vector<int>& depths, double r) {
  const TruncatedOperator& op = cache.op();
  const int hl = op.system().group.length(h);
  RayKernelReport rep;
  for (int d : depths) {
    require_depth(op, ray, d, hl + 2);
    auto k = martin_kernel(cache, h, ray_state(op, ray, d), r);
    rep.depths.push_back(d);
    rep.values.push_back(k.value);
    rep.errors.push_back(k.error);
  }
  const std::size_t n = rep.values.size();
  for (std::size_t i = n / 2; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      rep.cauchy_gap = std::max(rep.cauchy_gap, std::abs(std::log(rep.values[i] / rep.values[j])));
  // log-linear fit of successive log differences against depth
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double d = std::abs(std::log(rep.values[i + 1] / rep.values[i]));
    if (d > 0) pts.emplace_back(rep.depths[i], std::log(d));
  }
  if (pts.size() >= 2) {
    double mx = 0, my = 0;
    for (auto [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0, sxx = 0;
    for (auto [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
    rep.decay_rate = sxx > 0 ? std::exp(sxy / sxx) : 0;
  }
  return rep;
}

BoundaryMeasureEstimate boundary_measure(GreenCache& cache, const BoundaryRay& ray, double r,
                                         const std::vector<int>& depths, int test_radius, double tol) {
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  if (depths.empty()) throw PreconditionError("boundary_measure needs at least one depth");
  if (test_radius < 0 || test_radius > ball.radius()) throw PreconditionError("test radius exceeds the ball");
  BoundaryMeasureEstimate est;
  est.r = r;
  est.test_radius = test_radius;
  est.depths = depths;
  for (std::size_t i = 0; i < ball.sphere_end(test_radius); ++i) est.test_ball.push_back(i);
  const std::size_t T = est.test_ball.size(), W = op.word_count();
  std::shared_ptr<const GreenResult> last;
  for (int d : depths) {
    require_depth(op, ray, d, 1);
    auto m = cache.adjoint_state(ray_state(op, ray, d), r);
    double norm = mass_over(op, m->values, 0);
    if (!(norm > 0)) throw RangeError("state effectively disconnected at this truncation");
    std::vector<double> gv(T), av(W * T);
    for (std::size_t t = 0; t < T; ++t) {
      auto p = static_cast<std::size_t>(op.position(est.test_ball[t]));
      double s = 0;
      for (std::size_t w = 0; w < W; ++w) {
        double v = m->values[op.state(w, p)] / norm;
        av[w * T + t] = v;
        s += v;
      }
      gv[t] = s;
    }
    est.error = std::max(est.error, m->error() * static_cast<double>(W) / norm);
    if (!est.group_values.empty()) {
      const auto& prev = est.group_values.back();
      double gap = 0;
      for (std::size_t t = 0; t < T; ++t)
        gap = std::max(gap, std::abs(gv[t] - prev[t]) / std::max(std::abs(gv[t]), 1e-300));
      est.gaps.push_back(gap);
    }
    est.group_values.push_back(std::move(gv));
    est.atom_values.push_back(std::move(av));
    last = m;
  }
  double norm = mass_over(op, last->values, 0);
  est.measure.resize(last->values.size());
  for (std::size_t i = 0; i < est.measure.size(); ++i) est.measure[i] = last->values[i] / norm;
  est.converged = !est.gaps.empty() && est.gaps.back() < tol;
  return est;
}

double conformality_residual(const TruncatedOperator& op, std::span<const double> measure, double r,
                             int test_radius) {
  std::vector<double> Lm(op.size());
  op.apply_adjoint(measure, Lm);
  const Ball& ball = op.ball();
  double worst = 0;
  for (std::size_t i = 0; i < ball.sphere_end(std::min(test_radius, ball.radius())); ++i) {
    double lhs = mass_over(op, Lm, i);
    double rhs = mass_over(op, measure, i) / r;
    if (rhs <= 0) {
      if (lhs > 0) worst = std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, std::abs(lhs - rhs) / rhs);
  }
  return worst;
}

double conformality_residual(const TruncatedOperator& op, const BoundaryMeasureEstimate& est) {
  return conformality_residual(op, est.measure, est.r, est.test_radius);
}

CoefficientScheme coefficients(double lambda, const std::vector<std::size_t>& sphere_sizes,
                               const std::vector<int>& lengths, std::span<const double> green_at_id) {
  if (!(lambda > 0 && lambda < 1)) throw PreconditionError("lambda_GL must lie in (0,1)");
  if (lengths.size() != green_at_id.size()) throw PreconditionError("index mismatch");
  CoefficientScheme s;
  s.lambda = lambda;
  s.radius = lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
  s.sphere_sums.assign(static_cast<std::size_t>(s.radius) + 1, 0.0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    int k = lengths[i];
    double den = std::abs(std::log(green_at_id[i]));
    if (k == 0) den = std::max(den, 1.0);
    else if (den < 1e-12) den = 1.0;
    double c = std::pow(lambda, 2 * k) / (static_cast<double>(sphere_sizes.at(static_cast<std::size_t>(k))) * den);
    s.c.push_back(c);
    s.sphere_sums[static_cast<std::size_t>(k)] += c;
  }
  return s;
}

CoefficientScheme coefficients(GreenCache& cache, double lambda, double r, int radius,
                               std::size_t base_word) {
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  if (radius > ball.radius()) throw PreconditionError("coefficient radius exceeds the ball");
  auto m = cache.adjoint_state(op.state(base_word, 0), r);
  std::vector<int> lengths;
  std::vector<double> green;
  for (std::size_t i = 0; i < ball.sphere_end(radius); ++i) {
    lengths.push_back(ball.length(i));
    green.push_back(mass_over(op, m->values, i));
  }
  return coefficients(lambda, ball.sphere_sizes(), lengths, green);
}

MartinDelta martin_delta(GreenCache& cache, std::size_t s1, std::size_t s2, double r,
                         const CoefficientScheme& scheme) {
  MartinDelta d;
  if (s1 == s2) return d;
  const TruncatedOperator& op = cache.op();
  auto m1 = cache.adjoint_state(s1, r);
  auto m2 = cache.adjoint_state(s2, r);
  const double n1 = mass_over(op, m1->values, 0), n2 = mass_over(op, m2->values, 0);
  double max_log = 0;
  for (std::size_t i = 0; i < scheme.c.size(); ++i) {
    double k1 = mass_over(op, m1->values, i) / n1;
    double k2 = mass_over(op, m2->values, i) / n2;
    if (!(k1 > 0 && k2 > 0)) throw RangeError("state effectively disconnected at this truncation");
    double l1 = std::log(k1), l2 = std::log(k2);
    max_log = std::max({max_log, std::abs(l1), std::abs(l2)});
    d.partial += scheme.c[i] * std::abs(l1 - l2);
  }
  const double l2 = scheme.lambda * scheme.lambda;
  d.tail = scheme.sphere_sums.back() * l2 / (1 - l2) * 2 * max_log;
  d.value = d.partial + d.tail;
  return d;
}

RayDistance martin_distance_along_rays(GreenCache& cache, const BoundaryRay& a, const BoundaryRay& b,
                                       double r, const CoefficientScheme& scheme,
                                       const std::vector<int>& depths, double tol) {
  const TruncatedOperator& op = cache.op();
  RayDistance out;
  for (int d : depths) {
    require_depth(op, a, d, 1);
    require_depth(op, b, d, 1);
    auto delta = martin_delta(cache, ray_state(op, a, d), ray_state(op, b, d), r, scheme);
    out.depths.push_back(d);
    out.values.push_back(delta.value);
    out.tails.push_back(delta.tail);
  }
  if (out.values.size() >= 2) {
    double v1 = out.values.back(), v0 = out.values[out.values.size() - 2];
    out.last_gap = std::abs(v1 - v0) / std::max(std::abs(v1), 1e-300);
    out.converged = out.last_gap < tol;
  }
  return out;
}

double holder_alpha(double lambda, double lambda_visual) {
  return std::log(lambda) / std::log(lambda_visual);
}

double holder_beta(double lambda, double lambda_visual, double growth, double eps) {
  return (2 * std::log(lambda) - std::log(growth + eps)) / std::log(lambda_visual);
}

HolderFit holder_fit(const std::vector<std::pair<double, double>>& pairs, double lambda,
                     double lambda_visual, double growth, double eps) {
  if (!(lambda > 0 && lambda < 1) || !(lambda_visual > 0 && lambda_visual < 1)) {
    throw PreconditionError("rates must lie in (0,1)");
  }
  std::vector<double> xs;
  for (auto [dv, dm] : pairs) {
    if (!(dv > 0 && dm > 0)) throw PreconditionError("distances must be positive");
    xs.push_back(dv);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end(), [](double p, double q) { return std::abs(p - q) <= 1e-12 * std::abs(q); }),
           xs.end());
  if (xs.size() < 3) throw PreconditionError("insufficient spread");
  if (pairs.size() < 10) throw PreconditionError("holder fit needs at least 10 pairs");
  HolderFit f;
  f.samples = pairs.size();
  const double n = static_cast<double>(pairs.size());
  double mx = 0, my = 0;
  for (auto [dv, dm] : pairs) {
    mx += std::log(dv);
    my += std::log(dm);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (auto [dv, dm] : pairs) {
    double x = std::log(dv) - mx, y = std::log(dm) - my;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (auto [dv, dm] : pairs) {
    double e = std::log(dm) - (f.intercept + f.slope * std::log(dv));
    sse += e * e;
  }
  f.r_squared = syy > 0 ? 1 - sse / syy : 1.0;
  f.slope_error = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  f.alpha = holder_alpha(lambda, lambda_visual);
  f.beta = holder_beta(lambda, lambda_visual, growth, eps);
  double lo = std::min(f.alpha, f.beta), hi = std::max(f.alpha, f.beta);
  f.within = f.slope >= lo && f.slope <= hi;
  f.within_error = f.slope + 2 * f.slope_error >= lo && f.slope - 2 * f.slope_error <= hi;
  return f;
}

DivergenceReport kernel_divergence_scan(GreenCache& cache, const BoundaryRay& sigma,
                                        const BoundaryRay& other, double r,
                                        const std::vector<int>& depths, int measure_depth) {
  const TruncatedOperator& op = cache.op();
  require_depth(op, sigma, measure_depth, 1);
  require_depth(op, other, measure_depth, 1);
  auto ms = cache.adjoint_state(ray_state(op, sigma, measure_depth), r);
  auto mo = cache.adjoint_state(ray_state(op, other, measure_depth), r);
  const double ns = mass_over(op, ms->values, 0), no = mass_over(op, mo->values, 0);
  DivergenceReport rep;
  for (int d : depths) {
    auto idx = op.ball().find(sigma.at(static_cast<std::size_t>(d)));
    if (!idx) throw RangeError("ball too small for depth " + std::to_string(d));
    rep.depths.push_back(d);
    rep.toward.push_back(mass_over(op, ms->values, *idx) / ns);
    rep.away.push_back(mass_over(op, mo->values, *idx) / no);
  }
  rep.diverges = rep.decays = rep.depths.size() > 1;
  for (std::size_t i = 1; i < rep.depths.size(); ++i) {
    if (rep.depths[i - 1] < rep.burn_in) continue;
    if (!(rep.toward[i] > rep.toward[i - 1])) rep.diverges = false;
    if (!(rep.away[i] < rep.away[i - 1])) rep.decays = false;
  }
  return rep;
}

DecayScan green_decay_scan(GreenCache& cache, std::span<const Letter> g, double r, int max_n) {
  const TruncatedOperator& op = cache.op();
  const Ball& ball = op.ball();
  const GroupModel& G = op.system().group;
  Word gn = G.normalize(g);
  auto gi = ball.find(gn);
  if (!gi) throw RangeError("ball too small for the source element");
  if (max_n + ball.length(*gi) > ball.radius()) throw PreconditionError("ball radius must be at least max n + |g|");
  auto res = cache.forward_group(gn, r);
  DecayScan scan;
  scan.maxima.assign(static_cast<std::size_t>(max_n) + 1, 0.0);
  scan.roots.assign(static_cast<std::size_t>(max_n) + 1, 0.0);
  scan.error = res->error();
  for (std::size_t i = 0; i < ball.size(); ++i) {
    int d = G.exact_metric() ? G.distance(gn, ball.element(i)) : ball.distance(*gi, i);
    std::int64_t pp = op.position(i);
    if (d > max_n || pp < 0) continue;
    auto p = static_cast<std::size_t>(pp);
    for (std::size_t w = 0; w < op.word_count(); ++w)
      scan.maxima[static_cast<std::size_t>(d)] =
          std::max(scan.maxima[static_cast<std::size_t>(d)], res->values[op.state(w, p)]);
  }
  for (int n = 1; n <= max_n; ++n)
    scan.roots[static_cast<std::size_t>(n)] = std::pow(scan.maxima[static_cast<std::size_t>(n)], 1.0 / n);
  return scan;
}

}  // namespace martinbench
