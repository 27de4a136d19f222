#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "martinbench/extension.hpp"
#include "martinbench/group.hpp"

namespace martinbench {

/// State reached after `depth` steps along a ray: group coordinate ray.at(depth),
/// cylinder spelled by the next letters when each letter is some symbol's label
/// (otherwise the first cylinder).
std::size_t ray_state(const TruncatedOperator& op, const BoundaryRay& ray, int depth);

struct MartinKernelSample {
  Word h;
  std::size_t state = 0;
  double r = 0;
  double value = 0;
  double error = 0;
};

/// K_r(h, s) = G_r(X_h)(s) / G_r(X_id)(s).
MartinKernelSample martin_kernel(GreenCache& cache, std::span<const Letter> h, std::size_t state,
                                 double r);

struct RayKernelReport {
  std::vector<int> depths;
  std::vector<double> values;
  std::vector<double> errors;
  double cauchy_gap = 0;   // sup over pairs in the second half of |log v_i - log v_j|
  double decay_rate = 0;   // fitted geometric rate of successive log-differences
};

RayKernelReport kernel_along_ray(GreenCache& cache, std::span<const Letter> h, const BoundaryRay& ray,
                                 const std::vector<int>& depths, double r);

struct BoundaryMeasureEstimate {
  double r = 0;
  int test_radius = 0;
  std::vector<int> depths;
  std::vector<std::size_t> test_ball;           // ball indices with |h| <= test_radius
  std::vector<std::vector<double>> group_values;  // [depth][test element], summed over cylinders
  std::vector<std::vector<double>> atom_values;   // [depth][word * |test_ball| + element]
  std::vector<double> gaps;                     // max relative change between successive depths
  std::vector<double> measure;                  // normalized G^* delta at the deepest state
  double error = 0;
  bool converged = false;
};

/// mu_sigma(f) estimated by G_r^*(delta_s)(f) / G_r^*(delta_s)(X_id) at ray states s.
BoundaryMeasureEstimate boundary_measure(GreenCache& cache, const BoundaryRay& ray, double r,
                                         const std::vector<int>& depths, int test_radius,
                                         double tol = 1e-3);

/// max over |h| <= test_radius of |m(L X_h) - m(X_h)/r| / (m(X_h)/r).
double conformality_residual(const TruncatedOperator& op, std::span<const double> measure, double r,
                             int test_radius);
double conformality_residual(const TruncatedOperator& op, const BoundaryMeasureEstimate& est);

struct CoefficientScheme {
  double lambda = 0.5;
  int radius = 0;
  std::vector<double> c;              // per ball index up to the radius
  std::vector<double> sphere_sums;    // sum of c_h over |h| = k
};

/// c_h = lambda^(2|h|) / (|S_|h|| * |log G_r(X_h)(x, id)|), with the identity
/// (and any vanishing logarithm) using a denominator floor of 1.
CoefficientScheme coefficients(double lambda, const std::vector<std::size_t>& sphere_sizes,
                               const std::vector<int>& lengths, std::span<const double> green_at_id);
CoefficientScheme coefficients(GreenCache& cache, double lambda, double r, int radius,
                               std::size_t base_word = 0);

struct MartinDelta {
  double value = 0;
  double partial = 0;
  double tail = 0;
};

MartinDelta martin_delta(GreenCache& cache, std::size_t s1, std::size_t s2, double r,
                         const CoefficientScheme& scheme);

struct RayDistance {
  std::vector<int> depths;
  std::vector<double> values;
  std::vector<double> tails;
  double last_gap = 0;
  bool converged = false;
};

RayDistance martin_distance_along_rays(GreenCache& cache, const BoundaryRay& a, const BoundaryRay& b,
                                       double r, const CoefficientScheme& scheme,
                                       const std::vector<int>& depths, double tol = 1e-3);

struct HolderFit {
  double slope = 0;
  double intercept = 0;
  double slope_error = 0;
  double r_squared = 0;
  double alpha = 0;
  double beta = 0;
  bool within = false;            // alpha <= slope <= beta
  bool within_error = false;      // same, allowing two standard errors
  std::size_t samples = 0;
};

double holder_alpha(double lambda, double lambda_visual);
double holder_beta(double lambda, double lambda_visual, double growth, double eps);

HolderFit holder_fit(const std::vector<std::pair<double, double>>& pairs, double lambda,
                     double lambda_visual, double growth, double eps);

struct DivergenceReport {
  std::vector<int> depths;
  std::vector<double> toward;   // mu_sigma(X_gamma) for gamma on sigma
  std::vector<double> away;     // mu_other(X_gamma)
  int burn_in = 1;
  bool diverges = false;
  bool decays = false;
};

DivergenceReport kernel_divergence_scan(GreenCache& cache, const BoundaryRay& sigma,
                                        const BoundaryRay& other, double r,
                                        const std::vector<int>& depths, int measure_depth);

struct DecayScan {
  std::vector<double> maxima;  // index n: max over |gamma| = n, y
  std::vector<double> roots;   // index n: maxima[n]^(1/n); roots[0] = 0
  double error = 0;
};

DecayScan green_decay_scan(GreenCache& cache, std::span<const Letter> g, double r, int max_n);

}  // namespace martinbench
