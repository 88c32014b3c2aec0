#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/model.hpp"

namespace mvsde {

struct RegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Constants of the concave distance function f(r) = 1 - e^{-c1 r} + c2 r
/// and the contraction rates it yields:
///   c1  = 2 (phi(ell0) + (L + 2K) ell0 / 2) / sigma^2,   phi(r) = lambda0 r
///   c2  = c1 e^{-c1 ell0}
///   lambda*  = ((2 phi(ell0) + L ell0) ^ (lambda - K - L/2)) c2 / f(ell0)
///   lambda** = lambda* - K (1 + c1/c2)
/// Requires lambda > K + L/2 and a nondegenerate short range (c1 > 0).
struct LyapunovConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double lambda_star = 0.0;
  double lambda_star_star = 0.0;
  bool lambda_star_star_positive = false;
};

LyapunovConstants lyapunov_constants(const ModelSpec& model);

double f_eval(const LyapunovConstants& c, double r);
double f_prime(const LyapunovConstants& c, double r);
double f_double_prime(const LyapunovConstants& c, double r);

struct ContractionReport {
  bool pass = false;
  double max_violation = 0.0;  // max over grid of phi*(r) + lambda* f(r)
  double worst_r = 0.0;
  double tolerance = 0.0;
  double lambda_star = 0.0;
  int grid_points = 0;
  double r_max = 0.0;
};

/// Evaluates phi*(r) = f'(r)((phi(r)+lambda r) 1_{r<=ell0} - (lambda-K-L/2) r)
/// - 2 sigma^2 c1^2 e^{-c1 r} on n_grid points of (0, r_max] and checks
/// phi*(r) <= -lambda* f(r) up to rounding (relative tolerance 1e-10).
ContractionReport verify_contraction(const LyapunovConstants& c, const ModelSpec& model,
                                     double r_max, int n_grid);

}  // namespace mvsde
