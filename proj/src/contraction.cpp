#include "mvsde/contraction.hpp"

#include <algorithm>
#include <cmath>

namespace mvsde {

LyapunovConstants lyapunov_constants(const ModelSpec& model) {
  const ModelConstants& mc = model.constants;
  if (model.sigma == 0.0) throw RegimeError("lyapunov_constants: sigma must be nonzero");
  if (!(mc.lambda > mc.K + mc.L / 2.0))
    throw RegimeError("lyapunov_constants: requires lambda > K + L/2");

  const double sigma2 = model.sigma * model.sigma;
  const double phi_ell0 = mc.lambda0 * mc.ell0;
  LyapunovConstants c;
  c.c1 = 2.0 * (phi_ell0 + (mc.L + 2.0 * mc.K) * mc.ell0 / 2.0) / sigma2;
  if (!(c.c1 > 0.0))
    throw RegimeError(
        "lyapunov_constants: degenerate short range (phi(ell0) and (L+2K) ell0 both zero)");
  c.c2 = c.c1 * std::exp(-c.c1 * mc.ell0);

  const double f_ell0 = 1.0 - std::exp(-c.c1 * mc.ell0) + c.c2 * mc.ell0;
  const double cap = std::min(2.0 * phi_ell0 + mc.L * mc.ell0, mc.lambda - mc.K - mc.L / 2.0);
  c.lambda_star = cap * c.c2 / f_ell0;
  c.lambda_star_star = c.lambda_star - mc.K * (1.0 + c.c1 / c.c2);
  c.lambda_star_star_positive = c.lambda_star_star > 0.0;
  return c;
}

double f_eval(const LyapunovConstants& c, double r) {
  return 1.0 - std::exp(-c.c1 * r) + c.c2 * r;
}

double f_prime(const LyapunovConstants& c, double r) {
  return c.c1 * std::exp(-c.c1 * r) + c.c2;
}

double f_double_prime(const LyapunovConstants& c, double r) {
  return -c.c1 * c.c1 * std::exp(-c.c1 * r);
}

ContractionReport verify_contraction(const LyapunovConstants& c, const ModelSpec& model,
                                     double r_max, int n_grid) {
  const ModelConstants& mc = model.constants;
  if (!(mc.lambda > mc.K + mc.L / 2.0))
    throw RegimeError("verify_contraction: requires lambda > K + L/2");
  if (n_grid < 2 || !(r_max > 0.0))
    throw ConfigError("verify_contraction: need r_max > 0 and n_grid >= 2");

  const double sigma2 = model.sigma * model.sigma;
  ContractionReport rep;
  rep.lambda_star = c.lambda_star;
  rep.grid_points = n_grid;
  rep.r_max = r_max;
  rep.max_violation = -1e300;

  double max_abs_phi_star = 0.0;
  for (int i = 1; i <= n_grid; ++i) {
    const double r = r_max * static_cast<double>(i) / n_grid;
    const double fp = f_prime(c, r);
    const double short_part = (r <= mc.ell0) ? (mc.lambda0 * r + mc.lambda * r) : 0.0;
    const double phi_star = fp * (short_part - (mc.lambda - mc.K - mc.L / 2.0) * r) +
                            2.0 * sigma2 * f_double_prime(c, r);
    const double lhs = phi_star + c.lambda_star * f_eval(c, r);
    max_abs_phi_star = std::max(max_abs_phi_star, std::fabs(phi_star));
    if (lhs > rep.max_violation) {
      rep.max_violation = lhs;
      rep.worst_r = r;
    }
  }
  rep.tolerance = 1e-10 * std::max(1.0, max_abs_phi_star);
  rep.pass = rep.max_violation <= rep.tolerance;
  return rep;
}

}  // namespace mvsde
