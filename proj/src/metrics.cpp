#include "mvsde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvsde {

namespace {

void seeded_shuffle(std::vector<double>& v, std::uint64_t seed) {
  NoiseStream s{seed, 0x5F1E, 0, MotionTag::W, 1, 1.0};
  for (std::size_t i = v.size() - 1; i > 0; --i) {
    const std::uint64_t j = s.raw(i) % (i + 1);
    std::swap(v[i], v[j]);
  }
}

}  // namespace

double w1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("w1_1d: empty sample set");
  if (a.size() != b.size())
    throw ConfigError("w1_1d: sample counts differ; use w1_1d_truncated");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double w1_1d_truncated(std::vector<double> a, std::vector<double> b, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw ConfigError("w1_1d: empty sample set");
  const std::size_t n = std::min(a.size(), b.size());
  if (a.size() > n) {
    seeded_shuffle(a, seed ^ 0xA);
    a.resize(n);
  }
  if (b.size() > n) {
    seeded_shuffle(b, seed ^ 0xB);
    b.resize(n);
  }
  return w1_1d(std::move(a), std::move(b));
}

double sliced_w1(const std::vector<double>& a, const std::vector<double>& b, int dim,
                 int n_proj, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("sliced_w1: dim must be >= 1");
  if (n_proj < 1) throw ConfigError("sliced_w1: n_proj must be >= 1");
  if (dim == 1) return w1_1d_truncated(a, b, seed);

  const std::size_t na = a.size() / dim, nb = b.size() / dim;
  if (na == 0 || nb == 0) throw ConfigError("sliced_w1: empty sample set");
  NoiseStream dirs{seed, 0xD14, 0, MotionTag::W, dim, 1.0};
  std::vector<double> pa(na), pb(nb), u(dim);
  double acc = 0.0;
  for (int p = 0; p < n_proj; ++p) {
    double nrm = 0.0;
    for (int c = 0; c < dim; ++c) {
      u[c] = dirs.normal(static_cast<std::uint64_t>(p) * dim + c);
      nrm += u[c] * u[c];
    }
    nrm = std::sqrt(nrm);
    for (int c = 0; c < dim; ++c) u[c] /= nrm;
    for (std::size_t i = 0; i < na; ++i)
      pa[i] = std::inner_product(u.begin(), u.end(), a.begin() + i * dim, 0.0);
    for (std::size_t i = 0; i < nb; ++i)
      pb[i] = std::inner_product(u.begin(), u.end(), b.begin() + i * dim, 0.0);
    acc += w1_1d_truncated(pa, pb, seed + 101 * p);
  }
  return acc / n_proj;
}

double moment(const std::vector<double>& samples, int dim, double p) {
  if (dim < 1) throw ConfigError("moment: dim must be >= 1");
  if (p < 1.0) throw ConfigError("moment: p must be >= 1");
  const std::size_t n = samples.size() / dim;
  if (n == 0) throw ConfigError("moment: empty sample set");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double v = samples[i * dim + c];
      s += v * v;
    }
    acc += std::pow(std::sqrt(s), p);
  }
  return acc / static_cast<double>(n);
}

namespace {

RateFit weighted_line(const std::vector<double>& xs, const std::vector<double>& ys,
                      const std::vector<double>& ws) {
  const std::size_t n = xs.size();
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += ws[i];
    sx += ws[i] * xs[i];
    sy += ws[i] * ys[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
    sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = fit.intercept + fit.slope * xs[i];
    ss_res += ws[i] * (ys[i] - pred) * (ys[i] - pred);
    ss_tot += ws[i] * (ys[i] - my) * (ys[i] - my);
  }
  fit.r_squared = (ss_tot > 0) ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return fit;
}

}  // namespace

RateFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys,
                         const std::vector<double>& weights) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw ConfigError("fit_loglog_slope: need >= 3 matching points");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw ConfigError("fit_loglog_slope: data must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  std::vector<double> ws = weights.empty() ? std::vector<double>(xs.size(), 1.0) : weights;
  if (ws.size() != xs.size()) throw ConfigError("fit_loglog_slope: weight count mismatch");
  return weighted_line(lx, ly, ws);
}

RateFit fit_exp_decay(const std::vector<double>& ts, const std::vector<double>& ys) {
  if (ts.size() != ys.size() || ts.size() < 3)
    throw ConfigError("fit_exp_decay: need >= 3 matching points");
  std::vector<double> ly(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!(ys[i] > 0.0)) throw ConfigError("fit_exp_decay: data must be positive");
    ly[i] = std::log(ys[i]);
  }
  std::vector<double> ws(ts.size(), 1.0);
  RateFit fit = weighted_line(ts, ly, ws);
  fit.rate = -fit.slope;
  fit.prefactor = std::exp(fit.intercept);
  return fit;
}

W1Estimate w1_with_noise_scale(const std::vector<double>& a, const std::vector<double>& b,
                               std::uint64_t seed) {
  W1Estimate est;
  est.w1 = w1_1d_truncated(a, b, seed);
  auto half_self = [&](const std::vector<double>& v, std::uint64_t s) {
    if (v.size() < 4) return 0.0;
    std::vector<double> shuffled = v;
    seeded_shuffle(shuffled, s);
    const std::size_t h = shuffled.size() / 2;
    std::vector<double> first(shuffled.begin(), shuffled.begin() + h);
    std::vector<double> second(shuffled.begin() + h, shuffled.begin() + 2 * h);
    return w1_1d(std::move(first), std::move(second));
  };
  const double sa = half_self(a, seed ^ 0x51);
  const double sb = half_self(b, seed ^ 0x52);
  est.noise_scale = std::sqrt(0.5 * (sa * sa + sb * sb));
  return est;
}

}  // namespace mvsde
