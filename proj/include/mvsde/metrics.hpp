#pragma once

#include <cstdint>
#include <vector>

#include "mvsde/paths.hpp"

namespace mvsde {

/// Exact 1D Wasserstein-1 between two equally sized sample sets: the mean
/// absolute difference of order statistics, which is the optimal transport
/// cost in one dimension.
double w1_1d(std::vector<double> a, std::vector<double> b);

/// As w1_1d but resolves unequal counts by seeded shuffle of the larger set
/// followed by truncation to the smaller count.
double w1_1d_truncated(std::vector<double> a, std::vector<double> b, std::uint64_t seed);

/// Sliced W1 for n x d samples (row-major): average of w1_1d over n_proj
/// uniformly random unit directions. Each projection is 1-Lipschitz, so the
/// result lower-bounds the true W1. d = 1 reduces to w1_1d exactly.
double sliced_w1(const std::vector<double>& a, const std::vector<double>& b, int dim,
                 int n_proj, std::uint64_t seed);

/// (1/n) sum |x_i|^p over rows of an n x d sample array.
double moment(const std::vector<double>& samples, int dim, double p);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double rate = 0.0;       // exponential fits: -slope in t
  double prefactor = 0.0;  // exponential fits: exp(intercept)
};

/// Least-squares line on (log x, log y); optional weights (inverse variance).
RateFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys,
                         const std::vector<double>& weights = {});

/// Least-squares line on (t, log y); rate = -slope.
RateFit fit_exp_decay(const std::vector<double>& ts, const std::vector<double>& ys);

/// W1 estimate together with a Monte Carlo noise scale. The scale is the RMS
/// of the two half-pool self-distances, which tracks the n^{-1/2} estimation
/// floor of the empirical W1 (a plain standard error would miss the positive
/// bias of W1 between finite samples of equal laws).
struct W1Estimate {
  double w1 = 0.0;
  double noise_scale = 0.0;
};
W1Estimate w1_with_noise_scale(const std::vector<double>& a, const std::vector<double>& b,
                               std::uint64_t seed);

}  // namespace mvsde
