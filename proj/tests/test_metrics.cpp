#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mvsde/metrics.hpp"
#include "mvsde/paths.hpp"

using namespace mvsde;

namespace {

// brute-force W1 over all pairings (test oracle, n <= 8)
double w1_bruteforce(std::vector<double> a, std::vector<double> b) {
  std::vector<int> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += std::fabs(a[i] - b[perm[i]]);
    best = std::min(best, cost / a.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// exact W1 for d = 2 point clouds via assignment brute force
double w1_assignment_2d(const std::vector<double>& a, const std::vector<double>& b, int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dx = a[2 * i] - b[2 * perm[i]];
      const double dy = a[2 * i + 1] - b[2 * perm[i] + 1];
      cost += std::sqrt(dx * dx + dy * dy);
    }
    best = std::min(best, cost / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<double> draws(std::uint64_t seed, std::uint64_t id, int n, double scale = 1.0) {
  NoiseStream s{seed, id, 0, MotionTag::W, 1, 1.0};
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = scale * s.normal(i);
  return out;
}

}  // namespace

TEST_CASE("two-point example and identity") {
  CHECK(w1_1d({0.0, 1.0}, {0.0, 3.0}) == 1.0);
  const auto xs = draws(3, 1, 17);
  CHECK(w1_1d(xs, xs) == 0.0);
}

TEST_CASE("w1_1d equals permutation brute force on small instances") {
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 5;
    const auto a = draws(100 + trial, 1, n);
    const auto b = draws(200 + trial, 2, n, 1.5);
    CHECK(w1_1d(a, b) == doctest::Approx(w1_bruteforce(a, b)).epsilon(1e-13));
  }
}

TEST_CASE("w1_1d is a metric on finite multisets") {
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 4 + trial % 7;
    const auto a = draws(trial, 11, n);
    const auto b = draws(trial, 12, n, 1.2);
    const auto c = draws(trial, 13, n, 0.7);
    CHECK(w1_1d(a, b) == w1_1d(b, a));
    CHECK(w1_1d(a, b) + w1_1d(b, c) >= w1_1d(a, c) - 1e-12);
  }
  // identity of indiscernibles: zero iff sorted arrays equal
  std::vector<double> a{3.0, 1.0, 2.0}, b{2.0, 3.0, 1.0};
  CHECK(w1_1d(a, b) == 0.0);
  b[0] += 1e-9;
  CHECK(w1_1d(a, b) > 0.0);
}

TEST_CASE("translation invariance to 1e-12") {
  for (int trial = 0; trial < 50; ++trial) {
    auto a = draws(trial, 21, 33);
    auto b = draws(trial, 22, 33, 2.0);
    const double base = w1_1d(a, b);
    const double shift = 17.25;
    for (double& v : a) v += shift;
    for (double& v : b) v += shift;
    CHECK(std::fabs(w1_1d(a, b) - base) < 1e-12);
  }
}

TEST_CASE("unequal counts truncate to the smaller set") {
  const auto a = draws(5, 31, 100);
  const auto b = draws(5, 32, 260);
  const double v = w1_1d_truncated(a, b, 99);
  CHECK(v >= 0.0);
  CHECK(std::isfinite(v));
  CHECK_THROWS_AS(w1_1d(a, b), ConfigError);
  CHECK_THROWS_AS(w1_1d({}, {1.0}), ConfigError);
}

TEST_CASE("sliced reduces to w1_1d in one dimension, bitwise") {
  const auto a = draws(6, 41, 50);
  const auto b = draws(6, 42, 50);
  CHECK(sliced_w1(a, b, 1, 1, 7) == w1_1d_truncated(a, b, 7));
  CHECK(sliced_w1(a, b, 1, 16, 7) == w1_1d_truncated(a, b, 7));
}

TEST_CASE("sliced of identical clouds is zero") {
  const auto a = draws(8, 51, 60);  // 20 rows in d=3
  CHECK(sliced_w1(a, a, 3, 8, 3) == 0.0);
}

TEST_CASE("sliced w1 lower-bounds the exact assignment W1 in d=2") {
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3 + trial % 6;
    const auto a = draws(300 + trial, 1, 2 * n);
    const auto b = draws(400 + trial, 2, 2 * n, 1.3);
    const double sliced = sliced_w1(a, b, 2, 64, 11 + trial);
    const double exact = w1_assignment_2d(a, b, n);
    CHECK(sliced <= exact + 1e-12);
  }
}

TEST_CASE("moments") {
  CHECK(moment({1.0, -1.0}, 1, 2.0) == 1.0);
  CHECK(moment({0.0}, 1, 5.0) == 0.0);
  const auto z = draws(12, 61, 1000000);
  CHECK(std::fabs(moment(z, 1, 2.0) - 1.0) < 4.0 * std::sqrt(2.0) * 1e-3);
  CHECK_THROWS_AS(moment({1.0}, 1, 0.5), ConfigError);
}

TEST_CASE("log-log fit recovers exact power laws to 1e-12") {
  std::vector<double> xs{0.5, 1.0, 2.0, 4.0, 8.0}, ys(5);
  for (int i = 0; i < 5; ++i) ys[i] = 1.0 / xs[i];
  RateFit f = fit_loglog_slope(xs, ys);
  CHECK(std::fabs(f.slope + 1.0) < 1e-12);
  CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));

  for (int i = 0; i < 5; ++i) ys[i] = 3.0;
  f = fit_loglog_slope(xs, ys);
  CHECK(std::fabs(f.slope) < 1e-12);
}

TEST_CASE("log-log fit on a noisy half-power law") {
  std::vector<double> xs, ys;
  NoiseStream u{77, 71, 0, MotionTag::W, 1, 1.0};
  for (int i = 0; i < 40; ++i) {
    const double x = 0.01 * (i + 1);
    const double noise = 1.0 + 0.01 * (2.0 * stream_uniform_from_key(u.key(), i) - 1.0);
    xs.push_back(x);
    ys.push_back(3.0 * std::sqrt(x) * noise);
  }
  const RateFit f = fit_loglog_slope(xs, ys);
  CHECK(std::fabs(f.slope - 0.5) < 0.02);
}

TEST_CASE("exponential fit") {
  std::vector<double> ts{0.0, 1.0, 2.0}, ys(3);
  for (int i = 0; i < 3; ++i) ys[i] = std::exp(-2.0 * ts[i]);
  RateFit f = fit_exp_decay(ts, ys);
  CHECK(std::fabs(f.rate - 2.0) < 1e-12);
  CHECK(f.prefactor == doctest::Approx(1.0).epsilon(1e-12));

  f = fit_exp_decay(ts, {4.0, 4.0, 4.0});
  CHECK(std::fabs(f.rate) < 1e-12);

  std::vector<double> t2, y2;
  NoiseStream u{78, 72, 0, MotionTag::W, 1, 1.0};
  for (int i = 0; i < 30; ++i) {
    t2.push_back(0.25 * i);
    y2.push_back(std::exp(-0.7 * 0.25 * i) *
                 (1.0 + 0.01 * (2.0 * stream_uniform_from_key(u.key(), i) - 1.0)));
  }
  f = fit_exp_decay(t2, y2);
  CHECK(std::fabs(f.rate - 0.7) < 0.05);
}

TEST_CASE("fit input validation names problems") {
  CHECK_THROWS_AS(fit_loglog_slope({1.0, 2.0}, {1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(fit_loglog_slope({1.0, 2.0, 3.0}, {1.0, -2.0, 3.0}), ConfigError);
  CHECK_THROWS_AS(fit_exp_decay({0.0, 1.0, 2.0}, {1.0, 0.0, 1.0}), ConfigError);
}

TEST_CASE("noise scale tracks the empirical W1 floor") {
  const auto a = draws(91, 81, 4096);
  const auto b = draws(92, 82, 4096);
  const W1Estimate est = w1_with_noise_scale(a, b, 5);
  // equal laws: the estimate sits at the floor, within 3x the scale
  CHECK(est.w1 <= 3.0 * est.noise_scale);
  CHECK(est.noise_scale > 0.0);
}
