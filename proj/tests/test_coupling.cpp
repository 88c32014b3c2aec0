#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mvsde/coupling.hpp"
#include "mvsde/metrics.hpp"

using namespace mvsde;

namespace {

void fill_noise(std::uint64_t seed, std::uint64_t exp, MotionTag tag, int n, int d, double dt,
                std::uint64_t step, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    NoiseStream s{seed, exp, static_cast<std::uint64_t>(i), tag, d, dt};
    for (int c = 0; c < d; ++c) out[i * d + c] = s.increment(step, c);
  }
}

}  // namespace

TEST_CASE("cutoff plateaus and midpoint") {
  CHECK(cutoff_h(0.5, 0.4) == 0.0);
  CHECK(cutoff_h(0.5, 1.2) == 1.0);
  CHECK(cutoff_h(0.5, 0.75) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cutoff_h_star(0.5, 0.4) == 1.0);
  CHECK(cutoff_h_star(0.5, 1.2) == 0.0);
  CHECK(cutoff_h_star(0.5, 0.75) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-14));
  CHECK_THROWS_AS(cutoff_h(0.0, 1.0), ConfigError);
}

TEST_CASE("cutoff is C1 at the seams") {
  const double eps = 0.5, e = 1e-6;
  for (double r : {eps - 1e-6, eps + 1e-6, 2 * eps - 1e-6, 2 * eps + 1e-6}) {
    const double fd = (cutoff_h(eps, r + e) - cutoff_h(eps, r - e)) / (2.0 * e);
    CHECK(std::fabs(fd) < 1e-4);
  }
}

TEST_CASE("h^2 + h*^2 = 1 on a dense grid") {
  const double eps = 0.37;
  for (int i = 0; i <= 10000; ++i) {
    const double r = 3.0 * eps * i / 10000.0;
    const double h = cutoff_h(eps, r);
    const double hs = cutoff_h_star(eps, r);
    CHECK(std::fabs(h * h + hs * hs - 1.0) <= 1e-12);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
  }
}

TEST_CASE("reflection matrix on an axis and at zero") {
  const std::vector<double> z{1.0, 0.0};
  const auto m = reflection_matrix(z);
  CHECK(m[0] == -1.0);
  CHECK(m[1] == 0.0);
  CHECK(m[2] == 0.0);
  CHECK(m[3] == 1.0);

  const std::vector<double> zero{0.0, 0.0, 0.0};
  const auto id = reflection_matrix(zero);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(id[i * 3 + j] == (i == j ? 1.0 : 0.0));
}

TEST_CASE("reflection is orthogonal and maps z to -z") {
  const int d = 3;
  NoiseStream s{404, 1, 0, MotionTag::W, d, 1.0};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> z(d);
    for (int c = 0; c < d; ++c) z[c] = s.normal(trial * d + c);
    const auto m = reflection_matrix(z);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += m[k * d + i] * m[k * d + j];
        CHECK(std::fabs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
      }
    }
    std::vector<double> mz(d, 0.0), via_apply(d, 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) mz[i] += m[i * d + j] * z[j];
    reflect_apply(z, z, via_apply);
    for (int i = 0; i < d; ++i) {
      CHECK(std::fabs(mz[i] + z[i]) < 1e-12);
      CHECK(std::fabs(via_apply[i] + z[i]) < 1e-12);
    }
  }
}

TEST_CASE("synchronous regime: identical coefficients and Z0 = 0 keep Z at 0 bitwise") {
  const ModelSpec model = make_gallery_model("double-well-1d", {.K_interaction = 0.05});
  const int n = 16;
  CouplingConfig ccfg;
  ccfg.epsilon = 0.05;
  ccfg.inner_delta = 0.01;
  SchemeConfig second;
  second.kind = SchemeKind::explicit_em;
  second.delta = ccfg.inner_delta;
  CoupledStepOptions opts;
  opts.second_uses_proxy = true;  // b~ = b with the same measure argument

  CoupledState state;
  state.y = sample_initial(InitSampler::gauss({0.0}, {1.0}), 1, n, 9, 100);
  state.y_n = state.y;
  state.refresh_z();
  Ensemble proxy = sample_initial(InitSampler::gauss({0.0}, {1.0}), 1, 512, 9, 101);

  std::vector<double> w1, w2;
  for (std::uint64_t step = 0; step < 200; ++step) {
    fill_noise(9, 102, MotionTag::W, n, 1, ccfg.inner_delta, step, w1);
    fill_noise(9, 102, MotionTag::W2, n, 1, ccfg.inner_delta, step, w2);
    state = coupled_step(state, model, ccfg, second, proxy, w1.data(), w2.data(), nullptr,
                         nullptr, opts);
    for (double z : state.z) CHECK(z == 0.0);
  }
}

TEST_CASE("full-reflection plateau matches the hand formula") {
  const ModelSpec model = make_gallery_model("double-well-1d", {.K_interaction = 0.0});
  CouplingConfig ccfg;
  ccfg.epsilon = 0.01;
  ccfg.inner_delta = 0.05;
  SchemeConfig second;
  second.kind = SchemeKind::explicit_em;
  second.delta = ccfg.inner_delta;

  CoupledState state;
  state.y = Ensemble(1, {1.0});
  state.y_n = Ensemble(1, {-1.0});
  state.refresh_z();  // |Z| = 2 >= 2 eps
  Ensemble proxy(1, {0.0});

  const double w1 = 0.3, w2 = -0.7;
  const CoupledState next =
      coupled_step(state, model, ccfg, second, proxy, &w1, &w2, nullptr);
  // h = 1, h* = 0; Pi(z) w1 = w1 - 2 w1 = -w1 in d=1
  const double by = (1.0 - 1.0);                    // b1(1) = 0
  const double bn = (-1.0 + 1.0);                   // b1(-1) = 0
  CHECK(next.y.positions()[0] ==
        doctest::Approx(1.0 + by * 0.05 + 1.0 * w1).epsilon(1e-15));
  CHECK(next.y_n.positions()[0] ==
        doctest::Approx(-1.0 + bn * 0.05 - 1.0 * w1).epsilon(1e-15));
  CHECK(next.z[0] == doctest::Approx(2.0 + 2.0 * w1).epsilon(1e-12));
}

TEST_CASE("reflection coupling contracts the double-well pair") {
  const ModelSpec model = make_gallery_model("double-well-1d", {.K_interaction = 0.0});
  CouplingConfig ccfg;
  ccfg.epsilon = 1e-3;
  ccfg.inner_delta = 4e-3;
  SchemeConfig second;
  second.kind = SchemeKind::explicit_em;
  second.delta = ccfg.inner_delta;

  const int runs = 1024;
  const int steps_per_unit = 250;
  const int horizon = 20;
  std::vector<double> mean_abs_z(horizon, 0.0);
  std::vector<double> w1, w2;
  for (int run = 0; run < runs; ++run) {
    CoupledState state;
    state.y = Ensemble(1, {2.0});
    state.y_n = Ensemble(1, {-2.0});
    state.refresh_z();
    Ensemble proxy(1, {0.0});
    const std::uint64_t exp = 7000 + run;
    for (int unit = 0; unit < horizon; ++unit) {
      for (int k = 0; k < steps_per_unit; ++k) {
        const std::uint64_t step = unit * steps_per_unit + k;
        fill_noise(13, exp, MotionTag::W, 1, 1, ccfg.inner_delta, step, w1);
        fill_noise(13, exp, MotionTag::W2, 1, 1, ccfg.inner_delta, step, w2);
        state = coupled_step(state, model, ccfg, second, proxy, w1.data(), w2.data(),
                             nullptr);
      }
      mean_abs_z[unit] += std::fabs(state.z[0]);
    }
  }
  std::vector<double> ts, ys;
  for (int unit = 0; unit < horizon; ++unit) {
    mean_abs_z[unit] /= runs;
    ts.push_back(unit + 1.0);
    ys.push_back(std::max(mean_abs_z[unit], 1e-12));
  }
  const RateFit fit = fit_exp_decay(ts, ys);
  CHECK(fit.rate > 0.0);
  CHECK(ys.back() < ys.front());
}

TEST_CASE("marginal validation: zero noise, zero drift is exact") {
  ModelSpec model = make_gallery_model("ou", {.beta = 1.0, .sigma = 0.0});
  model.b1 = [](const double*, double* o) { o[0] = 0.0; };
  model.grad_b1 = [](const double*, double* o) { o[0] = 0.0; };
  MarginalValidationConfig cfg;
  cfg.N = 64;
  cfg.runs = 4;
  cfg.ccfg.inner_delta = 0.05;
  cfg.ccfg.horizon = 1.0;
  cfg.init = InitSampler::point({0.7});
  const MarginalValidationReport rep = marginal_validation(model, cfg, 3);
  CHECK(rep.w1_first == 0.0);
  CHECK(rep.w1_second == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("marginal validation passes on the OU model") {
  const ModelSpec model = make_gallery_model("ou", {.beta = 1.0, .sigma = 1.0});
  MarginalValidationConfig cfg;
  cfg.N = 128;
  cfg.runs = 10;
  cfg.ccfg.inner_delta = 0.02;
  cfg.ccfg.horizon = 2.0;
  cfg.ccfg.epsilon = 1e-3;
  const MarginalValidationReport rep = marginal_validation(model, cfg, 12);
  CHECK(rep.paired_samples == 1280);
  CHECK(rep.pass);
}

TEST_CASE("coupled and uncoupled runs never share stream ids") {
  const ModelSpec model = make_gallery_model("ou", {.beta = 1.0, .sigma = 1.0});
  MarginalValidationConfig cfg;
  cfg.N = 8;
  cfg.runs = 3;
  cfg.ccfg.inner_delta = 0.1;
  cfg.ccfg.horizon = 0.5;
  const MarginalValidationReport rep = marginal_validation(model, cfg, 1);
  std::set<std::uint64_t> coupled(rep.coupled_experiments.begin(),
                                  rep.coupled_experiments.end());
  for (std::uint64_t e : rep.uncoupled_experiments) CHECK(coupled.count(e) == 0);
}
