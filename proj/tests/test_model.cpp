#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mvsde/model.hpp"

using namespace mvsde;

namespace {

ModelSpec linear_kernel_model(double k) {
  ModelSpec m = make_gallery_model("double-well-1d", {.K_interaction = k});
  return m;
}

// same kernel as a generic (non-declared) function
ModelSpec generic_kernel_model(double k) {
  ModelSpec m = linear_kernel_model(k);
  m.b0_linear_coeff.reset();
  m.b0 = [k](const double* z, double* out) { out[0] = -k * z[0]; };
  return m;
}

}  // namespace

TEST_CASE("interaction_conv on a linear kernel") {
  ModelSpec m = linear_kernel_model(0.1);
  Ensemble ens(1, {0.0, 2.0});
  double x = 2.0, out = 0.0;
  interaction_conv(std::span<const double>(&x, 1), ens, m, std::span<double>(&out, 1));
  CHECK(out == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("zero kernel gives zero") {
  ModelSpec m = linear_kernel_model(0.0);
  Ensemble ens(1, {0.4, -1.0, 2.5});
  double x = 0.7, out = 5.0;
  interaction_conv(std::span<const double>(&x, 1), ens, m, std::span<double>(&out, 1));
  CHECK(out == 0.0);
}

TEST_CASE("sin kernel matches an independent scalar summation loop") {
  ModelSpec m = linear_kernel_model(0.0);
  m.b0_linear_coeff.reset();
  m.b0 = [](const double* z, double* out) { out[0] = std::sin(z[0]); };
  std::vector<double> pts(64);
  for (int i = 0; i < 64; ++i) pts[i] = -1.0 + 2.0 * i / 63.0;
  Ensemble ens(1, pts);
  double x = 0.3, out = 0.0;
  interaction_conv(std::span<const double>(&x, 1), ens, m, std::span<double>(&out, 1));
  double ref = 0.0;
  for (int i = 0; i < 64; ++i) ref += std::sin(x - pts[i]);
  ref /= 64.0;
  CHECK(std::fabs(out - ref) < 1e-12);
}

TEST_CASE("drift adds b1 to the interaction term") {
  ModelSpec m = linear_kernel_model(0.1);
  Ensemble ens(1, {0.0, 2.0});
  double x = 2.0, out = 0.0;
  drift(std::span<const double>(&x, 1), ens, m, std::span<double>(&out, 1));
  CHECK(out == doctest::Approx(-6.1).epsilon(1e-15));

  ModelSpec zero = linear_kernel_model(0.0);
  zero.b1 = [](const double*, double* o) { o[0] = 0.0; };
  drift(std::span<const double>(&x, 1), ens, zero, std::span<double>(&out, 1));
  CHECK(out == 0.0);

  ModelSpec ou = make_gallery_model("ou", {.beta = 1.0, .alpha = 0.5});
  drift(std::span<const double>(&x, 1), ens, ou, std::span<double>(&out, 1));
  CHECK(out == doctest::Approx(-1.5).epsilon(1e-15));
}

TEST_CASE("drift is deterministic and rejects non-finite input") {
  ModelSpec m = linear_kernel_model(0.05);
  Ensemble ens(1, {0.5, -0.25, 1.75});
  double x = 1.25, a = 0.0, b = 0.0;
  drift(std::span<const double>(&x, 1), ens, m, std::span<double>(&a, 1));
  drift(std::span<const double>(&x, 1), ens, m, std::span<double>(&b, 1));
  CHECK(a == b);

  const double bad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(
      interaction_conv(std::span<const double>(&bad, 1), ens, m, std::span<double>(&a, 1)),
      InvalidStateError);
}

TEST_CASE("declared linear fast path equals the naive summation to 1e-12") {
  for (int n : {7, 64, 1024, 4096}) {
    ModelSpec fast = linear_kernel_model(0.05);
    ModelSpec slow = generic_kernel_model(0.05);
    NoiseStream s{1000 + static_cast<std::uint64_t>(n), 0, 0, MotionTag::W, 1, 1.0};
    std::vector<double> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = 3.0 * s.normal(i);
    Ensemble ens(1, pts);
    const int queries = n == 4096 ? 1000 : 100;
    for (int q = 0; q < queries; ++q) {
      double x = 5.0 * s.normal(n + q), a = 0.0, b = 0.0;
      interaction_conv(std::span<const double>(&x, 1), ens, fast, std::span<double>(&a, 1));
      interaction_conv(std::span<const double>(&x, 1), ens, slow, std::span<double>(&b, 1));
      CHECK(std::fabs(a - b) < 1e-12);
    }
  }
}

TEST_CASE("gallery Jacobians match central finite differences") {
  const GalleryParams p3{.dim = 3};
  for (const ModelSpec& m :
       {make_gallery_model("double-well-1d"), make_gallery_model("ou", p3),
        make_gallery_model("double-well-nd", p3)}) {
    const int d = m.dim;
    NoiseStream s{99, 0, 0, MotionTag::W, d, 1.0};
    std::vector<double> x(d), J(d * d), bp(d), bm(d);
    for (int trial = 0; trial < 25; ++trial) {
      double nrm = 0.0;
      for (int c = 0; c < d; ++c) {
        x[c] = s.normal(trial * d + c) * 3.0;
        nrm += x[c] * x[c];
      }
      if (std::sqrt(nrm) > 10.0) continue;
      m.grad_b1(x.data(), J.data());
      const double h = 1e-5;
      for (int c = 0; c < d; ++c) {
        std::vector<double> xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        m.b1(xp.data(), bp.data());
        m.b1(xm.data(), bm.data());
        for (int r = 0; r < d; ++r) {
          const double fd = (bp[r] - bm[r]) / (2.0 * h);
          const double an = J[r * d + c];
          CHECK(std::fabs(fd - an) <= 1e-6 * std::max(1.0, std::fabs(an)));
        }
      }
    }
  }
}

TEST_CASE("dissipativity check passes for the gallery double well") {
  const ModelSpec m = make_gallery_model("double-well-1d", {.K_interaction = 0.05});
  const DissipativityReport rep = check_dissipativity(m, 20000, 5.0, 4242);
  CHECK(rep.pass);
  CHECK(rep.max_b1_violation <= 1e-9);
  CHECK(rep.max_b0_violation <= 1e-9);
}

TEST_CASE("exhaustive pair grid confirms the double-well constants") {
  // <x-y, b1(x)-b1(y)> = r^2 (1 - (x^2+xy+y^2)); with lambda = 1 the split
  // inequality needs ell0 = 2 sqrt(2) (x = -y = 1.05 violates ell0 = 2).
  const double ell0 = 2.0 * std::sqrt(2.0);
  const double lambda0 = 1.0, lambda = 1.0;
  double worst_good = -1e300;
  bool ell0_2_violated = false;
  for (double x = -5.0; x <= 5.0; x += 0.05) {
    for (double y = -5.0; y <= 5.0; y += 0.05) {
      const double r = std::fabs(x - y);
      if (r == 0.0) continue;
      const double inner = (x - y) * ((x - x * x * x) - (y - y * y * y));
      const double bound = (r <= ell0) ? lambda0 * r * r : -lambda * r * r;
      worst_good = std::max(worst_good, inner - bound);
      const double bound2 = (r <= 2.0) ? lambda0 * r * r : -lambda * r * r;
      if (inner - bound2 > 1e-9) ell0_2_violated = true;
    }
  }
  CHECK(worst_good <= 1e-9);
  CHECK(ell0_2_violated);
}

TEST_CASE("linear drifts and anti-dissipative drifts") {
  ModelSpec lin = make_gallery_model("ou", {.beta = 1.0, .alpha = 0.0});
  lin.constants.lambda0 = 0.0;
  lin.constants.ell0 = 0.0;
  const DissipativityReport ok = check_dissipativity(lin, 5000, 4.0, 7);
  CHECK(ok.pass);
  CHECK(ok.max_b1_violation <= 0.0);

  ModelSpec bad = lin;
  bad.b1 = [](const double* x, double* o) { o[0] = x[0]; };
  bad.grad_b1 = [](const double*, double* o) { o[0] = 1.0; };
  const DissipativityReport fail = check_dissipativity(bad, 5000, 4.0, 7);
  CHECK_FALSE(fail.pass);
  CHECK(fail.max_b1_violation > 0.0);
  CHECK(fail.worst_r > 0.0);
}

TEST_CASE("ensemble flags non-finite and huge coordinates") {
  Ensemble good(1, {1.0, -2.0});
  CHECK(good.finite());
  Ensemble huge(1, {1.0, 1.5e100});
  CHECK_FALSE(huge.finite());
  Ensemble nan(1, {std::numeric_limits<double>::quiet_NaN()});
  CHECK_FALSE(nan.finite());
}

TEST_CASE("ensemble mean is the exact coordinate mean") {
  Ensemble ens(2, {1.0, 10.0, 3.0, 30.0, 5.0, 50.0});
  REQUIRE(ens.count() == 3);
  CHECK(ens.mean()[0] == 3.0);
  CHECK(ens.mean()[1] == 30.0);
}

TEST_CASE("sigma0 attaches with the declared Lipschitz constant") {
  ModelSpec m = make_gallery_model("ou", {.L_mult = 0.25});
  REQUIRE(m.has_sigma0());
  CHECK(m.constants.L == 0.25);
  double x = 0.7, s0 = 0.0;
  m.sigma0(&x, &s0);
  CHECK(s0 == doctest::Approx(0.5 * std::sin(0.7)).epsilon(1e-15));
}

TEST_CASE("unknown gallery name is a config error") {
  CHECK_THROWS_AS(make_gallery_model("nope", {}), ConfigError);
}
