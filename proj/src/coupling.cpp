#include "mvsde/coupling.hpp"

#include <cmath>
#include <cstring>

#include "mvsde/metrics.hpp"

namespace mvsde {

double cutoff_h(double epsilon, double r) {
  if (!(epsilon > 0.0)) throw ConfigError("cutoff_h: epsilon must be positive");
  if (r <= epsilon) return 0.0;
  if (r >= 2.0 * epsilon) return 1.0;
  const double s = (r - epsilon) / epsilon;
  return s * s * (3.0 - 2.0 * s);
}

double cutoff_h_star(double epsilon, double r) {
  const double h = cutoff_h(epsilon, r);
  return std::sqrt(1.0 - h * h);
}

std::vector<double> reflection_matrix(std::span<const double> z) {
  const int d = static_cast<int>(z.size());
  std::vector<double> m(static_cast<std::size_t>(d) * d, 0.0);
  double nrm2 = 0.0;
  for (double v : z) nrm2 += v * v;
  for (int i = 0; i < d; ++i) m[static_cast<std::size_t>(i) * d + i] = 1.0;
  if (nrm2 == 0.0) return m;  // e(0) = 0 convention
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      m[static_cast<std::size_t>(i) * d + j] -= 2.0 * z[i] * z[j] / nrm2;
  return m;
}

void reflect_apply(std::span<const double> z, std::span<const double> v,
                   std::span<double> out) {
  const int d = static_cast<int>(z.size());
  double nrm2 = 0.0, dot = 0.0;
  for (int c = 0; c < d; ++c) {
    nrm2 += z[c] * z[c];
    dot += z[c] * v[c];
  }
  if (nrm2 == 0.0) {
    for (int c = 0; c < d; ++c) out[c] = v[c];
    return;
  }
  const double f = 2.0 * dot / nrm2;
  for (int c = 0; c < d; ++c) out[c] = v[c] - f * z[c];
}

void CoupledState::refresh_z() {
  const auto& a = y.positions();
  const auto& b = y_n.positions();
  z.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) z[i] = a[i] - b[i];
}

CoupledState coupled_step(const CoupledState& state, const ModelSpec& model,
                          const CouplingConfig& ccfg, const SchemeConfig& second_cfg,
                          const Ensemble& proxy, const double* dW1, const double* dW2,
                          const double* dB, DelayHistory* hist,
                          const CoupledStepOptions& opts) {
  const int d = model.dim;
  const int n = state.y.count();
  const int m = model.sigma0_cols;
  if (d > kMaxModelDim) throw ConfigError("coupled_step: model dim must be <= 16");
  if (state.y_n.count() != n) throw ConfigError("coupled_step: component sizes differ");
  const double dt = ccfg.inner_delta;
  const double sigma = model.sigma;

  proxy.refresh_mean();
  state.y_n.refresh_mean();
  const Ensemble& second_measure = opts.second_uses_proxy ? proxy : state.y_n;
  const Ensemble* delayed = nullptr;
  if (second_cfg.kind == SchemeKind::delay_em) {
    if (hist == nullptr) throw ConfigError("coupled_step: delay drift needs a history");
    delayed = &hist->delayed();
    delayed->refresh_mean();
  }

  std::vector<double> ynext(static_cast<std::size_t>(n) * d);
  std::vector<double> nnext(static_cast<std::size_t>(n) * d);

  for (int i = 0; i < n; ++i) {
    const double* yi = state.y.particle(i);
    const double* ni = state.y_n.particle(i);
    const double* zi = state.z.data() + static_cast<std::size_t>(i) * d;
    double rz = 0.0;
    for (int c = 0; c < d; ++c) rz += zi[c] * zi[c];
    rz = std::sqrt(rz);
    const double h = cutoff_h(ccfg.epsilon, rz);
    const double hs = cutoff_h_star(ccfg.epsilon, rz);

    double by[kMaxModelDim], bn[kMaxModelDim];
    drift_buffered(yi, proxy, model, by);
    switch (second_cfg.kind) {
      case SchemeKind::explicit_em:
        drift_buffered(ni, second_measure, model, bn);
        break;
      case SchemeKind::tamed_em:
        tamed_drift(std::span<const double>(ni, d), second_measure, model, second_cfg,
                    std::span<double>(bn, d));
        break;
      case SchemeKind::delay_em:
        drift_buffered(delayed->particle(i), *delayed, model, bn);
        break;
      default:
        throw ConfigError("coupled_step: second component must be explicit, tamed or delay");
    }

    const double* w1 = dW1 + static_cast<std::size_t>(i) * d;
    const double* w2 = dW2 + static_cast<std::size_t>(i) * d;
    double rw1[kMaxModelDim];
    reflect_apply(std::span<const double>(zi, d), std::span<const double>(w1, d),
                  std::span<double>(rw1, d));

    double* yo = ynext.data() + static_cast<std::size_t>(i) * d;
    double* no = nnext.data() + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) {
      yo[c] = yi[c] + by[c] * dt + sigma * (h * w1[c] + hs * w2[c]);
      no[c] = ni[c] + bn[c] * dt + sigma * (h * rw1[c] + hs * w2[c]);
    }
    if (m > 0 && dB != nullptr) {
      double s0[kMaxModelDim * kMaxModelDim];
      const double* bi = dB + static_cast<std::size_t>(i) * m;
      model.sigma0(yi, s0);
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += s0[c * m + j] * bi[j];
        yo[c] += acc;
      }
      model.sigma0(ni, s0);
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += s0[c * m + j] * bi[j];
        no[c] += acc;
      }
    }
  }

  CoupledState next;
  next.y = Ensemble(d, std::move(ynext), state.y.time() + dt);
  next.y_n = Ensemble(d, std::move(nnext), state.y_n.time() + dt);
  next.refresh_z();
  if (hist != nullptr && second_cfg.kind == SchemeKind::delay_em) hist->push(next.y_n);
  return next;
}

namespace {

constexpr std::uint64_t kRolePair = 0xC001ULL << 16;
constexpr std::uint64_t kRoleProxy = 0xC002ULL << 16;
constexpr std::uint64_t kRoleUncX = 0xC003ULL << 16;
constexpr std::uint64_t kRoleUncXProxy = 0xC004ULL << 16;
constexpr std::uint64_t kRoleUncXn = 0xC005ULL << 16;

void fill_increments(std::uint64_t seed, std::uint64_t experiment, MotionTag tag, int n,
                     int dim, double dt, std::uint64_t step, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(n) * dim);
  const double s = std::sqrt(dt);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t key =
        NoiseStream{seed, experiment, static_cast<std::uint64_t>(i), tag, dim, dt}.key();
    for (int c = 0; c < dim; ++c)
      out[static_cast<std::size_t>(i) * dim + c] =
          s * stream_normal_from_key(key, step * static_cast<std::uint64_t>(dim) + c);
  }
}

// X particles driven by the empirical law of an independently evolved proxy
// system (the uncoupled counterpart of the first coupled component).
std::vector<double> run_lawproxy_system(const ModelSpec& model, const CouplingConfig& ccfg,
                                        int n, const InitSampler& init, std::uint64_t seed,
                                        std::uint64_t exp_x, std::uint64_t exp_proxy) {
  const int d = model.dim;
  const int m = model.sigma0_cols;
  const std::uint64_t steps =
      static_cast<std::uint64_t>(std::llround(ccfg.horizon / ccfg.inner_delta));
  Ensemble x = sample_initial(init, d, n, seed, exp_x);
  const bool interacting = model.has_interaction();
  Ensemble proxy = interacting ? sample_initial(init, d, ccfg.proxy_size, seed, exp_proxy)
                               : Ensemble(d, std::vector<double>(d, 0.0));

  std::vector<double> dw, db, dwp, dbp;
  for (std::uint64_t stepn = 0; stepn < steps; ++stepn) {
    fill_increments(seed, exp_x, MotionTag::W, n, d, ccfg.inner_delta, stepn, dw);
    if (m > 0) fill_increments(seed, exp_x, MotionTag::B, n, m, ccfg.inner_delta, stepn, db);
    proxy.refresh_mean();
    std::vector<double> nx(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
      double b[kMaxModelDim];
      drift_buffered(x.particle(i), proxy.count() > 0 && interacting ? proxy : x, model, b);
      double* out = nx.data() + static_cast<std::size_t>(i) * d;
      const double* xi = x.particle(i);
      for (int c = 0; c < d; ++c)
        out[c] = xi[c] + b[c] * ccfg.inner_delta + model.sigma * dw[static_cast<std::size_t>(i) * d + c];
      if (m > 0) {
        double s0[kMaxModelDim * kMaxModelDim];
        model.sigma0(xi, s0);
        for (int c = 0; c < d; ++c) {
          double acc = 0.0;
          for (int j = 0; j < m; ++j) acc += s0[c * m + j] * db[static_cast<std::size_t>(i) * m + j];
          out[c] += acc;
        }
      }
    }
    x = Ensemble(d, std::move(nx), x.time() + ccfg.inner_delta);
    if (interacting) {
      fill_increments(seed, exp_proxy, MotionTag::W, proxy.count(), d, ccfg.inner_delta, stepn, dwp);
      if (m > 0)
        fill_increments(seed, exp_proxy, MotionTag::B, proxy.count(), m, ccfg.inner_delta, stepn, dbp);
      proxy = explicit_em_step(proxy, model, ccfg.inner_delta, dwp.data(),
                               m > 0 ? dbp.data() : nullptr);
    }
  }
  return x.positions();
}

}  // namespace

MarginalValidationReport marginal_validation(const ModelSpec& model,
                                             const MarginalValidationConfig& cfg,
                                             std::uint64_t seed) {
  const int d = model.dim;
  const int n = cfg.N;
  const int m = model.sigma0_cols;
  const CouplingConfig& ccfg = cfg.ccfg;
  if (cfg.runs < 1 || n < 1) throw ConfigError("marginal_validation: need runs >= 1, N >= 1");
  const std::uint64_t steps =
      static_cast<std::uint64_t>(std::llround(ccfg.horizon / ccfg.inner_delta));
  SchemeConfig second;
  second.kind = SchemeKind::explicit_em;
  second.delta = ccfg.inner_delta;

  MarginalValidationReport rep;
  std::vector<double> pool_y, pool_yn, pool_x, pool_xn;

  for (int run = 0; run < cfg.runs; ++run) {
    const std::uint64_t r = static_cast<std::uint64_t>(run);
    const std::uint64_t exp_pair = kRolePair | r;
    const std::uint64_t exp_proxy = kRoleProxy | r;
    rep.coupled_experiments.push_back(exp_pair);
    rep.coupled_experiments.push_back(exp_proxy);

    CoupledState state;
    state.y = sample_initial(cfg.init, d, n, seed, exp_pair);
    // independent draws with the same law for the second component
    state.y_n = sample_initial(cfg.init, d, n, seed, exp_pair ^ 0x9999);
    state.refresh_z();
    const bool interacting = model.has_interaction();
    Ensemble proxy = interacting
                         ? sample_initial(cfg.init, d, ccfg.proxy_size, seed, exp_proxy)
                         : Ensemble(d, std::vector<double>(d, 0.0));

    std::vector<double> dw1, dw2, db, dwp, dbp;
    for (std::uint64_t stepn = 0; stepn < steps; ++stepn) {
      fill_increments(seed, exp_pair, MotionTag::W, n, d, ccfg.inner_delta, stepn, dw1);
      fill_increments(seed, exp_pair, MotionTag::W2, n, d, ccfg.inner_delta, stepn, dw2);
      if (m > 0) fill_increments(seed, exp_pair, MotionTag::B, n, m, ccfg.inner_delta, stepn, db);
      const Ensemble& measure = interacting ? proxy : state.y;
      CoupledState next = coupled_step(state, model, ccfg, second, measure, dw1.data(),
                                       dw2.data(), m > 0 ? db.data() : nullptr);
      if (interacting) {
        fill_increments(seed, exp_proxy, MotionTag::W, proxy.count(), d, ccfg.inner_delta,
                        stepn, dwp);
        if (m > 0)
          fill_increments(seed, exp_proxy, MotionTag::B, proxy.count(), m, ccfg.inner_delta,
                          stepn, dbp);
        proxy = explicit_em_step(proxy, model, ccfg.inner_delta, dwp.data(),
                                 m > 0 ? dbp.data() : nullptr);
      }
      state = std::move(next);
    }
    pool_y.insert(pool_y.end(), state.y.positions().begin(), state.y.positions().end());
    pool_yn.insert(pool_yn.end(), state.y_n.positions().begin(), state.y_n.positions().end());

    // uncoupled counterparts, disjoint stream ids
    const std::uint64_t exp_x = kRoleUncX | r;
    const std::uint64_t exp_xp = kRoleUncXProxy | r;
    const std::uint64_t exp_xn = kRoleUncXn | r;
    rep.uncoupled_experiments.push_back(exp_x);
    rep.uncoupled_experiments.push_back(exp_xp);
    rep.uncoupled_experiments.push_back(exp_xn);

    std::vector<double> xs = run_lawproxy_system(model, ccfg, n, cfg.init, seed, exp_x, exp_xp);
    pool_x.insert(pool_x.end(), xs.begin(), xs.end());

    SimulateSpec sim;
    sim.cfg = second;
    sim.cfg.horizon = ccfg.horizon;
    sim.N = n;
    sim.init = cfg.init;
    sim.master_seed = seed;
    sim.experiment_id = exp_xn;
    sim.snapshot_times = {ccfg.horizon};
    SimResult res = simulate(model, sim);
    const auto& xn = res.snapshots.back().positions();
    pool_xn.insert(pool_xn.end(), xn.begin(), xn.end());
  }

  rep.paired_samples = n * cfg.runs;
  if (d == 1) {
    const W1Estimate e1 = w1_with_noise_scale(pool_y, pool_x, seed ^ 0xE1);
    const W1Estimate e2 = w1_with_noise_scale(pool_yn, pool_xn, seed ^ 0xE2);
    rep.w1_first = e1.w1;
    rep.se_first = e1.noise_scale;
    rep.w1_second = e2.w1;
    rep.se_second = e2.noise_scale;
  } else {
    rep.w1_first = sliced_w1(pool_y, pool_x, d, 64, seed ^ 0xE1);
    rep.w1_second = sliced_w1(pool_yn, pool_xn, d, 64, seed ^ 0xE2);
    // noise scale from half-pool self distance of each pool, sliced
    auto half_scale = [&](const std::vector<double>& pool, std::uint64_t s) {
      const std::size_t rows = pool.size() / d / 2;
      std::vector<double> a(pool.begin(), pool.begin() + rows * d);
      std::vector<double> b(pool.begin() + rows * d, pool.begin() + 2 * rows * d);
      return sliced_w1(a, b, d, 64, s);
    };
    rep.se_first = std::sqrt(0.5 * (std::pow(half_scale(pool_y, seed ^ 0xA1), 2) +
                                    std::pow(half_scale(pool_x, seed ^ 0xA2), 2)));
    rep.se_second = std::sqrt(0.5 * (std::pow(half_scale(pool_yn, seed ^ 0xA3), 2) +
                                     std::pow(half_scale(pool_xn, seed ^ 0xA4), 2)));
  }
  rep.pass = rep.w1_first <= 3.0 * rep.se_first && rep.w1_second <= 3.0 * rep.se_second;
  return rep;
}

}  // namespace mvsde
