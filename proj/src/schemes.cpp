#include "mvsde/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "mvsde/exact_sum.hpp"
#include "mvsde/parallel.hpp"

namespace mvsde {

namespace {

constexpr int kMaxDim = 16;
constexpr std::uint64_t kInitSalt = 0x1217ULL;

void require_dim(const ModelSpec& model) {
  if (model.dim < 1 || model.dim > kMaxDim)
    throw ConfigError("scheme: model dim must be in [1, 16]");
}

inline double hs_norm(const double* m, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += m[i] * m[i];
  return std::sqrt(s);
}

// Shared Euler update: drift read from `drift_ens`, diffusion intensity from
// `state_ens` (they coincide except for the delay scheme), positions advanced
// from `state_ens`. Writing it once keeps delay with r0 = 0 bitwise equal to
// the explicit step.
Ensemble em_update(const Ensemble& drift_ens, const Ensemble& state_ens,
                   const ModelSpec& model, double dt, const double* dW, const double* dB,
                   int threads) {
  const int d = model.dim;
  const int n = state_ens.count();
  const int m = model.sigma0_cols;
  std::vector<double> next(static_cast<std::size_t>(n) * d);
  drift_ens.refresh_mean();
  const double sigma = model.sigma;

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    double b[kMaxDim], s0[kMaxDim * kMaxDim];
    const double* xs = state_ens.particle(static_cast<int>(i));
    const double* xd = drift_ens.particle(static_cast<int>(i));
    drift_buffered(xd, drift_ens, model, b);
    double* out = next.data() + i * d;
    for (int c = 0; c < d; ++c)
      out[c] = xs[c] + b[c] * dt + sigma * dW[i * d + c];
    if (m > 0 && dB != nullptr) {
      model.sigma0(xs, s0);
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += s0[c * m + j] * dB[i * m + j];
        out[c] += acc;
      }
    }
  });
  return Ensemble(d, std::move(next), state_ens.time() + dt);
}

// Solve the d x d system J dx = rhs in place (partial pivoting).
bool solve_dense(double* J, double* rhs, int d) {
  int piv[kMaxDim];
  for (int i = 0; i < d; ++i) piv[i] = i;
  for (int col = 0; col < d; ++col) {
    int best = col;
    double mag = std::fabs(J[piv[col] * d + col]);
    for (int r = col + 1; r < d; ++r) {
      const double v = std::fabs(J[piv[r] * d + col]);
      if (v > mag) {
        mag = v;
        best = r;
      }
    }
    if (mag < 1e-300) return false;
    std::swap(piv[col], piv[best]);
    const double pivot = J[piv[col] * d + col];
    for (int r = col + 1; r < d; ++r) {
      const double f = J[piv[r] * d + col] / pivot;
      if (f == 0.0) continue;
      J[piv[r] * d + col] = 0.0;
      for (int c = col + 1; c < d; ++c) J[piv[r] * d + c] -= f * J[piv[col] * d + c];
      rhs[piv[r]] -= f * rhs[piv[col]];
    }
  }
  double sol[kMaxDim];
  for (int r = d - 1; r >= 0; --r) {
    double acc = rhs[piv[r]];
    for (int c = r + 1; c < d; ++c) acc -= J[piv[r] * d + c] * sol[c];
    sol[r] = acc / J[piv[r] * d + r];
  }
  std::memcpy(rhs, sol, sizeof(double) * d);
  return true;
}

}  // namespace

SchemeKind scheme_kind_from_string(const std::string& s) {
  if (s == "explicit") return SchemeKind::explicit_em;
  if (s == "backward") return SchemeKind::backward_em;
  if (s == "tamed") return SchemeKind::tamed_em;
  if (s == "adaptive") return SchemeKind::adaptive_em;
  if (s == "delay") return SchemeKind::delay_em;
  throw ConfigError("scheme: unknown kind '" + s + "'");
}

std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::explicit_em: return "explicit";
    case SchemeKind::backward_em: return "backward";
    case SchemeKind::tamed_em: return "tamed";
    case SchemeKind::adaptive_em: return "adaptive";
    case SchemeKind::delay_em: return "delay";
  }
  return "?";
}

double delta_star_kappa(const ModelSpec& model) {
  const ModelConstants& c = model.constants;
  const double kap = c.alpha * c.lambda_b1 - 2.0 * c.K;
  if (!(kap > 0.0))
    throw ConfigError("delta_star_kappa: alpha*lambda_b1 - 2K must be positive");
  const double lhat = c.lambda_b1_hat;
  const double rho = 4.0 * c.K * (c.K + lhat);
  const double inner = 2.0 * c.K + rho * (1.0 + 1.0 / c.alpha) + lhat * lhat;
  double v = 1.0;
  v = std::min(v, 1.0 / std::sqrt(c.alpha));
  v = std::min(v, c.lambda_b1 * c.lambda_b1 / (lhat * lhat * lhat * lhat));
  const double q = kap / (2.0 * c.alpha * inner);
  v = std::min(v, q * q);
  v = std::min(v, 1.0 / (kap / 4.0 + c.K + rho));
  return v;
}

double delta_star_backward(const ModelSpec& model) {
  const ModelConstants& c = model.constants;
  if (!(c.lambda > 2.0 * c.K)) return std::numeric_limits<double>::quiet_NaN();
  const double p = std::floor(std::max(1.0, c.lstar) * (1.0 + c.lstar)) + 1.0;
  double v = std::min(1.0, 1.0 / (2.0 * (c.lambda0 + c.K)));
  v = std::min(v, 3.0 * (c.lambda - 2.0 * c.K) / (4.0 * p * std::pow(1.0 + c.K, p)));
  return v;
}

void validate_scheme(const SchemeConfig& cfg, const ModelSpec& model) {
  require_dim(model);
  if (!(cfg.delta > 0.0)) throw ConfigError("scheme: delta must be positive");
  if (cfg.horizon < 0.0) throw ConfigError("scheme: horizon must be nonnegative");
  const ModelConstants& c = model.constants;
  switch (cfg.kind) {
    case SchemeKind::explicit_em:
      break;
    case SchemeKind::backward_em: {
      if (model.has_sigma0())
        throw ConfigError("scheme: backward EM requires sigma0 == 0");
      const double bound = 1.0 / (2.0 * (c.lambda0 + c.K));
      if (!(cfg.delta < bound))
        throw ConfigError("scheme: backward EM requires delta < 1/(2(lambda0+K)) = " +
                          std::to_string(bound));
      break;
    }
    case SchemeKind::tamed_em: {
      if (model.has_sigma0()) throw ConfigError("scheme: tamed EM requires sigma0 == 0");
      if (cfg.taming_mode == TamingMode::gradient_norm) {
        const double bound = delta_star_kappa(model);
        if (!(cfg.delta <= bound))
          throw ConfigError(
              "scheme: tamed EM (gradient_norm) requires delta <= delta*_kappa = " +
              std::to_string(bound));
      } else {
        if (!(cfg.kappa > 0.0 && cfg.kappa <= 0.5))
          throw ConfigError("scheme: drift_norm taming requires kappa in (0, 1/2]");
      }
      break;
    }
    case SchemeKind::adaptive_em:
      if (model.has_sigma0()) throw ConfigError("scheme: adaptive EM requires sigma0 == 0");
      if (!(cfg.delta < 1.0))
        throw ConfigError("scheme: adaptive EM requires delta in (0, 1)");
      break;
    case SchemeKind::delay_em: {
      if (cfg.r0 < 0.0) throw ConfigError("scheme: r0 must be nonnegative");
      const double ratio = cfg.r0 / cfg.delta;
      if (std::fabs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("scheme: r0 must be an integer multiple of delta");
      break;
    }
  }
}

Ensemble explicit_em_step(const Ensemble& ens, const ModelSpec& model, double dt,
                          const double* dW, const double* dB, int threads) {
  require_dim(model);
  return em_update(ens, ens, model, dt, dW, dB, threads);
}

Ensemble backward_em_step(const Ensemble& ens, const ModelSpec& model,
                          const SchemeConfig& cfg, const double* dW,
                          double* max_residual_out, int threads) {
  require_dim(model);
  const int d = model.dim;
  const int n = ens.count();
  const double delta = cfg.delta;
  ens.refresh_mean();
  std::vector<double> next(static_cast<std::size_t>(n) * d);
  std::vector<double> residuals(n, 0.0);
  std::vector<std::uint8_t> converged(n, 0);

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    double conv[kMaxDim] = {0.0};
    const double* xi = ens.particle(static_cast<int>(i));
    // frozen interaction term: b(x, mu) - b1(x) evaluated at the old state
    if (model.has_interaction()) {
      double full[kMaxDim], b1v[kMaxDim];
      drift_buffered(xi, ens, model, full);
      model.b1(xi, b1v);
      for (int c = 0; c < d; ++c) conv[c] = full[c] - b1v[c];
    }
    double base[kMaxDim];
    for (int c = 0; c < d; ++c)
      base[c] = xi[c] + conv[c] * delta + model.sigma * dW[i * d + c];

    double x[kMaxDim];
    std::memcpy(x, xi, sizeof(double) * d);
    double g[kMaxDim], b1v[kMaxDim], J[kMaxDim * kMaxDim];
    double res = 0.0;
    for (int it = 0; it < cfg.implicit_max_iter; ++it) {
      model.b1(x, b1v);
      res = 0.0;
      for (int c = 0; c < d; ++c) {
        g[c] = x[c] - delta * b1v[c] - base[c];
        res += g[c] * g[c];
      }
      res = std::sqrt(res);
      if (res <= cfg.implicit_tol) {
        converged[i] = 1;
        break;
      }
      bool newton_ok = false;
      if (it < cfg.implicit_max_iter / 2) {
        model.grad_b1(x, J);
        for (int r = 0; r < d; ++r)
          for (int cc = 0; cc < d; ++cc)
            J[r * d + cc] = ((r == cc) ? 1.0 : 0.0) - delta * J[r * d + cc];
        double rhs[kMaxDim];
        for (int c = 0; c < d; ++c) rhs[c] = -g[c];
        if (solve_dense(J, rhs, d)) {
          for (int c = 0; c < d; ++c) x[c] += rhs[c];
          newton_ok = true;
        }
      }
      if (!newton_ok) {
        // damped fixed point on x = base + delta b1(x)
        for (int c = 0; c < d; ++c) x[c] -= 0.5 * g[c];
      }
    }
    residuals[i] = res;
    std::memcpy(next.data() + i * d, x, sizeof(double) * d);
  });

  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, residuals[i]);
  if (max_residual_out) *max_residual_out = std::max(*max_residual_out, worst);
  for (int i = 0; i < n; ++i)
    if (!converged[i])
      throw SolverError("backward EM: implicit solve did not reach tolerance", worst);
  return Ensemble(d, std::move(next), ens.time() + delta);
}

void tamed_drift(std::span<const double> x, const Ensemble& ens, const ModelSpec& model,
                 const SchemeConfig& cfg, std::span<double> out) {
  require_dim(model);
  const int d = model.dim;
  if (cfg.taming_mode == TamingMode::gradient_norm) {
    double b1v[kMaxDim], J[kMaxDim * kMaxDim], full[kMaxDim];
    model.b1(x.data(), b1v);
    model.grad_b1(x.data(), J);
    const double denom = 1.0 + std::sqrt(cfg.delta) * hs_norm(J, d * d);
    drift_buffered(x.data(), ens, model, full);
    for (int c = 0; c < d; ++c) out[c] = b1v[c] / denom + (full[c] - b1v[c]);
  } else {
    double full[kMaxDim];
    drift_buffered(x.data(), ens, model, full);
    const double denom = 1.0 + std::pow(cfg.delta, cfg.kappa) * hs_norm(full, d);
    for (int c = 0; c < d; ++c) out[c] = full[c] / denom;
  }
}

Ensemble tamed_em_step(const Ensemble& ens, const ModelSpec& model, const SchemeConfig& cfg,
                       const double* dW, int threads) {
  require_dim(model);
  const int d = model.dim;
  const int n = ens.count();
  std::vector<double> next(static_cast<std::size_t>(n) * d);
  ens.refresh_mean();
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    double b[kMaxDim];
    const double* xi = ens.particle(static_cast<int>(i));
    tamed_drift(std::span<const double>(xi, d), ens, model, cfg, std::span<double>(b, d));
    double* out = next.data() + i * d;
    for (int c = 0; c < d; ++c)
      out[c] = xi[c] + b[c] * cfg.delta + model.sigma * dW[i * d + c];
  });
  return Ensemble(d, std::move(next), ens.time() + cfg.delta);
}

namespace {

// h = delta / (1 + max_i |b_i|^2), together with the max for invariant checks.
double adaptive_step_info(const Ensemble& ens, const ModelSpec& model, double delta,
                          double* max_b2_out) {
  const int d = model.dim;
  ens.refresh_mean();
  double worst = 0.0;
  double b[kMaxDim];
  for (int i = 0; i < ens.count(); ++i) {
    drift_buffered(ens.particle(i), ens, model, b);
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += b[c] * b[c];
    worst = std::max(worst, s);
  }
  if (max_b2_out) *max_b2_out = worst;
  return delta / (1.0 + worst);
}

}  // namespace

double adaptive_step_size(const Ensemble& ens, const ModelSpec& model, double delta) {
  require_dim(model);
  return adaptive_step_info(ens, model, delta, nullptr);
}

DelayHistory::DelayHistory(const Ensemble& initial_segment_value, int lag_steps, double delta)
    : lag_steps_(lag_steps), head_(static_cast<std::size_t>(lag_steps)) {
  if (lag_steps < 0) throw ConfigError("DelayHistory: lag must be nonnegative");
  ring_.reserve(lag_steps + 1);
  for (int k = 0; k <= lag_steps; ++k) {
    Ensemble e = initial_segment_value;
    e.set_time(-delta * (lag_steps - k));
    ring_.push_back(std::move(e));
  }
}

void DelayHistory::push(Ensemble next) {
  head_ = (head_ + 1) % ring_.size();
  ring_[head_] = std::move(next);
}

Ensemble delay_em_step(DelayHistory& hist, const ModelSpec& model, const SchemeConfig& cfg,
                       const double* dW, const double* dB, int threads) {
  require_dim(model);
  Ensemble next =
      em_update(hist.delayed(), hist.current(), model, cfg.delta, dW, dB, threads);
  hist.push(next);
  return next;
}

InitSampler InitSampler::point(std::vector<double> x0) {
  InitSampler s;
  s.kind = Kind::point_mass;
  s.a = std::move(x0);
  return s;
}

InitSampler InitSampler::gauss(std::vector<double> mean, std::vector<double> sd) {
  InitSampler s;
  s.kind = Kind::gaussian;
  s.a = std::move(mean);
  s.b = std::move(sd);
  return s;
}

InitSampler InitSampler::uniform(std::vector<double> lo, std::vector<double> hi) {
  InitSampler s;
  s.kind = Kind::uniform_box;
  s.a = std::move(lo);
  s.b = std::move(hi);
  return s;
}

Ensemble sample_initial(const InitSampler& init, int dim, int count, std::uint64_t master_seed,
                        std::uint64_t experiment_id,
                        const std::vector<std::uint64_t>* particle_stream_ids) {
  if (count < 1) throw ConfigError("sample_initial: particle count must be >= 1");
  auto coord = [&](const std::vector<double>& v, int c) -> double {
    if (v.empty()) throw ConfigError("sample_initial: missing sampler parameters");
    return v.size() == 1 ? v[0] : v.at(c);
  };
  std::vector<double> pos(static_cast<std::size_t>(count) * dim);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t pid =
        particle_stream_ids ? particle_stream_ids->at(i) : static_cast<std::uint64_t>(i);
    NoiseStream s{master_seed, experiment_id ^ kInitSalt, pid, MotionTag::W, dim, 1.0};
    const std::uint64_t key = s.key();
    for (int c = 0; c < dim; ++c) {
      double v = 0.0;
      switch (init.kind) {
        case InitSampler::Kind::point_mass:
          v = coord(init.a, c);
          break;
        case InitSampler::Kind::gaussian:
          v = coord(init.a, c) + coord(init.b, c) * stream_normal_from_key(key, c);
          break;
        case InitSampler::Kind::uniform_box:
          v = coord(init.a, c) +
              (coord(init.b, c) - coord(init.a, c)) * stream_uniform_from_key(key, c);
          break;
      }
      pos[static_cast<std::size_t>(i) * dim + c] = v;
    }
  }
  return Ensemble(dim, std::move(pos), 0.0);
}

namespace {

struct SnapshotCursor {
  const std::vector<double>* times;
  std::size_t next = 0;

  bool want(double t) const {
    return next < times->size() && (*times)[next] <= t + 1e-12;
  }
};

}  // namespace

SimResult simulate(const ModelSpec& model, const SimulateSpec& spec) {
  validate_scheme(spec.cfg, model);
  const SchemeConfig& cfg = spec.cfg;
  const int d = model.dim;
  const int n = spec.N;
  const int m = model.sigma0_cols;

  std::vector<double> sorted_times = spec.snapshot_times;
  std::sort(sorted_times.begin(), sorted_times.end());
  for (double t : sorted_times) {
    if (t < 0.0 || t > cfg.horizon + 1e-12)
      throw ConfigError("simulate: snapshot time outside [0, horizon]");
    if (cfg.kind != SchemeKind::adaptive_em) {
      const double ratio = t / cfg.delta;
      if (std::fabs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("simulate: snapshot time is not on the scheme's time grid");
    }
  }

  SimResult result;
  result.snapshots.reserve(sorted_times.size());

  Ensemble ens = sample_initial(spec.init, d, n, spec.master_seed,
                                spec.init_experiment.value_or(spec.experiment_id),
                                spec.particle_stream_ids.empty() ? nullptr
                                                                 : &spec.particle_stream_ids);

  SnapshotCursor cursor{&sorted_times, 0};
  auto record_up_to = [&](double t, const Ensemble& e, bool valid) {
    while (cursor.want(t)) {
      result.snapshots.push_back(e);
      result.snapshot_valid.push_back(valid ? 1 : 0);
      ++cursor.next;
    }
  };
  auto mark_rest_invalid = [&](const Ensemble& e) {
    while (cursor.next < sorted_times.size()) {
      result.snapshots.push_back(e);
      result.snapshot_valid.push_back(0);
      ++cursor.next;
    }
  };

  record_up_to(0.0, ens, true);
  if (cfg.horizon == 0.0) {
    result.reached_horizon = true;
    return result;
  }

  // per-particle stream keys
  std::vector<std::uint64_t> wkeys(n), bkeys(m > 0 ? n : 0);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t pid = spec.particle_stream_ids.empty()
                                  ? static_cast<std::uint64_t>(i)
                                  : spec.particle_stream_ids[i];
    wkeys[i] = NoiseStream{spec.master_seed, spec.experiment_id, pid, MotionTag::W, d, cfg.delta}.key();
    if (m > 0)
      bkeys[i] =
          NoiseStream{spec.master_seed, spec.experiment_id, pid, MotionTag::B, m, cfg.delta}.key();
  }

  std::vector<double> dW(static_cast<std::size_t>(n) * d);
  std::vector<double> dB(m > 0 ? static_cast<std::size_t>(n) * m : 0);

  auto check_blowup = [&](const Ensemble& e, double t) {
    if (!e.finite()) {
      result.blew_up = true;
      result.blowup_time = t;
      return true;
    }
    return false;
  };

  if (cfg.kind == SchemeKind::adaptive_em) {
    const std::uint64_t max_steps =
        static_cast<std::uint64_t>(std::ceil(cfg.horizon / cfg.delta)) * 100000ULL + 1000ULL;
    double t = 0.0;
    std::uint64_t step = 0;
    result.adaptive_grid.push_back(0.0);
    while (t < cfg.horizon) {
      if (step >= max_steps) break;  // grid failed to reach the horizon
      ens.refresh_mean();
      double max_b2 = 0.0;
      const double h = adaptive_step_info(ens, model, cfg.delta, &max_b2);
      // step-rule bounds: h <= delta and (1 + max|b|^2) h <= delta
      result.max_adaptive_violation =
          std::max(result.max_adaptive_violation,
                   std::max(h - cfg.delta, (1.0 + max_b2) * h - cfg.delta));
      const double sqrt_h = std::sqrt(h);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c)
          dW[static_cast<std::size_t>(i) * d + c] =
              sqrt_h * stream_normal_from_key(wkeys[i], step * static_cast<std::uint64_t>(d) + c);
      Ensemble next = em_update(ens, ens, model, h, dW.data(), nullptr, spec.threads);
      t += h;
      next.set_time(t);
      ++step;
      result.adaptive_grid.push_back(t);
      if (check_blowup(next, t)) {
        mark_rest_invalid(next);
        result.steps_taken = step;
        return result;
      }
      ens = std::move(next);
      record_up_to(t, ens, true);
    }
    result.steps_taken = step;
    result.reached_horizon = t >= cfg.horizon;
    if (!result.reached_horizon) mark_rest_invalid(ens);
    return result;
  }

  const double steps_f = cfg.horizon / cfg.delta;
  const std::uint64_t steps = static_cast<std::uint64_t>(std::llround(steps_f));
  if (std::fabs(steps_f - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_f))
    throw ConfigError("simulate: horizon must be an integer multiple of delta");
  if (spec.prepared_dW && spec.prepared_dW->size() !=
                              steps * static_cast<std::size_t>(n) * static_cast<std::size_t>(d))
    throw ConfigError("simulate: prepared increment array has the wrong shape");

  std::optional<DelayHistory> hist;
  if (cfg.kind == SchemeKind::delay_em) {
    const int lag = static_cast<int>(std::llround(cfg.r0 / cfg.delta));
    hist.emplace(ens, lag, cfg.delta);
  }

  for (std::uint64_t stepn = 0; stepn < steps; ++stepn) {
    if (spec.prepared_dW) {
      const double* src = spec.prepared_dW->data() + stepn * static_cast<std::size_t>(n) * d;
      std::memcpy(dW.data(), src, sizeof(double) * static_cast<std::size_t>(n) * d);
    } else {
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c)
          dW[static_cast<std::size_t>(i) * d + c] =
              std::sqrt(cfg.delta) *
              stream_normal_from_key(wkeys[i], stepn * static_cast<std::uint64_t>(d) + c);
    }
    if (m > 0) {
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c)
          dB[static_cast<std::size_t>(i) * m + c] =
              std::sqrt(cfg.delta) *
              stream_normal_from_key(bkeys[i], stepn * static_cast<std::uint64_t>(m) + c);
    }
    const double t_next = static_cast<double>(stepn + 1) * cfg.delta;
    Ensemble next;
    switch (cfg.kind) {
      case SchemeKind::explicit_em:
        ens.refresh_mean();
        next = em_update(ens, ens, model, cfg.delta, dW.data(), m > 0 ? dB.data() : nullptr,
                         spec.threads);
        break;
      case SchemeKind::backward_em:
        ens.refresh_mean();
        next = backward_em_step(ens, model, cfg, dW.data(), &result.max_residual, spec.threads);
        break;
      case SchemeKind::tamed_em:
        next = tamed_em_step(ens, model, cfg, dW.data(), spec.threads);
        break;
      case SchemeKind::delay_em:
        hist->delayed().refresh_mean();
        next = delay_em_step(*hist, model, cfg, dW.data(), m > 0 ? dB.data() : nullptr,
                             spec.threads);
        break;
      default:
        throw ConfigError("simulate: unreachable scheme kind");
    }
    next.set_time(t_next);
    result.steps_taken = stepn + 1;
    if (check_blowup(next, t_next)) {
      mark_rest_invalid(next);
      return result;
    }
    ens = std::move(next);
    record_up_to(t_next, ens, true);
  }
  result.reached_horizon = true;
  return result;
}

}  // namespace mvsde
