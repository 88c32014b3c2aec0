#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/model.hpp"
#include "mvsde/paths.hpp"

namespace mvsde {

struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg, double residual)
      : std::runtime_error(msg), worst_residual(residual) {}
  double worst_residual;
};

enum class SchemeKind { explicit_em, backward_em, tamed_em, adaptive_em, delay_em };
enum class TamingMode { drift_norm, gradient_norm };

SchemeKind scheme_kind_from_string(const std::string& s);
std::string to_string(SchemeKind k);

struct SchemeConfig {
  SchemeKind kind = SchemeKind::explicit_em;
  double delta = 0.01;
  TamingMode taming_mode = TamingMode::gradient_norm;
  double kappa = 0.5;          // drift_norm exponent, in (0, 1/2]
  double implicit_tol = 1e-12;
  int implicit_max_iter = 100;
  double r0 = 0.0;             // delay length; integer multiple of delta
  double horizon = 1.0;
};

/// Step-size threshold of the tamed gradient-norm scheme:
///   delta*_kappa = 1 ^ alpha^{-1/2} ^ lambda_b1^2/lhat^4
///                  ^ (kappa_t / (2 alpha (2K + rho(1+1/alpha) + lhat^2)))^2
///                  ^ 1/(kappa_t/4 + K + rho)
/// with rho = 4K(K + lhat) and kappa_t = alpha lambda_b1 - 2K (must be > 0).
double delta_star_kappa(const ModelSpec& model);

/// Informational threshold of the backward-EM error theorem; the enforced
/// solvability bound is delta < 1/(2(lambda0 + K)).
double delta_star_backward(const ModelSpec& model);

/// Throws ConfigError naming the violated bound.
void validate_scheme(const SchemeConfig& cfg, const ModelSpec& model);

// --- one-step maps (no validation; the empirical measure and positions are
// --- frozen at the step start snapshot `ens`)

/// x_i <- x_i + b(x_i, ens) dt + sigma dW_i + sigma0(x_i) dB_i.
/// dW is N x d row-major with variance dt; dB is N x m or nullptr.
Ensemble explicit_em_step(const Ensemble& ens, const ModelSpec& model, double dt,
                          const double* dW, const double* dB, int threads = 1);

/// Per-particle implicit solve x* = x_i + b1(x*) delta + conv_i delta + sigma dW_i
/// with the interaction term frozen at the old positions. Newton with the
/// analytic Jacobian I - delta grad_b1, damped fixed-point fallback.
/// Residual norm <= cfg.implicit_tol at every accepted step or SolverError.
Ensemble backward_em_step(const Ensemble& ens, const ModelSpec& model,
                          const SchemeConfig& cfg, const double* dW,
                          double* max_residual_out = nullptr, int threads = 1);

/// gradient_norm: b1(x)/(1 + delta^{1/2} ||grad b1(x)||_HS) + (b0*mu)(x);
/// drift_norm:    b(x,mu)/(1 + delta^kappa |b(x,mu)|).
void tamed_drift(std::span<const double> x, const Ensemble& ens, const ModelSpec& model,
                 const SchemeConfig& cfg, std::span<double> out);

Ensemble tamed_em_step(const Ensemble& ens, const ModelSpec& model, const SchemeConfig& cfg,
                       const double* dW, int threads = 1);

/// h = delta * min_i 1/(1 + |b(x_i, ens)|^2); h <= delta and (1+max|b|^2) h <= delta.
double adaptive_step_size(const Ensemble& ens, const ModelSpec& model, double delta);

/// Ring buffer of the last r0/delta + 1 ensembles; lookups at t - r0 hit an
/// exact stored grid point. A step from t_n to t_{n+1} reads the delayed
/// state at t_{n+1} - r0 (for r0 = 0 this degenerates to the current state,
/// keeping the scheme explicit).
class DelayHistory {
public:
  DelayHistory(const Ensemble& initial_segment_value, int lag_steps, double delta);
  int lag_steps() const { return lag_steps_; }
  const Ensemble& current() const { return ring_[head_]; }
  const Ensemble& delayed() const {
    return lag_steps_ <= 0 ? current() : ring_[(head_ + 2) % ring_.size()];
  }
  void push(Ensemble next);

private:
  int lag_steps_;
  std::size_t head_;
  std::vector<Ensemble> ring_;
};

/// y <- y + b(y_delayed, ens_delayed) delta + sigma dW + sigma0(y) dB.
/// With r0 = 0 this is bitwise the explicit step.
Ensemble delay_em_step(DelayHistory& hist, const ModelSpec& model, const SchemeConfig& cfg,
                       const double* dW, const double* dB, int threads = 1);

// --- trajectory driver

struct InitSampler {
  enum class Kind { point_mass, gaussian, uniform_box };
  Kind kind = Kind::point_mass;
  std::vector<double> a;  // point: x0; gaussian: mean; uniform: lower corner
  std::vector<double> b;  // gaussian: per-coordinate stddev; uniform: upper corner

  static InitSampler point(std::vector<double> x0);
  static InitSampler gauss(std::vector<double> mean, std::vector<double> sd);
  static InitSampler uniform(std::vector<double> lo, std::vector<double> hi);
};

Ensemble sample_initial(const InitSampler& init, int dim, int count, std::uint64_t master_seed,
                        std::uint64_t experiment_id,
                        const std::vector<std::uint64_t>* particle_stream_ids = nullptr);

struct SimulateSpec {
  SchemeConfig cfg;
  int N = 1;
  InitSampler init;
  std::uint64_t master_seed = 0;
  std::uint64_t experiment_id = 0;
  std::vector<double> snapshot_times;
  int threads = 1;
  /// Optional pre-generated Brownian increments with variance cfg.delta,
  /// laid out [step][particle][dim] (fixed-step schemes only; enables
  /// common-random-number coarsening across step sizes).
  const std::vector<double>* prepared_dW = nullptr;
  /// Optional per-particle stream ids (defaults to 0..N-1).
  std::vector<std::uint64_t> particle_stream_ids;
  /// Optional separate experiment id for the initial sampling (lets runs with
  /// different noise streams share initial values).
  std::optional<std::uint64_t> init_experiment;
};

struct SimResult {
  std::vector<Ensemble> snapshots;
  std::vector<std::uint8_t> snapshot_valid;
  bool blew_up = false;
  double blowup_time = 0.0;
  bool reached_horizon = false;
  std::vector<double> adaptive_grid;   // realized grid times (adaptive runs)
  double max_adaptive_violation = 0.0; // max over steps of the T7 bound slack
  double max_residual = 0.0;           // backward runs
  std::uint64_t steps_taken = 0;
};

/// Deterministic given (model, cfg, N, seeds); independent of `threads`.
SimResult simulate(const ModelSpec& model, const SimulateSpec& spec);

}  // namespace mvsde
