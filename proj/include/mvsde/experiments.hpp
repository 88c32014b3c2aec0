#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvsde/config.hpp"
#include "mvsde/coupling.hpp"
#include "mvsde/metrics.hpp"
#include "mvsde/model.hpp"
#include "mvsde/schemes.hpp"

namespace mvsde {

extern const char* kVersion;

struct GridSeries {
  double grid_value = 0.0;
  std::vector<double> times;
  std::vector<double> estimates;
  std::vector<double> stderrs;
};

struct AcceptanceWindow {
  bool enabled = false;
  double slope_min = -1e300;
  double slope_max = 1e300;
  double r2_min = 0.0;
  std::optional<double> rate_target;  // exponential fits: |rate - target| <= rate_tol
  double rate_tol = 0.0;
};

struct ExperimentReport {
  std::string experiment;
  std::string version;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
  std::vector<GridSeries> grid;
  bool has_fit = false;
  RateFit fit;
  AcceptanceWindow window;
  bool pass = true;
  bool error = false;
  double wall_clock_sec = 0.0;  // excluded from the determinism contract
  std::vector<std::string> notes;

  std::string to_json() const;  // pretty-printed, stable field order
  std::string to_csv() const;   // grid_value,time,estimate,stderr
  void write(const std::string& out_dir) const;
};

/// Gallery model resolved from config keys
/// (model, dim, beta, alpha, K_interaction, sigma, L_mult).
ModelSpec model_from_config(KeyValueConfig& cfg, const std::string& default_name,
                            const GalleryParams& defaults = {});

// --- experiment configurations (defaults are the acceptance-criteria runs)

struct ChaosConfig {
  GalleryParams model_params{.K_interaction = 0.05, .sigma = 1.0};
  std::string model_name = "double-well-1d";
  std::vector<double> n_grid{64, 128, 256, 512, 1024, 2048};
  int n_ref = 16384;
  int reps = 32;
  double delta = 0.01;
  double t_measure = 10.0;
  AcceptanceWindow window{true, -0.65, -0.35, 0.85, std::nullopt, 0.0};
  static ChaosConfig from_config(KeyValueConfig& cfg);
};
ExperimentReport run_chaos_experiment(const ChaosConfig& cfg, std::uint64_t seed, int threads);

struct DeltaRateConfig {
  GalleryParams model_params{.K_interaction = 0.0, .sigma = 1.0};
  std::string model_name = "double-well-1d";
  SchemeKind scheme = SchemeKind::tamed_em;
  TamingMode taming_mode = TamingMode::gradient_norm;
  double kappa = 0.5;
  std::vector<double> delta_grid{0.02, 0.04, 0.08, 0.16};
  int ref_divisor = 8;  // delta_ref = min(grid) / ref_divisor
  int pool = 16384;     // independent particles per replicate
  int reps = 1;         // replicate estimates averaged per delta (adaptive: 4)
  double t_measure = 10.24;  // common grid point of every delta in the grid
  AcceptanceWindow window{true, 0.35, 0.8, 0.8, std::nullopt, 0.0};
  static DeltaRateConfig from_config(KeyValueConfig& cfg);
};
ExperimentReport run_delta_experiment(const DeltaRateConfig& cfg, std::uint64_t seed,
                                      int threads);

struct DecayConfig {
  GalleryParams model_params{.K_interaction = 0.05, .sigma = 1.0};
  std::string model_name = "double-well-1d";
  double x0_a = 2.0, x0_b = -2.0;  // initial point masses
  int N = 512;
  int reps = 32;
  double delta = 0.01;
  double horizon = 20.0;
  double sample_dt = 0.25;
  double tail_start = 5.0;
  AcceptanceWindow window{true, -1e300, 1e300, 0.9, std::nullopt, 0.0};  // rate>0 implied
  static DecayConfig from_config(KeyValueConfig& cfg);
};
ExperimentReport run_decay_experiment(const DecayConfig& cfg, std::uint64_t seed, int threads);

struct DelayRateConfig {
  GalleryParams model_params{.beta = 1.0, .alpha = 0.0, .K_interaction = 0.0, .sigma = 1.0};
  std::string model_name = "ou";
  std::vector<double> r0_grid{0.02, 0.04, 0.08, 0.16, 0.32};
  double delta = 0.0025;
  int pool = 4096;   // particles per replicate
  int reps = 8;      // replicate estimates averaged per r0
  double horizon = 4.0;
  AcceptanceWindow window{true, 0.3, 0.8, 0.8, std::nullopt, 0.0};
  static DelayRateConfig from_config(KeyValueConfig& cfg);
};
ExperimentReport run_delay_experiment(const DelayRateConfig& cfg, std::uint64_t seed,
                                      int threads);

struct MomentConfig {
  GalleryParams model_params{.K_interaction = 0.05, .sigma = 1.0};
  std::string model_name = "double-well-1d";
  double x0 = 3.0;
  int N = 256;
  int reps = 4;
  double delta = 0.25;
  double horizon = 200.0;
  double sample_dt = 1.0;
  std::vector<double> p_grid{2, 4, 6};
  double kappa = 0.5;  // drift_norm taming exponent for the tamed run
  static MomentConfig from_config(KeyValueConfig& cfg);
};
/// Tracks p-moments for backward/tamed/adaptive (bounded: last-quartile mean
/// <= 2x middle-quartile mean) and runs explicit EM expecting the blow-up flag.
ExperimentReport run_moment_experiment(const MomentConfig& cfg, std::uint64_t seed,
                                       int threads);

struct CoupleCheckConfig {
  GalleryParams model_params{.K_interaction = 0.0, .sigma = 1.0};
  std::string model_name = "ou";
  MarginalValidationConfig validation;
  static CoupleCheckConfig from_config(KeyValueConfig& cfg);
};
ExperimentReport run_couple_check(const CoupleCheckConfig& cfg, std::uint64_t seed,
                                  int threads);

struct ContractionCheckConfig {
  GalleryParams model_params{.K_interaction = 0.05, .sigma = 1.0};
  std::string model_name = "double-well-1d";
  double r_max = 0.0;  // 0: default 10 * ell0
  int n_grid = 10000;
  static ContractionCheckConfig from_config(KeyValueConfig& cfg);
};
ExperimentReport run_contraction_check(const ContractionCheckConfig& cfg);

struct SimulateRunConfig {
  GalleryParams model_params{.sigma = 1.0};
  std::string model_name = "double-well-1d";
  SchemeConfig scheme;
  int N = 64;
  InitSampler init = InitSampler::gauss({0.0}, {1.0});
  std::vector<double> snapshot_times;
  bool binary = false;
  static SimulateRunConfig from_config(KeyValueConfig& cfg);
};
/// Writes snapshots (CSV `time,particle,coord_0..` or a binary column dump)
/// and a small JSON run report.
ExperimentReport run_simulate(const SimulateRunConfig& cfg, std::uint64_t seed, int threads,
                              const std::string& out_dir);

}  // namespace mvsde
