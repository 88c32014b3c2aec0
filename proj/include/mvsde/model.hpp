#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/paths.hpp"

namespace mvsde {

struct InvalidStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Any coordinate beyond this magnitude (or non-finite) counts as a detected
/// blow-up, never as silent corruption.
constexpr double kBlowupThreshold = 1e100;

/// Structural constants of the drift/noise hypotheses. `lambda0` is the
/// slope of the short-range profile phi(r) = lambda0 * r, `lambda` the
/// long-range dissipativity rate beyond `ell0`, `K` the Lipschitz constant of
/// the interaction kernel, `L` the squared-Lipschitz constant of the
/// multiplicative intensity, and (alpha, lambda_b1, lambda_b1_hat, lstar)
/// the growth/gradient constants used by the tamed-scheme step bound.
struct ModelConstants {
  double lambda0 = 0.0;
  double lambda = 1.0;
  double ell0 = 0.0;
  double K = 0.0;
  double L = 0.0;
  double alpha = 0.0;
  double lambda_b1 = 0.0;
  double lambda_b1_hat = 0.0;
  double lstar = 0.0;
};

using VecFn = std::function<void(const double*, double*)>;

/// Coefficients of the drift decomposition b(x, mu) = b1(x) + (b0 * mu)(x)
/// plus the noise intensities. Immutable after construction; all evaluators
/// are pure functions safe to call concurrently.
struct ModelSpec {
  std::string name;
  int dim = 1;
  VecFn b1;        // x[dim] -> out[dim]
  VecFn grad_b1;   // x[dim] -> out[dim*dim], row-major Jacobian
  VecFn b0;        // kernel z[dim] -> out[dim]; may be empty if linear form given
  std::optional<double> b0_linear_coeff;  // declared form b0(z) = -coeff * z
  double sigma = 1.0;
  int sigma0_cols = 0;  // m; 0 means sigma0 == 0
  VecFn sigma0;         // x[dim] -> out[dim*m], row-major
  ModelConstants constants;

  bool has_interaction() const {
    return (b0_linear_coeff && *b0_linear_coeff != 0.0) || (!b0_linear_coeff && b0);
  }
  bool has_sigma0() const { return sigma0_cols > 0; }
};

/// N particle positions in R^d at one time point; the empirical measure is
/// the uniform measure on the rows. The coordinate mean is cached so linear
/// interaction kernels get an O(1) per-query path.
class Ensemble {
public:
  Ensemble() = default;
  Ensemble(int dim, std::vector<double> positions, double time = 0.0);

  int dim() const { return dim_; }
  int count() const { return count_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  const std::vector<double>& positions() const { return positions_; }
  std::vector<double>& mutable_positions() { mean_valid_ = false; return positions_; }
  const double* particle(int i) const { return positions_.data() + static_cast<std::size_t>(i) * dim_; }

  /// Exact order-independent coordinate mean (cached).
  const std::vector<double>& mean() const;
  void refresh_mean() const { mean(); }

  /// True if every coordinate is finite and below the blow-up threshold.
  bool finite() const;

private:
  int dim_ = 1;
  int count_ = 0;
  double time_ = 0.0;
  std::vector<double> positions_;
  mutable std::vector<double> mean_;
  mutable bool mean_valid_ = false;
};

/// Hard cap on the state dimension (keeps per-particle scratch on the stack).
constexpr int kMaxModelDim = 16;

/// (b0 * mu)(x) with mu the empirical measure of `ens`: (1/N) sum_j b0(x - x_j).
/// Declared-linear kernels use the cached ensemble mean.
void interaction_conv(std::span<const double> x, const Ensemble& ens,
                      const ModelSpec& model, std::span<double> out);

/// b(x, mu) = b1(x) + (b0 * mu)(x).
void drift(std::span<const double> x, const Ensemble& ens, const ModelSpec& model,
           std::span<double> out);

/// Allocation-free drift for hot loops. Call ens.refresh_mean() before using
/// this from parallel sections (the mean cache is lazily filled).
void drift_buffered(const double* x, const Ensemble& ens, const ModelSpec& model,
                    double* out);

struct DissipativityReport {
  bool pass = false;
  double max_b1_violation = 0.0;  // worst slack of the split dissipativity bound
  double max_b0_violation = 0.0;  // worst slack of the kernel Lipschitz bound
  std::vector<double> worst_x, worst_y;
  double worst_r = 0.0;
  int pairs = 0;
};

/// Samples pairs with |x - y| <= radius and reports the maximal violation of
/// the split dissipativity inequality for b1 and of the Lipschitz bound for b0.
DissipativityReport check_dissipativity(const ModelSpec& model, int n_pairs,
                                        double radius, std::uint64_t seed);

/// Gallery parameters selectable from a config file.
struct GalleryParams {
  int dim = 1;
  double beta = 1.0;        // OU reversion rate
  double alpha = 0.0;       // OU mean (all coordinates)
  double K_interaction = 0.0;
  double sigma = 1.0;
  double L_mult = 0.0;      // >0 attaches sigma0(x) = sqrt(L)*diag(sin x_i)
};

/// Built-in models: "double-well-1d", "ou", "double-well-nd".
ModelSpec make_gallery_model(const std::string& name, const GalleryParams& params = {});

}  // namespace mvsde
