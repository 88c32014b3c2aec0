#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsde {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Which Brownian motion of a particle the stream drives.
enum class MotionTag : std::uint32_t { W = 0, B = 1, W2 = 2 };

/// Address of one independent Gaussian increment stream. Identical
/// (master_seed, experiment, particle, tag, dim, dt, index) always yields the
/// bitwise-identical draw; distinct ids never share state.
struct NoiseStream {
  std::uint64_t master_seed = 0;
  std::uint64_t experiment = 0;  // experiment / system / replicate id
  std::uint64_t particle = 0;
  MotionTag tag = MotionTag::W;
  int dim = 1;
  double dt = 1.0;

  std::uint64_t key() const;

  /// k-th raw 64-bit word of the stream (counter mode, stateless).
  std::uint64_t raw(std::uint64_t k) const;

  /// flat_index-th standard normal times sqrt(dt). Index ordering is
  /// row-major over (draw row, component).
  double normal(std::uint64_t flat_index) const;

  /// Increment for row `row`, component `c` (variance dt each).
  double increment(std::uint64_t row, int c) const {
    return normal(row * static_cast<std::uint64_t>(dim) + c);
  }
};

/// Key-level primitives for hot loops (identical draws as the NoiseStream
/// methods, with the key derivation hoisted out).
std::uint64_t stream_raw_from_key(std::uint64_t key, std::uint64_t k);
double stream_normal_from_key(std::uint64_t key, std::uint64_t flat_index);  // unit variance
double stream_uniform_from_key(std::uint64_t key, std::uint64_t index);      // in (0, 1]

/// count x dim matrix of i.i.d. N(0, dt * I) rows, row-major.
std::vector<double> gaussian_increments(const NoiseStream& stream, std::uint64_t count);

/// Sums consecutive groups of `factor` rows: the same Brownian path sampled
/// at step factor*dt. factor must divide the row count.
std::vector<double> coarsen(const std::vector<double>& increments, int dim, int factor);

}  // namespace mvsde
