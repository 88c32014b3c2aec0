#include "mvsde/paths.hpp"

#include <cmath>

namespace mvsde {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t chain(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kGamma + v);
}

// uniform in (0, 1], exactly representable
inline double to_unit(std::uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

}  // namespace

std::uint64_t NoiseStream::key() const {
  std::uint64_t h = mix64(master_seed ^ 0x6D76736465ULL);  // "mvsde"
  h = chain(h, experiment);
  h = chain(h, particle);
  h = chain(h, static_cast<std::uint64_t>(tag));
  return h;
}

std::uint64_t stream_raw_from_key(std::uint64_t key, std::uint64_t k) {
  return mix64(key + (k + 1) * kGamma);
}

double stream_normal_from_key(std::uint64_t key, std::uint64_t flat_index) {
  const double u1 = to_unit(stream_raw_from_key(key, 2 * flat_index));
  const double u2 = to_unit(stream_raw_from_key(key, 2 * flat_index + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

double stream_uniform_from_key(std::uint64_t key, std::uint64_t index) {
  return to_unit(stream_raw_from_key(key, index));
}

std::uint64_t NoiseStream::raw(std::uint64_t k) const { return stream_raw_from_key(key(), k); }

double NoiseStream::normal(std::uint64_t flat_index) const {
  if (!(dt > 0.0)) throw ConfigError("NoiseStream: dt must be positive");
  return stream_normal_from_key(key(), flat_index) * std::sqrt(dt);
}

std::vector<double> gaussian_increments(const NoiseStream& stream, std::uint64_t count) {
  if (count < 1) throw ConfigError("gaussian_increments: count must be >= 1");
  if (!(stream.dt > 0.0)) throw ConfigError("gaussian_increments: dt must be positive");
  std::vector<double> out(count * static_cast<std::size_t>(stream.dim));
  for (std::uint64_t i = 0; i < out.size(); ++i) out[i] = stream.normal(i);
  return out;
}

std::vector<double> coarsen(const std::vector<double>& increments, int dim, int factor) {
  if (dim < 1) throw ConfigError("coarsen: dim must be >= 1");
  if (factor < 1) throw ConfigError("coarsen: factor must be >= 1");
  const std::size_t n = increments.size() / static_cast<std::size_t>(dim);
  if (n * static_cast<std::size_t>(dim) != increments.size())
    throw ConfigError("coarsen: array size is not a multiple of dim");
  if (n % static_cast<std::size_t>(factor) != 0)
    throw ConfigError("coarsen: factor does not divide the row count");
  if (factor == 1) return increments;

  // Power-of-two factors reduce by repeated pairwise halving, so splitting a
  // factor as f1*f2 gives bitwise the same rows as one pass (the delta-rate
  // grids only use power-of-two refinements).
  if ((factor & (factor - 1)) == 0) {
    std::vector<double> cur = increments;
    int f = factor;
    while (f > 1) {
      const std::size_t rows = cur.size() / dim / 2;
      std::vector<double> next(rows * dim);
      for (std::size_t r = 0; r < rows; ++r)
        for (int c = 0; c < dim; ++c)
          next[r * dim + c] = cur[(2 * r) * dim + c] + cur[(2 * r + 1) * dim + c];
      cur.swap(next);
      f >>= 1;
    }
    return cur;
  }

  const std::size_t m = n / static_cast<std::size_t>(factor);
  std::vector<double> out(m * dim, 0.0);
  for (std::size_t g = 0; g < m; ++g)
    for (int f = 0; f < factor; ++f)
      for (int c = 0; c < dim; ++c)
        out[g * dim + c] += increments[(g * factor + f) * dim + c];
  return out;
}

}  // namespace mvsde
