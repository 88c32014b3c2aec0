#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>

namespace mvsde {

/// Order-independent exact accumulator for doubles.
///
/// Every double is split into its integer mantissa and added into fixed
/// 32-bit-wide binary bins held in int64 limbs, so accumulation is pure
/// integer arithmetic: the result is a function of the *multiset* of inputs,
/// not of the summation order or the thread partitioning. Reductions over
/// particles therefore stay bitwise reproducible under permutation of the
/// particle indices and under any parallel split.
///
/// Headroom: each add touches three limbs with values < 2^53, so ~2^30 adds
/// fit before an int64 limb could overflow; callers here sum far fewer.
class ExactSum {
public:
  ExactSum() { reset(); }

  void reset() { std::memset(limbs_, 0, sizeof(limbs_)); }

  void add(double x) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    const std::uint64_t frac = bits & ((std::uint64_t{1} << 52) - 1);
    const int biased = static_cast<int>((bits >> 52) & 0x7FF);
    if (biased == 0x7FF) return;  // inf/nan: caller screens these before summing
    std::int64_t mant;
    int e2;  // x = mant * 2^e2
    if (biased == 0) {
      if (frac == 0) return;
      mant = static_cast<std::int64_t>(frac);
      e2 = -1074;
    } else {
      mant = static_cast<std::int64_t>(frac | (std::uint64_t{1} << 52));
      e2 = biased - 1075;
    }
    if (bits >> 63) mant = -mant;

    const int pos = e2 + kBias;  // >= 0
    const int idx = pos >> 5;
    const int sh = pos & 31;
    const __int128 v = static_cast<__int128>(mant) << sh;
    limbs_[idx] += static_cast<std::int64_t>(v & 0xFFFFFFFF);
    limbs_[idx + 1] += static_cast<std::int64_t>((v >> 32) & 0xFFFFFFFF);
    limbs_[idx + 2] += static_cast<std::int64_t>(v >> 64);
  }

  void add(std::span<const double> xs) {
    for (double x : xs) add(x);
  }

  /// Canonical rounded value. Carries are fully propagated first, so the
  /// result depends only on the exact integer sum.
  double value() const {
    std::int64_t norm[kLimbs];
    std::int64_t carry = 0;
    for (int i = 0; i < kLimbs; ++i) {
      const std::int64_t t = limbs_[i] + carry;
      std::int64_t r = ((t % kBase) + kBase) % kBase;  // representative in [0, 2^32)
      carry = (t - r) >> 32;
      if (r > kBase / 2 || (r == kBase / 2 && carry % 2 != 0)) {
        // keep limbs balanced so the top limb carries the sign
        r -= kBase;
        carry += 1;
      }
      norm[i] = r;
    }
    // carry out of the top is impossible for |sum| below ~2^1024
    int hi = kLimbs - 1;
    while (hi > 0 && norm[hi] == 0) --hi;
    double out = 0.0;
    for (int i = hi; i >= 0 && i > hi - 4; --i) {
      out += std::ldexp(static_cast<double>(norm[i]), 32 * i - kBias);
    }
    return out;
  }

private:
  static constexpr int kBias = 1120;  // covers exponents down to 2^-1074
  static constexpr int kLimbs = 70;   // 32*70 - 1120 = 1120 > 1024+53
  static constexpr std::int64_t kBase = std::int64_t{1} << 32;

  std::int64_t limbs_[kLimbs];
};

/// Exact order-independent sum of a range.
inline double exact_sum(std::span<const double> xs) {
  ExactSum acc;
  acc.add(xs);
  return acc.value();
}

}  // namespace mvsde
