#pragma once
// Iterative radix-2 FFT for power-of-two sizes, plus FFT-based linear
// convolution. Twiddle factors come from a per-size cache computed with
// direct sin/cos calls, so repeated transforms are fast and accumulate no
// recurrence error.

#include <cstddef>
#include <map>
#include <vector>

#include "rirsf/common.hpp"

namespace rirsf {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// Twiddles e^{-2*pi*i*k/n} for k in [0, n/2).
inline const std::vector<cdouble>& twiddles(std::size_t n) {
  static thread_local std::map<std::size_t, std::vector<cdouble>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cdouble> tw(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double ang = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = cdouble(std::cos(ang), std::sin(ang));
  }
  return cache.emplace(n, std::move(tw)).first->second;
}

}  // namespace detail

// In-place transform; `inverse` includes the 1/n normalization.
inline void fft_inplace(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if (!is_pow2(n)) throw ConfigError("fft size must be a power of two");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const auto& tw = detail::twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        cdouble w = tw[j * stride];
        if (inverse) w = std::conj(w);
        const cdouble u = a[i + j];
        const cdouble v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }

  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Linear convolution of two real sequences; output length |a| + |b| - 1.
inline std::vector<double> fft_convolve(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(out_len);
  std::vector<cdouble> fa(n), fb(n);
  for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  fft_inplace(fa, false);
  fft_inplace(fb, false);
  for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  fft_inplace(fa, true);
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
  return out;
}

}  // namespace rirsf
