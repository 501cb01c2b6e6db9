#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/fft.hpp"
#include "rirsf/stft.hpp"

using namespace rirsf;

namespace {

// Quadratic-time DFT used as the transform oracle.
std::vector<cdouble> naive_dft(const std::vector<cdouble>& x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<cdouble> out(n, cdouble(0, 0));
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      out[k] += x[j] * std::polar(1.0, sign * kTwoPi * double(k) * double(j) /
                                           double(n));
  if (inverse)
    for (auto& v : out) v /= double(n);
  return out;
}

std::vector<double> direct_convolve(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Waveform random_wave(std::size_t channels, std::size_t samples, double fs,
                     std::uint64_t seed) {
  RandomStream rng(seed);
  Waveform w(channels, samples, fs);
  for (auto& v : w.data) v = rng.normal();
  return w;
}

double max_abs_error(const Waveform& a, const Waveform& b) {
  REQUIRE(a.channels == b.channels);
  REQUIRE(a.samples == b.samples);
  double e = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    e = std::max(e, std::abs(a.data[i] - b.data[i]));
  return e;
}

}  // namespace

TEST_CASE("principal phase lands in (-pi, pi]") {
  CHECK(principal_phase(cdouble(1, 0)) == 0.0);
  CHECK(principal_phase(cdouble(0, 0)) == 0.0);
  CHECK(principal_phase(cdouble(-1, 0)) == Catch::Approx(kPi));
  CHECK(principal_phase(cdouble(0, 1)) == Catch::Approx(kPi / 2));
  CHECK(principal_phase(cdouble(0, -1)) == Catch::Approx(-kPi / 2));
}

TEST_CASE("wrap_phase maps any angle into (-pi, pi]") {
  for (double x : {0.0, 0.1, -0.1, 3.0, -3.0, 7.5, -7.5, 100.0, -100.0, kPi,
                   -kPi, 2 * kPi, 5 * kPi}) {
    const double w = wrap_phase(x);
    CHECK(w > -kPi - 1e-12);
    CHECK(w <= kPi + 1e-12);
    // Same angle modulo 2*pi.
    CHECK(std::abs(std::remainder(w - x, kTwoPi)) < 1e-9);
  }
  CHECK(wrap_phase(kPi) == Catch::Approx(kPi));
  CHECK(wrap_phase(-kPi) == Catch::Approx(kPi));
}

TEST_CASE("derived seeds are deterministic and path-dependent") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  RandomStream a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_int covers its inclusive range") {
  RandomStream rng(3);
  bool lo_seen = false, hi_seen = false;
  for (int i = 0; i < 2000; ++i) {
    const long v = rng.uniform_int(-2, 2);
    REQUIRE(v >= -2);
    REQUIRE(v <= 2);
    lo_seen |= (v == -2);
    hi_seen |= (v == 2);
  }
  CHECK(lo_seen);
  CHECK(hi_seen);
}

TEST_CASE("fft matches the quadratic DFT oracle") {
  RandomStream rng(11);
  for (std::size_t n : {2u, 8u, 64u, 256u}) {
    std::vector<cdouble> x(n);
    for (auto& v : x) v = cdouble(rng.normal(), rng.normal());
    const auto want = naive_dft(x, false);
    auto got = x;
    fft_inplace(got, false);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(got[i] - want[i]) < 1e-9 * double(n));
    fft_inplace(got, true);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] - x[i]) < 1e-12);
  }
}

TEST_CASE("fft rejects non-power-of-two sizes") {
  std::vector<cdouble> x(12);
  CHECK_THROWS_AS(fft_inplace(x, false), ConfigError);
}

TEST_CASE("fft_convolve equals direct convolution") {
  RandomStream rng(13);
  std::vector<double> a(37), b(61);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  const auto want = direct_convolve(a, b);
  const auto got = fft_convolve(a, b);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got[i] - want[i]) < 1e-9);
}

TEST_CASE("window families have the documented overlap-add domains") {
  FrameParams p;
  p.window = Window::kSqrtHann;
  p.win_len = 512;
  p.hop = 256;
  p.fft_size = 512;
  CHECK_NOTHROW(p.validate());

  p.window = Window::kHann;
  CHECK_THROWS_AS(p.validate(), ConfigError);  // squared hann needs hop<=win/4
  p.hop = 128;
  CHECK_NOTHROW(p.validate());

  p.window = Window::kRect;
  p.hop = 256;
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("stft frame count follows floor(samples/hop)+1") {
  FrameParams p;
  for (std::size_t samples : {1u, 255u, 256u, 257u, 1000u, 4096u}) {
    const Waveform w = random_wave(1, samples, p.sample_rate, samples);
    const Spectrogram s = stft(w, p);
    CHECK(s.frames == samples / p.hop + 1);
    CHECK(s.bins == p.fft_size / 2 + 1);
  }
}

TEST_CASE("stft/istft round-trip is exact to 1e-6 including edges") {
  for (Window win : {Window::kSqrtHann, Window::kHann, Window::kRect}) {
    FrameParams p;
    p.window = win;
    p.hop = (win == Window::kHann) ? 128 : 256;
    for (std::size_t samples : {777u, 4096u, 5000u}) {
      const Waveform w = random_wave(3, samples, p.sample_rate,
                                     1000 + samples + std::size_t(win));
      const Waveform back = istft(stft(w, p));
      REQUIRE(back.samples == w.samples);
      CHECK(max_abs_error(w, back) < 1e-6);
    }
  }
}

TEST_CASE("istft is linear") {
  FrameParams p;
  const Waveform x1 = random_wave(2, 2000, p.sample_rate, 21);
  const Waveform x2 = random_wave(2, 2000, p.sample_rate, 22);
  Spectrogram s1 = stft(x1, p), s2 = stft(x2, p);
  const double a = 0.7, b = -1.3;
  Spectrogram mix = s1;
  for (std::size_t i = 0; i < mix.data.size(); ++i)
    mix.data[i] = a * s1.data[i] + b * s2.data[i];
  const Waveform got = istft(mix);
  Waveform want(2, 2000, p.sample_rate);
  for (std::size_t i = 0; i < want.data.size(); ++i)
    want.data[i] = a * x1.data[i] + b * x2.data[i];
  CHECK(max_abs_error(got, want) < 1e-9);
}

TEST_CASE("stft validates inputs") {
  FrameParams p;
  Waveform w = random_wave(1, 100, p.sample_rate, 5);
  w.data[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(stft(w, p), DataError);

  Waveform rate = random_wave(1, 100, 8000.0, 6);
  CHECK_THROWS_AS(stft(rate, p), DataError);

  FrameParams bad;
  bad.fft_size = 500;  // not a power of two
  Waveform ok = random_wave(1, 100, bad.sample_rate, 7);
  CHECK_THROWS_AS(stft(ok, bad), ConfigError);
}

TEST_CASE("matched filter equals the brute-force oracle") {
  RandomStream rng(31);
  const std::size_t T = 64, F = 65, K = 16;
  ComplexMatrix spec(T, F), kernel(K, F);
  for (auto& v : spec.data) v = cdouble(rng.normal(), rng.normal());
  for (auto& v : kernel.data) v = cdouble(rng.normal(), rng.normal());

  for (std::size_t k : {1u, 2u, 7u, 16u}) {
    const ComplexMatrix got = matched_filter_time_axis(spec, kernel, k);
    REQUIRE(got.rows == T);
    REQUIRE(got.cols == F);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) {
        cdouble want(0, 0);
        for (std::size_t n = 0; n < k; ++n)
          if (t + n < T) want += std::conj(kernel(n, f)) * spec(t + n, f);
        CHECK(std::abs(got(t, f) - want) < 1e-10);
      }
  }
}

TEST_CASE("matched filter is linear in its input") {
  RandomStream rng(37);
  ComplexMatrix a(20, 9), b(20, 9), kernel(5, 9);
  for (auto& v : a.data) v = cdouble(rng.normal(), rng.normal());
  for (auto& v : b.data) v = cdouble(rng.normal(), rng.normal());
  for (auto& v : kernel.data) v = cdouble(rng.normal(), rng.normal());
  const cdouble ca(0.3, -1.1), cb(-2.0, 0.4);
  ComplexMatrix mix(20, 9);
  for (std::size_t i = 0; i < mix.data.size(); ++i)
    mix.data[i] = ca * a.data[i] + cb * b.data[i];
  const auto fa = matched_filter_time_axis(a, kernel, 5);
  const auto fb = matched_filter_time_axis(b, kernel, 5);
  const auto fm = matched_filter_time_axis(mix, kernel, 5);
  for (std::size_t i = 0; i < fm.data.size(); ++i)
    CHECK(std::abs(fm.data[i] - (ca * fa.data[i] + cb * fb.data[i])) < 1e-9);
}

TEST_CASE("matched filter validates k and bin counts") {
  ComplexMatrix spec(4, 5), kernel(3, 5), other(3, 6);
  CHECK_THROWS_AS(matched_filter_time_axis(spec, kernel, 0), DataError);
  CHECK_THROWS_AS(matched_filter_time_axis(spec, kernel, 4), DataError);
  CHECK_THROWS_AS(matched_filter_time_axis(spec, other, 2), DataError);
}

TEST_CASE("impulse at sample zero is confined to the two covering frames") {
  // Frame t spans [t*hop - win/2, t*hop + win/2), so sample 0 lies in frames
  // 0 and 1 only; every later frame starts at hop >= 256.
  FrameParams p;
  p.window = Window::kRect;
  Waveform w(1, 1024, p.sample_rate);
  w.data[0] = 1.0;
  const Spectrogram s = stft(w, p);
  double covered = 0.0, rest = 0.0;
  for (std::size_t t = 0; t < s.frames; ++t)
    for (std::size_t f = 0; f < s.bins; ++f) {
      const double e = std::norm(s.at(0, t, f));
      if (t <= 1) covered += e;
      else rest += e;
    }
  CHECK(covered > 0.0);
  CHECK(rest == 0.0);
}
