#pragma once
// Analysis/synthesis framing and the frame-axis matched filter.
//
// Conventions (fixed here, relied on everywhere else):
//  - frame t is centered at sample t*hop: it covers [t*hop - win_len/2,
//    t*hop + win_len/2), with zeros outside the signal;
//  - the windowed segment sits at the front of the FFT buffer and the
//    spectrum keeps the one-sided bins f in [0, fft_size/2];
//  - reconstruction uses the same window and divides by the accumulated
//    squared-window envelope, so stft -> istft is numerically exact for any
//    window/hop pair that satisfies the squared-window overlap-add check.

#include <cstddef>
#include <string>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/fft.hpp"

namespace rirsf {

enum class Window { kHann, kSqrtHann, kRect };

inline std::string window_name(Window w) {
  switch (w) {
    case Window::kHann: return "hann";
    case Window::kSqrtHann: return "sqrt_hann";
    case Window::kRect: return "rect";
  }
  return "?";
}

inline Window window_from_name(const std::string& s) {
  if (s == "hann") return Window::kHann;
  if (s == "sqrt_hann") return Window::kSqrtHann;
  if (s == "rect") return Window::kRect;
  throw ConfigError("unknown window '" + s + "' (expected hann, sqrt_hann or rect)");
}

// Periodic windows (period win_len), so overlap-add sums are exactly flat at
// the valid hops.
inline std::vector<double> make_window(Window w, std::size_t win_len) {
  std::vector<double> win(win_len, 1.0);
  for (std::size_t n = 0; n < win_len; ++n) {
    const double h =
        0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(n) /
                             static_cast<double>(win_len));
    if (w == Window::kHann) win[n] = h;
    else if (w == Window::kSqrtHann)
      win[n] = std::sin(kPi * static_cast<double>(n) /
                        static_cast<double>(win_len));
  }
  return win;
}

struct FrameParams {
  double sample_rate = 16000.0;
  std::size_t win_len = 512;
  std::size_t hop = 256;
  std::size_t fft_size = 512;
  Window window = Window::kSqrtHann;

  std::size_t bins() const { return fft_size / 2 + 1; }
  double bin_hz(std::size_t f) const {
    return static_cast<double>(f) * sample_rate / static_cast<double>(fft_size);
  }

  // Sum of shifted squared windows over one hop period; the residues must
  // agree to 1e-10 for the analysis/synthesis pair to be well conditioned.
  double cola_constant() const {
    const auto win = make_window(window, win_len);
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    for (std::size_t r = 0; r < hop; ++r) {
      double s = 0.0;
      for (std::size_t n = r; n < win_len; n += hop) s += win[n] * win[n];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    if (hi - lo > 1e-10 * std::max(1.0, hi))
      throw ConfigError("window '" + window_name(window) + "' with win_len " +
                        std::to_string(win_len) + " and hop " +
                        std::to_string(hop) +
                        " violates constant overlap-add of the squared window");
    return hi;
  }

  void validate() const {
    if (sample_rate <= 0.0) throw ConfigError("sample_rate must be positive");
    if (win_len < 2) throw ConfigError("win_len must be at least 2");
    if (hop < 1 || hop > win_len)
      throw ConfigError("hop must be in [1, win_len]");
    if (fft_size < win_len)
      throw ConfigError("fft_size must be at least win_len");
    if (!is_pow2(fft_size))
      throw ConfigError("fft_size must be a power of two");
    cola_constant();
  }
};

// Planar multichannel signal, [channels][samples].
struct Waveform {
  std::size_t channels = 0;
  std::size_t samples = 0;
  double sample_rate = 16000.0;
  std::vector<double> data;

  Waveform() = default;
  Waveform(std::size_t m, std::size_t n, double fs)
      : channels(m), samples(n), sample_rate(fs), data(m * n, 0.0) {}

  double& at(std::size_t m, std::size_t n) { return data[m * samples + n]; }
  double at(std::size_t m, std::size_t n) const { return data[m * samples + n]; }

  std::vector<double> channel(std::size_t m) const {
    return {data.begin() + static_cast<long>(m * samples),
            data.begin() + static_cast<long>((m + 1) * samples)};
  }

  void check_finite(const char* what) const {
    for (double v : data)
      if (!std::isfinite(v))
        throw DataError(std::string(what) + " contains a non-finite sample");
  }
};

// One-sided complex frames, [channels][frames][bins].
struct Spectrogram {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  FrameParams params;
  std::size_t source_samples = 0;  // 0 when not derived from a waveform
  std::vector<cdouble> data;

  Spectrogram() = default;
  Spectrogram(std::size_t m, std::size_t t, std::size_t f, FrameParams p)
      : channels(m), frames(t), bins(f), params(p), data(m * t * f) {}

  cdouble& at(std::size_t m, std::size_t t, std::size_t f) {
    return data[(m * frames + t) * bins + f];
  }
  cdouble at(std::size_t m, std::size_t t, std::size_t f) const {
    return data[(m * frames + t) * bins + f];
  }

  ComplexMatrix channel(std::size_t m) const {
    ComplexMatrix out(frames, bins);
    std::copy(data.begin() + static_cast<long>(m * frames * bins),
              data.begin() + static_cast<long>((m + 1) * frames * bins),
              out.data.begin());
    return out;
  }
};

namespace detail {

// One-sided spectrum of one windowed frame starting at `start` (may be
// negative; out-of-range samples are zero).
inline void frame_spectrum(const double* x, long n_samples, long start,
                           const std::vector<double>& win,
                           const FrameParams& p, std::vector<cdouble>& buf,
                           cdouble* out) {
  buf.assign(p.fft_size, cdouble(0.0, 0.0));
  const long wl = static_cast<long>(p.win_len);
  for (long n = 0; n < wl; ++n) {
    const long idx = start + n;
    if (idx >= 0 && idx < n_samples)
      buf[static_cast<std::size_t>(n)] =
          x[idx] * win[static_cast<std::size_t>(n)];
  }
  fft_inplace(buf, false);
  for (std::size_t f = 0; f < p.bins(); ++f) out[f] = buf[f];
}

}  // namespace detail

inline Spectrogram stft(const Waveform& wave, const FrameParams& p) {
  p.validate();
  if (wave.channels == 0 || wave.samples == 0)
    throw DataError("stft input is empty");
  if (wave.sample_rate != p.sample_rate)
    throw DataError("waveform sample rate does not match frame params");
  wave.check_finite("stft input");

  const std::size_t frames = wave.samples / p.hop + 1;
  const long center = static_cast<long>(p.win_len / 2);
  const auto win = make_window(p.window, p.win_len);
  Spectrogram spec(wave.channels, frames, p.bins(), p);
  spec.source_samples = wave.samples;

  std::vector<cdouble> buf;
  for (std::size_t m = 0; m < wave.channels; ++m) {
    const double* x = wave.data.data() + m * wave.samples;
    for (std::size_t t = 0; t < frames; ++t) {
      const long start = static_cast<long>(t * p.hop) - center;
      detail::frame_spectrum(x, static_cast<long>(wave.samples), start, win, p,
                             buf, &spec.at(m, t, 0));
    }
  }
  return spec;
}

// Least-squares overlap-add synthesis with the analysis window; output
// length is source_samples when known, frames*hop otherwise.
inline Waveform istft(const Spectrogram& spec) {
  const FrameParams& p = spec.params;
  p.validate();
  if (spec.bins != p.bins())
    throw DataError("spectrogram bin count does not match frame params");
  if (spec.channels == 0 || spec.frames == 0)
    throw DataError("istft input is empty");

  const std::size_t out_len =
      spec.source_samples > 0 ? spec.source_samples : spec.frames * p.hop;
  const long center = static_cast<long>(p.win_len / 2);
  const auto win = make_window(p.window, p.win_len);

  std::vector<double> norm(out_len, 0.0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const long start = static_cast<long>(t * p.hop) - center;
    for (std::size_t n = 0; n < p.win_len; ++n) {
      const long idx = start + static_cast<long>(n);
      if (idx >= 0 && idx < static_cast<long>(out_len))
        norm[static_cast<std::size_t>(idx)] += win[n] * win[n];
    }
  }

  Waveform out(spec.channels, out_len, p.sample_rate);
  std::vector<cdouble> buf(p.fft_size);
  for (std::size_t m = 0; m < spec.channels; ++m) {
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t f = 0; f < spec.bins; ++f) buf[f] = spec.at(m, t, f);
      for (std::size_t f = spec.bins; f < p.fft_size; ++f)
        buf[f] = std::conj(buf[p.fft_size - f]);
      fft_inplace(buf, true);
      const long start = static_cast<long>(t * p.hop) - center;
      for (std::size_t n = 0; n < p.win_len; ++n) {
        const long idx = start + static_cast<long>(n);
        if (idx >= 0 && idx < static_cast<long>(out_len))
          out.at(m, static_cast<std::size_t>(idx)) += buf[n].real() * win[n];
      }
    }
  }
  for (std::size_t m = 0; m < spec.channels; ++m)
    for (std::size_t n = 0; n < out_len; ++n)
      if (norm[n] > 0.0) out.at(m, n) /= norm[n];
  return out;
}

// Frame-axis matched filter (cross-correlation with an anti-causal look-ahead
// of k-1 frames):
//   out(t, f) = sum_{n=0}^{k-1} conj(kernel(n, f)) * spec(t + n, f),
// with frames past the end of `spec` treated as zero.
inline ComplexMatrix matched_filter_time_axis(const ComplexMatrix& spec,
                                              const ComplexMatrix& kernel,
                                              std::size_t k) {
  if (kernel.cols != spec.cols)
    throw DataError("matched filter kernel bin count does not match input");
  if (k < 1 || k > kernel.rows)
    throw DataError("matched filter length k out of range [1, " +
                    std::to_string(kernel.rows) + "]");
  ComplexMatrix out(spec.rows, spec.cols);
  for (std::size_t t = 0; t < spec.rows; ++t) {
    const std::size_t n_max = std::min(k, spec.rows - t);
    for (std::size_t n = 0; n < n_max; ++n) {
      const cdouble* kr = &kernel(n, 0);
      const cdouble* sr = &spec(t + n, 0);
      cdouble* orow = &out(t, 0);
      for (std::size_t f = 0; f < spec.cols; ++f)
        orow[f] += std::conj(kr[f]) * sr[f];
    }
  }
  return out;
}

// Element-wise principal phase; the phase of exact zero is 0.
inline RealMatrix phase_map(const ComplexMatrix& m) {
  RealMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    out.data[i] = principal_phase(m.data[i]);
  return out;
}

}  // namespace rirsf
