#pragma once
// Shoebox room acoustics: image-source impulse responses, reverberation-time
// measurement, and the frame-domain (convolutive transfer function) view of
// an impulse response.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/fft.hpp"
#include "rirsf/stft.hpp"

namespace rirsf {

using Vec3 = std::array<double, 3>;

inline double dist3(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct RoomSpec {
  Vec3 dims{5.0, 4.0, 3.0};          // meters
  double rt60 = 0.5;                 // seconds
  double speed_of_sound = 343.0;     // m/s
  // Reflection-order cap. Unset means "every image whose arrival fits inside
  // the impulse response", which is what full-decay simulation needs; small
  // explicit values (0, 1, ...) are for arrival-count checks.
  std::optional<int> max_order;

  double volume() const { return dims[0] * dims[1] * dims[2]; }
  double surface() const {
    return 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  }
  void validate() const {
    for (double d : dims)
      if (!(d > 0.0)) throw ConfigError("room dimensions must be positive");
    if (!(rt60 > 0.0)) throw ConfigError("rt60 must be positive");
    if (!(speed_of_sound > 0.0))
      throw ConfigError("speed_of_sound must be positive");
    if (max_order && *max_order < 0)
      throw ConfigError("max_order must be non-negative when set");
  }
};

struct ArrayGeometry {
  std::vector<Vec3> mics;

  // 8-element non-uniform linear array with inter-mic spacing
  // 15-10-5-20-5-10-15 cm as cumulative offsets along +x.
  static constexpr std::array<double, 8> kOffsets = {0.0,  0.15, 0.25, 0.30,
                                                     0.50, 0.55, 0.65, 0.80};

  static ArrayGeometry linear_default(const Vec3& origin = {0, 0, 0}) {
    ArrayGeometry g;
    for (double off : kOffsets)
      g.mics.push_back({origin[0] + off, origin[1], origin[2]});
    return g;
  }

  std::size_t size() const { return mics.size(); }

  Vec3 center() const {
    Vec3 c{0, 0, 0};
    for (const auto& m : mics)
      for (int i = 0; i < 3; ++i) c[i] += m[i];
    for (int i = 0; i < 3; ++i) c[i] /= static_cast<double>(mics.size());
    return c;
  }

  double aperture() const {
    double a = 0.0;
    for (const auto& m : mics)
      for (const auto& n : mics) a = std::max(a, dist3(m, n));
    return a;
  }
};

// Multichannel impulse response, [channels][taps].
struct Rir {
  std::size_t channels = 0;
  std::size_t taps = 0;
  double sample_rate = 16000.0;
  std::vector<double> data;

  Rir() = default;
  Rir(std::size_t m, std::size_t t, double fs)
      : channels(m), taps(t), sample_rate(fs), data(m * t, 0.0) {}

  double& at(std::size_t m, std::size_t t) { return data[m * taps + t]; }
  double at(std::size_t m, std::size_t t) const { return data[m * taps + t]; }

  std::vector<double> channel(std::size_t m) const {
    return {data.begin() + static_cast<long>(m * taps),
            data.begin() + static_cast<long>((m + 1) * taps)};
  }
};

struct Absorption {
  double alpha = 0.0;  // Sabine absorption coefficient
  double beta = 1.0;   // sqrt(1 - alpha)
};

inline double min_feasible_rt60(const RoomSpec& room) {
  return 0.161 * room.volume() / room.surface();
}

// Sabine inversion: alpha = 0.161 * V / (rt60 * S), uniform over all six
// walls. Serves as the feasibility gate for a requested decay time.
inline Absorption absorption_from_rt60(const RoomSpec& room) {
  room.validate();
  const double alpha = 0.161 * room.volume() / (room.rt60 * room.surface());
  if (alpha > 1.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "rt60 %.4g s infeasible for room %.3g x %.3g x %.3g m "
                  "(absorption %.3f > 1; minimum feasible rt60 is %.4g s)",
                  room.rt60, room.dims[0], room.dims[1], room.dims[2], alpha,
                  min_feasible_rt60(room));
    throw DataError(buf);
  }
  return {alpha, std::sqrt(1.0 - alpha)};
}

namespace detail {

// 81-tap Hann-windowed sinc placed at fractional sample position tau.
// sin(pi*(v - frac)) alternates sign with integer v, so one sin() serves the
// whole kernel; the window term uses an angle-difference expansion against
// static tables.
inline constexpr int kSincHalf = 40;
inline constexpr int kSincTaps = 2 * kSincHalf + 1;

struct SincTables {
  double c[kSincTaps];
  double s[kSincTaps];
  SincTables() {
    for (int i = 0; i < kSincTaps; ++i) {
      const double th = kTwoPi * static_cast<double>(i - kSincHalf) /
                        static_cast<double>(kSincTaps + 1);
      c[i] = std::cos(th);
      s[i] = std::sin(th);
    }
  }
};

inline void add_fractional_impulse(double* h, long n_taps, double tau,
                                   double gain) {
  static const SincTables tables;
  // Arrival times within 1e-9 samples of an integer collapse to a single
  // tap: products like d*fs/c reconstruct integer delays only to rounding,
  // and the interpolation kernel is ill-conditioned that close to a node.
  const double snapped = std::nearbyint(tau);
  if (std::abs(tau - snapped) < 1e-9) {
    const long i = static_cast<long>(snapped);
    if (i >= 0 && i < n_taps) h[i] += gain;
    return;
  }
  const long i0 = static_cast<long>(std::floor(tau));
  const double frac = tau - static_cast<double>(i0);
  const double sp = std::sin(kPi * frac);
  const double phi = kTwoPi * frac / static_cast<double>(kSincTaps + 1);
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  for (int i = 0; i < kSincTaps; ++i) {
    const long n = i0 - kSincHalf + i;
    if (n < 0 || n >= n_taps) continue;
    const double x = static_cast<double>(i - kSincHalf) - frac;
    const double sinpx = (i % 2 == 0) ? -sp : sp;
    const double w = 0.5 * (1.0 + tables.c[i] * cphi + tables.s[i] * sphi);
    h[n] += gain * w * sinpx / (kPi * x);
  }
}

// Schroeder T30 on a per-tap arrival-energy sequence: backward-integrated
// decay, least squares between -5 and -35 dB, extrapolated to -60. Returns a
// negative value when the curve does not span the fit window.
inline double schroeder_t30(const std::vector<double>& energy, double fs) {
  std::vector<double> edc(energy.size());
  double acc = 0.0;
  for (std::size_t i = energy.size(); i-- > 0;) {
    acc += energy[i];
    edc[i] = acc;
  }
  if (!(acc > 0.0)) return -1.0;
  const double e0 = edc[0];
  std::size_t t5 = energy.size(), t35 = energy.size();
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / e0);
    if (t5 == energy.size() && db <= -5.0) t5 = i;
    if (db <= -35.0) {
      t35 = i;
      break;
    }
  }
  if (t35 == energy.size() || t35 <= t5 + 3) return -1.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = t5; i <= t35; ++i) {
    const double db = 10.0 * std::log10(edc[i] / e0);
    if (!std::isfinite(db)) continue;
    const double t = static_cast<double>(i) / fs;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++n;
  }
  if (n < 4) return -1.0;
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (denom <= 0.0) return -1.0;
  const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
  if (!(slope < 0.0)) return -1.0;
  return -60.0 / slope;
}

// Arrival-energy envelope of the image sum at one receiver: the same lattice
// and truncation as the full pass, but energies binned to the nearest tap
// with no band-limited interpolation. Cheap enough to evaluate repeatedly.
inline std::vector<double> image_energy_envelope(const RoomSpec& room,
                                                 const Vec3& source,
                                                 const Vec3& rcv, double fs,
                                                 double beta,
                                                 std::size_t n_taps,
                                                 double r_max) {
  const double c = room.speed_of_sound;
  const long nx = static_cast<long>(std::ceil(r_max / (2.0 * room.dims[0]))) + 1;
  const long ny = static_cast<long>(std::ceil(r_max / (2.0 * room.dims[1]))) + 1;
  const long nz = static_cast<long>(std::ceil(r_max / (2.0 * room.dims[2]))) + 1;
  const int max_pow = static_cast<int>(2 * (nx + ny + nz) + 3);
  std::vector<double> refl2(static_cast<std::size_t>(max_pow) + 1, 1.0);
  for (int i = 1; i <= max_pow; ++i)
    refl2[static_cast<std::size_t>(i)] =
        refl2[static_cast<std::size_t>(i - 1)] * beta * beta;

  std::vector<double> env(n_taps, 0.0);
  const double fs_over_c = fs / c;
  const double gate2 = r_max * r_max;
  for (long mx = -nx; mx <= nx; ++mx) {
    for (long my = -ny; my <= ny; ++my) {
      for (long mz = -nz; mz <= nz; ++mz) {
        for (int q = 0; q <= 1; ++q) {
          for (int j = 0; j <= 1; ++j) {
            for (int kk = 0; kk <= 1; ++kk) {
              const Vec3 img{(1 - 2 * q) * source[0] +
                                 2.0 * static_cast<double>(mx) * room.dims[0],
                             (1 - 2 * j) * source[1] +
                                 2.0 * static_cast<double>(my) * room.dims[1],
                             (1 - 2 * kk) * source[2] +
                                 2.0 * static_cast<double>(mz) * room.dims[2]};
              const double gx = img[0] - rcv[0], gy = img[1] - rcv[1],
                           gz = img[2] - rcv[2];
              const double r2 = gx * gx + gy * gy + gz * gz;
              if (r2 > gate2) continue;
              const double d = std::max(std::sqrt(r2), 1e-3);
              const long tap = std::lround(d * fs_over_c);
              if (tap < 0 || tap >= static_cast<long>(n_taps)) continue;
              const int order = static_cast<int>(std::labs(2 * mx - q) +
                                                 std::labs(2 * my - j) +
                                                 std::labs(2 * mz - kk));
              const double amp = 1.0 / (4.0 * kPi * d);
              env[static_cast<std::size_t>(tap)] +=
                  refl2[static_cast<std::size_t>(order)] * amp * amp;
            }
          }
        }
      }
    }
  }
  return env;
}

// Zero-phase high-pass with a raised-cosine transition from 0 at `lo` Hz to
// 1 at `hi` Hz. Every image arrives with a positive gain, so the raw sum
// carries a coherent low-frequency ridge (the running mean of overlapping
// same-sign arrivals) that flattens the measured decay; removing it is the
// standard companion step to this simulation method.
inline void highpass_zero_phase(double* h, std::size_t n, double fs,
                                double lo = 40.0, double hi = 80.0) {
  const std::size_t size = next_pow2(n + 1024);
  std::vector<cdouble> buf(size);
  for (std::size_t i = 0; i < n; ++i) buf[i] = h[i];
  fft_inplace(buf, false);
  for (std::size_t k = 0; k < size; ++k) {
    const double f =
        static_cast<double>(std::min(k, size - k)) * fs /
        static_cast<double>(size);
    double g = 1.0;
    if (f <= lo)
      g = 0.0;
    else if (f < hi)
      g = 0.5 * (1.0 - std::cos(kPi * (f - lo) / (hi - lo)));
    buf[k] *= g;
  }
  fft_inplace(buf, true);
  for (std::size_t i = 0; i < n; ++i) h[i] = buf[i].real();
}

// Wall reflectivity whose simulated Schroeder T30 lands on the requested
// decay time. The Eyring inversion beta = exp(-alpha/2) is only the starting
// point: reflection counts per meter vary with direction, so the raw image
// sum decays slower than the mean-free-path model predicts, by tens of
// percent. Fixed-point iteration on the decay-rate ratio converges in a few
// envelope evaluations.
inline double calibrate_reflectivity(const RoomSpec& room, const Vec3& source,
                                     const Vec3& rcv, double fs,
                                     std::size_t n_taps, double r_max) {
  double beta = std::exp(-0.5 * absorption_from_rt60(room).alpha);
  for (int pass = 0; pass < 8; ++pass) {
    const double t30 = schroeder_t30(
        image_energy_envelope(room, source, rcv, fs, beta, n_taps, r_max), fs);
    if (t30 <= 0.0) break;
    const double ratio = t30 / room.rt60;
    if (std::abs(ratio - 1.0) < 0.02) break;
    beta = std::pow(beta, ratio);
  }
  return beta;
}

}  // namespace detail

// Image-source impulse response for a shoebox room with uniform walls.
//
// For a full-decay simulation (max_order unset) the wall reflectivity is
// calibrated so the Schroeder T30 of the image sum's energy envelope lands
// on the requested rt60; the plain Sabine pair stays the feasibility gate.
// With an explicit max_order (arrival-structure checks) the reflectivity is
// the analytic Eyring inversion exp(-alpha_sabine / 2), since a truncated
// response has no decay to calibrate against. Full-decay responses are also
// high-passed (zero phase, transition band 40-80 Hz) to strip the coherent
// low-frequency ridge of the all-positive image sum; order-capped responses
// are left raw so individual arrivals stay inspectable. Every image whose
// windowed-sinc arrival fits inside the response is enumerated unless
// max_order caps the reflection count; the response length covers the
// longest direct path plus rt60 seconds.
inline Rir simulate_rir(const RoomSpec& room, const Vec3& source,
                        const ArrayGeometry& array, double sample_rate) {
  room.validate();
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  if (array.size() == 0) throw ConfigError("array has no microphones");
  for (int i = 0; i < 3; ++i) {
    if (!(source[i] > 0.0 && source[i] < room.dims[i]))
      throw DataError("source position outside the room");
    for (const auto& m : array.mics)
      if (!(m[i] > 0.0 && m[i] < room.dims[i]))
        throw DataError("microphone position outside the room");
  }

  const Absorption ab = absorption_from_rt60(room);
  const double c = room.speed_of_sound;
  const double fs = sample_rate;

  double max_direct = 0.0;
  for (const auto& m : array.mics)
    max_direct = std::max(max_direct, dist3(source, m));

  const std::size_t n_taps = static_cast<std::size_t>(
      std::ceil((max_direct / c + room.rt60) * fs)) + detail::kSincTaps + 1;
  const double r_max = (static_cast<double>(n_taps) / fs) * c + 1.0;

  const double beta =
      room.max_order
          ? std::exp(-0.5 * ab.alpha)
          : detail::calibrate_reflectivity(room, source, array.center(), fs,
                                           n_taps, r_max);

  const long nx = static_cast<long>(std::ceil(r_max / (2.0 * room.dims[0]))) + 1;
  const long ny = static_cast<long>(std::ceil(r_max / (2.0 * room.dims[1]))) + 1;
  const long nz = static_cast<long>(std::ceil(r_max / (2.0 * room.dims[2]))) + 1;

  const int max_pow = static_cast<int>(2 * (nx + ny + nz) + 3);
  std::vector<double> beta_pow(static_cast<std::size_t>(max_pow) + 1, 1.0);
  for (int i = 1; i <= max_pow; ++i)
    beta_pow[static_cast<std::size_t>(i)] = beta_pow[static_cast<std::size_t>(i - 1)] * beta;

  Rir rir(array.size(), n_taps, fs);
  const double fs_over_c = fs / c;
  const double tau_limit =
      static_cast<double>(n_taps) - static_cast<double>(detail::kSincHalf) - 2.0;

  // Pruning gate: anything farther from the array center than the response
  // can represent is skipped before any per-mic work.
  const Vec3 ctr = array.center();
  const double gate = r_max + array.aperture() + 1.0;
  const double gate2 = gate * gate;

  for (long mx = -nx; mx <= nx; ++mx) {
    for (long my = -ny; my <= ny; ++my) {
      for (long mz = -nz; mz <= nz; ++mz) {
        for (int q = 0; q <= 1; ++q) {
          for (int j = 0; j <= 1; ++j) {
            for (int kk = 0; kk <= 1; ++kk) {
              const int order = static_cast<int>(std::labs(2 * mx - q) +
                                                 std::labs(2 * my - j) +
                                                 std::labs(2 * mz - kk));
              if (room.max_order && order > *room.max_order) continue;
              const Vec3 img{
                  (1 - 2 * q) * source[0] + 2.0 * static_cast<double>(mx) * room.dims[0],
                  (1 - 2 * j) * source[1] + 2.0 * static_cast<double>(my) * room.dims[1],
                  (1 - 2 * kk) * source[2] + 2.0 * static_cast<double>(mz) * room.dims[2]};
              const double gx = img[0] - ctr[0], gy = img[1] - ctr[1],
                           gz = img[2] - ctr[2];
              if (gx * gx + gy * gy + gz * gz > gate2) continue;
              const double refl = beta_pow[static_cast<std::size_t>(order)];
              for (std::size_t m = 0; m < array.size(); ++m) {
                const double d = std::max(dist3(img, array.mics[m]), 1e-3);
                const double tau = d * fs_over_c;
                if (tau > tau_limit) continue;
                const double gain = refl / (4.0 * kPi * d);
                detail::add_fractional_impulse(rir.data.data() + m * n_taps,
                                               static_cast<long>(n_taps), tau,
                                               gain);
              }
            }
          }
        }
      }
    }
  }
  if (!room.max_order)
    for (std::size_t m = 0; m < array.size(); ++m)
      detail::highpass_zero_phase(rir.data.data() + m * n_taps, n_taps, fs);
  return rir;
}

// Number of image sources with reflection count <= order (geometry-free).
inline std::size_t ism_image_count(int order) {
  if (order < 0) throw ConfigError("order must be non-negative");
  std::size_t count = 0;
  const long n = order / 2 + 1;
  for (long mx = -n; mx <= n; ++mx)
    for (long my = -n; my <= n; ++my)
      for (long mz = -n; mz <= n; ++mz)
        for (int q = 0; q <= 1; ++q)
          for (int j = 0; j <= 1; ++j)
            for (int kk = 0; kk <= 1; ++kk)
              if (std::labs(2 * mx - q) + std::labs(2 * my - j) +
                      std::labs(2 * mz - kk) <= order)
                ++count;
  return count;
}

// Reverberation time via Schroeder backward integration on one channel:
// linear fit of the decay curve between -5 and -35 dB, extrapolated to -60.
inline double measure_rt60(const Rir& rir, std::size_t ref_channel = 0) {
  if (ref_channel >= rir.channels) throw DataError("reference channel out of range");
  if (!(rir.sample_rate > 0.0)) throw DataError("rir sample rate must be positive");

  const auto h = rir.channel(ref_channel);
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  if (!(acc > 0.0)) throw DataError("impulse response is silent");

  const double e0 = edc[0];
  std::size_t t5 = h.size(), t35 = h.size();
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / e0);
    if (t5 == h.size() && db <= -5.0) t5 = i;
    if (db <= -35.0) {
      t35 = i;
      break;
    }
  }
  if (t35 == h.size() || t35 <= t5 + 3)
    throw DataError("decay range shorter than 30 dB; cannot estimate rt60");

  // Least-squares line over the finite part of the window.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = t5; i <= t35; ++i) {
    const double db = 10.0 * std::log10(edc[i] / e0);
    if (!std::isfinite(db)) continue;
    const double t = static_cast<double>(i) / rir.sample_rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++n;
  }
  if (n < 4) throw DataError("decay range shorter than 30 dB; cannot estimate rt60");
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (denom <= 0.0) throw DataError("degenerate decay curve");
  const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
  if (!(slope < 0.0)) throw DataError("decay curve is not decreasing");
  return -60.0 / slope;
}

// Per-frequency FIR along the frame axis, [channels][frames][bins].
struct CtfFilter {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  FrameParams params;
  std::vector<cdouble> data;

  CtfFilter() = default;
  CtfFilter(std::size_t m, std::size_t k, std::size_t f, FrameParams p)
      : channels(m), frames(k), bins(f), params(p), data(m * k * f) {}

  cdouble& at(std::size_t m, std::size_t k, std::size_t f) {
    return data[(m * frames + k) * bins + f];
  }
  cdouble at(std::size_t m, std::size_t k, std::size_t f) const {
    return data[(m * frames + k) * bins + f];
  }

  ComplexMatrix channel(std::size_t m) const {
    ComplexMatrix out(frames, bins);
    std::copy(data.begin() + static_cast<long>(m * frames * bins),
              data.begin() + static_cast<long>((m + 1) * frames * bins),
              out.data.begin());
    return out;
  }
};

// Frame-domain view of an impulse response, sharing the mixture's framing
// (hop, fft_size, frame centering).
//
// Two deliberate conventions make the result behave like a filter rather
// than a picture of one:
//  - the analysis window is a plain-overlap-add-normalized Hann regardless of
//    params.window, so summing frames reproduces the tap sum exactly at the
//    default hop;
//  - each frame's phase is referenced to its nominal time t*hop (a rotation
//    of exp(+i*2*pi*f*center/fft_size)), so convolving these frames along the
//    time axis with a dry spectrogram approximates the spectrogram of the
//    time-domain convolution, and frame 0 of a delay-aligned response carries
//    the steering-vector phase exactly.
inline CtfFilter ctf_from_rir(const Rir& rir, const FrameParams& p) {
  p.validate();
  if (rir.channels == 0 || rir.taps == 0) throw DataError("empty impulse response");
  if (rir.sample_rate != p.sample_rate)
    throw DataError("rir sample rate does not match frame params");

  const long center = static_cast<long>(p.win_len / 2);
  const std::size_t K =
      (rir.taps - 1 + static_cast<std::size_t>(center)) / p.hop + 1;

  auto win = make_window(Window::kHann, p.win_len);
  double cola = 0.0;
  for (std::size_t n = 0; n < p.win_len; n += p.hop) cola += win[n];
  for (auto& w : win) w /= cola;

  std::vector<cdouble> rot(p.bins());
  for (std::size_t f = 0; f < p.bins(); ++f) {
    const double ang = kTwoPi * static_cast<double>(f) *
                       static_cast<double>(center) /
                       static_cast<double>(p.fft_size);
    rot[f] = cdouble(std::cos(ang), std::sin(ang));
  }

  CtfFilter ctf(rir.channels, K, p.bins(), p);
  std::vector<cdouble> buf;
  std::vector<cdouble> frame(p.bins());
  for (std::size_t m = 0; m < rir.channels; ++m) {
    const double* h = rir.data.data() + m * rir.taps;
    for (std::size_t k = 0; k < K; ++k) {
      const long start = static_cast<long>(k * p.hop) - center;
      detail::frame_spectrum(h, static_cast<long>(rir.taps), start, win, p,
                             buf, frame.data());
      for (std::size_t f = 0; f < p.bins(); ++f)
        ctf.at(m, k, f) = frame[f] * rot[f];
    }
  }
  return ctf;
}

// Free-field steering matrix, entry (m, f) = exp(-i*2*pi*f_hz*d_m/c)/(4*pi*d_m).
inline ComplexMatrix steering_from_geometry(const Vec3& source,
                                            const ArrayGeometry& array,
                                            const FrameParams& p,
                                            double speed_of_sound = 343.0) {
  p.validate();
  if (array.size() == 0) throw ConfigError("array has no microphones");
  if (!(speed_of_sound > 0.0)) throw ConfigError("speed_of_sound must be positive");
  ComplexMatrix out(array.size(), p.bins());
  for (std::size_t m = 0; m < array.size(); ++m) {
    const double d = dist3(source, array.mics[m]);
    if (!(d > 0.0)) throw DataError("source coincides with a microphone");
    const double amp = 1.0 / (4.0 * kPi * d);
    for (std::size_t f = 0; f < p.bins(); ++f) {
      const double ang = -kTwoPi * p.bin_hz(f) * d / speed_of_sound;
      out(m, f) = amp * cdouble(std::cos(ang), std::sin(ang));
    }
  }
  return out;
}

// Wraps a steering matrix as a single-frame filter so it can stand in for a
// measured response wherever only the direct wave matters.
inline CtfFilter ctf_from_steering(const ComplexMatrix& steering,
                                   const FrameParams& p) {
  p.validate();
  if (steering.cols != p.bins())
    throw DataError("steering bin count does not match frame params");
  CtfFilter ctf(steering.rows, 1, steering.cols, p);
  for (std::size_t m = 0; m < steering.rows; ++m)
    for (std::size_t f = 0; f < steering.cols; ++f)
      ctf.at(m, 0, f) = steering(m, f);
  return ctf;
}

// Removes the bulk propagation delay shared by all channels: drops leading
// taps so the earliest significant arrival lands `guard` samples in. The
// shift is common to every channel, so inter-channel phase relations are
// untouched while frame 0 of the frame-domain view gains the direct wave.
inline Rir align_onset(const Rir& rir, long guard = 16,
                       double threshold_db = -60.0) {
  if (rir.channels == 0 || rir.taps == 0) throw DataError("empty impulse response");
  double peak = 0.0;
  for (double v : rir.data) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw DataError("impulse response is silent");
  const double thresh = peak * db_to_amplitude(threshold_db);

  std::size_t onset = rir.taps;
  for (std::size_t t = 0; t < rir.taps && onset == rir.taps; ++t)
    for (std::size_t m = 0; m < rir.channels; ++m)
      if (std::abs(rir.at(m, t)) >= thresh) {
        onset = t;
        break;
      }
  const std::size_t shift =
      onset == rir.taps || static_cast<long>(onset) <= guard
          ? 0
          : onset - static_cast<std::size_t>(guard);
  if (shift == 0) return rir;

  Rir out(rir.channels, rir.taps - shift, rir.sample_rate);
  for (std::size_t m = 0; m < rir.channels; ++m)
    for (std::size_t t = 0; t < out.taps; ++t)
      out.at(m, t) = rir.at(m, t + shift);
  return out;
}

// Multichannel reverberant image of a dry mono signal: per-channel linear
// convolution with the impulse response, length samples + taps - 1.
inline Waveform synth_reverberant(const Waveform& dry, const Rir& rir) {
  if (dry.channels != 1) throw DataError("dry signal must be mono");
  if (dry.samples == 0) throw DataError("dry signal is empty");
  if (dry.sample_rate != rir.sample_rate)
    throw DataError("dry signal and rir sample rates differ");
  if (rir.channels == 0 || rir.taps == 0) throw DataError("empty impulse response");

  const auto x = dry.channel(0);
  Waveform out(rir.channels, dry.samples + rir.taps - 1, dry.sample_rate);
  for (std::size_t m = 0; m < rir.channels; ++m) {
    const auto y = fft_convolve(x, rir.channel(m));
    std::copy(y.begin(), y.end(),
              out.data.begin() + static_cast<long>(m * out.samples));
  }
  return out;
}

}  // namespace rirsf
