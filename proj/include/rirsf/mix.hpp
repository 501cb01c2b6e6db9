#pragma once
// Two-speaker mixture synthesis: overlap placement, interferer scaling to a
// requested signal-to-interference ratio, optional sensor noise. Everything
// is driven by an explicit seed so a bundle can be regenerated bit-exactly.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/room.hpp"
#include "rirsf/stft.hpp"

namespace rirsf {

struct MixSpec {
  double sir_db = 0.0;
  double overlap_ratio = 1.0;  // overlapped fraction of the target utterance
  std::optional<double> noise_snr_db;  // unset or +inf: no noise
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(sir_db) || sir_db < -60.0 || sir_db > 60.0)
      throw ConfigError("sir_db out of range [-60, 60]");
    if (!(overlap_ratio > 0.0) || overlap_ratio > 1.0)
      throw ConfigError("overlap_ratio out of range (0, 1]");
    if (noise_snr_db && !(*noise_snr_db > 0.0))
      throw ConfigError("noise_snr_db must be positive");
  }
};

struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end > begin ? end - begin : 0; }
};

namespace seed_stream {
inline constexpr std::uint64_t kPlacement = 1;
inline constexpr std::uint64_t kNoise = 2;
}  // namespace seed_stream

// Mean square power of one channel over [begin, end).
inline double mean_power(const Waveform& w, std::size_t channel,
                         SampleRange r) {
  if (channel >= w.channels) throw DataError("channel out of range");
  if (r.end > w.samples || r.length() == 0)
    throw DataError("power measurement range is empty or out of bounds");
  double acc = 0.0;
  for (std::size_t n = r.begin; n < r.end; ++n) {
    const double v = w.at(channel, n);
    acc += v * v;
  }
  return acc / static_cast<double>(r.length());
}

// Gain g for the interferer so that 10*log10(P_target / (g^2 * P_interferer))
// equals sir_db, powers measured on the reference channel over `overlap`.
inline double scale_to_sir(const Waveform& target, const Waveform& interferer,
                           double sir_db, SampleRange overlap,
                           std::size_t ref_channel = 0) {
  const double pt = mean_power(target, ref_channel, overlap);
  const double pi = mean_power(interferer, ref_channel, overlap);
  if (!(pt > 0.0) || !(pi > 0.0))
    throw DataError("images are silent over the overlapped region");
  return std::sqrt(pt / (pi * db_to_power(sir_db)));
}

// Measured ratio for verification, same convention as scale_to_sir.
inline double measure_sir(const Waveform& target, const Waveform& interferer,
                          SampleRange overlap, std::size_t ref_channel = 0) {
  return 10.0 * std::log10(mean_power(target, ref_channel, overlap) /
                           mean_power(interferer, ref_channel, overlap));
}

struct MixMeta {
  double sir_db = 0.0;
  double overlap_ratio = 1.0;
  std::uint64_t seed = 0;
  double interferer_gain = 1.0;
  std::optional<double> noise_snr_db;
  // Canvas placement of the dry utterances (sample offsets of utterance
  // starts) and the overlapped region used for the ratio measurement.
  std::size_t target_offset = 0;
  std::size_t interferer_offset = 0;
  std::size_t dry_target_samples = 0;
  std::size_t dry_interferer_samples = 0;
  SampleRange overlap;
};

struct MixtureBundle {
  Waveform mixture;
  std::vector<Waveform> images;  // [0] target, [1] interferer, frame-aligned
  std::optional<Waveform> noise;
  MixMeta meta;
};

inline void add_noise(MixtureBundle& bundle, double snr_db, std::uint64_t seed);

// Places both reverberant images on a common canvas so the overlapped
// fraction of the target utterance equals overlap_ratio, scales the
// interferer to the requested ratio, and sums. The mixture is computed as
// images[0] + images[1] (+ noise) sample by sample, so that identity holds
// exactly on the stored buffers.
inline MixtureBundle make_mixture(const Waveform& dry_target,
                                  const Waveform& dry_interferer,
                                  const Rir& rir_target,
                                  const Rir& rir_interferer,
                                  const MixSpec& spec) {
  spec.validate();
  if (dry_target.channels != 1 || dry_interferer.channels != 1)
    throw DataError("dry signals must be mono");
  if (dry_target.sample_rate != dry_interferer.sample_rate ||
      dry_target.sample_rate != rir_target.sample_rate ||
      dry_target.sample_rate != rir_interferer.sample_rate)
    throw DataError("sample rates of dry signals and impulse responses differ");
  if (rir_target.channels != rir_interferer.channels)
    throw DataError("impulse responses have different channel counts");

  const long nt = static_cast<long>(dry_target.samples);
  const long ni = static_cast<long>(dry_interferer.samples);
  const long ov = std::lround(spec.overlap_ratio * static_cast<double>(nt));
  if (ov < 1 || ov > ni)
    throw DataError("overlap of " + std::to_string(ov) +
                    " samples infeasible for interferer of " +
                    std::to_string(ni) + " samples");

  // Onsets of the interferer utterance relative to the target's start that
  // realize exactly `ov` overlapped samples: the two edge placements in
  // general, a whole interval when one utterance fits inside the other.
  RandomStream rng(derive_seed(spec.seed, {seed_stream::kPlacement}));
  const long lo = ov - ni, hi = nt - ov;
  long onset;
  if (ov == std::min(nt, ni)) {
    onset = rng.uniform_int(std::min(lo, hi), std::max(lo, hi));
  } else {
    onset = rng.uniform() < 0.5 ? lo : hi;
  }

  const long start = std::min(0L, onset);
  const std::size_t t_off = static_cast<std::size_t>(-start);
  const std::size_t i_off = static_cast<std::size_t>(onset - start);

  Waveform img_t = synth_reverberant(dry_target, rir_target);
  Waveform img_i = synth_reverberant(dry_interferer, rir_interferer);
  const std::size_t canvas = std::max(t_off + img_t.samples, i_off + img_i.samples);
  const std::size_t channels = rir_target.channels;

  MixtureBundle bundle;
  bundle.images.assign(2, Waveform(channels, canvas, dry_target.sample_rate));
  for (std::size_t m = 0; m < channels; ++m) {
    for (std::size_t n = 0; n < img_t.samples; ++n)
      bundle.images[0].at(m, t_off + n) = img_t.at(m, n);
    for (std::size_t n = 0; n < img_i.samples; ++n)
      bundle.images[1].at(m, i_off + n) = img_i.at(m, n);
  }

  SampleRange overlap{std::max(t_off, i_off),
                      std::min(t_off + static_cast<std::size_t>(nt),
                               i_off + static_cast<std::size_t>(ni))};
  const double gain =
      scale_to_sir(bundle.images[0], bundle.images[1], spec.sir_db, overlap);
  for (auto& v : bundle.images[1].data) v *= gain;

  bundle.mixture = Waveform(channels, canvas, dry_target.sample_rate);
  for (std::size_t i = 0; i < bundle.mixture.data.size(); ++i)
    bundle.mixture.data[i] =
        bundle.images[0].data[i] + bundle.images[1].data[i];

  bundle.meta.sir_db = spec.sir_db;
  bundle.meta.overlap_ratio = spec.overlap_ratio;
  bundle.meta.seed = spec.seed;
  bundle.meta.interferer_gain = gain;
  bundle.meta.target_offset = t_off;
  bundle.meta.interferer_offset = i_off;
  bundle.meta.dry_target_samples = static_cast<std::size_t>(nt);
  bundle.meta.dry_interferer_samples = static_cast<std::size_t>(ni);
  bundle.meta.overlap = overlap;

  if (spec.noise_snr_db && std::isfinite(*spec.noise_snr_db))
    add_noise(bundle, *spec.noise_snr_db,
              derive_seed(spec.seed, {seed_stream::kNoise}));
  return bundle;
}

// Adds white Gaussian noise scaled so the (total, all-channel) mixture-to-
// noise power ratio equals snr_db exactly. An infinite snr leaves the bundle
// unchanged. The updated mixture is (images[0] + images[1]) + noise.
inline void add_noise(MixtureBundle& bundle, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db)) return;
  if (!(snr_db > 0.0) || !std::isfinite(snr_db))
    throw ConfigError("noise snr_db must be positive and finite");

  Waveform noise(bundle.mixture.channels, bundle.mixture.samples,
                 bundle.mixture.sample_rate);
  RandomStream rng(seed);
  double p_noise = 0.0;
  for (auto& v : noise.data) {
    v = rng.normal();
    p_noise += v * v;
  }
  double p_mix = 0.0;
  for (double v : bundle.mixture.data) p_mix += v * v;
  if (!(p_mix > 0.0)) throw DataError("mixture is silent; cannot set noise level");
  if (!(p_noise > 0.0)) throw DataError("degenerate noise draw");

  const double scale = std::sqrt(p_mix / (p_noise * db_to_power(snr_db)));
  for (auto& v : noise.data) v *= scale;
  for (std::size_t i = 0; i < bundle.mixture.data.size(); ++i)
    bundle.mixture.data[i] += noise.data[i];
  bundle.noise = std::move(noise);
  bundle.meta.noise_snr_db = snr_db;
}

}  // namespace rirsf
