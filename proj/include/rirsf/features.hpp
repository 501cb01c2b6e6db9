#pragma once
// Spatial features for a known target position/response.
//
// Two routes to a per-bin target-consistency score:
//  - SF: cosine of (inter-channel phase difference - target phase difference
//    from the steering vector), summed over mic pairs. Valid when one frame
//    of the response captures the target (direct wave dominates).
//  - RSF: replace the raw spectrogram phase with the phase of the mixture
//    matched-filtered along the time axis by the first k frames of the
//    target's frame-domain response, then take the same pairwise cosine sum.
//    For k = 1 this reduces to SF; larger k folds reverberation back into
//    the feature and stays informative under strong reverb.

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/room.hpp"
#include "rirsf/stft.hpp"

namespace rirsf {

struct PairSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  // Outermost-in pairing for an 8-mic array.
  static PairSet default_for(std::size_t channels) {
    PairSet p;
    for (std::size_t i = 0; i < channels / 2; ++i)
      p.pairs.emplace_back(i, channels - 1 - i);
    return p;
  }

  std::size_t size() const { return pairs.size(); }

  void validate(std::size_t channels) const {
    if (pairs.empty()) throw ConfigError("pair set is empty");
    for (const auto& [a, b] : pairs) {
      if (a >= channels || b >= channels)
        throw ConfigError("pair references channel beyond " +
                          std::to_string(channels));
      if (a == b) throw ConfigError("pair must use two distinct channels");
    }
  }

  std::string to_string() const {
    std::string s;
    for (const auto& [a, b] : pairs) {
      if (!s.empty()) s += ";";
      s += std::to_string(a) + "-" + std::to_string(b);
    }
    return s;
  }
};

enum class FeatureKind { kSf, kRsf, kIpd, kTpd, kRp, kDiagnostic };

inline std::string feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::kSf: return "sf";
    case FeatureKind::kRsf: return "rsf";
    case FeatureKind::kIpd: return "ipd";
    case FeatureKind::kTpd: return "tpd";
    case FeatureKind::kRp: return "rp";
    case FeatureKind::kDiagnostic: return "diagnostic";
  }
  return "?";
}

struct FeatureMap {
  RealMatrix values;  // [frames x bins]; single row for frame-constant maps
  FeatureKind kind = FeatureKind::kDiagnostic;
  int k = 0;  // matched-filter length where applicable
  PairSet pairs;
};

// Inter-channel phase difference, wrapped to (-pi, pi].
inline FeatureMap compute_ipd(const Spectrogram& spec,
                              std::pair<std::size_t, std::size_t> pair) {
  if (pair.first >= spec.channels || pair.second >= spec.channels)
    throw DataError("pair channel out of range");
  FeatureMap out;
  out.kind = FeatureKind::kIpd;
  out.pairs.pairs = {pair};
  out.values = RealMatrix(spec.frames, spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t f = 0; f < spec.bins; ++f)
      out.values(t, f) =
          wrap_phase(principal_phase(spec.at(pair.first, t, f)) -
                     principal_phase(spec.at(pair.second, t, f)));
  return out;
}

namespace detail {

// Frame-constant target phase difference from per-channel frame-0 entries.
inline RealMatrix tpd_row(const ComplexMatrix& frame0,
                          std::pair<std::size_t, std::size_t> pair) {
  if (pair.first >= frame0.rows || pair.second >= frame0.rows)
    throw DataError("pair channel out of range");
  RealMatrix row(1, frame0.cols);
  for (std::size_t f = 0; f < frame0.cols; ++f)
    row(0, f) = wrap_phase(principal_phase(frame0(pair.first, f)) -
                           principal_phase(frame0(pair.second, f)));
  return row;
}

inline ComplexMatrix ctf_frame0(const CtfFilter& ctf) {
  ComplexMatrix m(ctf.channels, ctf.bins);
  for (std::size_t c = 0; c < ctf.channels; ++c)
    for (std::size_t f = 0; f < ctf.bins; ++f) m(c, f) = ctf.at(c, 0, f);
  return m;
}

}  // namespace detail

// Target phase difference from frame 0 of the frame-domain response.
inline FeatureMap compute_tpd(const CtfFilter& ctf,
                              std::pair<std::size_t, std::size_t> pair) {
  FeatureMap out;
  out.kind = FeatureKind::kTpd;
  out.pairs.pairs = {pair};
  out.values = detail::tpd_row(detail::ctf_frame0(ctf), pair);
  return out;
}

// Target phase difference straight from a steering matrix.
inline FeatureMap compute_tpd(const ComplexMatrix& steering,
                              std::pair<std::size_t, std::size_t> pair) {
  FeatureMap out;
  out.kind = FeatureKind::kTpd;
  out.pairs.pairs = {pair};
  out.values = detail::tpd_row(steering, pair);
  return out;
}

namespace detail {

inline FeatureMap sf_impl(const Spectrogram& spec, const ComplexMatrix& frame0,
                          const PairSet& pairs, bool normalized) {
  pairs.validate(spec.channels);
  if (frame0.rows != spec.channels || frame0.cols != spec.bins)
    throw DataError("target response shape does not match spectrogram");

  FeatureMap out;
  out.kind = FeatureKind::kSf;
  out.pairs = pairs;
  out.values = RealMatrix(spec.frames, spec.bins);
  for (const auto& pair : pairs.pairs) {
    const RealMatrix tpd = tpd_row(frame0, pair);
    for (std::size_t t = 0; t < spec.frames; ++t)
      for (std::size_t f = 0; f < spec.bins; ++f) {
        const double ipd = principal_phase(spec.at(pair.first, t, f)) -
                           principal_phase(spec.at(pair.second, t, f));
        out.values(t, f) += std::cos(ipd - tpd(0, f));
      }
  }
  if (normalized)
    for (auto& v : out.values.data) v /= static_cast<double>(pairs.size());
  return out;
}

}  // namespace detail

// Spatial feature: sum over pairs of cos(IPD - TPD), TPD taken from frame 0
// of the target's frame-domain response. `normalized` divides by the pair
// count for cross-configuration comparability.
inline FeatureMap compute_sf(const Spectrogram& spec, const CtfFilter& ctf,
                             const PairSet& pairs, bool normalized = false) {
  return detail::sf_impl(spec, detail::ctf_frame0(ctf), pairs, normalized);
}

inline FeatureMap compute_sf(const Spectrogram& spec,
                             const ComplexMatrix& steering,
                             const PairSet& pairs, bool normalized = false) {
  return detail::sf_impl(spec, steering, pairs, normalized);
}

// Phase of the matched-filtered spectrogram for one channel: the channel is
// cross-correlated along the time axis with the first k frames of its own
// target response, and the principal phase of the result is returned.
inline FeatureMap compute_rp(const Spectrogram& spec, const CtfFilter& ctf,
                             std::size_t channel, std::size_t k) {
  if (channel >= spec.channels || channel >= ctf.channels)
    throw DataError("channel out of range");
  if (ctf.bins != spec.bins)
    throw DataError("response bin count does not match spectrogram");
  FeatureMap out;
  out.kind = FeatureKind::kRp;
  out.k = static_cast<int>(k);
  out.values = phase_map(
      matched_filter_time_axis(spec.channel(channel), ctf.channel(channel), k));
  return out;
}

// Reverberation-aware spatial feature: sum over pairs of
// cos(RP(m1) - RP(m2)) with RP the matched-filter phase above.
inline FeatureMap compute_rsf(const Spectrogram& spec, const CtfFilter& ctf,
                              const PairSet& pairs, std::size_t k,
                              bool normalized = false) {
  pairs.validate(spec.channels);
  if (ctf.channels != spec.channels)
    throw DataError("response channel count does not match spectrogram");

  std::map<std::size_t, RealMatrix> rp;
  for (const auto& [a, b] : pairs.pairs)
    for (std::size_t ch : {a, b})
      if (!rp.count(ch)) rp.emplace(ch, compute_rp(spec, ctf, ch, k).values);

  FeatureMap out;
  out.kind = FeatureKind::kRsf;
  out.k = static_cast<int>(k);
  out.pairs = pairs;
  out.values = RealMatrix(spec.frames, spec.bins);
  for (const auto& [a, b] : pairs.pairs) {
    const RealMatrix& ra = rp.at(a);
    const RealMatrix& rb = rp.at(b);
    for (std::size_t i = 0; i < out.values.data.size(); ++i)
      out.values.data[i] += std::cos(ra.data[i] - rb.data[i]);
  }
  if (normalized)
    for (auto& v : out.values.data) v /= static_cast<double>(pairs.size());
  return out;
}

// Effective frame-domain kernel the matched filter applies to the dry
// signal: C(t, f) = sum_{n=0}^{k-1} R(t+n, f) * conj(R(n, f)) per channel,
// frames past the response treated as zero. C(0, f) is a sum of squared
// magnitudes: real and non-negative by construction.
struct CKernel {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  int k = 0;
  std::vector<cdouble> values;

  cdouble& at(std::size_t m, std::size_t t, std::size_t f) {
    return values[(m * frames + t) * bins + f];
  }
  cdouble at(std::size_t m, std::size_t t, std::size_t f) const {
    return values[(m * frames + t) * bins + f];
  }
};

inline CKernel compute_c_kernel(const CtfFilter& ctf, std::size_t k) {
  if (k < 1 || k > ctf.frames)
    throw DataError("kernel length k out of range [1, " +
                    std::to_string(ctf.frames) + "]");
  CKernel out;
  out.channels = ctf.channels;
  out.frames = ctf.frames;
  out.bins = ctf.bins;
  out.k = static_cast<int>(k);
  out.values.assign(ctf.channels * ctf.frames * ctf.bins, cdouble(0, 0));
  for (std::size_t m = 0; m < ctf.channels; ++m)
    for (std::size_t t = 0; t < ctf.frames; ++t)
      for (std::size_t n = 0; n < k && t + n < ctf.frames; ++n)
        for (std::size_t f = 0; f < ctf.bins; ++f)
          out.at(m, t, f) += ctf.at(m, t + n, f) * std::conj(ctf.at(m, n, f));
  return out;
}

// How sharply the effective kernel concentrates at lag zero, per channel:
// ||C(0, .)||_2 over max_{t>=1} ||C(t, .)||_2 (norms across frequency).
// A single-lag kernel reports +infinity.
inline std::vector<double> kernel_concentration(const CtfFilter& ctf,
                                                std::size_t k) {
  const CKernel ck = compute_c_kernel(ctf, k);
  std::vector<double> out(ck.channels);
  for (std::size_t m = 0; m < ck.channels; ++m) {
    double n0 = 0.0, nmax = 0.0;
    for (std::size_t t = 0; t < ck.frames; ++t) {
      double nt = 0.0;
      for (std::size_t f = 0; f < ck.bins; ++f) nt += std::norm(ck.at(m, t, f));
      if (t == 0) n0 = nt;
      else nmax = std::max(nmax, nt);
    }
    if (!(n0 > 0.0))
      throw DataError("kernel is zero at lag 0; response channel is silent");
    out[m] = nmax > 0.0 ? std::sqrt(n0 / nmax)
                        : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace rirsf
