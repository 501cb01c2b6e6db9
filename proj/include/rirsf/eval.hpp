#pragma once
// Oracle dominance masks, feature-quality metrics, RIR-estimation mismatch
// scenarios, and the desk-scale experiment driver.
//
// The experiment is a pure function of (config, seed): rooms, geometries,
// utterances, and mixing parameters are all drawn from seeds derived off the
// master seed by fixed path ids, and accumulation is keyed so row order is
// independent of processing order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/features.hpp"
#include "rirsf/mix.hpp"
#include "rirsf/room.hpp"
#include "rirsf/stft.hpp"

namespace rirsf {

// ---------------------------------------------------------------------------
// Dominance mask
// ---------------------------------------------------------------------------

enum class BinLabel : unsigned char { kNeither = 0, kTarget = 1, kInterferer = 2 };

struct DominanceMask {
  std::size_t frames = 0;
  std::size_t bins = 0;
  double margin_db = 3.0;
  double floor_db = -60.0;
  std::size_t ref_channel = 0;
  std::vector<BinLabel> labels;       // frames x bins, row-major
  std::vector<unsigned char> active;  // 1 = above the energy floor

  BinLabel label(std::size_t t, std::size_t f) const {
    return labels[t * bins + f];
  }
  bool is_active(std::size_t t, std::size_t f) const {
    return active[t * bins + f] != 0;
  }
  std::size_t count(BinLabel l) const {
    std::size_t n = 0;
    for (BinLabel x : labels) n += (x == l) ? 1 : 0;
    return n;
  }
  std::size_t count_active() const {
    std::size_t n = 0;
    for (unsigned char a : active) n += a ? 1 : 0;
    return n;
  }
};

// Label each T-F bin by which source image dominates it on the reference
// channel. A bin is target/interferer when its magnitude lead exceeds
// margin_db; bins inside the margin are neither, and bins whose stronger
// image sits below floor_db of the utterance peak are inactive (and neither).
inline DominanceMask dominance_mask(const Spectrogram& target_img,
                                    const Spectrogram& interferer_img,
                                    double margin_db = 3.0,
                                    std::size_t ref_channel = 0,
                                    double floor_db = -60.0) {
  if (target_img.frames != interferer_img.frames ||
      target_img.bins != interferer_img.bins)
    throw DataError("image spectrograms are not frame-aligned");
  if (ref_channel >= target_img.channels ||
      ref_channel >= interferer_img.channels)
    throw DataError("reference channel out of range");
  if (margin_db < 0.0) throw ConfigError("dominance margin must be >= 0 dB");

  DominanceMask mask;
  mask.frames = target_img.frames;
  mask.bins = target_img.bins;
  mask.margin_db = margin_db;
  mask.floor_db = floor_db;
  mask.ref_channel = ref_channel;
  mask.labels.assign(mask.frames * mask.bins, BinLabel::kNeither);
  mask.active.assign(mask.frames * mask.bins, 0);

  double peak = 0.0;
  for (std::size_t t = 0; t < mask.frames; ++t)
    for (std::size_t f = 0; f < mask.bins; ++f)
      peak = std::max({peak, std::abs(target_img.at(ref_channel, t, f)),
                       std::abs(interferer_img.at(ref_channel, t, f))});
  const double floor_mag = peak * db_to_amplitude(floor_db);

  for (std::size_t t = 0; t < mask.frames; ++t)
    for (std::size_t f = 0; f < mask.bins; ++f) {
      const double at = std::abs(target_img.at(ref_channel, t, f));
      const double ai = std::abs(interferer_img.at(ref_channel, t, f));
      if (std::max(at, ai) <= floor_mag) continue;
      mask.active[t * mask.bins + f] = 1;
      // Magnitude lead in dB; +/-inf when one image is exactly silent.
      double lead;
      if (ai == 0.0) lead = std::numeric_limits<double>::infinity();
      else if (at == 0.0) lead = -std::numeric_limits<double>::infinity();
      else lead = 20.0 * std::log10(at / ai);
      if (lead > margin_db)
        mask.labels[t * mask.bins + f] = BinLabel::kTarget;
      else if (lead < -margin_db)
        mask.labels[t * mask.bins + f] = BinLabel::kInterferer;
    }
  return mask;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Mann-Whitney AUC with midrank tie handling: probability that a random
// positive outranks a random negative, ties counting one half. A constant
// feature scores exactly 0.5.
inline double rank_auc(const std::vector<double>& positives,
                       const std::vector<double>& negatives) {
  if (positives.empty() || negatives.empty())
    throw DataError("rank_auc requires both classes to be non-empty");
  struct Entry {
    double value;
    bool positive;
  };
  std::vector<Entry> all;
  all.reserve(positives.size() + negatives.size());
  for (double v : positives) all.push_back({v, true});
  for (double v : negatives) all.push_back({v, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    // 1-based ranks i+1 .. j share the midrank (i + j + 1) / 2.
    const double midrank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t r = i; r < j; ++r)
      if (all[r].positive) rank_sum_pos += midrank;
    i = j;
  }
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

struct MetricsReport {
  double mean_on_target = 0.0;
  double mean_on_interferer = 0.0;
  double auc = 0.0;
  double lps_correlation = 0.0;
  bool has_target = false;
  bool has_interferer = false;
  bool has_auc = false;
  bool has_correlation = false;
  std::size_t n_target = 0;
  std::size_t n_interferer = 0;
  std::size_t n_active = 0;
};

// Score one feature map against the oracle mask: class means, target-vs-
// interferer AUC, and Pearson correlation with the target log-power spectrum
// over active bins. Metrics whose inputs are empty are flagged absent rather
// than reported as zero. Single-row (frame-constant) features broadcast.
inline MetricsReport feature_metrics(const FeatureMap& feature,
                                     const DominanceMask& mask,
                                     const RealMatrix* target_lps = nullptr) {
  const RealMatrix& v = feature.values;
  const bool broadcast = (v.rows == 1 && mask.frames > 1);
  if (v.cols != mask.bins || (!broadcast && v.rows != mask.frames))
    throw DataError("feature shape does not match mask");
  if (target_lps &&
      (target_lps->rows != mask.frames || target_lps->cols != mask.bins))
    throw DataError("target LPS shape does not match mask");

  MetricsReport r;
  std::vector<double> on_target, on_interferer;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t t = 0; t < mask.frames; ++t)
    for (std::size_t f = 0; f < mask.bins; ++f) {
      const double x = v(broadcast ? 0 : t, f);
      if (mask.label(t, f) == BinLabel::kTarget) on_target.push_back(x);
      else if (mask.label(t, f) == BinLabel::kInterferer)
        on_interferer.push_back(x);
      if (mask.is_active(t, f) && target_lps) {
        const double y = (*target_lps)(t, f);
        sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
        ++r.n_active;
      }
    }

  r.n_target = on_target.size();
  r.n_interferer = on_interferer.size();
  if (!on_target.empty()) {
    r.mean_on_target =
        std::accumulate(on_target.begin(), on_target.end(), 0.0) /
        static_cast<double>(on_target.size());
    r.has_target = true;
  }
  if (!on_interferer.empty()) {
    r.mean_on_interferer =
        std::accumulate(on_interferer.begin(), on_interferer.end(), 0.0) /
        static_cast<double>(on_interferer.size());
    r.has_interferer = true;
  }
  if (!on_target.empty() && !on_interferer.empty()) {
    r.auc = rank_auc(on_target, on_interferer);
    r.has_auc = true;
  }
  if (target_lps && r.n_active >= 2) {
    const double n = static_cast<double>(r.n_active);
    const double cxx = sxx - sx * sx / n;
    const double cyy = syy - sy * sy / n;
    const double cxy = sxy - sx * sy / n;
    if (cxx > 0.0 && cyy > 0.0) {
      r.lps_correlation = cxy / std::sqrt(cxx * cyy);
      r.has_correlation = true;
    }
  }
  return r;
}

// Log power spectrum of one channel in dB, clamped 100 dB below its peak so
// silent bins do not produce -inf.
inline RealMatrix log_power_spectrum(const Spectrogram& spec,
                                     std::size_t channel) {
  if (channel >= spec.channels) throw DataError("channel out of range");
  double peak = 0.0;
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t f = 0; f < spec.bins; ++f)
      peak = std::max(peak, std::abs(spec.at(channel, t, f)));
  if (peak <= 0.0)
    throw DataError("log power spectrum of an all-zero channel");
  const double floor_mag = peak * 1e-5;  // peak - 100 dB
  RealMatrix out(spec.frames, spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t f = 0; f < spec.bins; ++f)
      out(t, f) = 20.0 * std::log10(
                      std::max(std::abs(spec.at(channel, t, f)), floor_mag));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic speech-like source
// ---------------------------------------------------------------------------

// Seed-generated stand-in for dry speech: an amplitude-modulated harmonic
// comb (14 harmonics, 1/h roll-off, drifting f0 with vibrato) interleaved
// with unvoiced noise bursts, peak-normalized to 0.5. Lets the full pipeline
// run with zero external data.
inline Waveform synth_speech(double seconds, double sample_rate,
                             std::uint64_t seed) {
  if (!(seconds > 0.0)) throw ConfigError("duration must be positive");
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  const std::size_t n =
      static_cast<std::size_t>(std::llround(seconds * sample_rate));
  if (n == 0) throw ConfigError("duration rounds to zero samples");

  RandomStream rng(seed);
  const std::size_t seg =
      std::max<std::size_t>(1, static_cast<std::size_t>(0.2 * sample_rate));
  const std::size_t n_seg = (n + seg - 1) / seg;

  // Piecewise-linear control tracks drawn at segment boundaries.
  std::vector<double> f0(n_seg + 1), amp(n_seg + 1), voiced(n_seg + 1);
  for (auto& v : f0) v = rng.uniform(110.0, 240.0);
  for (auto& v : amp) v = rng.uniform(0.25, 1.0);
  for (auto& v : voiced) v = rng.uniform() < 0.85 ? 1.0 : 0.0;
  const double vib_phase = rng.uniform(0.0, kTwoPi);
  const double am_phase = rng.uniform(0.0, kTwoPi);

  Waveform w;
  w.channels = 1;
  w.samples = n;
  w.sample_rate = sample_rate;
  w.data.assign(n, 0.0);

  constexpr int kHarmonics = 14;
  double phase = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double pos = static_cast<double>(t) / static_cast<double>(seg);
    const std::size_t j = std::min<std::size_t>(
        static_cast<std::size_t>(pos), n_seg - 1);
    const double frac = pos - static_cast<double>(j);
    const double f0_t = (1.0 - frac) * f0[j] + frac * f0[j + 1];
    const double amp_t = (1.0 - frac) * amp[j] + frac * amp[j + 1];
    const double v_t = (1.0 - frac) * voiced[j] + frac * voiced[j + 1];
    const double tt = static_cast<double>(t) / sample_rate;

    const double vibrato =
        1.0 + 0.015 * std::sin(kTwoPi * 5.3 * tt + vib_phase);
    phase += kTwoPi * f0_t * vibrato / sample_rate;
    double harm = 0.0;
    for (int h = 1; h <= kHarmonics; ++h)
      harm += std::sin(h * phase) / static_cast<double>(h);

    const double burst = rng.normal();  // drawn every sample for determinism
    const double syllabic =
        0.55 + 0.45 * std::sin(kTwoPi * 3.1 * tt + am_phase);
    w.data[t] = amp_t * syllabic * (v_t * harm + (1.0 - v_t) * 0.35 * burst);
  }

  double peak = 0.0;
  for (double s : w.data) peak = std::max(peak, std::abs(s));
  if (peak <= 0.0) throw DataError("synthesized signal is silent");
  for (double& s : w.data) s *= 0.5 / peak;
  return w;
}

// ---------------------------------------------------------------------------
// RIR-estimation mismatch scenarios
// ---------------------------------------------------------------------------

enum class Scenario { kIdeal, kSce1, kSce2 };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kIdeal: return "ideal";
    case Scenario::kSce1: return "sce1";
    case Scenario::kSce2: return "sce2";
  }
  return "?";
}

inline Scenario scenario_from_name(const std::string& name) {
  if (name == "ideal") return Scenario::kIdeal;
  if (name == "sce1") return Scenario::kSce1;
  if (name == "sce2") return Scenario::kSce2;
  throw ConfigError("unknown scenario '" + name +
                    "' (expected ideal, sce1, or sce2)");
}

struct ScenarioSpec {
  Scenario kind = Scenario::kIdeal;
  double rt60_lo = 0.3;  // seconds, sce1/sce2 resampling range
  double rt60_hi = 0.8;
  double shift_bound = 0.5;  // meters per dimension, sce2
  std::uint64_t seed = 0;
};

struct PerturbedScene {
  RoomSpec room;
  Vec3 source{};
  ArrayGeometry array;
};

// Produce the (room, positions) a mismatched RIR estimate would be built
// from. ideal: identity. sce1: only rt60 resampled. sce2: rt60 resampled,
// room dimensions shifted within +/-shift_bound per axis, and array+source
// rigidly shifted within the same bound -- the shift is applied identically
// to every microphone and the source, so the source-to-array relative vector
// is preserved to rounding; the shift is clipped so everything stays inside
// the perturbed room with a 5 cm margin.
inline PerturbedScene perturb_scenario(const RoomSpec& room, const Vec3& source,
                                       const ArrayGeometry& array,
                                       const ScenarioSpec& spec) {
  PerturbedScene out{room, source, array};
  if (spec.kind == Scenario::kIdeal) return out;
  if (!(spec.rt60_lo > 0.0) || spec.rt60_hi < spec.rt60_lo)
    throw ConfigError("invalid scenario rt60 range");

  RandomStream rng(spec.seed);
  out.room.rt60 = rng.uniform(spec.rt60_lo, spec.rt60_hi);
  if (spec.kind == Scenario::kSce1) return out;

  if (!(spec.shift_bound >= 0.0))
    throw ConfigError("scenario shift bound must be >= 0");
  constexpr double kMargin = 0.05;
  constexpr int kMaxDraws = 100;
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    Vec3 dims{}, shift{};
    for (int a = 0; a < 3; ++a)
      dims[a] = room.dims[a] +
                rng.uniform(-spec.shift_bound, spec.shift_bound);
    for (int a = 0; a < 3; ++a)
      shift[a] = rng.uniform(-spec.shift_bound, spec.shift_bound);

    // Clip the rigid shift so every mic and the source keep a wall margin.
    bool feasible = true;
    for (int a = 0; a < 3; ++a) {
      double lo_pt = source[a], hi_pt = source[a];
      for (const Vec3& m : array.mics) {
        lo_pt = std::min(lo_pt, m[a]);
        hi_pt = std::max(hi_pt, m[a]);
      }
      const double lo = kMargin - lo_pt;
      const double hi = dims[a] - kMargin - hi_pt;
      if (lo > hi) {
        feasible = false;
        break;
      }
      shift[a] = std::clamp(shift[a], lo, hi);
    }
    if (!feasible) continue;

    out.room.dims = dims;
    out.source = {source[0] + shift[0], source[1] + shift[1],
                  source[2] + shift[2]};
    out.array = array;
    for (Vec3& m : out.array.mics)
      m = {m[0] + shift[0], m[1] + shift[1], m[2] + shift[2]};
    return out;
  }
  throw DataError("perturbed geometry cannot fit inside the room after " +
                  std::to_string(kMaxDraws) + " draws");
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

struct BandSpec {
  std::string name;
  double rt60_lo = 0.0;
  double rt60_hi = 0.0;
};

struct SceneGeometry {
  RoomSpec room;
  ArrayGeometry array;
  Vec3 target{};
  Vec3 interferer{};
};

// Draw one random scene for a reverberation band: room dimensions uniform
// in the protocol box, the linear array placed at a random interior position,
// and two talkers at least 0.8 m from the array and 1 m from each other.
// rt60 is drawn from the band, raised when necessary so the room's uniform
// absorption stays realizable.
inline SceneGeometry sample_scene(const BandSpec& band, RandomStream& rng) {
  SceneGeometry scene;
  scene.room.dims = {rng.uniform(3.0, 8.0), rng.uniform(3.0, 6.0),
                     rng.uniform(2.5, 4.0)};
  const double feasible_lo = 1.05 * min_feasible_rt60(scene.room);
  const double lo = std::max(band.rt60_lo, feasible_lo);
  scene.room.rt60 = rng.uniform(lo, std::max(band.rt60_hi, lo));

  const auto& d = scene.room.dims;
  const double aperture = ArrayGeometry::kOffsets.back();
  const Vec3 origin{rng.uniform(0.5, d[0] - 0.5 - aperture),
                    rng.uniform(0.5, d[1] - 0.5),
                    rng.uniform(1.0, std::min(1.6, d[2] - 0.5))};
  scene.array = ArrayGeometry::linear_default(origin);
  const Vec3 center = scene.array.center();

  auto draw_talker = [&](const Vec3* other) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const Vec3 p{rng.uniform(0.5, d[0] - 0.5), rng.uniform(0.5, d[1] - 0.5),
                   rng.uniform(1.0, std::min(1.8, d[2] - 0.5))};
      if (dist3(p, center) < 0.8) continue;
      if (other && dist3(p, *other) < 1.0) continue;
      return p;
    }
    throw DataError("could not place talker away from array and other talker");
  };
  scene.target = draw_talker(nullptr);
  scene.interferer = draw_talker(&scene.target);
  return scene;
}

struct ExperimentConfig {
  std::uint64_t seed = 1;
  FrameParams stft;
  std::size_t rooms = 20;
  std::size_t utterances = 5;  // mixtures per room
  double utterance_seconds = 2.0;
  std::vector<BandSpec> bands = {{"weak", 0.1, 0.6}, {"strong", 0.5, 0.7}};
  std::vector<Scenario> scenarios = {Scenario::kIdeal};
  std::vector<std::size_t> ks = {2, 10};  // RSF filter lengths; SF always runs
  double sir_lo = -6.0;
  double sir_hi = 6.0;
  double overlap_lo = 0.5;
  double overlap_hi = 1.0;
  double noise_snr_db = std::numeric_limits<double>::infinity();  // off
  double margin_db = 3.0;
  double floor_db = -60.0;
  PairSet pairs = PairSet::default_for(ArrayGeometry::kOffsets.size());

  void validate() const {
    stft.validate();
    pairs.validate(ArrayGeometry::kOffsets.size());
    if (rooms == 0) throw ConfigError("rooms must be >= 1");
    if (utterances == 0) throw ConfigError("utterances must be >= 1");
    if (!(utterance_seconds > 0.0))
      throw ConfigError("utterance duration must be positive");
    if (bands.empty()) throw ConfigError("at least one rt60 band required");
    for (const auto& b : bands)
      if (b.name.empty() || !(b.rt60_lo > 0.0) || b.rt60_hi < b.rt60_lo)
        throw ConfigError("band '" + b.name + "' has an invalid rt60 range");
    if (scenarios.empty()) throw ConfigError("at least one scenario required");
    for (std::size_t k : ks)
      if (k < 1) throw ConfigError("rsf k values must be >= 1");
    if (sir_hi < sir_lo) throw ConfigError("invalid sir range");
    if (!(overlap_lo > 0.0) || overlap_hi < overlap_lo || overlap_hi > 1.0)
      throw ConfigError("overlap range must lie within (0, 1]");
    if (!(noise_snr_db > 0.0))
      throw ConfigError("noise snr must be positive dB (or +inf to disable)");
    if (margin_db < 0.0) throw ConfigError("margin must be >= 0 dB");
  }
};

// Seed-path ids for the experiment's derived random streams.
namespace exp_stream {
inline constexpr std::uint64_t kRoom = 10;
inline constexpr std::uint64_t kScenario = 11;
inline constexpr std::uint64_t kUtterance = 12;
}  // namespace exp_stream

struct ReportRow {
  std::string band;
  std::string scenario;
  std::string feature;  // "sf" or "rsf"
  std::size_t k = 1;
  std::size_t utterances = 0;  // contributing mixtures
  // Means over contributing utterances; the has_* flags mirror MetricsReport.
  double mean_on_target = 0.0;
  double mean_on_interferer = 0.0;
  double auc = 0.0;
  double lps_correlation = 0.0;
  bool has_target = false;
  bool has_interferer = false;
  bool has_auc = false;
  bool has_correlation = false;
};

struct ExperimentFailure {
  std::string band;
  std::size_t room = 0;
  std::size_t utterance = 0;  // npos for room-level setup failures
  std::string message;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<ExperimentFailure> failures;
  std::size_t utterances_done = 0;
};

namespace detail {

struct RowAccumulator {
  double sum_target = 0, sum_interferer = 0, sum_auc = 0, sum_corr = 0;
  std::size_t n_target = 0, n_interferer = 0, n_auc = 0, n_corr = 0;
  std::size_t n_utterances = 0;

  void add(const MetricsReport& m) {
    ++n_utterances;
    if (m.has_target) { sum_target += m.mean_on_target; ++n_target; }
    if (m.has_interferer) { sum_interferer += m.mean_on_interferer; ++n_interferer; }
    if (m.has_auc) { sum_auc += m.auc; ++n_auc; }
    if (m.has_correlation) { sum_corr += m.lps_correlation; ++n_corr; }
  }
};

}  // namespace detail

// Run the full sweep: for every (band, room) draw a scene and simulate the
// true RIRs, derive one estimated target CTF per scenario, then for every
// utterance synthesize a two-talker mixture and score SF plus RSF at each
// configured k against the oracle dominance mask. Per-utterance failures are
// recorded and the run continues. Features are per-pair normalized so means
// are comparable across configurations.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const double fs = cfg.stft.sample_rate;
  const PairSet& pairs = cfg.pairs;

  // Keyed accumulation: (band idx, scenario idx, feature entry idx).
  // Feature entries: 0 = sf, 1.. = rsf at cfg.ks[i-1].
  const std::size_t n_features = 1 + cfg.ks.size();
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>,
           detail::RowAccumulator>
      acc;
  ExperimentReport report;

  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    const BandSpec& band = cfg.bands[b];
    for (std::size_t r = 0; r < cfg.rooms; ++r) {
      SceneGeometry scene;
      Rir rir_target, rir_interferer;
      try {
        RandomStream room_rng(derive_seed(cfg.seed, {exp_stream::kRoom, b, r}));
        scene = sample_scene(band, room_rng);
        rir_target = simulate_rir(scene.room, scene.target, scene.array, fs);
        rir_interferer =
            simulate_rir(scene.room, scene.interferer, scene.array, fs);
      } catch (const std::exception& e) {
        report.failures.push_back({band.name, r, ExperimentFailure::npos,
                                   std::string("scene setup: ") + e.what()});
        continue;
      }

      // One estimated target CTF per scenario, shared by all utterances.
      std::vector<CtfFilter> ctfs(cfg.scenarios.size());
      std::vector<bool> ctf_ok(cfg.scenarios.size(), false);
      for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
        try {
          Rir est;
          if (cfg.scenarios[s] == Scenario::kIdeal) {
            est = rir_target;
          } else {
            ScenarioSpec sspec;
            sspec.kind = cfg.scenarios[s];
            sspec.seed = derive_seed(cfg.seed, {exp_stream::kScenario, b, r, s});
            const PerturbedScene p =
                perturb_scenario(scene.room, scene.target, scene.array, sspec);
            est = simulate_rir(p.room, p.source, p.array, fs);
          }
          ctfs[s] = ctf_from_rir(align_onset(est), cfg.stft);
          ctf_ok[s] = true;
        } catch (const std::exception& e) {
          report.failures.push_back(
              {band.name, r, ExperimentFailure::npos,
               scenario_name(cfg.scenarios[s]) + std::string(": ") + e.what()});
        }
      }

      for (std::size_t u = 0; u < cfg.utterances; ++u) {
        try {
          const std::uint64_t useed =
              derive_seed(cfg.seed, {exp_stream::kUtterance, b, r, u});
          RandomStream urng(useed);
          const double sir = urng.uniform(cfg.sir_lo, cfg.sir_hi);
          const double overlap = urng.uniform(cfg.overlap_lo, cfg.overlap_hi);

          const Waveform dry_t =
              synth_speech(cfg.utterance_seconds, fs, derive_seed(useed, {1}));
          const Waveform dry_i =
              synth_speech(cfg.utterance_seconds, fs, derive_seed(useed, {2}));

          MixSpec ms;
          ms.sir_db = sir;
          ms.overlap_ratio = overlap;
          ms.noise_snr_db = cfg.noise_snr_db;
          ms.seed = derive_seed(useed, {3});
          const MixtureBundle bundle =
              make_mixture(dry_t, dry_i, rir_target, rir_interferer, ms);

          const Spectrogram spec_mix = stft(bundle.mixture, cfg.stft);
          const Spectrogram spec_t = stft(bundle.images[0], cfg.stft);
          const Spectrogram spec_i = stft(bundle.images[1], cfg.stft);
          const DominanceMask mask = dominance_mask(
              spec_t, spec_i, cfg.margin_db, 0, cfg.floor_db);
          const RealMatrix lps = log_power_spectrum(spec_t, 0);

          for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
            if (!ctf_ok[s]) continue;
            for (std::size_t fe = 0; fe < n_features; ++fe) {
              const FeatureMap fm =
                  fe == 0
                      ? compute_sf(spec_mix, ctfs[s], pairs, true)
                      : compute_rsf(spec_mix, ctfs[s], pairs, cfg.ks[fe - 1],
                                    true);
              acc[{b, s, fe}].add(feature_metrics(fm, mask, &lps));
            }
          }
          ++report.utterances_done;
        } catch (const std::exception& e) {
          report.failures.push_back({band.name, r, u, e.what()});
        }
      }
    }
  }

  // Emit rows in configured order regardless of accumulation order.
  for (std::size_t b = 0; b < cfg.bands.size(); ++b)
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s)
      for (std::size_t fe = 0; fe < n_features; ++fe) {
        const auto it = acc.find({b, s, fe});
        ReportRow row;
        row.band = cfg.bands[b].name;
        row.scenario = scenario_name(cfg.scenarios[s]);
        row.feature = fe == 0 ? "sf" : "rsf";
        row.k = fe == 0 ? 1 : cfg.ks[fe - 1];
        if (it != acc.end()) {
          const detail::RowAccumulator& a = it->second;
          row.utterances = a.n_utterances;
          if (a.n_target) {
            row.mean_on_target = a.sum_target / a.n_target;
            row.has_target = true;
          }
          if (a.n_interferer) {
            row.mean_on_interferer = a.sum_interferer / a.n_interferer;
            row.has_interferer = true;
          }
          if (a.n_auc) {
            row.auc = a.sum_auc / a.n_auc;
            row.has_auc = true;
          }
          if (a.n_corr) {
            row.lps_correlation = a.sum_corr / a.n_corr;
            row.has_correlation = true;
          }
        }
        report.rows.push_back(std::move(row));
      }
  return report;
}

}  // namespace rirsf
