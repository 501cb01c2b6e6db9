// Acceptance gate. Runs nine checks, prints exactly one
//   [PASS]/[FAIL] criterion N: ...
// line per check with the measured values, and exits with the number of
// failures. Thresholds and runtime budgets are pinned here on purpose.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rirsf/rirsf.hpp"

namespace fs = std::filesystem;
using namespace rirsf;

namespace {

int g_failed = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

template <typename... Args>
std::string format(const char* f, Args... args) {
  char buf[768];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void report(int n, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", n,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failed;
}

const ReportRow& find_row(const ExperimentReport& rep, const std::string& band,
                          const std::string& scenario,
                          const std::string& feature, std::size_t k) {
  for (const ReportRow& r : rep.rows)
    if (r.band == band && r.scenario == scenario && r.feature == feature &&
        (feature == "sf" || r.k == k))
      return r;
  throw DataError("report row missing: " + band + "/" + scenario + "/" +
                  feature);
}

// --- criterion 1: RSF(k=1) reduces to SF ------------------------------------

void criterion1() {
  Timer timer;
  const std::size_t kFixtures = 50;
  double worst = 0.0;
  for (std::size_t i = 0; i < kFixtures; ++i) {
    RandomStream rng(derive_seed(9001, {i}));
    const std::size_t m = 2 * static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t frames =
        static_cast<std::size_t>(rng.uniform_int(3, 24));
    const std::size_t bins = static_cast<std::size_t>(rng.uniform_int(9, 65));
    const std::size_t taps = static_cast<std::size_t>(rng.uniform_int(1, 9));
    FrameParams p;
    Spectrogram spec(m, frames, bins, p);
    for (auto& z : spec.data) z = cdouble(rng.normal(), rng.normal());
    CtfFilter ctf(m, taps, bins, p);
    for (auto& z : ctf.data) z = cdouble(rng.normal(), rng.normal());
    const PairSet pairs = PairSet::default_for(m);
    const FeatureMap sf = compute_sf(spec, ctf, pairs);
    const FeatureMap rsf = compute_rsf(spec, ctf, pairs, 1);
    for (std::size_t j = 0; j < sf.values.size(); ++j)
      worst = std::max(worst,
                       std::abs(sf.values.data[j] - rsf.values.data[j]));
  }
  const double secs = timer.seconds();
  report(1, worst <= 1e-6 && secs < 5.0,
         format("RSF(k=1) vs SF pointwise max |diff| %.3g over %zu random "
                "(spectrogram, filter) fixtures, tolerance 1e-6 [%.2f s]",
                worst, kFixtures, secs));
}

// --- criterion 2: anechoic integer delays recover full coherence ------------

void criterion2() {
  Timer timer;
  FrameParams p;
  p.window = Window::kRect;

  // Plane wave with exact integer sample delays per channel. The source is a
  // 125 Hz comb (bins 4h of the 512-point transform), periodic over every
  // fully covered rectangular frame, so interior frames have zero leakage and
  // exactly the steering phase at each harmonic bin.
  const std::array<long, 8> delays = {0, 2, 4, 5, 8, 9, 11, 13};
  const std::size_t n = 64000;
  const int harmonics = 24;
  Waveform wave(8, n, p.sample_rate);
  for (std::size_t m = 0; m < 8; ++m)
    for (std::size_t i = 0; i < n; ++i) {
      const double s = static_cast<double>(static_cast<long>(i) - delays[m]);
      double v = 0.0;
      for (int h = 1; h <= harmonics; ++h)
        v += std::sin(kTwoPi * 4.0 * h * s / 512.0) / static_cast<double>(h);
      wave.at(m, i) = v;
    }
  const Spectrogram spec = stft(wave, p);

  ComplexMatrix steering(8, p.bins());
  for (std::size_t m = 0; m < 8; ++m)
    for (std::size_t f = 0; f < p.bins(); ++f) {
      const double ang = -kTwoPi * static_cast<double>(f) *
                         static_cast<double>(delays[m]) / 512.0;
      steering(m, f) = cdouble(std::cos(ang), std::sin(ang));
    }
  const PairSet pairs = PairSet::default_for(8);
  const FeatureMap sf = compute_sf(spec, steering, pairs);

  // Active bins: within -40 dB of the peak magnitude on the reference
  // channel, over fully covered frames (the first and last frame see the
  // zero fill outside the signal, which is edge effect, not the source).
  double peak = 0.0;
  for (std::size_t t = 1; t + 1 < spec.frames; ++t)
    for (std::size_t f = 0; f < spec.bins; ++f)
      peak = std::max(peak, std::abs(spec.at(0, t, f)));
  const double floor = peak * 1e-2;
  double sum = 0.0;
  std::size_t active = 0;
  for (std::size_t t = 1; t + 1 < spec.frames; ++t)
    for (std::size_t f = 0; f < spec.bins; ++f)
      if (std::abs(spec.at(0, t, f)) >= floor) {
        sum += sf.values(t, f);
        ++active;
      }
  const double mean = active ? sum / static_cast<double>(active) : 0.0;
  const double want = 0.99 * static_cast<double>(pairs.size());
  const double secs = timer.seconds();
  report(2, active > 0 && mean >= want && secs < 10.0,
         format("anechoic integer-delay comb: mean SF %.6f over %zu active "
                "bins, threshold %.2f (= 0.99 * %zu pairs) [%.2f s]",
                mean, active, want, pairs.size(), secs));
}

// --- criteria 3+4: one 20-room two-band run ----------------------------------

ExperimentReport g_rep34;
bool g_rep34_ok = false;

void criterion3() {
  Timer timer;
  ExperimentConfig cfg;  // defaults: 20 rooms, 5 utterances, weak+strong,
  cfg.seed = 42;         // ks {2,10}, ideal scenario, SIR [-6,6], ov [.5,1]
  const ExperimentReport rep = run_experiment(cfg);
  g_rep34 = rep;
  g_rep34_ok = true;
  const double secs = timer.seconds();

  const ReportRow& sf = find_row(rep, "strong", "ideal", "sf", 1);
  const ReportRow& rsf2 = find_row(rep, "strong", "ideal", "rsf", 2);
  const ReportRow& rsf10 = find_row(rep, "strong", "ideal", "rsf", 10);
  const bool flags = sf.has_target && rsf10.has_target && sf.has_auc &&
                     rsf2.has_auc && rsf10.has_auc;
  const double margin = rsf10.mean_on_target - sf.mean_on_target;
  // Margin floor frozen from the first run of this seeded protocol, which
  // measured 0.141; 0.12 keeps slack for protocol-level changes while still
  // witnessing a double-digit effect size in normalized units.
  const double kMarginFloor = 0.12;
  const bool pass = flags && margin >= kMarginFloor && rsf10.auc > rsf2.auc &&
                    rsf2.auc > sf.auc && secs < 600.0;
  report(3, pass,
         format("strong band: target-bin mean RSF(10) - SF = %.3f (>= %.2f); "
                "AUC rsf10 %.4f > rsf2 %.4f > sf %.4f; %zu failures [%.0f s]",
                margin, kMarginFloor, rsf10.auc, rsf2.auc, sf.auc,
                rep.failures.size(), secs));
}

void criterion4() {
  if (!g_rep34_ok) {
    report(4, false, "criterion 3's run unavailable");
    return;
  }
  const ReportRow& sf_w = find_row(g_rep34, "weak", "ideal", "sf", 1);
  const ReportRow& sf_s = find_row(g_rep34, "strong", "ideal", "sf", 1);
  const ReportRow& r10_w = find_row(g_rep34, "weak", "ideal", "rsf", 10);
  const ReportRow& r10_s = find_row(g_rep34, "strong", "ideal", "rsf", 10);
  const bool flags =
      sf_w.has_auc && sf_s.has_auc && r10_w.has_auc && r10_s.has_auc;
  const double drop_sf = sf_w.auc - sf_s.auc;
  const double drop_rsf = r10_w.auc - r10_s.auc;
  report(4, flags && drop_rsf < drop_sf,
         format("AUC drop weak->strong: rsf10 %+.4f < sf %+.4f "
                "(same run as criterion 3)",
                drop_rsf, drop_sf));
}

// --- criterion 5: scenario robustness ordering -------------------------------

void criterion5() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.bands = {{"strong", 0.5, 0.7}};
  cfg.scenarios = {Scenario::kIdeal, Scenario::kSce1, Scenario::kSce2};
  cfg.ks = {10};
  const ExperimentReport rep = run_experiment(cfg);
  const double secs = timer.seconds();

  const ReportRow& ideal = find_row(rep, "strong", "ideal", "rsf", 10);
  const ReportRow& sce1 = find_row(rep, "strong", "sce1", "rsf", 10);
  const ReportRow& sce2 = find_row(rep, "strong", "sce2", "rsf", 10);
  const bool flags = ideal.has_auc && sce1.has_auc && sce2.has_auc;
  const double gap1 = std::abs(sce1.auc - ideal.auc);
  const bool pass =
      flags && gap1 <= 0.05 && sce2.auc < sce1.auc && secs < 600.0;
  report(5, pass,
         format("rsf10 AUC ideal %.4f, sce1 %.4f (|gap| %.4f <= 0.05), "
                "sce2 %.4f < sce1; %zu failures [%.0f s]",
                ideal.auc, sce1.auc, gap1, sce2.auc, rep.failures.size(),
                secs));
}

// --- criterion 6: matched-filter energy concentration ------------------------

void criterion6() {
  Timer timer;
  // Rebuild the strong-band scenes of the main experiment (band index 1 of
  // criterion 3's run) and check every simulated response.
  const BandSpec strong{"strong", 0.5, 0.7};
  FrameParams p;
  std::size_t rirs = 0, channels = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  bool ordered = true;
  for (std::size_t r = 0; r < 20; ++r) {
    RandomStream rng(derive_seed(42, {exp_stream::kRoom, 1, r}));
    const SceneGeometry scene = sample_scene(strong, rng);
    for (const Vec3* src : {&scene.target, &scene.interferer}) {
      const Rir rir = align_onset(
          simulate_rir(scene.room, *src, scene.array, p.sample_rate));
      const CtfFilter ctf = ctf_from_rir(rir, p);
      const std::vector<double> c1 = kernel_concentration(ctf, 1);
      const std::vector<double> c10 = kernel_concentration(ctf, 10);
      ++rirs;
      for (std::size_t m = 0; m < c1.size(); ++m) {
        ordered = ordered && c10[m] > c1[m];
        worst_ratio = std::min(worst_ratio, c10[m] / c1[m]);
        ++channels;
      }
    }
  }
  const double secs = timer.seconds();
  report(6, ordered && secs < 60.0,
         format("kernel concentration k=10 > k=1 on %zu/%zu channels over "
                "%zu strong-reverb responses (worst ratio %.3f) [%.1f s]",
                channels, channels, rirs, worst_ratio, secs));
}

// --- criterion 7: acoustics validity -----------------------------------------

void criterion7() {
  Timer timer;
  // Schroeder T30 against the requested decay across the protocol range.
  RoomSpec room;
  room.dims = {3.2, 3.0, 2.6};
  ArrayGeometry mic;
  mic.mics = {{2.2, 1.1, 1.2}};
  const Vec3 src{0.9, 2.1, 1.5};
  double worst_rel = 0.0;
  for (double rt : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
    room.rt60 = rt;
    const double measured = measure_rt60(simulate_rir(room, src, mic, 16000.0));
    worst_rel = std::max(worst_rel, std::abs(measured - rt) / rt);
  }

  // Order-1 arrival count: the response must equal the sum over exactly the
  // direct path plus one mirror image per wall, written out by hand.
  RoomSpec r1;
  r1.dims = {3.2, 4.1, 2.7};
  r1.rt60 = 0.4;
  r1.max_order = 1;
  const Vec3 s1{0.8, 1.1, 0.7};
  const Vec3 m1{2.0, 2.6, 1.5};
  ArrayGeometry a1;
  a1.mics = {m1};
  const Rir rir = simulate_rir(r1, s1, a1, 16000.0);
  const double beta = std::exp(-0.5 * absorption_from_rt60(r1).alpha);
  const Vec3 images[7] = {
      {0.8, 1.1, 0.7},  {-0.8, 1.1, 0.7}, {5.6, 1.1, 0.7}, {0.8, -1.1, 0.7},
      {0.8, 7.1, 0.7},  {0.8, 1.1, -0.7}, {0.8, 1.1, 4.7}};
  Rir want(1, rir.taps, 16000.0);
  for (int i = 0; i < 7; ++i) {
    const double d = dist3(images[i], m1);
    const double gain = (i == 0 ? 1.0 : beta) / (4.0 * kPi * d);
    detail::add_fractional_impulse(want.data.data(),
                                   static_cast<long>(want.taps),
                                   d * 16000.0 / 343.0, gain);
  }
  double err = 0.0, scale = 0.0;
  for (std::size_t t = 0; t < rir.taps; ++t) {
    err = std::max(err, std::abs(rir.at(0, t) - want.at(0, t)));
    scale = std::max(scale, std::abs(want.at(0, t)));
  }
  const bool arrivals_ok =
      scale > 0.0 && err < 1e-9 * scale && ism_image_count(1) == 7;

  const double secs = timer.seconds();
  report(7, worst_rel <= 0.20 && arrivals_ok && secs < 60.0,
         format("measured rt60 within %.1f%% of target over [0.1, 0.7] s "
                "(limit 20%%); order-1 response matches the hand-enumerated "
                "7 arrivals (rel err %.2g) [%.1f s]",
                100.0 * worst_rel, err / (scale > 0.0 ? scale : 1.0), secs));
}

// --- criterion 8: numerical core ----------------------------------------------

void criterion8() {
  Timer timer;
  RandomStream rng(4242);

  // STFT round trip for every supported window family.
  double worst_rt = 0.0;
  const std::array<std::pair<Window, std::size_t>, 3> setups = {
      {{Window::kSqrtHann, 256}, {Window::kHann, 128}, {Window::kRect, 256}}};
  for (const auto& [win, hop] : setups) {
    FrameParams p;
    p.window = win;
    p.hop = hop;
    Waveform x(3, 5000, p.sample_rate);
    for (auto& v : x.data) v = rng.normal();
    const Waveform y = istft(stft(x, p));
    if (y.samples < x.samples) {
      worst_rt = 1.0;
      break;
    }
    for (std::size_t m = 0; m < x.channels; ++m)
      for (std::size_t i = 0; i < x.samples; ++i)
        worst_rt = std::max(worst_rt, std::abs(y.at(m, i) - x.at(m, i)));
  }

  // Matched filter against the definition evaluated directly.
  const std::size_t T = 64, F = 65, K = 16;
  ComplexMatrix spec(T, F), kernel(K, F);
  for (auto& z : spec.data) z = cdouble(rng.normal(), rng.normal());
  for (auto& z : kernel.data) z = cdouble(rng.normal(), rng.normal());
  double worst_mf = 0.0;
  for (std::size_t k : {std::size_t{1}, std::size_t{4}, std::size_t{16}}) {
    const ComplexMatrix got = matched_filter_time_axis(spec, kernel, k);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) {
        cdouble acc = 0.0;
        for (std::size_t n = 0; n < k && t + n < T; ++n)
          acc += std::conj(kernel(n, f)) * spec(t + n, f);
        worst_mf = std::max(worst_mf, std::abs(got(t, f) - acc));
      }
  }

  // First kernel element exactly real and non-negative, on random filters
  // and on a simulated-room one.
  bool c0_ok = true;
  std::vector<CtfFilter> fixtures;
  for (std::size_t i = 0; i < 6; ++i) {
    FrameParams p;
    CtfFilter ctf(2 + i % 3, 3 + i, 17, p);
    for (auto& z : ctf.data) z = cdouble(rng.normal(), rng.normal());
    fixtures.push_back(std::move(ctf));
  }
  {
    RoomSpec room;
    room.dims = {3.6, 3.0, 2.6};
    room.rt60 = 0.25;
    FrameParams p;
    const Rir rir = align_onset(simulate_rir(
        room, {2.6, 2.2, 1.4}, ArrayGeometry::linear_default({0.5, 1.0, 1.2}),
        p.sample_rate));
    fixtures.push_back(ctf_from_rir(rir, p));
  }
  for (const CtfFilter& ctf : fixtures) {
    const CKernel ck = compute_c_kernel(ctf, std::min<std::size_t>(ctf.frames, 4));
    for (std::size_t m = 0; m < ck.channels; ++m)
      for (std::size_t f = 0; f < ck.bins; ++f)
        c0_ok = c0_ok && ck.at(m, 0, f).imag() == 0.0 &&
                ck.at(m, 0, f).real() >= 0.0;
  }

  const double secs = timer.seconds();
  report(8, worst_rt <= 1e-6 && worst_mf <= 1e-10 && c0_ok && secs < 30.0,
         format("stft round trip max err %.2g (<= 1e-6); matched filter vs "
                "direct sum %.2g (<= 1e-10); C(0) real and non-negative on "
                "all %zu fixtures [%.1f s]",
                worst_rt, worst_mf, fixtures.size(), secs));
}

// --- criterion 9: CLI determinism ----------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(RIRSF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc < 0) return -1;
  return WEXITSTATUS(rc);
}

std::vector<std::string> list_files(const fs::path& root) {
  std::vector<std::string> rel;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      rel.push_back(fs::relative(e.path(), root).string());
  std::sort(rel.begin(), rel.end());
  return rel;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion9() {
  Timer timer;
  const fs::path root = fs::temp_directory_path() / "rirsf_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string scene_cfg = (root / "scene.cfg").string();
  std::ofstream(scene_cfg) << "[room]\ndims = 3.6,3.0,2.6\nrt60 = 0.3\n"
                              "[scene]\ntarget = 2.6,2.2,1.4\n"
                              "interferer = 0.8,2.3,1.5\n";
  const std::string exp_cfg = (root / "exp.cfg").string();
  std::ofstream(exp_cfg) << "[experiment]\nrooms = 1\nutterances = 1\n"
                            "utterance_seconds = 1\nbands = mid:0.4:0.5\n"
                            "scenarios = ideal\nks = 2\n";

  bool ran = true;
  for (const char* leg : {"a", "b"}) {
    const std::string d = (root / leg).string();
    ran = ran && run_cli("--seed 11 --config " + scene_cfg + " --out " + d +
                         "/sim simulate") == 0;
    ran = ran && run_cli("--seed 11 --config " + scene_cfg + " --out " + d +
                         "/bundle mix --seconds 1 --sir 3 --snr 25") == 0;
    ran = ran && run_cli("--seed 11 --out " + d + "/feat features --bundle " +
                         d + "/bundle --feature rsf --k 10") == 0;
    ran = ran && run_cli("--seed 11 --out " + d + "/feat features --bundle " +
                         d + "/bundle --feature sf") == 0;
    ran = ran && run_cli("--seed 11 --config " + exp_cfg + " --out " + d +
                         "/eval eval") == 0;
  }

  std::size_t files = 0, mismatched = 0;
  bool same_sets = false;
  if (ran) {
    const auto fa = list_files(root / "a");
    const auto fb = list_files(root / "b");
    same_sets = !fa.empty() && fa == fb;
    if (same_sets)
      for (const auto& relpath : fa) {
        ++files;
        if (slurp(root / "a" / relpath) != slurp(root / "b" / relpath))
          ++mismatched;
      }
  }
  const double secs = timer.seconds();
  const bool pass =
      ran && same_sets && files >= 10 && mismatched == 0 && secs < 60.0;
  report(9, pass,
         format("simulate/mix/features/eval rerun with the same seed: "
                "%zu output files compared, %zu mismatched%s [%.1f s]",
                files, mismatched, ran ? "" : " (a CLI invocation failed)",
                secs));
  fs::remove_all(root);
}

using CriterionFn = void (*)();

void guarded(int n, CriterionFn fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(n, false, format("unexpected exception: %s", e.what()));
  }
}

}  // namespace

int main() {
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);
  guarded(6, criterion6);
  guarded(7, criterion7);
  guarded(8, criterion8);
  guarded(9, criterion9);
  std::printf("%d of 9 criteria passed\n", 9 - g_failed);
  return g_failed;
}
