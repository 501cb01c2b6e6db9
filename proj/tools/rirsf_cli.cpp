// Command-line driver: seeded simulation, mixing, feature extraction,
// evaluation, and reporting. Every run is a pure function of (flags, config,
// seed); rerunning with the same inputs overwrites outputs with identical
// bytes.
//
// Exit codes: 0 success, 1 usage error, 2 configuration/data error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rirsf/rirsf.hpp"

namespace fs = std::filesystem;
using namespace rirsf;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string config;
  std::string out = ".";
  bool seed_given = false;
};

KvConfig load_config(const std::string& path) {
  if (path.empty()) return KvConfig{};
  KvConfig cfg = KvConfig::parse_file(path);
  validate_config_schema(cfg);
  return cfg;
}

std::string num(double v) { return detail::format_g9(v); }

std::string index_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03zu%s", prefix, i, ext);
  return buf;
}

void annotate_rir_tensor(Tensor& t, const RoomSpec& room, const Vec3& source,
                         std::uint64_t seed) {
  t.metadata["rt60"] = num(room.rt60);
  t.metadata["dims"] = vec3_to_string(room.dims);
  t.metadata["source"] = vec3_to_string(source);
  t.metadata["seed"] = std::to_string(seed);
}

// ---------------------------------------------------------------------------
// simulate: write one target RIR tensor per room
// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::size_t rooms = 1;
  double rt60 = 0.5;
};

int cmd_simulate(const GlobalOpts& g, const SimulateOpts& o) {
  const KvConfig cfg = load_config(g.config);
  const FrameParams params = frame_params_from_kv(cfg);
  fs::create_directories(g.out);

  if (cfg.sections.count("room")) {
    if (o.rooms != 1)
      throw ConfigError("an explicit [room] config simulates exactly one room");
    RoomSpec room = room_from_kv(cfg);
    const ArrayGeometry array = array_from_kv(cfg);
    Vec3 target{room.dims[0] / 2.0, room.dims[1] / 2.0, 1.5};
    if (cfg.has("scene", "target"))
      target = parse_vec3(cfg.get("scene", "target"), "scene.target");
    const Rir rir = simulate_rir(room, target, array, params.sample_rate);
    Tensor t = tensor_from_rir(rir);
    annotate_rir_tensor(t, room, target, g.seed);
    const std::string path =
        (fs::path(g.out) / index_name("rir_", 0, ".tensor")).string();
    write_tensor(path, t);
    std::cout << "wrote " << path << "\n";
    return 0;
  }

  for (std::size_t r = 0; r < o.rooms; ++r) {
    RandomStream rng(derive_seed(g.seed, {exp_stream::kRoom, 0, r}));
    const SceneGeometry scene =
        sample_scene({"custom", o.rt60, o.rt60}, rng);
    const Rir rir =
        simulate_rir(scene.room, scene.target, scene.array, params.sample_rate);
    Tensor t = tensor_from_rir(rir);
    annotate_rir_tensor(t, scene.room, scene.target, g.seed);
    const std::string path =
        (fs::path(g.out) / index_name("rir_", r, ".tensor")).string();
    write_tensor(path, t);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// mix: synthesize one two-talker bundle (WAVs + RIR tensors + metadata)
// ---------------------------------------------------------------------------

struct MixOpts {
  double rt60 = 0.5;
  double sir = 0.0;
  double overlap = 1.0;
  double seconds = 2.0;
  double snr = std::numeric_limits<double>::infinity();
};

int cmd_mix(const GlobalOpts& g, const MixOpts& o) {
  const KvConfig cfg = load_config(g.config);
  const FrameParams params = frame_params_from_kv(cfg);
  fs::create_directories(g.out);

  SceneGeometry scene;
  if (cfg.sections.count("room")) {
    scene.room = room_from_kv(cfg);
    scene.array = array_from_kv(cfg);
    if (!cfg.has("scene", "target") || !cfg.has("scene", "interferer"))
      throw ConfigError(
          "an explicit [room] config needs scene.target and scene.interferer");
    scene.target = parse_vec3(cfg.get("scene", "target"), "scene.target");
    scene.interferer =
        parse_vec3(cfg.get("scene", "interferer"), "scene.interferer");
  } else {
    RandomStream rng(derive_seed(g.seed, {exp_stream::kRoom, 0, 0}));
    scene = sample_scene({"custom", o.rt60, o.rt60}, rng);
  }

  const double fs_hz = params.sample_rate;
  const Rir rir_t = simulate_rir(scene.room, scene.target, scene.array, fs_hz);
  const Rir rir_i =
      simulate_rir(scene.room, scene.interferer, scene.array, fs_hz);

  const std::uint64_t useed =
      derive_seed(g.seed, {exp_stream::kUtterance, 0, 0, 0});
  const Waveform dry_t = synth_speech(o.seconds, fs_hz, derive_seed(useed, {1}));
  const Waveform dry_i = synth_speech(o.seconds, fs_hz, derive_seed(useed, {2}));

  MixSpec ms;
  ms.sir_db = o.sir;
  ms.overlap_ratio = o.overlap;
  if (std::isfinite(o.snr)) ms.noise_snr_db = o.snr;
  ms.seed = derive_seed(useed, {3});
  const MixtureBundle bundle = make_mixture(dry_t, dry_i, rir_t, rir_i, ms);

  const fs::path out(g.out);
  write_wav((out / "mixture.wav").string(), bundle.mixture, true);
  write_wav((out / "image_target.wav").string(), bundle.images[0], true);
  write_wav((out / "image_interferer.wav").string(), bundle.images[1], true);
  if (bundle.noise)
    write_wav((out / "noise.wav").string(), *bundle.noise, true);

  Tensor tt = tensor_from_rir(rir_t);
  annotate_rir_tensor(tt, scene.room, scene.target, g.seed);
  write_tensor((out / "rir_target.tensor").string(), tt);
  Tensor ti = tensor_from_rir(rir_i);
  annotate_rir_tensor(ti, scene.room, scene.interferer, g.seed);
  write_tensor((out / "rir_interferer.tensor").string(), ti);

  KvConfig meta;
  auto& room_sec = meta.sections["room"];
  room_sec["dims"] = vec3_to_string(scene.room.dims);
  room_sec["rt60"] = num(scene.room.rt60);
  room_sec["speed_of_sound"] = num(scene.room.speed_of_sound);
  auto& array_sec = meta.sections["array"];
  std::string mics;
  for (const Vec3& m : scene.array.mics) {
    if (!mics.empty()) mics += ";";
    mics += vec3_to_string(m);
  }
  array_sec["mics"] = mics;
  auto& scene_sec = meta.sections["scene"];
  scene_sec["target"] = vec3_to_string(scene.target);
  scene_sec["interferer"] = vec3_to_string(scene.interferer);
  scene_sec["seconds"] = num(o.seconds);
  scene_sec["seed"] = std::to_string(g.seed);
  auto& mix_sec = meta.sections["mix"];
  mix_sec["sir_db"] = num(bundle.meta.sir_db);
  mix_sec["overlap_ratio"] = num(bundle.meta.overlap_ratio);
  if (bundle.meta.noise_snr_db)
    mix_sec["noise_snr_db"] = num(*bundle.meta.noise_snr_db);
  mix_sec["seed"] = std::to_string(bundle.meta.seed);
  mix_sec["interferer_gain"] = num(bundle.meta.interferer_gain);
  mix_sec["target_offset"] = std::to_string(bundle.meta.target_offset);
  mix_sec["interferer_offset"] = std::to_string(bundle.meta.interferer_offset);
  auto& stft_sec = meta.sections["stft"];
  stft_sec["sample_rate"] = num(params.sample_rate);
  stft_sec["win_len"] = std::to_string(params.win_len);
  stft_sec["hop"] = std::to_string(params.hop);
  stft_sec["fft_size"] = std::to_string(params.fft_size);
  stft_sec["window"] = window_name(params.window);
  detail::write_file_bytes((out / "meta.cfg").string(), meta.to_string());

  std::cout << "wrote bundle to " << g.out << " (sir " << num(o.sir)
            << " dB, overlap " << num(o.overlap) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// features: extract SF / RSF tensors from a bundle
// ---------------------------------------------------------------------------

struct FeatOpts {
  std::string bundle;
  std::string feature = "rsf";
  std::size_t k = 1;
  double k_seconds = 0.0;
  bool k_seconds_given = false;
  std::string scenario = "ideal";
};

int cmd_features(const GlobalOpts& g, const FeatOpts& o) {
  const fs::path bundle(o.bundle);
  KvConfig meta = KvConfig::parse_file((bundle / "meta.cfg").string());
  validate_config_schema(meta);
  const FrameParams params = frame_params_from_kv(meta);
  const Waveform mixture = read_wav((bundle / "mixture.wav").string());
  Rir rir = rir_from_tensor(read_tensor((bundle / "rir_target.tensor").string()));

  const Scenario sc = scenario_from_name(o.scenario);
  if (sc != Scenario::kIdeal) {
    const RoomSpec room = room_from_kv(meta);
    const ArrayGeometry array = array_from_kv(meta);
    if (!meta.has("scene", "target"))
      throw DataError("bundle metadata is missing scene.target");
    const Vec3 target = parse_vec3(meta.get("scene", "target"), "scene.target");
    ScenarioSpec ss;
    ss.kind = sc;
    ss.seed = derive_seed(
        g.seed, {exp_stream::kScenario, 0, 0, static_cast<std::uint64_t>(sc)});
    const PerturbedScene p = perturb_scenario(room, target, array, ss);
    rir = simulate_rir(p.room, p.source, p.array, params.sample_rate);
  }

  std::size_t k = o.k;
  if (o.k_seconds_given) {
    const long long frames = std::llround(
        o.k_seconds * params.sample_rate / static_cast<double>(params.hop));
    if (frames < 1)
      throw ConfigError("--k-seconds " + num(o.k_seconds) +
                        " rounds to zero frames at the configured hop");
    k = static_cast<std::size_t>(frames);
  }

  const KvConfig user_cfg = load_config(g.config);
  const PairSet pairs =
      user_cfg.has("experiment", "pairs")
          ? pairs_from_string(user_cfg.get("experiment", "pairs"),
                              "experiment.pairs")
          : PairSet::default_for(mixture.channels);

  const CtfFilter ctf = ctf_from_rir(align_onset(rir), params);
  const Spectrogram spec = stft(mixture, params);
  const bool is_sf = o.feature == "sf";
  const FeatureMap fm = is_sf
                            ? compute_sf(spec, ctf, pairs, true)
                            : compute_rsf(spec, ctf, pairs, k, true);

  Tensor t = tensor_from_matrix(fm.values);
  t.metadata["kind"] = "feature";
  t.metadata["feature"] = is_sf ? "sf" : "rsf";
  t.metadata["k"] = std::to_string(is_sf ? 1 : k);
  t.metadata["scenario"] = o.scenario;
  t.metadata["pairs"] = pairs.to_string();
  t.metadata["normalized"] = "1";
  fs::create_directories(g.out);
  const std::string name = "feature_" + std::string(is_sf ? "sf" : "rsf") +
                           "_k" + std::to_string(is_sf ? 1 : k) + "_" +
                           o.scenario + ".tensor";
  const std::string path = (fs::path(g.out) / name).string();
  write_tensor(path, t);
  std::cout << "wrote " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval: run the configured experiment, write CSV report
// ---------------------------------------------------------------------------

void print_csv_table(const std::vector<std::vector<std::string>>& rows,
                     std::ostream& os) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c >= width.size()) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << row[c];
      if (c + 1 < row.size())
        os << std::string(width[c] - row[c].size() + 2, ' ');
    }
    os << "\n";
  }
}

int cmd_eval(const GlobalOpts& g) {
  if (g.config.empty())
    throw ConfigError("eval requires --config with an [experiment] section");
  ExperimentConfig ec = experiment_config_from_kv(KvConfig::parse_file(g.config));
  if (g.seed_given) ec.seed = g.seed;
  const ExperimentReport report = run_experiment(ec);

  fs::create_directories(g.out);
  const std::string report_path = (fs::path(g.out) / "report.csv").string();
  detail::write_file_bytes(report_path, report_to_csv(report));
  std::cout << "wrote " << report_path << "\n";
  if (!report.failures.empty()) {
    const std::string fail_path = (fs::path(g.out) / "failures.csv").string();
    detail::write_file_bytes(fail_path, failures_to_csv(report));
    std::cerr << report.failures.size() << " utterance(s) failed; see "
              << fail_path << "\n";
  }
  std::cout << report.utterances_done << " utterance(s) evaluated\n";
  print_csv_table(read_csv(report_path), std::cout);
  return 0;
}

// ---------------------------------------------------------------------------
// report: human-readable summary of a CSV report or simulated RIR directory
// ---------------------------------------------------------------------------

int cmd_report(const std::string& path) {
  const fs::path p(path);
  if (fs::is_directory(p)) {
    if (fs::exists(p / "report.csv")) {
      print_csv_table(read_csv((p / "report.csv").string()), std::cout);
      return 0;
    }
    std::vector<fs::path> tensors;
    for (const auto& entry : fs::directory_iterator(p)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("rir_", 0) == 0 &&
          name.size() > 7 && name.substr(name.size() - 7) == ".tensor")
        tensors.push_back(entry.path());
    }
    if (tensors.empty())
      throw DataError("nothing to report in '" + path +
                      "' (no report.csv or rir_*.tensor)");
    std::sort(tensors.begin(), tensors.end());
    for (const auto& tp : tensors) {
      const Tensor t = read_tensor(tp.string());
      const Rir rir = rir_from_tensor(t);
      const auto it = t.metadata.find("rt60");
      const std::string target =
          it != t.metadata.end() ? it->second : std::string();
      try {
        const double measured = measure_rt60(rir);
        std::cout << tp.filename().string() << "  measured rt60 "
                  << num(measured) << " s";
        if (!target.empty()) {
          const double want = parse_double(target, "rt60 metadata");
          std::cout << "  target " << target << " s  error "
                    << num(100.0 * (measured - want) / want) << "%";
        }
        std::cout << "\n";
      } catch (const std::exception& e) {
        std::cout << tp.filename().string() << "  error: " << e.what() << "\n";
      }
    }
    return 0;
  }
  if (!fs::exists(p)) throw DataError("no such file or directory: " + path);
  print_csv_table(read_csv(path), std::cout);
  return 0;
}

// ---------------------------------------------------------------------------
// plot: render a rank-2 feature tensor as a PGM heatmap
// ---------------------------------------------------------------------------

int cmd_plot(const GlobalOpts& g, const std::string& tensor_path) {
  const Tensor t = read_tensor(tensor_path);
  const RealMatrix m = matrix_from_tensor(t);
  fs::create_directories(g.out);
  const std::string stem = fs::path(tensor_path).stem().string();
  const std::string path = (fs::path(g.out) / (stem + ".pgm")).string();
  write_pgm_heatmap(path, m);
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rirsf: reverberation-aware spatial features for multichannel "
      "two-talker mixtures"};
  app.require_subcommand(1);

  GlobalOpts g;
  auto* seed_opt =
      app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
  app.add_option("--config", g.config, "sectioned key=value config file");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "simulate room impulse responses");
  sim->add_option("--rooms", so.rooms, "number of sampled rooms")
      ->capture_default_str();
  sim->add_option("--rt60", so.rt60, "target reverberation time in seconds")
      ->capture_default_str();

  MixOpts mo;
  auto* mix = app.add_subcommand("mix", "synthesize a two-talker mixture bundle");
  mix->add_option("--rt60", mo.rt60, "reverberation time in seconds")
      ->capture_default_str();
  mix->add_option("--sir", mo.sir, "signal-to-interference ratio in dB")
      ->capture_default_str();
  mix->add_option("--overlap", mo.overlap, "overlap ratio in (0, 1]")
      ->capture_default_str();
  mix->add_option("--seconds", mo.seconds, "utterance duration in seconds")
      ->capture_default_str();
  mix->add_option("--snr", mo.snr, "additive noise SNR in dB (omit for none)");

  FeatOpts fo;
  auto* feat = app.add_subcommand(
      "features", "extract per-pair-normalized feature maps from a bundle");
  feat->add_option("--bundle", fo.bundle, "bundle directory written by mix")
      ->required();
  feat->add_option("--feature", fo.feature, "feature kind")
      ->check(CLI::IsMember({"sf", "rsf"}))
      ->capture_default_str();
  feat->add_option("--k", fo.k, "matched-filter length in frames")
      ->capture_default_str();
  auto* ksec = feat->add_option("--k-seconds", fo.k_seconds,
                                "matched-filter length in seconds");
  feat->add_option("--scenario", fo.scenario, "RIR estimation scenario")
      ->check(CLI::IsMember({"ideal", "sce1", "sce2"}))
      ->capture_default_str();

  auto* ev = app.add_subcommand("eval", "run the configured experiment sweep");

  std::string report_path = ".";
  auto* rep = app.add_subcommand(
      "report", "summarize a CSV report or a directory of simulated RIRs");
  rep->add_option("path", report_path, "report.csv, a CSV file, or a directory")
      ->required();

  std::string plot_tensor;
  auto* plot = app.add_subcommand("plot", "render a feature tensor as PGM");
  plot->add_option("--tensor", plot_tensor, "rank-2 feature tensor file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help or an error message
    return rc == 0 ? 0 : 1;
  }
  g.seed_given = seed_opt->count() > 0;
  fo.k_seconds_given = ksec->count() > 0;

  try {
    if (sim->parsed()) return cmd_simulate(g, so);
    if (mix->parsed()) return cmd_mix(g, mo);
    if (feat->parsed()) return cmd_features(g, fo);
    if (ev->parsed()) return cmd_eval(g);
    if (rep->parsed()) return cmd_report(report_path);
    if (plot->parsed()) return cmd_plot(g, plot_tensor);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
