#pragma once
// Persistence and configuration: the binary tensor container, WAV files,
// PGM heatmaps, CSV reports, and the flat sectioned key=value config format.
//
// All binary formats are explicitly little-endian so files are portable and
// byte-identical across runs with the same seed.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rirsf/common.hpp"
#include "rirsf/eval.hpp"
#include "rirsf/features.hpp"
#include "rirsf/room.hpp"
#include "rirsf/stft.hpp"

namespace rirsf {

// ---------------------------------------------------------------------------
// Low-level little-endian helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string what;  // path, for error messages

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw DataError(what + ": payload shorter than header claims");
  }
  std::uint32_t u32() {
    need(4);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::uint16_t u16() {
    need(2);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos += n;
  }
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

// Fixed-precision decimal formatting; the C locale guarantees '.' decimals.
inline std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor container
// ---------------------------------------------------------------------------
// Layout: magic "RSFTENS1" | dtype u32 | rank u32 | dims u32[rank] |
//         payload (row-major, little-endian) | meta_len u32 | meta bytes.
// Metadata is UTF-8 "key=value\n" lines; keys are written in sorted order so
// identical content yields identical bytes.

enum class TensorDType : std::uint32_t { kF32 = 0, kC64 = 1 };

struct Tensor {
  TensorDType dtype = TensorDType::kF32;
  std::vector<std::uint32_t> dims;
  // f32: one float per element; c64: interleaved (re, im) pairs.
  std::vector<float> payload;
  std::map<std::string, std::string> metadata;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
  }
  std::size_t scalar_count() const {
    return element_count() * (dtype == TensorDType::kC64 ? 2 : 1);
  }

  void validate() const {
    if (dims.empty() || dims.size() > 4)
      throw DataError("tensor rank must be between 1 and 4");
    if (payload.size() != scalar_count())
      throw DataError("tensor payload length does not match dims");
    for (const auto& [k, v] : metadata) {
      if (k.empty() || k.find('=') != std::string::npos ||
          k.find('\n') != std::string::npos)
        throw DataError("tensor metadata key '" + k + "' is not writable");
      if (v.find('\n') != std::string::npos)
        throw DataError("tensor metadata value for '" + k +
                        "' contains a newline");
    }
  }
};

inline constexpr char kTensorMagic[8] = {'R', 'S', 'F', 'T', 'E', 'N', 'S', '1'};

inline void write_tensor(const std::string& path, const Tensor& t) {
  t.validate();
  std::string out;
  out.append(kTensorMagic, 8);
  detail::put_u32(out, static_cast<std::uint32_t>(t.dtype));
  detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) detail::put_u32(out, d);
  for (float v : t.payload) detail::put_f32(out, v);
  std::string meta;
  for (const auto& [k, v] : t.metadata) meta += k + "=" + v + "\n";
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  detail::write_file_bytes(path, out);
}

inline Tensor read_tensor(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  detail::ByteReader r{buf, 0, path};
  if (r.bytes(8) != std::string(kTensorMagic, 8))
    throw DataError(path + ": bad magic (not a tensor file)");
  Tensor t;
  const std::uint32_t dtype = r.u32();
  if (dtype > 1) throw DataError(path + ": unknown dtype code");
  t.dtype = static_cast<TensorDType>(dtype);
  const std::uint32_t rank = r.u32();
  if (rank < 1 || rank > 4) throw DataError(path + ": rank out of range 1..4");
  t.dims.resize(rank);
  for (auto& d : t.dims) d = r.u32();
  t.payload.resize(t.scalar_count());
  for (auto& v : t.payload) v = r.f32();
  const std::uint32_t meta_len = r.u32();
  const std::string meta = r.bytes(meta_len);
  std::size_t start = 0;
  while (start < meta.size()) {
    std::size_t nl = meta.find('\n', start);
    if (nl == std::string::npos) nl = meta.size();
    const std::string line = meta.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ": metadata line missing '='");
    t.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (r.pos != buf.size())
    throw DataError(path + ": trailing bytes after metadata block");
  return t;
}

// Conversion helpers between library types and tensors (f32 storage).

inline Tensor tensor_from_matrix(const RealMatrix& m) {
  Tensor t;
  t.dtype = TensorDType::kF32;
  t.dims = {static_cast<std::uint32_t>(m.rows),
            static_cast<std::uint32_t>(m.cols)};
  t.payload.reserve(m.data.size());
  for (double v : m.data) t.payload.push_back(static_cast<float>(v));
  return t;
}

inline RealMatrix matrix_from_tensor(const Tensor& t) {
  if (t.dtype != TensorDType::kF32 || t.dims.size() != 2)
    throw DataError("expected a rank-2 f32 tensor");
  RealMatrix m(t.dims[0], t.dims[1]);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = t.payload[i];
  return m;
}

inline Tensor tensor_from_rir(const Rir& rir) {
  Tensor t;
  t.dtype = TensorDType::kF32;
  t.dims = {static_cast<std::uint32_t>(rir.channels),
            static_cast<std::uint32_t>(rir.taps)};
  t.payload.reserve(rir.data.size());
  for (double v : rir.data) t.payload.push_back(static_cast<float>(v));
  t.metadata["kind"] = "rir";
  t.metadata["sample_rate"] = detail::format_g9(rir.sample_rate);
  return t;
}

inline Rir rir_from_tensor(const Tensor& t) {
  if (t.dtype != TensorDType::kF32 || t.dims.size() != 2)
    throw DataError("expected a rank-2 f32 tensor holding an impulse response");
  const auto it = t.metadata.find("sample_rate");
  if (it == t.metadata.end())
    throw DataError("impulse-response tensor is missing sample_rate metadata");
  Rir rir(t.dims[0], t.dims[1], std::strtod(it->second.c_str(), nullptr));
  if (!(rir.sample_rate > 0.0))
    throw DataError("impulse-response tensor has invalid sample_rate");
  for (std::size_t i = 0; i < rir.data.size(); ++i) rir.data[i] = t.payload[i];
  return rir;
}

// ---------------------------------------------------------------------------
// WAV (RIFF, PCM16 or IEEE float32)
// ---------------------------------------------------------------------------

inline void write_wav(const std::string& path, const Waveform& w,
                      bool float32 = false) {
  if (w.channels == 0 || w.samples == 0)
    throw DataError("refusing to write an empty waveform");
  const std::uint16_t fmt = float32 ? 3 : 1;
  const std::uint16_t bits = float32 ? 32 : 16;
  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t block_align =
      static_cast<std::uint32_t>(w.channels) * bytes_per_sample;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(w.samples) * block_align;
  const std::uint32_t rate =
      static_cast<std::uint32_t>(std::llround(w.sample_rate));

  std::string out;
  out.append("RIFF", 4);
  detail::put_u32(out, 36 + data_size);
  out.append("WAVE", 4);
  out.append("fmt ", 4);
  detail::put_u32(out, 16);
  out.push_back(static_cast<char>(fmt & 0xFF));
  out.push_back(static_cast<char>(fmt >> 8));
  out.push_back(static_cast<char>(w.channels & 0xFF));
  out.push_back(static_cast<char>((w.channels >> 8) & 0xFF));
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * block_align);
  out.push_back(static_cast<char>(block_align & 0xFF));
  out.push_back(static_cast<char>((block_align >> 8) & 0xFF));
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>(bits >> 8));
  out.append("data", 4);
  detail::put_u32(out, data_size);
  for (std::size_t n = 0; n < w.samples; ++n)
    for (std::size_t m = 0; m < w.channels; ++m) {
      const double s = w.at(m, n);
      if (float32) {
        detail::put_f32(out, static_cast<float>(s));
      } else {
        long q = std::lround(s * 32768.0);
        q = std::min(32767L, std::max(-32768L, q));
        const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
        out.push_back(static_cast<char>(u & 0xFF));
        out.push_back(static_cast<char>(u >> 8));
      }
    }
  detail::write_file_bytes(path, out);
}

inline Waveform read_wav(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  detail::ByteReader r{buf, 0, path};
  if (r.bytes(4) != "RIFF") throw DataError(path + ": missing RIFF tag");
  r.u32();  // declared riff size; tolerated if inconsistent
  if (r.bytes(4) != "WAVE") throw DataError(path + ": missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t fmt = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  Waveform w;
  bool have_data = false;

  while (r.pos + 8 <= buf.size()) {
    const std::string id = r.bytes(4);
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) throw DataError(path + ": fmt chunk shorter than 16 bytes");
      const std::size_t chunk_end = r.pos + size;
      fmt = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      r.skip(chunk_end - r.pos);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(path + ": data chunk before fmt chunk");
      if (channels == 0) throw DataError(path + ": fmt declares zero channels");
      std::uint32_t bytes_per_sample;
      if (fmt == 1 && bits == 16) bytes_per_sample = 2;
      else if (fmt == 3 && bits == 32) bytes_per_sample = 4;
      else
        throw DataError(path + ": unsupported audio format (format tag " +
                        std::to_string(fmt) + ", " + std::to_string(bits) +
                        " bits); expected PCM16 or IEEE float32");
      const std::uint32_t block = channels * bytes_per_sample;
      if (size % block != 0)
        throw DataError(path + ": data chunk size is not a whole frame count");
      r.need(size);  // "payload shorter than header claims" on truncation
      const std::size_t frames = size / block;
      w.channels = channels;
      w.samples = frames;
      w.sample_rate = rate;
      w.data.assign(static_cast<std::size_t>(channels) * frames, 0.0);
      for (std::size_t n = 0; n < frames; ++n)
        for (std::size_t m = 0; m < channels; ++m) {
          if (fmt == 1) {
            const auto u = r.u16();
            w.at(m, n) = static_cast<std::int16_t>(u) / 32768.0;
          } else {
            w.at(m, n) = r.f32();
          }
        }
      have_data = true;
    } else {
      r.skip(size);  // unknown chunk
    }
    if (size % 2 == 1 && r.pos < buf.size()) r.skip(1);  // RIFF pad byte
  }
  if (!have_fmt) throw DataError(path + ": missing fmt chunk");
  if (!have_data) throw DataError(path + ": missing data chunk");
  return w;
}

// ---------------------------------------------------------------------------
// PGM heatmap
// ---------------------------------------------------------------------------

// 8-bit grayscale P5 image of a [frames x bins] map: columns are frames,
// rows are frequency with the lowest bin at the bottom. Linear min-max
// scaling; a constant map renders uniform mid-gray. The extrema are recorded
// in a header comment.
inline void write_pgm_heatmap(const std::string& path, const RealMatrix& map) {
  if (map.rows == 0 || map.cols == 0)
    throw DataError("refusing to render an empty map");
  double lo = map.data[0], hi = map.data[0];
  for (double v : map.data) {
    if (!std::isfinite(v)) throw DataError("heatmap values must be finite");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::string out = "P5\n# min=" + detail::format_g9(lo) +
                    " max=" + detail::format_g9(hi) + "\n" +
                    std::to_string(map.rows) + " " + std::to_string(map.cols) +
                    "\n255\n";
  const double span = hi - lo;
  for (std::size_t y = 0; y < map.cols; ++y) {
    const std::size_t f = map.cols - 1 - y;  // low frequency at the bottom
    for (std::size_t t = 0; t < map.rows; ++t) {
      const int px = span > 0.0
                         ? static_cast<int>(std::lround(
                               255.0 * (map(t, f) - lo) / span))
                         : 128;
      out.push_back(static_cast<char>(std::min(255, std::max(0, px))));
    }
  }
  detail::write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Sectioned key=value configuration
// ---------------------------------------------------------------------------

struct KvConfig {
  // section -> key -> value; maps keep deterministic order.
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& sec, const std::string& key) const {
    const auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }
  const std::string& get(const std::string& sec, const std::string& key) const {
    return sections.at(sec).at(key);
  }

  static KvConfig parse_string(const std::string& text,
                               const std::string& what = "config") {
    KvConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string line = detail_trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3)
          throw ConfigError(what + ":" + std::to_string(line_no) +
                            ": malformed section header");
        section = detail_trim(line.substr(1, line.size() - 2));
        if (cfg.sections.count(section))
          throw ConfigError(what + ":" + std::to_string(line_no) +
                            ": duplicate section [" + section + "]");
        cfg.sections[section];
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(what + ":" + std::to_string(line_no) +
                          ": expected key=value");
      if (section.empty())
        throw ConfigError(what + ":" + std::to_string(line_no) +
                          ": key outside any [section]");
      const std::string key = detail_trim(line.substr(0, eq));
      const std::string value = detail_trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(what + ":" + std::to_string(line_no) + ": empty key");
      auto& sec = cfg.sections[section];
      if (sec.count(key))
        throw ConfigError(what + ":" + std::to_string(line_no) +
                          ": duplicate key '" + key + "' in [" + section + "]");
      sec[key] = value;
    }
    return cfg;
  }

  static KvConfig parse_file(const std::string& path) {
    return parse_string(detail::read_file_bytes(path), path);
  }

  std::string to_string() const {
    std::string out;
    for (const auto& [sec, keys] : sections) {
      out += "[" + sec + "]\n";
      for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
      out += "\n";
    }
    return out;
  }

 private:
  static std::string detail_trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }
};

// Strict value parsers: the whole token must be consumed.

inline double parse_double(const std::string& s, const std::string& what) {
  if (s == "inf" || s == "+inf")
    return std::numeric_limits<double>::infinity();
  const char* c = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(c, &end);
  if (end == c || *end != '\0')
    throw ConfigError(what + ": '" + s + "' is not a number");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  const char* c = s.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(c, &end, 10);
  if (end == c || *end != '\0')
    throw ConfigError(what + ": '" + s + "' is not an integer");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  const char* c = s.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(c, &end, 10);
  if (end == c || *end != '\0' || s.find('-') != std::string::npos)
    throw ConfigError(what + ": '" + s + "' is not an unsigned integer");
  return v;
}

inline std::vector<std::string> split_list(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(delim, start);
    if (end == std::string::npos) end = s.size();
    std::string tok = s.substr(start, end - start);
    std::size_t b = 0, e = tok.size();
    while (b < e && std::isspace(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(tok[e - 1]))) --e;
    out.push_back(tok.substr(b, e - b));
    if (end == s.size()) break;
    start = end + 1;
  }
  return out;
}

inline Vec3 parse_vec3(const std::string& s, const std::string& what) {
  const auto parts = split_list(s, ',');
  if (parts.size() != 3)
    throw ConfigError(what + ": expected three comma-separated numbers");
  return {parse_double(parts[0], what), parse_double(parts[1], what),
          parse_double(parts[2], what)};
}

inline std::string vec3_to_string(const Vec3& v) {
  return detail::format_g9(v[0]) + "," + detail::format_g9(v[1]) + "," +
         detail::format_g9(v[2]);
}

// ---------------------------------------------------------------------------
// Config schema and bridges
// ---------------------------------------------------------------------------

// Every recognized section/key. Any key outside this schema fails before
// computation starts.
inline void validate_config_schema(const KvConfig& cfg) {
  static const std::map<std::string, std::set<std::string>> kSchema = {
      {"experiment",
       {"seed", "rooms", "utterances", "utterance_seconds", "bands",
        "scenarios", "ks", "noise_snr_db", "pairs"}},
      {"stft", {"sample_rate", "win_len", "hop", "fft_size", "window"}},
      {"mix",
       {"sir_lo", "sir_hi", "overlap_lo", "overlap_hi", "sir_db",
        "overlap_ratio", "noise_snr_db", "seed", "interferer_gain",
        "target_offset", "interferer_offset"}},
      {"mask", {"margin_db", "floor_db"}},
      {"room", {"dims", "rt60", "speed_of_sound", "max_order"}},
      {"array", {"origin", "mics"}},
      {"scene", {"target", "interferer", "seconds", "seed"}},
  };
  for (const auto& [sec, keys] : cfg.sections) {
    const auto it = kSchema.find(sec);
    if (it == kSchema.end())
      throw ConfigError("unknown config section [" + sec + "]");
    for (const auto& [k, v] : keys)
      if (!it->second.count(k))
        throw ConfigError("unknown key '" + k + "' in section [" + sec + "]");
  }
}

inline PairSet pairs_from_string(const std::string& s,
                                 const std::string& what) {
  PairSet ps;
  for (const std::string& tok : split_list(s, ';')) {
    if (tok.empty()) continue;
    const std::size_t dash = tok.find('-');
    if (dash == std::string::npos)
      throw ConfigError(what + ": pair '" + tok + "' must look like a-b");
    ps.pairs.emplace_back(
        static_cast<std::size_t>(parse_int(tok.substr(0, dash), what)),
        static_cast<std::size_t>(parse_int(tok.substr(dash + 1), what)));
  }
  if (ps.pairs.empty()) throw ConfigError(what + ": no pairs given");
  return ps;
}

inline FrameParams frame_params_from_kv(const KvConfig& cfg) {
  FrameParams p;
  if (!cfg.sections.count("stft")) return p;
  const auto& s = cfg.sections.at("stft");
  if (s.count("sample_rate"))
    p.sample_rate = parse_double(s.at("sample_rate"), "stft.sample_rate");
  if (s.count("win_len"))
    p.win_len = static_cast<std::size_t>(parse_int(s.at("win_len"), "stft.win_len"));
  if (s.count("hop"))
    p.hop = static_cast<std::size_t>(parse_int(s.at("hop"), "stft.hop"));
  if (s.count("fft_size"))
    p.fft_size =
        static_cast<std::size_t>(parse_int(s.at("fft_size"), "stft.fft_size"));
  if (s.count("window")) p.window = window_from_name(s.at("window"));
  p.validate();
  return p;
}

inline RoomSpec room_from_kv(const KvConfig& cfg) {
  RoomSpec room;
  if (!cfg.sections.count("room")) return room;
  const auto& s = cfg.sections.at("room");
  if (s.count("dims")) room.dims = parse_vec3(s.at("dims"), "room.dims");
  if (s.count("rt60")) room.rt60 = parse_double(s.at("rt60"), "room.rt60");
  if (s.count("speed_of_sound"))
    room.speed_of_sound =
        parse_double(s.at("speed_of_sound"), "room.speed_of_sound");
  if (s.count("max_order"))
    room.max_order =
        static_cast<int>(parse_int(s.at("max_order"), "room.max_order"));
  room.validate();
  return room;
}

inline ArrayGeometry array_from_kv(const KvConfig& cfg) {
  if (cfg.has("array", "mics")) {
    ArrayGeometry g;
    for (const std::string& tok :
         split_list(cfg.get("array", "mics"), ';'))
      if (!tok.empty()) g.mics.push_back(parse_vec3(tok, "array.mics"));
    if (g.mics.size() < 2)
      throw ConfigError("array.mics: at least two microphones required");
    return g;
  }
  Vec3 origin{1.0, 1.0, 1.0};
  if (cfg.has("array", "origin"))
    origin = parse_vec3(cfg.get("array", "origin"), "array.origin");
  return ArrayGeometry::linear_default(origin);
}

inline ExperimentConfig experiment_config_from_kv(const KvConfig& cfg) {
  validate_config_schema(cfg);
  ExperimentConfig ec;
  ec.stft = frame_params_from_kv(cfg);
  if (cfg.sections.count("experiment")) {
    const auto& s = cfg.sections.at("experiment");
    if (s.count("seed")) ec.seed = parse_u64(s.at("seed"), "experiment.seed");
    if (s.count("rooms"))
      ec.rooms = static_cast<std::size_t>(
          parse_int(s.at("rooms"), "experiment.rooms"));
    if (s.count("utterances"))
      ec.utterances = static_cast<std::size_t>(
          parse_int(s.at("utterances"), "experiment.utterances"));
    if (s.count("utterance_seconds"))
      ec.utterance_seconds =
          parse_double(s.at("utterance_seconds"), "experiment.utterance_seconds");
    if (s.count("bands")) {
      ec.bands.clear();
      for (const std::string& tok : split_list(s.at("bands"), ';')) {
        if (tok.empty()) continue;
        const auto parts = split_list(tok, ':');
        if (parts.size() != 3)
          throw ConfigError("experiment.bands: band '" + tok +
                            "' must look like name:lo:hi");
        ec.bands.push_back({parts[0],
                            parse_double(parts[1], "experiment.bands"),
                            parse_double(parts[2], "experiment.bands")});
      }
    }
    if (s.count("scenarios")) {
      ec.scenarios.clear();
      for (const std::string& tok : split_list(s.at("scenarios"), ';'))
        if (!tok.empty()) ec.scenarios.push_back(scenario_from_name(tok));
    }
    if (s.count("ks")) {
      ec.ks.clear();
      for (const std::string& tok : split_list(s.at("ks"), ';'))
        if (!tok.empty())
          ec.ks.push_back(
              static_cast<std::size_t>(parse_int(tok, "experiment.ks")));
    }
    if (s.count("noise_snr_db"))
      ec.noise_snr_db =
          parse_double(s.at("noise_snr_db"), "experiment.noise_snr_db");
    if (s.count("pairs"))
      ec.pairs = pairs_from_string(s.at("pairs"), "experiment.pairs");
  }
  if (cfg.sections.count("mix")) {
    const auto& s = cfg.sections.at("mix");
    if (s.count("sir_lo")) ec.sir_lo = parse_double(s.at("sir_lo"), "mix.sir_lo");
    if (s.count("sir_hi")) ec.sir_hi = parse_double(s.at("sir_hi"), "mix.sir_hi");
    if (s.count("overlap_lo"))
      ec.overlap_lo = parse_double(s.at("overlap_lo"), "mix.overlap_lo");
    if (s.count("overlap_hi"))
      ec.overlap_hi = parse_double(s.at("overlap_hi"), "mix.overlap_hi");
  }
  if (cfg.sections.count("mask")) {
    const auto& s = cfg.sections.at("mask");
    if (s.count("margin_db"))
      ec.margin_db = parse_double(s.at("margin_db"), "mask.margin_db");
    if (s.count("floor_db"))
      ec.floor_db = parse_double(s.at("floor_db"), "mask.floor_db");
  }
  ec.validate();
  return ec;
}

// ---------------------------------------------------------------------------
// CSV report
// ---------------------------------------------------------------------------

inline const char* kReportHeader =
    "band,scenario,feature,k,utterances,mean_on_target,mean_on_interferer,"
    "auc,lps_correlation";

inline std::string report_to_csv(const ExperimentReport& report) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const ReportRow& r : report.rows) {
    out += r.band + "," + r.scenario + "," + r.feature + "," +
           std::to_string(r.k) + "," + std::to_string(r.utterances) + ",";
    out += (r.has_target ? detail::format_g9(r.mean_on_target) : "") + ",";
    out += (r.has_interferer ? detail::format_g9(r.mean_on_interferer) : "") +
           ",";
    out += (r.has_auc ? detail::format_g9(r.auc) : "") + ",";
    out += (r.has_correlation ? detail::format_g9(r.lps_correlation) : "");
    out += "\n";
  }
  return out;
}

inline std::string failures_to_csv(const ExperimentReport& report) {
  std::string out = "band,room,utterance,message\n";
  for (const ExperimentFailure& f : report.failures) {
    std::string msg = f.message;
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    out += f.band + "," + std::to_string(f.room) + ",";
    out += (f.utterance == ExperimentFailure::npos
                ? std::string("-")
                : std::to_string(f.utterance)) +
           "," + msg + "\n";
  }
  return out;
}

// Minimal CSV reader for our own unquoted output.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  std::vector<std::vector<std::string>> rows;
  std::size_t start = 0;
  while (start < buf.size()) {
    std::size_t nl = buf.find('\n', start);
    if (nl == std::string::npos) nl = buf.size();
    const std::string line = buf.substr(start, nl - start);
    start = nl + 1;
    if (!line.empty()) rows.push_back(split_list(line, ','));
  }
  return rows;
}

}  // namespace rirsf
