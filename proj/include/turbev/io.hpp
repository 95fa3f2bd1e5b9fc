#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "turbev/core.hpp"

namespace turbev::io {

namespace fs = std::filesystem;

namespace detail {

using turbev::detail::require;

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::Io, "write to '" + path.string() + "' failed");
}

/// Little-endian byte sink.
class Writer {
 public:
  template <class T>
  void put(T v) {
    using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>,
                                                      std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>, T>>;
    U u;
    if constexpr (std::is_floating_point_v<T>)
      u = std::bit_cast<U>(v);
    else
      u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
  }
  void raw(std::string_view s) { buf_.append(s); }
  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

/// Little-endian byte source; running off the end is a Corrupt error.
class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, std::string what) : p_(data), end_(data + size), what_(std::move(what)) {}

  template <class T>
  T get() {
    require(static_cast<std::size_t>(end_ - p_) >= sizeof(T), ErrorCode::Corrupt, what_ + ": truncated");
    using U = std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>,
                                                      std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>, T>>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p_[i]) << (8 * i));
    p_ += sizeof(T);
    if constexpr (std::is_floating_point_v<T>)
      return std::bit_cast<T>(u);
    else
      return static_cast<T>(u);
  }
  std::size_t remaining() const noexcept { return static_cast<std::size_t>(end_ - p_); }
  const std::uint8_t* pos() const noexcept { return p_; }
  void skip(std::size_t n) {
    require(remaining() >= n, ErrorCode::Corrupt, what_ + ": truncated");
    p_ += n;
  }

 private:
  const std::uint8_t* p_;
  const std::uint8_t* end_;
  std::string what_;
};

/// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string header_token(Reader& r, const std::string& what) {
  std::string tok;
  for (;;) {
    require(r.remaining() > 0, ErrorCode::Corrupt, what + ": truncated header");
    const char c = static_cast<char>(*r.pos());
    if (c == '#' && tok.empty()) {
      while (r.remaining() > 0 && *r.pos() != '\n') r.skip(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      r.skip(1);
      continue;
    }
    tok.push_back(c);
    r.skip(1);
  }
}

template <class T>
T parse_number(std::string_view s, const std::string& what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc{} && ptr == s.data() + s.size(), ErrorCode::Corrupt,
          what + ": cannot parse '" + std::string(s) + "'");
  return v;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Events

inline constexpr std::size_t kEvbHeaderBytes = 32;
inline constexpr std::size_t kEvbRecordBytes = 14;

inline std::string encode_events(const EventStream& s) {
  detail::Writer w;
  w.raw("EVB1");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(s.width()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(s.height()));
  w.put<std::uint64_t>(s.t_begin());
  w.put<std::uint64_t>(s.t_end());
  w.put<std::uint64_t>(s.size());
  for (const Event& e : s.events()) {
    w.put<std::uint64_t>(e.t);
    w.put<std::uint16_t>(e.x);
    w.put<std::uint16_t>(e.y);
    w.put<std::int8_t>(e.p);
    w.put<std::uint8_t>(0);
  }
  return w.bytes();
}

inline EventStream decode_events(const std::uint8_t* data, std::size_t size, const std::string& what = "EVB1") {
  detail::Reader r(data, size, what);
  turbev::detail::require(size >= 4 && std::memcmp(data, "EVB1", 4) == 0, ErrorCode::BadMagic, what + ": not an EVB1 file");
  r.skip(4);
  const int width = r.get<std::uint16_t>();
  const int height = r.get<std::uint16_t>();
  const Micros t_begin = r.get<std::uint64_t>();
  const Micros t_end = r.get<std::uint64_t>();
  const std::uint64_t count = r.get<std::uint64_t>();
  turbev::detail::require(width > 0 && height > 0, ErrorCode::Corrupt, what + ": zero sensor geometry");
  turbev::detail::require(t_begin <= t_end, ErrorCode::Corrupt, what + ": t_begin > t_end");
  turbev::detail::require(count <= r.remaining() / kEvbRecordBytes && r.remaining() == count * kEvbRecordBytes,
                          ErrorCode::Corrupt, what + ": payload size does not match the record count");
  std::vector<Event> events;
  events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.t = r.get<std::uint64_t>();
    e.x = r.get<std::uint16_t>();
    e.y = r.get<std::uint16_t>();
    e.p = r.get<std::int8_t>();
    const std::uint8_t pad = r.get<std::uint8_t>();
    turbev::detail::require(pad == 0, ErrorCode::Corrupt, what + ": nonzero pad byte in record " + std::to_string(i));
    turbev::detail::require(e.p == 1 || e.p == -1, ErrorCode::Corrupt, what + ": bad polarity in record " + std::to_string(i));
    turbev::detail::require(e.x < width && e.y < height, ErrorCode::OutOfBounds,
                            what + ": record " + std::to_string(i) + " outside the sensor");
    turbev::detail::require(events.empty() || e.t >= events.back().t, ErrorCode::Unsorted,
                            what + ": record " + std::to_string(i) + " out of order");
    turbev::detail::require(e.t >= t_begin && e.t <= t_end, ErrorCode::Corrupt,
                            what + ": record " + std::to_string(i) + " outside the stream span");
    events.push_back(e);
  }
  return EventStream(width, height, std::move(events), t_begin, t_end);
}

inline void write_events(const fs::path& path, const EventStream& s) { detail::write_file(path, encode_events(s)); }

inline EventStream read_events(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  return decode_events(bytes.data(), bytes.size(), path.string());
}

/// Text form: header `t,x,y,p`, one event per line.
inline void write_events_csv(const fs::path& path, const EventStream& s) {
  std::string out = "t,x,y,p\n";
  for (const Event& e : s.events())
    out += std::to_string(e.t) + ',' + std::to_string(e.x) + ',' + std::to_string(e.y) + ',' + std::to_string(int(e.p)) + '\n';
  detail::write_file(path, out);
}

/// Parses one `t,x,y,p` line. Polarity other than +/-1 is BadPolarity.
inline Event parse_event_csv_line(std::string_view line, const std::string& what = "csv") {
  std::array<std::string_view, 4> f;
  std::size_t start = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t comma = k < 3 ? line.find(',', start) : line.size();
    turbev::detail::require(comma != std::string_view::npos, ErrorCode::Corrupt, what + ": expected 4 fields");
    f[k] = line.substr(start, comma - start);
    start = comma + 1;
  }
  Event e;
  e.t = detail::parse_number<Micros>(f[0], what);
  e.x = detail::parse_number<std::uint16_t>(f[1], what);
  e.y = detail::parse_number<std::uint16_t>(f[2], what);
  const int p = detail::parse_number<int>(f[3], what);
  turbev::detail::require(p == 1 || p == -1, ErrorCode::BadPolarity, what + ": polarity " + std::to_string(p));
  e.p = static_cast<std::int8_t>(p);
  return e;
}

/// Reads a CSV event file. CSV carries no geometry: pass it, or leave it 0
/// to use the smallest sensor that holds every event.
inline EventStream read_events_csv(const fs::path& path, int width = 0, int height = 0) {
  std::ifstream in(path);
  turbev::detail::require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  turbev::detail::require(line == "t,x,y,p", ErrorCode::Corrupt, path.string() + ": missing 't,x,y,p' header");
  std::vector<Event> events;
  int max_x = 0, max_y = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const Event e = parse_event_csv_line(line, path.string() + ":" + std::to_string(lineno));
    max_x = std::max(max_x, int(e.x));
    max_y = std::max(max_y, int(e.y));
    events.push_back(e);
  }
  return EventStream(width > 0 ? width : max_x + 1, height > 0 ? height : max_y + 1, std::move(events));
}

// ---------------------------------------------------------------------------
// PGM

inline std::uint8_t quantize8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

/// Binary PGM (P5). maxval 255 writes one byte per sample, larger maxval
/// two big-endian bytes.
inline std::string encode_pgm(const Grid<std::uint16_t>& g, int maxval) {
  turbev::detail::require(maxval >= 1 && maxval <= 65535, ErrorCode::BadParam, "PGM maxval must be in 1..65535");
  std::string out = "P5\n" + std::to_string(g.width()) + ' ' + std::to_string(g.height()) + '\n' + std::to_string(maxval) + '\n';
  out.reserve(out.size() + g.size() * (maxval > 255 ? 2 : 1));
  for (std::uint16_t v : g.values()) {
    turbev::detail::require(v <= maxval, ErrorCode::InvalidValue, "PGM sample exceeds maxval");
    if (maxval > 255) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

struct PgmImage {
  Grid<std::uint16_t> samples;
  int maxval = 255;
};

inline PgmImage decode_pgm(const std::uint8_t* data, std::size_t size, const std::string& what = "pgm") {
  turbev::detail::require(size >= 2 && data[0] == 'P' && data[1] == '5', ErrorCode::BadMagic, what + ": not a binary PGM");
  detail::Reader r(data, size, what);
  r.skip(2);
  const int w = detail::parse_number<int>(detail::header_token(r, what), what);
  const int h = detail::parse_number<int>(detail::header_token(r, what), what);
  const int maxval = detail::parse_number<int>(detail::header_token(r, what), what);
  turbev::detail::require(w > 0 && h > 0, ErrorCode::Corrupt, what + ": zero image size");
  turbev::detail::require(maxval >= 1 && maxval <= 65535, ErrorCode::Corrupt, what + ": bad maxval");
  r.skip(1);  // single whitespace after maxval
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  turbev::detail::require(r.remaining() == n * bps, ErrorCode::Corrupt, what + ": payload size does not match the header");
  PgmImage img{Grid<std::uint16_t>(w, h), maxval};
  const std::uint8_t* p = r.pos();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = bps == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
    turbev::detail::require(v <= maxval, ErrorCode::Corrupt, what + ": sample exceeds maxval");
    img.samples.values()[i] = v;
  }
  return img;
}

inline PgmImage read_pgm(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  return decode_pgm(bytes.data(), bytes.size(), path.string());
}

inline void write_pgm(const fs::path& path, const Grid<std::uint16_t>& g, int maxval) {
  detail::write_file(path, encode_pgm(g, maxval));
}

/// 8-bit frame file: samples round(v * 255).
inline void write_frame(const fs::path& path, const Frame& f) {
  Grid<std::uint16_t> g(f.width(), f.height());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = quantize8(f.values()[i]);
  write_pgm(path, g, 255);
}

/// Any-maxval PGM as a frame, samples scaled by 1/maxval.
inline Frame read_frame(const fs::path& path) {
  const PgmImage img = read_pgm(path);
  Grid<double> g(img.samples.width(), img.samples.height());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = img.samples.values()[i] / static_cast<double>(img.maxval);
  return Frame(std::move(g));
}

/// Applies the on-disk quantization so results can be compared with a
/// frame that went through write_frame/read_frame.
inline Frame quantized(const Frame& f) {
  Grid<double> g = f.pixels();
  for (double& v : g.values()) v = quantize8(v) / 255.0;
  return Frame(std::move(g));
}

inline constexpr std::string_view kManifestName = "manifest.txt";

inline std::string frame_filename(std::size_t k) {
  std::ostringstream os;
  os << "frame_" << std::setw(4) << std::setfill('0') << k << ".pgm";
  return os.str();
}

/// Writes frame_NNNN.pgm files plus `manifest.txt` with lines
/// `index filename timestamp_us`.
inline void write_frames(const fs::path& dir, const FrameSequence& seq) {
  fs::create_directories(dir);
  std::string manifest;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const std::string name = frame_filename(k);
    write_frame(dir / name, seq[k]);
    manifest += std::to_string(k) + ' ' + name + ' ' + std::to_string(seq.timestamp(k)) + '\n';
  }
  detail::write_file(dir / kManifestName, manifest);
}

/// Reads a manifest directory. Indices must run 0..n-1 and timestamps must
/// be evenly spaced; a single frame gets dt = 1.
inline FrameSequence read_frames(const fs::path& dir) {
  const fs::path mpath = dir / kManifestName;
  std::ifstream in(mpath);
  turbev::detail::require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + mpath.string() + "' for reading");
  std::vector<Frame> frames;
  std::vector<Micros> stamps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::size_t index = 0;
    std::string name;
    Micros ts = 0;
    const std::string where = mpath.string() + ":" + std::to_string(lineno);
    turbev::detail::require(static_cast<bool>(ls >> index >> name >> ts), ErrorCode::Corrupt, where + ": expected 'index filename timestamp_us'");
    turbev::detail::require(index == frames.size(), ErrorCode::Corrupt,
                            where + ": expected index " + std::to_string(frames.size()) + ", found " + std::to_string(index));
    frames.push_back(read_frame(dir / name));
    stamps.push_back(ts);
  }
  turbev::detail::require(!frames.empty(), ErrorCode::Corrupt, mpath.string() + ": no frames listed");
  Micros dt = 1;
  if (stamps.size() > 1) {
    turbev::detail::require(stamps[1] > stamps[0], ErrorCode::Corrupt, mpath.string() + ": timestamps must increase");
    dt = stamps[1] - stamps[0];
    for (std::size_t k = 1; k < stamps.size(); ++k)
      turbev::detail::require(stamps[k] == stamps[0] + k * dt, ErrorCode::Corrupt, mpath.string() + ": timestamps are not evenly spaced");
  }
  return FrameSequence(std::move(frames), stamps.front(), dt);
}

// ---------------------------------------------------------------------------
// Motion fields, tilt fields, maps

inline fs::path validity_path(const fs::path& path) {
  fs::path p = path;
  p += ".valid.pgm";
  return p;
}

/// `MF1 width height\n` then row-major float32 (vx, vy) pairs; validity goes
/// to `<path>.valid.pgm` (255 = valid).
inline void write_motion_field(const fs::path& path, const MotionField& f) {
  detail::Writer w;
  w.raw("MF1 " + std::to_string(f.width()) + ' ' + std::to_string(f.height()) + '\n');
  for (const Vec2f& v : f.velocity().values()) {
    w.put<float>(v.x);
    w.put<float>(v.y);
  }
  detail::write_file(path, w.bytes());
  Grid<std::uint16_t> valid(f.width(), f.height());
  for (std::size_t i = 0; i < valid.size(); ++i) valid.values()[i] = f.valid().values()[i] ? 255 : 0;
  write_pgm(validity_path(path), valid, 255);
}

inline MotionField read_motion_field(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string what = path.string();
  turbev::detail::require(bytes.size() >= 4 && std::memcmp(bytes.data(), "MF1 ", 4) == 0, ErrorCode::BadMagic, what + ": not an MF1 file");
  detail::Reader r(bytes.data(), bytes.size(), what);
  r.skip(3);
  const int w = detail::parse_number<int>(detail::header_token(r, what), what);
  const int h = detail::parse_number<int>(detail::header_token(r, what), what);
  turbev::detail::require(w > 0 && h > 0, ErrorCode::Corrupt, what + ": zero geometry");
  r.skip(1);
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  turbev::detail::require(r.remaining() == n * 8, ErrorCode::Corrupt, what + ": payload size does not match the header");
  Grid<Vec2f> vel(w, h);
  for (auto& v : vel.values()) {
    v.x = r.get<float>();
    v.y = r.get<float>();
  }
  const PgmImage valid = read_pgm(validity_path(path));
  turbev::detail::require(valid.samples.width() == w && valid.samples.height() == h, ErrorCode::Corrupt,
                          what + ": validity image has the wrong size");
  Mask mask(w, h, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t s = valid.samples.values()[i];
    turbev::detail::require(s == 0 || s == valid.maxval, ErrorCode::Corrupt, what + ": validity samples must be 0 or maxval");
    mask.values()[i] = s ? 1 : 0;
    if (!mask.values()[i])
      turbev::detail::require(vel.values()[i].x == 0.0f && vel.values()[i].y == 0.0f, ErrorCode::Corrupt,
                              what + ": invalid pixel with nonzero velocity");
  }
  return MotionField(std::move(vel), std::move(mask));
}

/// `TF1 width height n_frames max_tilt\n` then float64 (dx, dy) pairs in
/// (frame, y, x) order.
inline void write_turbulence_field(const fs::path& path, const TurbulenceField& f) {
  detail::Writer w;
  w.raw("TF1 " + std::to_string(f.width()) + ' ' + std::to_string(f.height()) + ' ' + std::to_string(f.n_frames()) + ' ' +
        detail::format_double(f.max_tilt()) + '\n');
  for (const Vec2& v : f.displacement()) {
    w.put<double>(v.x);
    w.put<double>(v.y);
  }
  detail::write_file(path, w.bytes());
}

inline TurbulenceField read_turbulence_field(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string what = path.string();
  turbev::detail::require(bytes.size() >= 4 && std::memcmp(bytes.data(), "TF1 ", 4) == 0, ErrorCode::BadMagic, what + ": not a TF1 file");
  detail::Reader r(bytes.data(), bytes.size(), what);
  r.skip(3);
  const int w = detail::parse_number<int>(detail::header_token(r, what), what);
  const int h = detail::parse_number<int>(detail::header_token(r, what), what);
  const int n = detail::parse_number<int>(detail::header_token(r, what), what);
  const double max_tilt = detail::parse_number<double>(detail::header_token(r, what), what);
  turbev::detail::require(w > 0 && h > 0 && n > 0, ErrorCode::Corrupt, what + ": zero geometry");
  r.skip(1);
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(n);
  turbev::detail::require(r.remaining() == count * 16, ErrorCode::Corrupt, what + ": payload size does not match the header");
  std::vector<Vec2> d(count);
  for (auto& v : d) {
    v.x = r.get<double>();
    v.y = r.get<double>();
  }
  return TurbulenceField(w, h, n, std::move(d), max_tilt);
}

/// PAEP counts as 16-bit PGM, saturating at 65535.
inline void write_paep_pgm(const fs::path& path, const PaepMap& paep) {
  Grid<std::uint16_t> g(paep.width(), paep.height());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = static_cast<std::uint16_t>(std::min<std::uint32_t>(paep.count().values()[i], 65535u));
  write_pgm(path, g, 65535);
}

/// Weight grid as 16-bit PGM: [1, max weight] stretched onto [0, 65535].
inline void write_weights_pgm(const fs::path& path, const Grid<double>& weights) {
  double hi = 1.0;
  for (double v : weights.values()) hi = std::max(hi, v);
  Grid<std::uint16_t> g(weights.width(), weights.height());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u = hi > 1.0 ? (weights.values()[i] - 1.0) / (hi - 1.0) : 0.0;
    g.values()[i] = static_cast<std::uint16_t>(std::lround(std::clamp(u, 0.0, 1.0) * 65535.0));
  }
  write_pgm(path, g, 65535);
}

/// Tube fits as text: a `TFM1 width height t0 half_window time_unit_us
/// residual_tol min_support` line, then `x y label support residual base_x
/// base_y vel_x vel_y` per pixel (label 0 EMPTY, 1 TUBE, 2 TURBULENCE).
inline void write_tube_fits(const fs::path& path, const TubeFitMap& m) {
  std::string out = "TFM1 " + std::to_string(m.width()) + ' ' + std::to_string(m.height()) + ' ' + std::to_string(m.t0) + ' ' +
                    std::to_string(m.half_window) + ' ' + detail::format_double(m.time_unit_us) + ' ' +
                    detail::format_double(m.residual_tol) + ' ' + std::to_string(m.min_support) + '\n';
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      out += std::to_string(x) + ' ' + std::to_string(y) + ' ' + std::to_string(int(m.label(x, y))) + ' ' +
             std::to_string(m.support(x, y)) + ' ' + detail::format_double(m.residual(x, y)) + ' ' +
             detail::format_double(m.base(x, y).x) + ' ' + detail::format_double(m.base(x, y).y) + ' ' +
             detail::format_double(m.velocity(x, y).x) + ' ' + detail::format_double(m.velocity(x, y).y) + '\n';
    }
  detail::write_file(path, out);
}

}  // namespace turbev::io
