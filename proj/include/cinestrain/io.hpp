#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cinestrain/common.hpp"
#include "cinestrain/fields.hpp"
#include "cinestrain/image.hpp"
#include "cinestrain/metrics.hpp"
#include "cinestrain/solver.hpp"
#include "cinestrain/strain.hpp"

// Binary formats (all little-endian, versioned):
//   CSEQ: "CSEQ" u32 version u32 N_x u32 N_y u32 N_t f32 pixel_spacing,
//         then f32 intensities, row-major within frame, frame-major overall.
//   DSP1: "DSP1" u32 version u32 N_x u32 N_y u32 N_t,
//         then f32 pairs (dx,dy) in the same voxel order.
//   MSK1: "MSK1" u32 version u32 N_x u32 N_y, then u8 payload.
// Writes go through a temp file + rename so partial outputs never appear.

namespace cinestrain {
namespace io {

constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), tmp_(path.string() + ".tmp"), out_(tmp_, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot open for writing: " + tmp_.string());
  }

  ~Writer() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void u32(std::uint32_t v) {
    const std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xff),
                                         static_cast<unsigned char>((v >> 8) & 0xff),
                                         static_cast<unsigned char>((v >> 16) & 0xff),
                                         static_cast<unsigned char>((v >> 24) & 0xff)};
    out_.write(reinterpret_cast<const char*>(b.data()), 4);
  }

  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  void magic(const char m[4]) { bytes(m, 4); }

  void text(const std::string& s) { bytes(s.data(), s.size()); }

  void commit() {
    out_.flush();
    if (!out_) throw DataError("write failed: " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open for reading: " + path.string());
  }

  std::uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void expect_magic(const char m[4], const char* what) {
    char b[4];
    read(b, 4);
    if (std::memcmp(b, m, 4) != 0)
      throw DataError(std::string(what) + ": bad magic in " + path_.string());
  }

  void read(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw DataError("truncated payload in " + path_.string() + " at byte " +
                      std::to_string(offset_));
    offset_ += n;
  }

  void expect_eof(const char* what) {
    char c;
    in_.read(&c, 1);
    if (!in_.eof())
      throw DataError(std::string(what) + ": trailing bytes in " + path_.string() + " at byte " +
                      std::to_string(offset_));
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

inline void check_dims(std::uint32_t nx, std::uint32_t ny, std::uint32_t nt, const char* what) {
  constexpr std::uint32_t kMax = 1u << 16;
  if (nx == 0 || ny == 0 || nt == 0 || nx > kMax || ny > kMax || nt > kMax)
    throw DataError(std::string(what) + ": implausible dimensions");
}

}  // namespace detail

inline void write_cseq(const std::filesystem::path& path, const CineSequence& seq) {
  detail::Writer w(path);
  w.magic("CSEQ");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(seq.nx));
  w.u32(static_cast<std::uint32_t>(seq.ny));
  w.u32(static_cast<std::uint32_t>(seq.nt));
  w.f32(static_cast<float>(seq.pixel_spacing));
  for (double v : seq.data) w.f32(static_cast<float>(v));
  w.commit();
}

inline CineSequence read_cseq(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic("CSEQ", "CSEQ");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw DataError("CSEQ: unsupported version " + std::to_string(version));
  const std::uint32_t nx = r.u32(), ny = r.u32(), nt = r.u32();
  detail::check_dims(nx, ny, nt, "CSEQ");
  const float spacing = r.f32();
  if (!(spacing > 0.0f) || !std::isfinite(spacing))
    throw DataError("CSEQ: invalid pixel spacing");
  CineSequence seq(static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nt), spacing);
  for (double& v : seq.data) {
    const float f = r.f32();
    if (!std::isfinite(f)) throw DataError("CSEQ: non-finite intensity in " + path.string());
    v = f;
  }
  r.expect_eof("CSEQ");
  seq.validate();
  return seq;
}

namespace detail {

template <class Field>
inline void write_dsp1_impl(const std::filesystem::path& path, const Field& f) {
  Writer w(path);
  w.magic("DSP1");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(f.nx));
  w.u32(static_cast<std::uint32_t>(f.ny));
  w.u32(static_cast<std::uint32_t>(f.nt));
  for (const Vec2& v : f.v) {
    w.f32(static_cast<float>(v.x));
    w.f32(static_cast<float>(v.y));
  }
  w.commit();
}

template <class Field>
inline Field read_dsp1_impl(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("DSP1", "DSP1");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw DataError("DSP1: unsupported version " + std::to_string(version));
  const std::uint32_t nx = r.u32(), ny = r.u32(), nt = r.u32();
  check_dims(nx, ny, nt, "DSP1");
  Field f(static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nt));
  for (Vec2& v : f.v) {
    const float dx = r.f32();
    const float dy = r.f32();
    if (!std::isfinite(dx) || !std::isfinite(dy))
      throw DataError("DSP1: non-finite displacement in " + path.string());
    v = Vec2{dx, dy};
  }
  r.expect_eof("DSP1");
  return f;
}

}  // namespace detail

inline void write_dsp1(const std::filesystem::path& path, const DisplacementField& f) {
  detail::write_dsp1_impl(path, f);
}
inline void write_dsp1(const std::filesystem::path& path, const TrajectoryField& f) {
  detail::write_dsp1_impl(path, f);
}
inline void write_dsp1(const std::filesystem::path& path, const Field2D& f) {
  DisplacementField d(f.nx, f.ny, 1);
  d.v = f.v;
  detail::write_dsp1_impl(path, d);
}

inline DisplacementField read_dsp1_displacement(const std::filesystem::path& path) {
  return detail::read_dsp1_impl<DisplacementField>(path);
}
inline TrajectoryField read_dsp1_trajectory(const std::filesystem::path& path) {
  return detail::read_dsp1_impl<TrajectoryField>(path);
}

inline void write_msk1(const std::filesystem::path& path, const MyoMask& mask) {
  detail::Writer w(path);
  w.magic("MSK1");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(mask.nx));
  w.u32(static_cast<std::uint32_t>(mask.ny));
  w.bytes(mask.inside.data(), mask.inside.size());
  w.commit();
}

inline MyoMask read_msk1(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic("MSK1", "MSK1");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw DataError("MSK1: unsupported version " + std::to_string(version));
  const std::uint32_t nx = r.u32(), ny = r.u32();
  detail::check_dims(nx, ny, 1, "MSK1");
  MyoMask mask(static_cast<int>(nx), static_cast<int>(ny));
  r.read(mask.inside.data(), mask.inside.size());
  r.expect_eof("MSK1");
  return mask;
}

// ---------------------------------------------------------------------------
// CSV surfaces. Locale-independent formatting throughout.

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

inline double parse_double(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError("malformed numeric field '" + s + "' at line " + std::to_string(line));
  }
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Contour CSV: header "frame,x,y", one row per point.
inline void write_contour_csv(const std::filesystem::path& path, const Contour& c) {
  detail::Writer w(path);
  w.text("frame,x,y\n");
  for (const Vec2& p : c.points)
    w.text(std::to_string(c.frame) + "," + detail::fmt(p.x) + "," + detail::fmt(p.y) + "\n");
  w.commit();
}

inline Contour read_contour_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("contour CSV empty: " + path.string());
  Contour c;
  bool have_frame = false;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != 3)
      throw DataError("contour CSV: expected 3 fields at line " + std::to_string(lineno));
    const int frame = static_cast<int>(detail::parse_double(fields[0], lineno));
    if (!have_frame) {
      c.frame = frame;
      have_frame = true;
    } else if (frame != c.frame) {
      throw DataError("contour CSV: mixed frame indices at line " + std::to_string(lineno));
    }
    c.points.push_back(Vec2{detail::parse_double(fields[1], lineno),
                            detail::parse_double(fields[2], lineno)});
  }
  if (c.points.size() < 3)
    throw DataError("contour CSV: fewer than 3 points in " + path.string());
  return c;
}

/// Strain CSV: "frame,GRS,GCS[,seg_1..seg_n]", values in percent, N_t rows.
struct StrainCurves {
  std::vector<double> grs;  // percent
  std::vector<double> gcs;
  std::vector<std::vector<double>> seg_radial;  // [segment][frame], optional
  std::vector<std::vector<double>> seg_circ;
};

inline void write_strain_csv(const std::filesystem::path& path, const StrainCurves& s) {
  if (s.grs.size() != s.gcs.size()) throw DataError("strain CSV: curve length mismatch");
  detail::Writer w(path);
  std::string header = "frame,GRS,GCS";
  for (std::size_t k = 0; k < s.seg_radial.size(); ++k)
    header += ",seg_rr_" + std::to_string(k + 1);
  for (std::size_t k = 0; k < s.seg_circ.size(); ++k)
    header += ",seg_cc_" + std::to_string(k + 1);
  w.text(header + "\n");
  for (std::size_t t = 0; t < s.grs.size(); ++t) {
    std::string row = std::to_string(t + 1) + "," + detail::fmt(s.grs[t]) + "," +
                      detail::fmt(s.gcs[t]);
    for (const auto& seg : s.seg_radial) row += "," + detail::fmt(seg[t]);
    for (const auto& seg : s.seg_circ) row += "," + detail::fmt(seg[t]);
    w.text(row + "\n");
  }
  w.commit();
}

inline StrainCurves read_strain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("strain CSV empty: " + path.string());
  StrainCurves s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() < 3)
      throw DataError("strain CSV: expected >= 3 fields at line " + std::to_string(lineno));
    s.grs.push_back(detail::parse_double(fields[1], lineno));
    s.gcs.push_back(detail::parse_double(fields[2], lineno));
  }
  if (s.grs.empty()) throw DataError("strain CSV has no data rows: " + path.string());
  return s;
}

/// Solver trace CSV: level,iter,cost,dissim,r_spatial,r_temporal,step,gradnorm.
inline void write_trace_csv(const std::filesystem::path& path, const SolveTrace& trace) {
  detail::Writer w(path);
  w.text("level,iter,cost,dissim,r_spatial,r_temporal,step,gradnorm\n");
  for (const TraceRecord& r : trace.records)
    w.text(std::to_string(r.level) + "," + std::to_string(r.iter) + "," + detail::fmt(r.cost) +
           "," + detail::fmt(r.dissim) + "," + detail::fmt(r.r_spatial) + "," +
           detail::fmt(r.r_temporal) + "," + detail::fmt(r.step) + "," + detail::fmt(r.grad_norm) +
           "\n");
  w.commit();
}

/// Metric report as a flat two-row CSV (header + values).
inline void write_report_csv(const std::filesystem::path& path, const MetricReport& m) {
  detail::Writer w(path);
  w.text(
      "es_frame,epe_es_px,epe_es_mm,epe_all_px,epe_all_mm,vse_es_radial,vse_es_circ,"
      "gse_es_radial,gse_es_circ,drift_radial,drift_circ,contour_dist_endo_mm,"
      "contour_dist_epi_mm\n");
  w.text(std::to_string(m.es_frame) + "," + detail::fmt(m.epe_es_px) + "," +
         detail::fmt(m.epe_es_mm) + "," + detail::fmt(m.epe_all_px) + "," +
         detail::fmt(m.epe_all_mm) + "," + detail::fmt(m.vse_es_radial) + "," +
         detail::fmt(m.vse_es_circ) + "," + detail::fmt(m.gse_es_radial) + "," +
         detail::fmt(m.gse_es_circ) + "," + detail::fmt(m.drift_radial) + "," +
         detail::fmt(m.drift_circ) + "," + detail::fmt(m.contour_dist_endo_mm) + "," +
         detail::fmt(m.contour_dist_epi_mm) + "\n");
  w.commit();
}

}  // namespace io
}  // namespace cinestrain
