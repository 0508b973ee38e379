#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbforward/core.hpp"
#include "turbforward/rng.hpp"

namespace turbforward {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Reads one whitespace-delimited token from a graymap header, skipping
// '#' comment lines.
inline std::string next_pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw IoError("graymap header truncated");
  return tok;
}

inline int parse_pnm_int(std::istream& in, const char* what) {
  const std::string tok = next_pnm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("graymap header: bad ") + what + " '" + tok +
                  "'");
  }
}

}  // namespace detail

// Binary graymap (P5) reader, 8- or 16-bit; 16-bit samples are big-endian.
// Values are returned in [0,1] as count / maxval.
inline Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  const std::string magic = detail::next_pnm_token(in);
  if (magic != "P5")
    throw IoError("unsupported graymap magic '" + magic + "' in " + path);
  const int cols = detail::parse_pnm_int(in, "width");
  const int rows = detail::parse_pnm_int(in, "height");
  const int maxval = detail::parse_pnm_int(in, "maxval");
  if (cols < 1 || rows < 1) throw IoError("graymap size invalid in " + path);
  if (maxval < 1 || maxval > 65535)
    throw IoError("graymap maxval out of range in " + path);
  // Exactly one whitespace byte separates the header from the raster.
  const int bytes = maxval > 255 ? 2 : 1;
  Image img(rows, cols);
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols *
                                 bytes);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("graymap raster truncated in " + path);
  const double scale = 1.0 / maxval;
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    unsigned int c = raw[i * bytes];
    if (bytes == 2) c = (c << 8) | raw[i * 2 + 1];
    if (c > static_cast<unsigned int>(maxval))
      throw IoError("graymap sample exceeds maxval in " + path);
    img.v[i] = c * scale;
  }
  return img;
}

// 16-bit graymap writer: values are clamped to [0,1] and scaled linearly to
// the full 16-bit range with no gamma. k/65535 inputs round-trip exactly.
inline void write_image_pgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << img.cols << " " << img.rows << "\n65535\n";
  std::vector<unsigned char> raw(img.v.size() * 2);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    const double v = std::max(0.0, std::min(1.0, img.v[i]));
    const unsigned int c =
        static_cast<unsigned int>(std::lround(v * 65535.0));
    raw[i * 2] = static_cast<unsigned char>(c >> 8);
    raw[i * 2 + 1] = static_cast<unsigned char>(c & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
}

// Preview for maps with values outside [0,1] (difference maps in
// particular): affine map to the full 16-bit range, with the inverse
// transform recorded as a header comment so the preview can be undone.
// Reconstruction: value = offset + count * scale.
inline void write_image_pgm_preview(const std::string& path,
                                    const Image& img) {
  double lo = img.v.empty() ? 0.0 : img.v[0];
  double hi = lo;
  for (const double v : img.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi - lo;
  if (span <= 0.0) span = 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  char note[96];
  std::snprintf(note, sizeof note, "# offset=%.17g scale=%.17g", lo,
                span / 65535.0);
  out << "P5\n" << note << "\n" << img.cols << " " << img.rows << "\n65535\n";
  std::vector<unsigned char> raw(img.v.size() * 2);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    const unsigned int c = static_cast<unsigned int>(
        std::lround((img.v[i] - lo) / span * 65535.0));
    raw[i * 2] = static_cast<unsigned char>(c >> 8);
    raw[i * 2 + 1] = static_cast<unsigned char>(c & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
}

// Parses the offset/scale annotation written by write_image_pgm_preview.
inline bool read_preview_annotation(const std::string& path, double* offset,
                                    double* scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string line;
  for (int i = 0; i < 8 && std::getline(in, line); ++i) {
    double o = 0.0, s = 0.0;
    if (std::sscanf(line.c_str(), "# offset=%lf scale=%lf", &o, &s) == 2) {
      if (offset) *offset = o;
      if (scale) *scale = s;
      return true;
    }
  }
  return false;
}

// Raw little-endian float32 dump plus a text sidecar describing the layout.
// This is the lossless-path artifact: reruns must reproduce it byte for
// byte, so the doubles are narrowed with one deterministic cast each.
inline void write_image_f32(const std::string& path, const Image& img) {
  static_assert(sizeof(float) == 4, "float must be 32-bit");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write raw image: " + path);
  std::vector<unsigned char> raw(img.v.size() * 4);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    const float f = static_cast<float>(img.v[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    raw[i * 4] = static_cast<unsigned char>(bits & 0xff);
    raw[i * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    raw[i * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    raw[i * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path);
  std::ofstream side(path + ".txt");
  if (!side) throw IoError("cannot write sidecar: " + path + ".txt");
  side << "height = " << img.rows << "\n"
       << "width = " << img.cols << "\n"
       << "dtype = float32\n"
       << "byte_order = little\n"
       << "layout = row_major\n";
}

inline Image read_image_f32(const std::string& path) {
  std::ifstream side(path + ".txt");
  if (!side) throw IoError("missing sidecar: " + path + ".txt");
  int rows = 0, cols = 0;
  std::string line;
  while (std::getline(side, line)) {
    std::sscanf(line.c_str(), "height = %d", &rows);
    std::sscanf(line.c_str(), "width = %d", &cols);
  }
  if (rows < 1 || cols < 1)
    throw IoError("sidecar lacks dimensions: " + path + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raw image: " + path);
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols * 4);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("raw raster truncated: " + path);
  Image img(rows, cols);
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    const std::uint32_t bits =
        static_cast<std::uint32_t>(raw[i * 4]) |
        (static_cast<std::uint32_t>(raw[i * 4 + 1]) << 8) |
        (static_cast<std::uint32_t>(raw[i * 4 + 2]) << 16) |
        (static_cast<std::uint32_t>(raw[i * 4 + 3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    img.v[i] = f;
  }
  return img;
}

// Content hash for manifests, streamed so large artifacts do not need to fit
// in memory twice.
inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize n = in.gcount();
    if (n > 0) h = fnv1a64(buf, static_cast<std::size_t>(n), h);
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

}  // namespace turbforward
