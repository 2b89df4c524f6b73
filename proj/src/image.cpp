#include "toolpose/image.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "toolpose/error.hpp"

namespace toolpose {

static_assert(std::endian::native == std::endian::little, "FMAP I/O assumes a little-endian host");

std::size_t MaskImage::count() const {
  std::size_t n = 0;
  for (auto v : data) n += v;
  return n;
}

DoubleImage to_double(const FloatImage& img) {
  DoubleImage out(img.width, img.height, img.channels);
  std::copy(img.data.begin(), img.data.end(), out.data.begin());
  return out;
}

DoubleImage to_double(const MaskImage& m) {
  DoubleImage out(m.width, m.height, 1);
  std::copy(m.data.begin(), m.data.end(), out.data.begin());
  return out;
}

void check_same_shape(const MaskImage& a, const MaskImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorKind::ShapeMismatch, "mask shapes differ");
  }
}

MaskImage mask_and(const MaskImage& a, const MaskImage& b) {
  check_same_shape(a, b);
  MaskImage out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] & b.data[i];
  return out;
}

MaskImage mask_and_not(const MaskImage& a, const MaskImage& b) {
  check_same_shape(a, b);
  MaskImage out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] & (b.data[i] ^ 1u);
  return out;
}

MaskImage mask_or(const MaskImage& a, const MaskImage& b) {
  check_same_shape(a, b);
  MaskImage out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] | b.data[i];
  return out;
}

MaskImage erode(const MaskImage& m, int radius) {
  if (radius <= 0) return m;
  MaskImage out(m.width, m.height);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      bool keep = true;
      for (int dr = -radius; dr <= radius && keep; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= m.height || cc >= m.width || !m.at(rr, cc)) {
            keep = false;
            break;
          }
        }
      }
      out.at(r, c) = keep ? 1 : 0;
    }
  }
  return out;
}

std::optional<BBox> mask_bbox(const MaskImage& m) {
  int r0 = m.height, r1 = -1, c0 = m.width, c1 = -1;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) return std::nullopt;
  return BBox::from_corners(c0, r0, c1 + 1, r1 + 1);
}

void write_pgm(const MaskImage& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "P5\n" << m.width << ' ' << m.height << "\n255\n";
  std::vector<char> bytes(m.data.size());
  for (std::size_t i = 0; i < m.data.size(); ++i) bytes[i] = m.data[i] ? static_cast<char>(255) : 0;
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MaskImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) {
    throw Error(ErrorKind::ParseError, "not a P5/255 PGM: " + path.string());
  }
  in.get();
  MaskImage m(w, h);
  std::vector<unsigned char> bytes(m.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorKind::ParseError, "truncated PGM: " + path.string());
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) m.data[i] = bytes[i] >= 128 ? 1 : 0;
  return m;
}

void write_fmap(const FloatImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write("FMAP", 4);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(img.width),
                                 static_cast<std::uint32_t>(img.height),
                                 static_cast<std::uint32_t>(img.channels)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * sizeof(float)));
}

FloatImage read_fmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  char magic[4];
  std::uint32_t dims[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, "FMAP", 4) != 0) {
    throw Error(ErrorKind::ParseError, "not an FMAP file: " + path.string());
  }
  FloatImage img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size() * sizeof(float))) {
    throw Error(ErrorKind::ParseError, "truncated FMAP: " + path.string());
  }
  return img;
}

}  // namespace toolpose
