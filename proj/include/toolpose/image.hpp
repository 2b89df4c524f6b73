#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "toolpose/camera.hpp"

namespace toolpose {

/// Row-major binary mask; values are 0 or 1.
struct MaskImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  MaskImage() = default;
  MaskImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool operator==(const MaskImage&) const = default;
};

/// Row-major multi-channel raster (channel-interleaved).
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, T{}) {}

  T& at(int row, int col, int ch = 0) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  T at(int row, int col, int ch = 0) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  bool operator==(const Raster&) const = default;
};

using FloatImage = Raster<float>;
using DoubleImage = Raster<double>;

DoubleImage to_double(const FloatImage& img);
DoubleImage to_double(const MaskImage& m);

/// Depth in meters, 0 where nothing was hit.
using DepthMap = FloatImage;

/// Normalized model coordinates per crop pixel plus the crop they were rendered for.
struct CorrespondenceMap {
  FloatImage coords;  // 3 channels
  MaskImage valid;
  BBox crop;

  int size() const { return coords.width; }
};

void check_same_shape(const MaskImage& a, const MaskImage& b);

MaskImage mask_and(const MaskImage& a, const MaskImage& b);
MaskImage mask_and_not(const MaskImage& a, const MaskImage& b);
MaskImage mask_or(const MaskImage& a, const MaskImage& b);
MaskImage erode(const MaskImage& m, int radius);

/// Tight box over set pixels, in pixel-edge coordinates (a single pixel (r,c) gives [c,c+1]).
std::optional<BBox> mask_bbox(const MaskImage& m);

// PGM P5 with maxval 255; 0 -> 0, 255 -> 1.
void write_pgm(const MaskImage& m, const std::filesystem::path& path);
MaskImage read_pgm(const std::filesystem::path& path);

// "FMAP" + u32 width, height, channels + little-endian f32 payload.
void write_fmap(const FloatImage& img, const std::filesystem::path& path);
FloatImage read_fmap(const std::filesystem::path& path);

}  // namespace toolpose
