#pragma once

#include <cstdint>
#include <vector>

#include "fdm/common.hpp"

namespace fdm {

inline constexpr int kPatchSize = 16;
inline constexpr int kPatchPositions = 128;
inline constexpr float kPatchVarianceFloor = 1e-6f;

// H x W x C image, channel-fastest (HWC) storage.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int r, int col, int ch) {
    return pixels[(static_cast<std::size_t>(r) * width + col) * channels + ch];
  }
  float at(int r, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + col) * channels + ch];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

// One normalized 16x16xC patch plus its normalized location in the image.
struct Patch {
  int channels = 0;
  std::vector<float> pixels;  // 16 * 16 * channels, HWC
  Interval rows;
  Interval cols;
  std::uint32_t raster_index = 0;

  friend bool operator==(const Patch&, const Patch&) = default;
};

// Splits into raster-ordered patches, each normalized to zero mean and unit
// variance. Throws ShapeError unless both sides are multiples of 16.
std::vector<Patch> extract_patches(const Image& image);

enum class Mode { kTrain, kEval };

// Quantizes a normalized interval into the 128-entry position table. Train
// mode draws uniformly from the quantized interval; eval mode takes its
// rounded midpoint.
int patch_position_index(Interval interval, Mode mode, Rng* rng);

}  // namespace fdm
