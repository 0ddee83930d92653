#include "fdm/patches.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fdm {

std::vector<Patch> extract_patches(const Image& image) {
  if (image.height <= 0 || image.width <= 0 || image.channels <= 0 ||
      image.height % kPatchSize != 0 || image.width % kPatchSize != 0) {
    throw ShapeError("image " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) +
                     " is not a positive multiple of 16 on both sides");
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.height) *
                                 image.width * image.channels) {
    throw ShapeError("image pixel buffer does not match its shape");
  }
  const int pr = image.height / kPatchSize;
  const int pc = image.width / kPatchSize;
  const int c = image.channels;
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(pr) * pc);
  for (int i = 0; i < pr; ++i) {
    for (int j = 0; j < pc; ++j) {
      Patch p;
      p.channels = c;
      p.pixels.resize(static_cast<std::size_t>(kPatchSize) * kPatchSize * c);
      double sum = 0.0;
      std::size_t k = 0;
      for (int r = 0; r < kPatchSize; ++r) {
        for (int col = 0; col < kPatchSize; ++col) {
          for (int ch = 0; ch < c; ++ch) {
            const float v =
                image.at(i * kPatchSize + r, j * kPatchSize + col, ch);
            p.pixels[k++] = v;
            sum += v;
          }
        }
      }
      const double n = static_cast<double>(p.pixels.size());
      const double mean = sum / n;
      double var = 0.0;
      for (float v : p.pixels) var += (v - mean) * (v - mean);
      var /= n;
      const double inv =
          1.0 / std::sqrt(std::max(var, static_cast<double>(kPatchVarianceFloor)));
      for (float& v : p.pixels) v = static_cast<float>((v - mean) * inv);
      p.rows = {static_cast<double>(i * kPatchSize) / image.height,
                static_cast<double>((i + 1) * kPatchSize) / image.height};
      p.cols = {static_cast<double>(j * kPatchSize) / image.width,
                static_cast<double>((j + 1) * kPatchSize) / image.width};
      p.raster_index = static_cast<std::uint32_t>(i * pc + j);
      out.push_back(std::move(p));
    }
  }
  return out;
}

int patch_position_index(Interval interval, Mode mode, Rng* rng) {
  if (!(interval.lo >= 0.0 && interval.lo <= interval.hi && interval.hi <= 1.0)) {
    throw ValueError("patch interval [" + std::to_string(interval.lo) + ", " +
                     std::to_string(interval.hi) + "] is not inside [0, 1]");
  }
  const int last = kPatchPositions - 1;
  const int q_lo = std::min(
      last, static_cast<int>(std::floor(kPatchPositions * interval.lo)));
  const int q_hi = std::clamp(
      static_cast<int>(std::ceil(kPatchPositions * interval.hi)) - 1, q_lo,
      last);
  if (mode == Mode::kEval) {
    // Half-away-from-zero rounding of the non-negative midpoint.
    return (q_lo + q_hi + 1) / 2;
  }
  if (rng == nullptr) throw ValueError("train-mode patch position needs an rng");
  return static_cast<int>(rng->uniform_int(q_lo, q_hi));
}

}  // namespace fdm
