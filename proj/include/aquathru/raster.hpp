#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace aquathru {

// All rasters are row-major, top-to-bottom, float32 samples. Images are
// linear intensity; gamma-encoded input is the caller's responsibility.

// H×W×3 image with interleaved R,G,B channels, each value in [0,1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // width*height*3, pixel-interleaved

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return width <= 0 || height <= 0; }

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  // Checks the type invariants: size consistency, finiteness, [0,1] range.
  void validate(const char* what = "image") const;
};

// H×W line-of-sight distance in meters. Invalid pixels carry an explicit
// flag in memory (NaN only in file storage) so arithmetic stays sentinel-free.
struct RangeMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;          // meters, 0 where invalid
  std::vector<std::uint8_t> valid;  // 1 = usable

  RangeMap() = default;
  RangeMap(int w, int h)
      : width(w),
        height(h),
        data(static_cast<std::size_t>(w) * h, 0.0f),
        valid(static_cast<std::size_t>(w) * h, 1) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return width <= 0 || height <= 0; }

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
  void set_invalid(int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * width + x;
    valid[i] = 0;
    data[i] = 0.0f;
  }

  std::size_t valid_count() const;
  void validate(const char* what = "range map") const;
};

// H×W per-pixel reliability in [0,1].
struct ConfidenceMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  ConfidenceMap() = default;
  ConfidenceMap(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return width <= 0 || height <= 0; }

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  void validate(const char* what = "confidence map") const;
};

// H×W binary mask.
struct DepthMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  DepthMask() = default;
  DepthMask(int w, int h, bool value = false)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return width <= 0 || height <= 0; }

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  std::size_t count_true() const;
  // Fraction of pixels set; 0 for an empty mask.
  double coverage() const;
};

// Throws ValidationError unless both rasters have identical dimensions.
void require_same_dims(int wa, int ha, int wb, int hb, const char* a, const char* b);

template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* na, const char* nb) {
  require_same_dims(a.width, a.height, b.width, b.height, na, nb);
}

}  // namespace aquathru
