#include "aquathru/raster.hpp"

#include <cmath>
#include <string>

#include "aquathru/error.hpp"

namespace aquathru {

void RgbImage::validate(const char* what) const {
  if (width <= 0 || height <= 0) {
    throw ValidationError(std::string(what) + ": empty or negative dimensions");
  }
  if (data.size() != pixel_count() * 3) {
    throw ValidationError(std::string(what) + ": data size does not match dimensions");
  }
  for (const float v : data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ValidationError(std::string(what) + ": sample outside [0,1]");
    }
  }
}

std::size_t RangeMap::valid_count() const {
  std::size_t n = 0;
  for (const auto v : valid) n += v != 0;
  return n;
}

void RangeMap::validate(const char* what) const {
  if (width <= 0 || height <= 0) {
    throw ValidationError(std::string(what) + ": empty or negative dimensions");
  }
  if (data.size() != pixel_count() || valid.size() != pixel_count()) {
    throw ValidationError(std::string(what) + ": data size does not match dimensions");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (valid[i] && (!std::isfinite(data[i]) || data[i] < 0.0f)) {
      throw ValidationError(std::string(what) + ": valid pixel is negative or non-finite");
    }
  }
}

void ConfidenceMap::validate(const char* what) const {
  if (width <= 0 || height <= 0) {
    throw ValidationError(std::string(what) + ": empty or negative dimensions");
  }
  if (data.size() != pixel_count()) {
    throw ValidationError(std::string(what) + ": data size does not match dimensions");
  }
  for (const float v : data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw ValidationError(std::string(what) + ": confidence outside [0,1]");
    }
  }
}

std::size_t DepthMask::count_true() const {
  std::size_t n = 0;
  for (const auto v : data) n += v != 0;
  return n;
}

double DepthMask::coverage() const {
  if (data.empty()) return 0.0;
  return static_cast<double>(count_true()) / static_cast<double>(data.size());
}

void require_same_dims(int wa, int ha, int wb, int hb, const char* a, const char* b) {
  if (wa != wb || ha != hb) {
    throw ValidationError(std::string(a) + " is " + std::to_string(wa) + "x" +
                          std::to_string(ha) + " but " + b + " is " +
                          std::to_string(wb) + "x" + std::to_string(hb));
  }
}

}  // namespace aquathru
