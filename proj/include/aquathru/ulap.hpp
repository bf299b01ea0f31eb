#pragma once

#include <cstddef>
#include <vector>

#include "aquathru/kv_config.hpp"
#include "aquathru/raster.hpp"

namespace aquathru {

// Attenuation-prior coefficients: relative range from a single RGB pixel,
// d = mu0 + mu1*max(B,G) + mu2*R. Output is relative, not metric.
struct UlapCoefficients {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;

  void validate() const;

  static UlapCoefficients from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

struct UlapFit {
  UlapCoefficients coeffs;
  double rmse = 0.0;
  std::size_t pixel_count = 0;
};

// One supervision pair; mask is optional (nullptr = every valid range pixel).
struct UlapSample {
  const RgbImage* image = nullptr;
  const RangeMap* range = nullptr;
  const DepthMask* mask = nullptr;
};

// Pointwise prior, clamped below at 0 (the affine map can dip negative on
// bright-red pixels). Every output pixel is valid.
RangeMap ulap_range(const RgbImage& img, const UlapCoefficients& coeffs);

// Ordinary least squares over the masked valid pixels of all pairs, solved
// through the 3x3 normal equations. Throws NumericError naming the deficient
// direction when the normal matrix is rank-deficient (e.g. constant color).
UlapFit fit_ulap(const std::vector<UlapSample>& pairs);

inline UlapFit fit_ulap(const RgbImage& img, const RangeMap& range,
                        const DepthMask* mask = nullptr) {
  return fit_ulap(std::vector<UlapSample>{{&img, &range, mask}});
}

}  // namespace aquathru
