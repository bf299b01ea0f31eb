#pragma once

#include <cstddef>
#include <vector>

#include "aquathru/kv_config.hpp"
#include "aquathru/raster.hpp"
#include "aquathru/vec3.hpp"

namespace aquathru {

// Homogeneous-water imaging parameters. The attenuation and backscatter
// coefficients are per-channel constants; depth-varying coefficients are an
// extension point, not implemented.
struct WaterParams {
  Vec3 veil;    // asymptotic water color B_inf, each in [0,1]
  Vec3 beta_b;  // backscatter coefficient, 1/m, >= 0
  Vec3 beta_d;  // direct attenuation coefficient, 1/m, >= 0

  void validate() const;

  static WaterParams from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

// Ray sampling sequence for the segment-weight utility.
struct RaySamples {
  std::vector<double> sigma;  // per-segment object density, >= 0
  std::vector<double> delta;  // per-segment length, > 0

  void validate() const;
};

// Per-image bookkeeping from synthesize/restore: which pixels were clamped
// into [0,1] and which had no usable range. Lets round-trip checks exclude
// saturated pixels.
struct SynthesisReport {
  DepthMask clamped;
  DepthMask invalid_range;

  std::size_t clamped_count() const { return clamped.count_true(); }
  double clamped_fraction() const { return clamped.coverage(); }
};

// Forward degradation: I = J*exp(-beta_d*z) + veil*(1 - exp(-beta_b*z)),
// per pixel and channel, clamped to [0,1]. Pixels with invalid range are
// copied from `clean` and flagged in the report.
RgbImage synthesize(const RgbImage& clean, const RangeMap& range,
                    const WaterParams& params, SynthesisReport* report = nullptr);

// Volumetric segment weights w_i = T_i * (1 - exp(-sigma_i*delta_i)) with
// T_i the transmittance accumulated over the preceding segments.
std::vector<double> segment_weights(const RaySamples& samples);

}  // namespace aquathru
