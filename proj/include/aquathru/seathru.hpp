#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aquathru/error.hpp"
#include "aquathru/formation.hpp"
#include "aquathru/kv_config.hpp"
#include "aquathru/raster.hpp"
#include "aquathru/ulap.hpp"
#include "aquathru/vec3.hpp"

namespace aquathru {

inline constexpr int kRangeClusterCount = 10;
inline constexpr double kRangeFloor = 0.05;  // meters, guards -log(E)/z near z=0

// Raised when the range map occupies fewer than 3 of the 10 clusters and the
// backscatter curve cannot be constrained.
class InsufficientRangeDiversityError : public NumericError {
 public:
  explicit InsufficientRangeDiversityError(const std::string& msg) : NumericError(msg) {}
};

// Per-channel backscatter curve fit I ~ veil * (1 - exp(-beta_b * z)).
struct BackscatterFit {
  Vec3 veil_hat;
  Vec3 beta_b_hat;
  Vec3 residual_rmse;
  std::array<std::size_t, kRangeClusterCount> bin_counts{};  // fit samples per cluster

  void validate() const;

  // Fit equivalent to known parameters, for exact-inverse round trips.
  static BackscatterFit from_params(const WaterParams& params);

  static BackscatterFit from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

// Per-pixel local illuminant estimate, strictly positive, 3 channels.
struct IlluminantMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // interleaved R,G,B in (0,1]

  IlluminantMap() = default;
  IlluminantMap(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  void validate() const;
};

enum class AttenuationMode { kPerPixel, kBinned };

// Direct-attenuation estimate: either a per-pixel raster or per-cluster
// medians over the same 10 z bins used by the backscatter search.
struct AttenuationEstimate {
  AttenuationMode mode = AttenuationMode::kBinned;

  // Binned representation.
  double z_min = 0.0;
  double z_max = 0.0;
  std::array<std::array<double, kRangeClusterCount>, 3> binned{};  // [channel][bin]
  std::array<std::size_t, kRangeClusterCount> bin_counts{};

  // Per-pixel representation.
  int width = 0;
  int height = 0;
  std::vector<float> per_pixel;             // interleaved R,G,B, 0 where not estimated
  std::vector<std::uint8_t> estimated;      // 1 where the pixel produced an estimate

  // Channel coefficient for a pixel at range z.
  double beta_at(std::size_t channel, double z, std::size_t pixel_index) const;

  // Constant-coefficient estimate (all bins equal), for exact round trips.
  static AttenuationEstimate uniform(const Vec3& beta_d);

  static AttenuationEstimate from_config(const KvConfig& cfg);
  KvConfig to_config() const;  // binned only: 10 comma-separated values per channel
};

// Illuminant smoothing knobs; the defaults are the shipping configuration.
struct IlluminantParams {
  double neighborhood_fraction = 0.01;  // p: weight of the pixel's own signal
  int iterations = 50;
  double gray_world_factor = 2.0;
};

struct EnhanceParams {
  IlluminantParams illuminant;
  double direct_floor = 1e-4;  // clamp for I - B(z) before taking logs
};

struct EnhanceResult {
  RgbImage output;
  RangeMap range;  // the scaled prior range actually used
  BackscatterFit backscatter;
  IlluminantMap illuminant;
  AttenuationEstimate attenuation;
  SynthesisReport report;
  bool backscatter_fallback = false;  // range had no diversity; veil fixed at 0
};

// Backscatter search over 10 equal-width z clusters: darkest 1% (min 5) per
// cluster per channel, then bounded multi-start Levenberg-Marquardt.
BackscatterFit estimate_backscatter(const RgbImage& img, const RangeMap& range);

// I - B(z), clamped below at `floor` so logs stay finite.
RgbImage direct_signal(const RgbImage& img, const RangeMap& range,
                       const BackscatterFit& bs, double floor = 1e-4);

// Local space-average color: Jacobi iteration a <- (1-p)*mean(4-neighbors)
// + p*direct for a fixed number of rounds, then E = f*a clamped to (0,1].
IlluminantMap estimate_illuminant(const RgbImage& direct, const RangeMap& range,
                                  const IlluminantParams& params = {});

// beta_d = -log(E)/z on pixels with z above the range floor, negatives
// clamped to 0. Binned mode takes per-cluster medians.
AttenuationEstimate estimate_attenuation(const IlluminantMap& illum, const RangeMap& range,
                                         AttenuationMode mode);

// J = (I - B(z)) * exp(beta_d * z), clamped to [0,1]. Invalid-range pixels
// are copied through and flagged.
RgbImage restore(const RgbImage& img, const RangeMap& range, const BackscatterFit& bs,
                 const AttenuationEstimate& att, SynthesisReport* report = nullptr);

// Full enhancement: ULAP prior range, scaled to pseudo-meters, then the
// backscatter/illuminant/attenuation chain and restoration. Falls back to a
// zero-backscatter fit when the prior range has no diversity (flat prior).
EnhanceResult enhance(const RgbImage& img, const UlapCoefficients& coeffs, double scale,
                      const EnhanceParams& params = {});

}  // namespace aquathru
