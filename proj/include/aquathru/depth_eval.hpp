#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aquathru/manifest.hpp"
#include "aquathru/raster.hpp"

namespace aquathru {

// mask(x) = conf(x) >= tau. Coverage is available via DepthMask::coverage().
DepthMask confidence_to_mask(const ConfidenceMap& conf, double tau);

struct DropEntry {
  std::size_t sample_index = 0;
  std::string rgb_path;
  double coverage = 0.0;
};

struct FilterOutcome {
  SceneManifest kept;
  std::vector<DropEntry> dropped;
};

// Drops samples whose mask coverage falls below min_coverage. coverage_of
// resolves a sample to its mask coverage (the CLI loads the mask file; tests
// inject fixtures). Throws when every sample is rejected.
FilterOutcome filter_scene(const SceneManifest& manifest, double min_coverage,
                           const std::function<double(const SampleRecord&)>& coverage_of);

struct SampleRef {
  std::string scene_id;
  std::size_t sample_index = 0;

  bool operator==(const SampleRef&) const = default;
};

// Deterministic stratified sampling: per-scene quotas proportional to scene
// size (largest-remainder rounding), then a seeded uniform draw inside each
// scene. Identical across runs and platforms for fixed inputs.
std::vector<SampleRef> sample_eval_set(const std::vector<SceneManifest>& manifests,
                                       std::size_t n, std::uint64_t seed);

// The seven standard depth metrics over the masked pixels.
struct MetricsReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;  // max(p/g, g/p) < 1.25
  double delta2 = 0.0;  // ... < 1.25^2
  double delta3 = 0.0;  // ... < 1.25^3
  std::size_t pixel_count = 0;
};

// Masked gt pixels must be valid and positive; pred is clamped below at
// 1e-3 before evaluation. Throws on an empty mask rather than returning NaN.
MetricsReport compute_metrics(const RangeMap& pred, const RangeMap& gt,
                              const DepthMask& mask);

// CSV export with a fixed header; one row per labelled report.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& label, const MetricsReport& report);

}  // namespace aquathru
