#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace aquathru {

// One RGB/enhanced/depth/confidence/mask record. Paths are relative to a
// dataset root the caller supplies; mask may be empty until built.
struct SampleRecord {
  std::string rgb_path;
  std::string enhanced_rgb_path;
  std::string depth_path;
  std::string confidence_path;
  std::string mask_path;
  std::optional<std::array<double, 9>> intrinsics;  // row-major 3x3 K
  std::optional<std::array<double, 16>> pose;       // row-major 4x4 camera pose
  bool quality_ok = true;
};

// Per-scene JSON manifest, schema version 1. Field-by-field description in
// docs/manifest_schema.md.
struct SceneManifest {
  std::string scene_id;
  std::vector<SampleRecord> samples;

  // Path distinctness per sample, K upper-triangular with positive diagonal,
  // pose rotation orthonormal within 1e-6.
  void validate() const;

  static SceneManifest from_json(const std::string& text);
  std::string to_json() const;

  static SceneManifest load(const std::string& path);
  void save(const std::string& path) const;
};

// Aggregate counts across manifests, for dataset bookkeeping.
struct CorpusStats {
  std::size_t scene_count = 0;
  std::size_t sample_count = 0;
  std::size_t min_scene_size = 0;
  std::size_t max_scene_size = 0;
};

CorpusStats corpus_stats(const std::vector<SceneManifest>& manifests);

}  // namespace aquathru
