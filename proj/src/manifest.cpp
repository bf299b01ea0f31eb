#include "aquathru/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aquathru/error.hpp"

namespace aquathru {

namespace {

using Json = nlohmann::ordered_json;

void validate_intrinsics(const std::array<double, 9>& k, const std::string& where) {
  for (const double v : k) {
    if (!std::isfinite(v)) throw ValidationError(where + ": non-finite intrinsics");
  }
  // Row-major 3x3; entries below the diagonal are indices 3, 6, 7.
  if (k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0) {
    throw ValidationError(where + ": intrinsics matrix is not upper-triangular");
  }
  if (k[0] <= 0.0 || k[4] <= 0.0 || k[8] <= 0.0) {
    throw ValidationError(where + ": intrinsics diagonal must be positive");
  }
}

void validate_pose(const std::array<double, 16>& e, const std::string& where) {
  for (const double v : e) {
    if (!std::isfinite(v)) throw ValidationError(where + ": non-finite pose");
  }
  // R^T R must be the identity within 1e-6; R is the top-left 3x3 block.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int r = 0; r < 3; ++r) dot += e[r * 4 + i] * e[r * 4 + j];
      const double expected = i == j ? 1.0 : 0.0;
      if (std::abs(dot - expected) > 1e-6) {
        throw ValidationError(where + ": pose rotation block is not orthonormal");
      }
    }
  }
}

SampleRecord sample_from_json(const Json& j, const std::string& where) {
  static const std::set<std::string> kKnown = {
      "rgb", "enhanced_rgb", "depth", "confidence", "mask",
      "intrinsics", "pose", "quality_ok"};
  for (const auto& item : j.items()) {
    if (!kKnown.count(item.key())) {
      throw ValidationError(where + ": unknown key '" + item.key() + "'");
    }
  }

  SampleRecord s;
  const auto path_field = [&](const char* key, bool required) {
    if (!j.contains(key)) {
      if (required) throw ValidationError(where + ": missing '" + std::string(key) + "'");
      return std::string();
    }
    if (!j.at(key).is_string()) {
      throw ValidationError(where + ": '" + std::string(key) + "' must be a string");
    }
    return j.at(key).get<std::string>();
  };
  s.rgb_path = path_field("rgb", true);
  s.enhanced_rgb_path = path_field("enhanced_rgb", true);
  s.depth_path = path_field("depth", true);
  s.confidence_path = path_field("confidence", true);
  s.mask_path = path_field("mask", false);

  if (j.contains("intrinsics")) {
    const auto& arr = j.at("intrinsics");
    if (!arr.is_array() || arr.size() != 9) {
      throw ValidationError(where + ": intrinsics must hold 9 numbers");
    }
    std::array<double, 9> k{};
    for (std::size_t i = 0; i < 9; ++i) k[i] = arr[i].get<double>();
    s.intrinsics = k;
  }
  if (j.contains("pose")) {
    const auto& arr = j.at("pose");
    if (!arr.is_array() || arr.size() != 16) {
      throw ValidationError(where + ": pose must hold 16 numbers");
    }
    std::array<double, 16> e{};
    for (std::size_t i = 0; i < 16; ++i) e[i] = arr[i].get<double>();
    s.pose = e;
  }
  if (j.contains("quality_ok")) {
    if (!j.at("quality_ok").is_boolean()) {
      throw ValidationError(where + ": quality_ok must be a boolean");
    }
    s.quality_ok = j.at("quality_ok").get<bool>();
  }
  return s;
}

Json sample_to_json(const SampleRecord& s) {
  Json j;
  j["rgb"] = s.rgb_path;
  j["enhanced_rgb"] = s.enhanced_rgb_path;
  j["depth"] = s.depth_path;
  j["confidence"] = s.confidence_path;
  if (!s.mask_path.empty()) j["mask"] = s.mask_path;
  if (s.intrinsics) j["intrinsics"] = *s.intrinsics;
  if (s.pose) j["pose"] = *s.pose;
  j["quality_ok"] = s.quality_ok;
  return j;
}

}  // namespace

void SceneManifest::validate() const {
  if (scene_id.empty()) throw ValidationError("manifest: empty scene id");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string where = "manifest '" + scene_id + "' sample " + std::to_string(i);
    const SampleRecord& s = samples[i];
    std::set<std::string> paths;
    for (const std::string* p : {&s.rgb_path, &s.enhanced_rgb_path, &s.depth_path,
                                 &s.confidence_path, &s.mask_path}) {
      if (p->empty()) {
        if (p == &s.mask_path) continue;  // mask is filled in by build-masks
        throw ValidationError(where + ": empty path");
      }
      if (!paths.insert(*p).second) {
        throw ValidationError(where + ": duplicate path '" + *p + "'");
      }
    }
    if (s.intrinsics) validate_intrinsics(*s.intrinsics, where);
    if (s.pose) validate_pose(*s.pose, where);
  }
}

SceneManifest SceneManifest::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("manifest: JSON parse failed: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("manifest: top level must be an object");
  for (const auto& item : j.items()) {
    if (item.key() != "schema" && item.key() != "scene_id" && item.key() != "samples") {
      throw ValidationError("manifest: unknown key '" + item.key() + "'");
    }
  }
  if (!j.contains("schema") || !j.at("schema").is_number_integer() ||
      j.at("schema").get<int>() != 1) {
    throw ValidationError("manifest: schema must be the integer 1");
  }
  if (!j.contains("scene_id") || !j.at("scene_id").is_string()) {
    throw ValidationError("manifest: scene_id must be a string");
  }
  if (!j.contains("samples") || !j.at("samples").is_array()) {
    throw ValidationError("manifest: samples must be an array");
  }

  SceneManifest m;
  m.scene_id = j.at("scene_id").get<std::string>();
  for (std::size_t i = 0; i < j.at("samples").size(); ++i) {
    m.samples.push_back(sample_from_json(
        j.at("samples")[i], "manifest '" + m.scene_id + "' sample " + std::to_string(i)));
  }
  m.validate();
  return m;
}

std::string SceneManifest::to_json() const {
  validate();
  Json j;
  j["schema"] = 1;
  j["scene_id"] = scene_id;
  j["samples"] = Json::array();
  for (const auto& s : samples) j["samples"].push_back(sample_to_json(s));
  return j.dump(2) + "\n";
}

SceneManifest SceneManifest::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("manifest: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

void SceneManifest::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("manifest: cannot write '" + path + "'");
  f << to_json();
}

CorpusStats corpus_stats(const std::vector<SceneManifest>& manifests) {
  CorpusStats stats;
  stats.scene_count = manifests.size();
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const std::size_t size = manifests[i].samples.size();
    stats.sample_count += size;
    stats.min_scene_size = i == 0 ? size : std::min(stats.min_scene_size, size);
    stats.max_scene_size = i == 0 ? size : std::max(stats.max_scene_size, size);
  }
  return stats;
}

}  // namespace aquathru
