#include "aquathru/depth_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "aquathru/error.hpp"
#include "aquathru/rng.hpp"

namespace aquathru {

namespace {

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

DepthMask confidence_to_mask(const ConfidenceMap& conf, double tau) {
  conf.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ValidationError("confidence mask: tau must be in [0,1]");
  }
  DepthMask mask(conf.width, conf.height);
  for (std::size_t i = 0; i < conf.data.size(); ++i) {
    mask.data[i] = conf.data[i] >= tau ? 1 : 0;
  }
  return mask;
}

FilterOutcome filter_scene(const SceneManifest& manifest, double min_coverage,
                           const std::function<double(const SampleRecord&)>& coverage_of) {
  manifest.validate();
  if (!(min_coverage >= 0.0 && min_coverage <= 1.0)) {
    throw ValidationError("filter: min_coverage must be in [0,1]");
  }
  if (!coverage_of) throw ValidationError("filter: missing coverage resolver");

  FilterOutcome outcome;
  outcome.kept.scene_id = manifest.scene_id;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const SampleRecord& s = manifest.samples[i];
    const double coverage = coverage_of(s);
    if (coverage < min_coverage) {
      outcome.dropped.push_back({i, s.rgb_path, coverage});
    } else {
      outcome.kept.samples.push_back(s);
    }
  }
  if (!manifest.samples.empty() && outcome.kept.samples.empty()) {
    throw NumericError("filter: all " + std::to_string(manifest.samples.size()) +
                       " samples of scene '" + manifest.scene_id +
                       "' fall below coverage " + std::to_string(min_coverage));
  }
  return outcome;
}

std::vector<SampleRef> sample_eval_set(const std::vector<SceneManifest>& manifests,
                                       std::size_t n, std::uint64_t seed) {
  std::set<std::string> ids;
  std::size_t total = 0;
  for (const auto& m : manifests) {
    m.validate();
    if (!ids.insert(m.scene_id).second) {
      throw ValidationError("sampling: duplicate scene id '" + m.scene_id + "'");
    }
    total += m.samples.size();
  }
  if (n > total) {
    throw ValidationError("sampling: requested " + std::to_string(n) + " of " +
                          std::to_string(total) + " available samples");
  }

  // Largest-remainder quotas; ties resolved toward larger scenes, then by
  // manifest order, so the allocation is deterministic.
  std::vector<std::size_t> quota(manifests.size(), 0);
  std::size_t assigned = 0;
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (n*size % total, index)
  if (total > 0) {
    for (std::size_t i = 0; i < manifests.size(); ++i) {
      const std::size_t size = manifests[i].samples.size();
      quota[i] = n * size / total;
      assigned += quota[i];
      remainders.emplace_back(n * size % total, i);
    }
    std::sort(remainders.begin(), remainders.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      const std::size_t size_a = manifests[a.second].samples.size();
      const std::size_t size_b = manifests[b.second].samples.size();
      if (size_a != size_b) return size_a > size_b;
      return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < n; ++k) {
      quota[remainders[k].second] += 1;
      ++assigned;
    }
  }

  Rng root(seed);
  std::vector<SampleRef> refs;
  refs.reserve(n);
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    if (quota[i] == 0) continue;
    Rng scene_rng = root.fork(i);
    for (const std::size_t idx : scene_rng.sample_indices(manifests[i].samples.size(), quota[i])) {
      refs.push_back({manifests[i].scene_id, idx});
    }
  }
  return refs;
}

MetricsReport compute_metrics(const RangeMap& pred, const RangeMap& gt,
                              const DepthMask& mask) {
  pred.validate("predicted range");
  gt.validate("ground-truth range");
  require_same_dims(pred, gt, "predicted range", "ground-truth range");
  require_same_dims(pred, mask, "predicted range", "mask");

  double sum_abs_rel = 0.0;
  double sum_sq_rel = 0.0;
  double sum_sq = 0.0;
  double sum_sq_log = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  std::size_t count = 0;

  constexpr double kPredFloor = 1e-3;
  constexpr double kThreshold1 = 1.25;
  constexpr double kThreshold2 = 1.25 * 1.25;
  constexpr double kThreshold3 = 1.25 * 1.25 * 1.25;

  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i]) continue;
    if (!gt.valid[i] || gt.data[i] <= 0.0f) {
      throw ValidationError("metrics: masked ground-truth pixel " + std::to_string(i) +
                            " is invalid or non-positive");
    }
    if (!pred.valid[i]) {
      throw ValidationError("metrics: masked predicted pixel " + std::to_string(i) +
                            " is invalid");
    }
    const double g = gt.data[i];
    const double p = std::max(static_cast<double>(pred.data[i]), kPredFloor);
    const double diff = p - g;
    sum_abs_rel += std::abs(diff) / g;
    sum_sq_rel += diff * diff / g;
    sum_sq += diff * diff;
    const double log_diff = std::log(p) - std::log(g);
    sum_sq_log += log_diff * log_diff;
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < kThreshold1;
    d2 += ratio < kThreshold2;
    d3 += ratio < kThreshold3;
    ++count;
  }

  if (count == 0) {
    throw ValidationError("metrics: empty mask, nothing to evaluate");
  }

  MetricsReport report;
  const double inv = 1.0 / static_cast<double>(count);
  report.abs_rel = sum_abs_rel * inv;
  report.sq_rel = sum_sq_rel * inv;
  report.rmse = std::sqrt(sum_sq * inv);
  report.rmse_log = std::sqrt(sum_sq_log * inv);
  report.delta1 = static_cast<double>(d1) * inv;
  report.delta2 = static_cast<double>(d2) * inv;
  report.delta3 = static_cast<double>(d3) * inv;
  report.pixel_count = count;
  return report;
}

std::string metrics_csv_header() {
  return "sample,Abs Rel,Sq Rel,RMSE,RMSElog,sigma<1.25,sigma<1.25^2,sigma<1.25^3,pixels";
}

std::string metrics_csv_row(const std::string& label, const MetricsReport& report) {
  std::string row = label;
  for (const double v : {report.abs_rel, report.sq_rel, report.rmse, report.rmse_log,
                         report.delta1, report.delta2, report.delta3}) {
    row += "," + format_metric(v);
  }
  row += "," + std::to_string(report.pixel_count);
  return row;
}

}  // namespace aquathru
