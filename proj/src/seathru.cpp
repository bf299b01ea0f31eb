#include "aquathru/seathru.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aquathru/error.hpp"
#include "aquathru/levmar.hpp"

namespace aquathru {

namespace {

struct RangeBins {
  double z_min = 0.0;
  double z_max = 0.0;
  std::vector<std::size_t> index_of;              // valid-pixel index -> bin
  std::vector<std::vector<std::size_t>> members;  // bin -> pixel indices
};

// Equal-width clusters over [z_min, z_max] of the given pixel set. A zero
// width interval puts everything into cluster 0.
RangeBins cluster_by_range(const RangeMap& range, const std::vector<std::size_t>& pixels) {
  RangeBins bins;
  bins.members.resize(kRangeClusterCount);
  bins.z_min = std::numeric_limits<double>::infinity();
  bins.z_max = -std::numeric_limits<double>::infinity();
  for (const std::size_t i : pixels) {
    bins.z_min = std::min(bins.z_min, static_cast<double>(range.data[i]));
    bins.z_max = std::max(bins.z_max, static_cast<double>(range.data[i]));
  }
  const double width = bins.z_max - bins.z_min;
  bins.index_of.reserve(pixels.size());
  for (const std::size_t i : pixels) {
    std::size_t idx = 0;
    if (width > 0.0) {
      const double t = (range.data[i] - bins.z_min) / width;
      idx = std::min<std::size_t>(kRangeClusterCount - 1,
                                  static_cast<std::size_t>(t * kRangeClusterCount));
    }
    bins.index_of.push_back(idx);
    bins.members[idx].push_back(i);
  }
  return bins;
}

double median_of(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const std::vector<std::string> kBackscatterKeys = {
    "veil_hat_r", "veil_hat_g", "veil_hat_b", "beta_b_hat_r", "beta_b_hat_g",
    "beta_b_hat_b", "residual_rmse_r", "residual_rmse_g", "residual_rmse_b",
    "bin_counts"};

const std::vector<std::string> kAttenuationKeys = {"z_min", "z_max", "beta_d_r",
                                                   "beta_d_g", "beta_d_b", "bin_counts"};

}  // namespace

void BackscatterFit::validate() const {
  if (!veil_hat.all_finite() || !beta_b_hat.all_finite() || !residual_rmse.all_finite()) {
    throw ValidationError("backscatter fit: non-finite value");
  }
  if (!veil_hat.all_in(0.0, 1.0)) throw ValidationError("backscatter fit: veil outside [0,1]");
  if (!beta_b_hat.all_ge(0.0)) throw ValidationError("backscatter fit: negative beta_b");
}

BackscatterFit BackscatterFit::from_params(const WaterParams& params) {
  params.validate();
  BackscatterFit fit;
  fit.veil_hat = params.veil;
  fit.beta_b_hat = params.beta_b;
  fit.residual_rmse = {0.0, 0.0, 0.0};
  return fit;
}

BackscatterFit BackscatterFit::from_config(const KvConfig& cfg) {
  cfg.require_only(kBackscatterKeys);
  BackscatterFit fit;
  for (std::size_t c = 0; c < 3; ++c) {
    fit.veil_hat[c] = cfg.get_scalar(std::string("veil_hat_") + kChannelNames[c]);
    fit.beta_b_hat[c] = cfg.get_scalar(std::string("beta_b_hat_") + kChannelNames[c]);
    fit.residual_rmse[c] = cfg.get_scalar(std::string("residual_rmse_") + kChannelNames[c]);
  }
  const auto counts = cfg.get_list("bin_counts");
  if (counts.size() != kRangeClusterCount) {
    throw ValidationError("backscatter fit: bin_counts needs 10 entries");
  }
  for (std::size_t i = 0; i < kRangeClusterCount; ++i) {
    fit.bin_counts[i] = static_cast<std::size_t>(counts[i]);
  }
  fit.validate();
  return fit;
}

KvConfig BackscatterFit::to_config() const {
  KvConfig cfg;
  for (std::size_t c = 0; c < 3; ++c)
    cfg.set(std::string("veil_hat_") + kChannelNames[c], veil_hat[c]);
  for (std::size_t c = 0; c < 3; ++c)
    cfg.set(std::string("beta_b_hat_") + kChannelNames[c], beta_b_hat[c]);
  for (std::size_t c = 0; c < 3; ++c)
    cfg.set(std::string("residual_rmse_") + kChannelNames[c], residual_rmse[c]);
  std::vector<double> counts(bin_counts.begin(), bin_counts.end());
  cfg.set("bin_counts", counts);
  return cfg;
}

void IlluminantMap::validate() const {
  if (width <= 0 || height <= 0 || data.size() != pixel_count() * 3) {
    throw ValidationError("illuminant map: inconsistent dimensions");
  }
  for (const float v : data) {
    if (!std::isfinite(v) || v <= 0.0f || v > 1.0f) {
      throw ValidationError("illuminant map: value outside (0,1]");
    }
  }
}

double AttenuationEstimate::beta_at(std::size_t channel, double z,
                                    std::size_t pixel_index) const {
  if (mode == AttenuationMode::kPerPixel) {
    return per_pixel[pixel_index * 3 + channel];
  }
  std::size_t idx = 0;
  const double width = z_max - z_min;
  if (width > 0.0) {
    const double t = (z - z_min) / width;
    if (t >= 1.0) {
      idx = kRangeClusterCount - 1;
    } else if (t > 0.0) {
      idx = static_cast<std::size_t>(t * kRangeClusterCount);
    }
  }
  return binned[channel][idx];
}

AttenuationEstimate AttenuationEstimate::uniform(const Vec3& beta_d) {
  if (!beta_d.all_finite() || !beta_d.all_ge(0.0)) {
    throw ValidationError("attenuation: uniform coefficients must be finite and >= 0");
  }
  AttenuationEstimate est;
  est.mode = AttenuationMode::kBinned;
  est.z_min = 0.0;
  est.z_max = 1.0;
  for (std::size_t c = 0; c < 3; ++c) est.binned[c].fill(beta_d[c]);
  return est;
}

AttenuationEstimate AttenuationEstimate::from_config(const KvConfig& cfg) {
  cfg.require_only(kAttenuationKeys);
  AttenuationEstimate est;
  est.mode = AttenuationMode::kBinned;
  est.z_min = cfg.get_scalar("z_min");
  est.z_max = cfg.get_scalar("z_max");
  for (std::size_t c = 0; c < 3; ++c) {
    const auto values = cfg.get_list(std::string("beta_d_") + kChannelNames[c]);
    if (values.size() != kRangeClusterCount) {
      throw ValidationError("attenuation: each channel needs 10 binned values");
    }
    for (std::size_t i = 0; i < kRangeClusterCount; ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0) {
        throw ValidationError("attenuation: binned value must be finite and >= 0");
      }
      est.binned[c][i] = values[i];
    }
  }
  const auto counts = cfg.get_list("bin_counts");
  if (counts.size() != kRangeClusterCount) {
    throw ValidationError("attenuation: bin_counts needs 10 entries");
  }
  for (std::size_t i = 0; i < kRangeClusterCount; ++i) {
    est.bin_counts[i] = static_cast<std::size_t>(counts[i]);
  }
  return est;
}

KvConfig AttenuationEstimate::to_config() const {
  if (mode != AttenuationMode::kBinned) {
    throw ValidationError("attenuation: only the binned mode serializes to config");
  }
  KvConfig cfg;
  cfg.set("z_min", z_min);
  cfg.set("z_max", z_max);
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> values(binned[c].begin(), binned[c].end());
    cfg.set(std::string("beta_d_") + kChannelNames[c], values);
  }
  std::vector<double> counts(bin_counts.begin(), bin_counts.end());
  cfg.set("bin_counts", counts);
  return cfg;
}

BackscatterFit estimate_backscatter(const RgbImage& img, const RangeMap& range) {
  img.validate("backscatter image");
  range.validate("backscatter range");
  require_same_dims(img, range, "backscatter image", "backscatter range");

  std::vector<std::size_t> valid_pixels;
  valid_pixels.reserve(range.pixel_count());
  for (std::size_t i = 0; i < range.pixel_count(); ++i) {
    if (range.valid[i]) valid_pixels.push_back(i);
  }
  if (valid_pixels.size() < 10) {
    throw ValidationError("backscatter: needs at least 10 valid range pixels, have " +
                          std::to_string(valid_pixels.size()));
  }

  const RangeBins bins = cluster_by_range(range, valid_pixels);

  std::size_t usable = 0;
  for (const auto& members : bins.members) usable += members.size() >= 5;
  if (usable < 3) {
    throw InsufficientRangeDiversityError(
        "backscatter: only " + std::to_string(usable) +
        " of 10 range clusters are occupied (need 3); range interval too narrow");
  }

  BackscatterFit fit;

  // Selected sample count per cluster is channel-independent.
  std::array<std::size_t, kRangeClusterCount> selected_counts{};
  for (std::size_t b = 0; b < kRangeClusterCount; ++b) {
    const std::size_t size = bins.members[b].size();
    if (size < 5) continue;
    const auto one_percent = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(size)));
    selected_counts[b] = std::min(size, std::max<std::size_t>(5, one_percent));
  }
  fit.bin_counts = selected_counts;

  for (std::size_t channel = 0; channel < 3; ++channel) {
    // Darkest pixels per cluster; keys (intensity, z) make the selection a
    // function of the pixel multiset, invariant under shuffling.
    std::vector<double> zs;
    std::vector<double> intensities;
    for (std::size_t b = 0; b < kRangeClusterCount; ++b) {
      if (selected_counts[b] == 0) continue;
      std::vector<std::pair<double, double>> keyed;  // (I_c, z)
      keyed.reserve(bins.members[b].size());
      for (const std::size_t i : bins.members[b]) {
        keyed.emplace_back(img.data[i * 3 + channel], range.data[i]);
      }
      std::sort(keyed.begin(), keyed.end());
      for (std::size_t k = 0; k < selected_counts[b]; ++k) {
        intensities.push_back(keyed[k].first);
        zs.push_back(keyed[k].second);
      }
    }

    const LmEval<2> eval = [&zs, &intensities](const std::array<double, 2>& params,
                                               std::vector<double>& residuals,
                                               std::vector<std::array<double, 2>>* jacobian) {
      const double veil = params[0];
      const double beta = params[1];
      residuals.resize(zs.size());
      if (jacobian) jacobian->resize(zs.size());
      for (std::size_t k = 0; k < zs.size(); ++k) {
        const double decay = std::exp(-beta * zs[k]);
        residuals[k] = veil * (1.0 - decay) - intensities[k];
        if (jacobian) (*jacobian)[k] = {1.0 - decay, veil * zs[k] * decay};
      }
    };

    constexpr std::array<double, 3> kVeilStarts = {0.1, 0.5, 0.9};
    constexpr std::array<double, 3> kBetaStarts = {0.1, 1.0, 4.0};
    constexpr std::array<double, 2> kLower = {0.0, 0.0};
    constexpr std::array<double, 2> kUpper = {1.0, 10.0};

    bool have_best = false;
    LmResult<2> best;
    std::string trace;
    for (const double veil_start : kVeilStarts) {
      for (const double beta_start : kBetaStarts) {
        const auto result =
            levenberg_marquardt<2>(eval, {veil_start, beta_start}, kLower, kUpper);
        trace += "start(" + std::to_string(veil_start) + "," + std::to_string(beta_start) +
                 ") cost=" + std::to_string(result.cost) + "; ";
        if (result.failed) continue;
        if (!have_best || result.cost < best.cost) {
          best = result;
          have_best = true;
        }
      }
    }
    if (!have_best) {
      throw NumericError("backscatter: all starts diverged on channel " +
                         std::string(kChannelNames[channel]) + "; " + trace);
    }

    fit.veil_hat[channel] = best.params[0];
    fit.beta_b_hat[channel] = best.params[1];
    fit.residual_rmse[channel] =
        std::sqrt(best.cost / static_cast<double>(intensities.size()));
  }

  fit.validate();
  return fit;
}

RgbImage direct_signal(const RgbImage& img, const RangeMap& range, const BackscatterFit& bs,
                       double floor) {
  img.validate("direct image");
  require_same_dims(img, range, "direct image", "direct range");
  bs.validate();
  if (!(floor > 0.0)) throw ValidationError("direct signal: floor must be positive");

  RgbImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double z = range.valid[i] ? range.data[i] : 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double backscatter = bs.veil_hat[c] * (1.0 - std::exp(-bs.beta_b_hat[c] * z));
      const double v = img.data[i * 3 + c] - backscatter;
      out.data[i * 3 + c] = static_cast<float>(std::clamp(v, floor, 1.0));
    }
  }
  return out;
}

IlluminantMap estimate_illuminant(const RgbImage& direct, const RangeMap& range,
                                  const IlluminantParams& params) {
  direct.validate("direct signal");
  require_same_dims(direct, range, "direct signal", "illuminant range");
  if (!(params.neighborhood_fraction >= 0.0 && params.neighborhood_fraction <= 1.0)) {
    throw ValidationError("illuminant: neighborhood fraction must be in [0,1]");
  }
  if (params.iterations < 0) throw ValidationError("illuminant: negative iteration count");
  if (!(params.gray_world_factor > 0.0)) {
    throw ValidationError("illuminant: gray-world factor must be positive");
  }
  for (const float v : direct.data) {
    if (v <= 0.0f) {
      throw ValidationError("illuminant: direct signal must be strictly positive "
                            "(clamp it at a small floor first)");
    }
  }

  const int w = direct.width;
  const int h = direct.height;
  const std::size_t n = direct.pixel_count();
  const double p = params.neighborhood_fraction;

  std::vector<double> current(direct.data.begin(), direct.data.end());
  std::vector<double> next(current.size());

  // Synchronous (Jacobi) updates keep the result independent of traversal
  // order. Invalid-range pixels neither update nor feed their neighbors.
  for (int iter = 0; iter < params.iterations; ++iter) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!range.valid[i]) {
          for (std::size_t c = 0; c < 3; ++c) next[i * 3 + c] = current[i * 3 + c];
          continue;
        }
        for (std::size_t c = 0; c < 3; ++c) {
          double sum = 0.0;
          int count = 0;
          const auto add = [&](int nx, int ny) {
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            if (!range.valid[j]) return;
            sum += current[j * 3 + c];
            ++count;
          };
          if (x > 0) add(x - 1, y);
          if (x + 1 < w) add(x + 1, y);
          if (y > 0) add(x, y - 1);
          if (y + 1 < h) add(x, y + 1);
          const double mean = count > 0 ? sum / count : current[i * 3 + c];
          next[i * 3 + c] = (1.0 - p) * mean + p * direct.data[i * 3 + c];
        }
      }
    }
    current.swap(next);
  }

  IlluminantMap illum(w, h);
  for (std::size_t i = 0; i < n * 3; ++i) {
    illum.data[i] = static_cast<float>(
        std::min(params.gray_world_factor * current[i], 1.0));
  }
  illum.validate();
  return illum;
}

AttenuationEstimate estimate_attenuation(const IlluminantMap& illum, const RangeMap& range,
                                         AttenuationMode mode) {
  illum.validate();
  range.validate("attenuation range");
  require_same_dims(illum, range, "illuminant map", "attenuation range");

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < range.pixel_count(); ++i) {
    if (range.valid[i] && range.data[i] > kRangeFloor) usable.push_back(i);
  }
  if (usable.empty()) {
    throw NumericError("attenuation: empty estimate, no pixel beyond the " +
                       std::to_string(kRangeFloor) + " m range floor");
  }

  AttenuationEstimate est;
  est.mode = mode;

  if (mode == AttenuationMode::kPerPixel) {
    est.width = illum.width;
    est.height = illum.height;
    est.per_pixel.assign(illum.pixel_count() * 3, 0.0f);
    est.estimated.assign(illum.pixel_count(), 0);
    for (const std::size_t i : usable) {
      est.estimated[i] = 1;
      const double z = range.data[i];
      for (std::size_t c = 0; c < 3; ++c) {
        const double beta = -std::log(static_cast<double>(illum.data[i * 3 + c])) / z;
        est.per_pixel[i * 3 + c] = static_cast<float>(std::max(beta, 0.0));
      }
    }
    return est;
  }

  const RangeBins bins = cluster_by_range(range, usable);
  est.z_min = bins.z_min;
  est.z_max = bins.z_max;

  for (std::size_t c = 0; c < 3; ++c) {
    std::array<bool, kRangeClusterCount> filled{};
    for (std::size_t b = 0; b < kRangeClusterCount; ++b) {
      if (bins.members[b].empty()) continue;
      std::vector<double> betas;
      betas.reserve(bins.members[b].size());
      for (const std::size_t i : bins.members[b]) {
        const double z = range.data[i];
        const double beta = -std::log(static_cast<double>(illum.data[i * 3 + c])) / z;
        betas.push_back(std::max(beta, 0.0));
      }
      est.binned[c][b] = median_of(betas);
      filled[b] = true;
      if (c == 0) est.bin_counts[b] = bins.members[b].size();
    }
    // Borrow from the nearest occupied cluster; lower index wins ties.
    for (std::size_t b = 0; b < kRangeClusterCount; ++b) {
      if (filled[b]) continue;
      std::size_t best = kRangeClusterCount;
      std::size_t best_dist = kRangeClusterCount + 1;
      for (std::size_t o = 0; o < kRangeClusterCount; ++o) {
        if (!filled[o]) continue;
        const std::size_t dist = o > b ? o - b : b - o;
        if (dist < best_dist) {
          best_dist = dist;
          best = o;
        }
      }
      est.binned[c][b] = est.binned[c][best];
    }
  }
  return est;
}

RgbImage restore(const RgbImage& img, const RangeMap& range, const BackscatterFit& bs,
                 const AttenuationEstimate& att, SynthesisReport* report) {
  img.validate("restore image");
  range.validate("restore range");
  require_same_dims(img, range, "restore image", "restore range");
  bs.validate();
  if (att.mode == AttenuationMode::kPerPixel) {
    require_same_dims(img.width, img.height, att.width, att.height, "restore image",
                      "attenuation raster");
  }

  RgbImage out(img.width, img.height);
  DepthMask clamped(img.width, img.height);
  DepthMask invalid(img.width, img.height);

  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    if (!range.valid[i]) {
      invalid.data[i] = 1;
      for (std::size_t c = 0; c < 3; ++c) out.data[i * 3 + c] = img.data[i * 3 + c];
      continue;
    }
    const double z = range.data[i];
    bool any_clamped = false;
    for (std::size_t c = 0; c < 3; ++c) {
      const double backscatter = bs.veil_hat[c] * (1.0 - std::exp(-bs.beta_b_hat[c] * z));
      const double beta_d = att.beta_at(c, z, i);
      const double value = (img.data[i * 3 + c] - backscatter) * std::exp(beta_d * z);
      const double clamped_value = std::clamp(value, 0.0, 1.0);
      any_clamped |= clamped_value != value;
      out.data[i * 3 + c] = static_cast<float>(clamped_value);
    }
    if (any_clamped) clamped.data[i] = 1;
  }

  if (report) {
    report->clamped = std::move(clamped);
    report->invalid_range = std::move(invalid);
  }
  return out;
}

EnhanceResult enhance(const RgbImage& img, const UlapCoefficients& coeffs, double scale,
                      const EnhanceParams& params) {
  img.validate("enhance image");
  coeffs.validate();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ValidationError("enhance: scale must be positive and finite");
  }

  EnhanceResult result;
  result.range = ulap_range(img, coeffs);
  for (auto& z : result.range.data) z = static_cast<float>(z * scale);

  try {
    result.backscatter = estimate_backscatter(img, result.range);
  } catch (const InsufficientRangeDiversityError&) {
    // A flat prior gives the curve fit nothing to work with; without range
    // diversity the veil is unobservable, so assume clear water.
    result.backscatter = BackscatterFit{};
    result.backscatter_fallback = true;
  }

  const RgbImage direct =
      direct_signal(img, result.range, result.backscatter, params.direct_floor);
  result.illuminant = estimate_illuminant(direct, result.range, params.illuminant);
  result.attenuation =
      estimate_attenuation(result.illuminant, result.range, AttenuationMode::kBinned);
  result.output =
      restore(img, result.range, result.backscatter, result.attenuation, &result.report);
  return result;
}

}  // namespace aquathru
