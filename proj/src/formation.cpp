#include "aquathru/formation.hpp"

#include <algorithm>
#include <cmath>

#include "aquathru/error.hpp"

namespace aquathru {

namespace {

const std::vector<std::string> kWaterKeys = {
    "veil_r", "veil_g", "veil_b", "beta_b_r", "beta_b_g", "beta_b_b",
    "beta_d_r", "beta_d_g", "beta_d_b"};

}  // namespace

void WaterParams::validate() const {
  if (!veil.all_finite() || !beta_b.all_finite() || !beta_d.all_finite()) {
    throw ValidationError("water params: non-finite value");
  }
  if (!veil.all_in(0.0, 1.0)) {
    throw ValidationError("water params: veil outside [0,1]");
  }
  if (!beta_b.all_ge(0.0) || !beta_d.all_ge(0.0)) {
    throw ValidationError("water params: negative attenuation coefficient");
  }
}

WaterParams WaterParams::from_config(const KvConfig& cfg) {
  cfg.require_only(kWaterKeys);
  WaterParams p;
  for (std::size_t c = 0; c < 3; ++c) {
    p.veil[c] = cfg.get_scalar(std::string("veil_") + kChannelNames[c]);
    p.beta_b[c] = cfg.get_scalar(std::string("beta_b_") + kChannelNames[c]);
    p.beta_d[c] = cfg.get_scalar(std::string("beta_d_") + kChannelNames[c]);
  }
  p.validate();
  return p;
}

KvConfig WaterParams::to_config() const {
  KvConfig cfg;
  for (std::size_t c = 0; c < 3; ++c) cfg.set(std::string("veil_") + kChannelNames[c], veil[c]);
  for (std::size_t c = 0; c < 3; ++c) cfg.set(std::string("beta_b_") + kChannelNames[c], beta_b[c]);
  for (std::size_t c = 0; c < 3; ++c) cfg.set(std::string("beta_d_") + kChannelNames[c], beta_d[c]);
  return cfg;
}

void RaySamples::validate() const {
  if (sigma.size() != delta.size()) {
    throw ValidationError("ray samples: sigma and delta lengths differ");
  }
  for (const double s : sigma) {
    if (!std::isfinite(s) || s < 0.0) throw ValidationError("ray samples: sigma must be finite and >= 0");
  }
  for (const double d : delta) {
    if (!std::isfinite(d) || d <= 0.0) throw ValidationError("ray samples: delta must be finite and > 0");
  }
}

RgbImage synthesize(const RgbImage& clean, const RangeMap& range,
                    const WaterParams& params, SynthesisReport* report) {
  params.validate();
  require_same_dims(clean, range, "clean image", "range map");
  if (clean.empty()) throw ValidationError("synthesize: empty image");

  RgbImage out(clean.width, clean.height);
  DepthMask clamped(clean.width, clean.height);
  DepthMask invalid(clean.width, clean.height);

  const std::size_t n = clean.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (!range.valid[i]) {
      invalid.data[i] = 1;
      for (std::size_t c = 0; c < 3; ++c) out.data[i * 3 + c] = clean.data[i * 3 + c];
      continue;
    }
    const double z = range.data[i];
    bool any_clamped = false;
    for (std::size_t c = 0; c < 3; ++c) {
      const double direct = clean.data[i * 3 + c] * std::exp(-params.beta_d[c] * z);
      const double backscatter = params.veil[c] * (1.0 - std::exp(-params.beta_b[c] * z));
      const double value = direct + backscatter;
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

std::vector<double> segment_weights(const RaySamples& samples) {
  samples.validate();
  std::vector<double> weights(samples.sigma.size());
  double accumulated = 0.0;  // sum of sigma_j * delta_j over preceding segments
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double transmittance = std::exp(-accumulated);
    const double tau = samples.sigma[i] * samples.delta[i];
    weights[i] = transmittance * (1.0 - std::exp(-tau));
    accumulated += tau;
  }
  return weights;
}

}  // namespace aquathru
