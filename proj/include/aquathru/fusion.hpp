#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aquathru/rng.hpp"

namespace aquathru {

// C×H×W activation block, double precision so finite-difference checks have
// headroom.
struct FeatureTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // [c][y][x]

  FeatureTensor() = default;
  FeatureTensor(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return static_cast<std::size_t>(channels) * plane_size(); }

  double& at(int c, int y, int x) {
    return data[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[static_cast<std::size_t>(c) * plane_size() + static_cast<std::size_t>(y) * width + x];
  }

  void validate(const char* what = "feature tensor") const;
};

inline constexpr int kSpatialKernelSize = 7;

// Attention parameters: a 7x7 convolution over the stacked channel-mean and
// channel-max planes, and a shared two-layer MLP (C -> C/r -> C, ReLU) fed by
// mean- and max-pooled channel descriptors.
struct FusionWeights {
  int channels = 0;
  int reduction = 1;
  std::vector<double> spatial_kernel;  // [2][7][7], plane 0 = mean, 1 = max
  double spatial_bias = 0.0;
  std::vector<double> mlp_w1;  // [C/r][C]
  std::vector<double> mlp_w2;  // [C][C/r]

  int hidden() const { return channels / reduction; }
  void validate() const;

  static FusionWeights zeros(int channels, int reduction);
  // Deterministic uniform [-0.1, 0.1] init.
  static FusionWeights seeded(int channels, int reduction, std::uint64_t seed);

  // Binary blob: 16-byte header (magic "AQFW", u32 C, u32 r, u32 kernel size,
  // little-endian) followed by float64 little-endian payload in the order
  // spatial_kernel, spatial_bias, mlp_w1, mlp_w2.
  std::vector<std::uint8_t> serialize() const;
  static FusionWeights deserialize(const std::vector<std::uint8_t>& bytes);
};

// Gradients of a scalar loss with respect to every weight, in the same
// layout as FusionWeights.
struct FusionGradients {
  std::vector<double> spatial_kernel;
  double spatial_bias = 0.0;
  std::vector<double> mlp_w1;
  std::vector<double> mlp_w2;

  std::size_t parameter_count() const {
    return spatial_kernel.size() + 1 + mlp_w1.size() + mlp_w2.size();
  }
};

// sigmoid(conv7x7([channel-mean; channel-max])), zero padding; C=1 output.
FeatureTensor spatial_attention(const FeatureTensor& f, const FusionWeights& w);
// Pre-sigmoid convolution output, linear in the kernel and bias.
FeatureTensor spatial_preactivation(const FeatureTensor& f, const FusionWeights& w);

// sigmoid(MLP(mean-pool) + MLP(max-pool)), shared MLP; one gate per channel.
std::vector<double> channel_attention(const FeatureTensor& f, const FusionWeights& w);

// Q_t(c,y,x) = CA(texture)[c] * SA(texture)[y,x];
// output = Q_t*texture + (1-Q_t)*depth_feat.
FeatureTensor fuse(const FeatureTensor& texture, const FeatureTensor& depth_feat,
                   const FusionWeights& w);

enum class FusionOp { kSpatialPre, kSpatial, kChannel, kFuse };

// Scalar probe loss: sum of the op's outputs.
double fusion_loss(FusionOp op, const FeatureTensor& texture,
                   const FeatureTensor& depth_feat, const FusionWeights& w);
// Analytic gradient of fusion_loss with respect to the weights.
FusionGradients fusion_loss_gradients(FusionOp op, const FeatureTensor& texture,
                                      const FeatureTensor& depth_feat,
                                      const FusionWeights& w);

// Central finite differences (h = 1e-5) against the analytic gradient over
// every weight; returns the max relative error. Probe must be <= 4x8x8.
double gradient_check(FusionOp op, const FeatureTensor& texture,
                      const FeatureTensor& depth_feat, const FusionWeights& w);

// Seeded uniform tensor, for probes and demos.
FeatureTensor random_tensor(int channels, int height, int width, Rng& rng,
                            double lo = -1.0, double hi = 1.0);

}  // namespace aquathru
