#include "aquathru/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "aquathru/error.hpp"

namespace aquathru {

namespace {

constexpr int kPad = kSpatialKernelSize / 2;
constexpr std::size_t kKernelVolume = 2 * kSpatialKernelSize * kSpatialKernelSize;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct PooledPlanes {
  std::vector<double> mean;  // H*W
  std::vector<double> max;   // H*W
};

PooledPlanes pool_channels(const FeatureTensor& f) {
  PooledPlanes planes;
  const std::size_t hw = f.plane_size();
  planes.mean.assign(hw, 0.0);
  planes.max.assign(hw, -std::numeric_limits<double>::infinity());
  for (int c = 0; c < f.channels; ++c) {
    const double* plane = f.data.data() + static_cast<std::size_t>(c) * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      planes.mean[i] += plane[i];
      planes.max[i] = std::max(planes.max[i], plane[i]);
    }
  }
  const double inv_c = 1.0 / f.channels;
  for (std::size_t i = 0; i < hw; ++i) planes.mean[i] *= inv_c;
  return planes;
}

// pre[y][x] = bias + sum over both pooled planes of the 7x7 neighborhood.
std::vector<double> conv_forward(const PooledPlanes& planes, int h, int w,
                                 const FusionWeights& weights) {
  std::vector<double> pre(static_cast<std::size_t>(h) * w, 0.0);
  const double* kernel = weights.spatial_kernel.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = weights.spatial_bias;
      for (int plane = 0; plane < 2; ++plane) {
        const std::vector<double>& src = plane == 0 ? planes.mean : planes.max;
        for (int ky = 0; ky < kSpatialKernelSize; ++ky) {
          const int sy = y + ky - kPad;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < kSpatialKernelSize; ++kx) {
            const int sx = x + kx - kPad;
            if (sx < 0 || sx >= w) continue;
            acc += kernel[(static_cast<std::size_t>(plane) * kSpatialKernelSize + ky) *
                              kSpatialKernelSize +
                          kx] *
                   src[static_cast<std::size_t>(sy) * w + sx];
          }
        }
      }
      pre[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return pre;
}

// Accumulates dL/dkernel and dL/dbias given dL/dpre.
void conv_backward(const PooledPlanes& planes, int h, int w,
                   const std::vector<double>& d_pre, FusionGradients& grads) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double up = d_pre[static_cast<std::size_t>(y) * w + x];
      if (up == 0.0) continue;
      grads.spatial_bias += up;
      for (int plane = 0; plane < 2; ++plane) {
        const std::vector<double>& src = plane == 0 ? planes.mean : planes.max;
        for (int ky = 0; ky < kSpatialKernelSize; ++ky) {
          const int sy = y + ky - kPad;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < kSpatialKernelSize; ++kx) {
            const int sx = x + kx - kPad;
            if (sx < 0 || sx >= w) continue;
            grads.spatial_kernel[(static_cast<std::size_t>(plane) * kSpatialKernelSize + ky) *
                                     kSpatialKernelSize +
                                 kx] += up * src[static_cast<std::size_t>(sy) * w + sx];
          }
        }
      }
    }
  }
}

struct ChannelCache {
  std::vector<double> mean_pool;  // C
  std::vector<double> max_pool;   // C
  std::vector<double> hidden_mean_pre, hidden_max_pre;  // C/r
  std::vector<double> hidden_mean, hidden_max;          // C/r (post ReLU)
  std::vector<double> gate_pre;                         // C
  std::vector<double> gate;                             // C
};

ChannelCache channel_forward(const FeatureTensor& f, const FusionWeights& w) {
  ChannelCache cache;
  const int c_count = f.channels;
  const int hidden = w.hidden();
  const std::size_t hw = f.plane_size();

  cache.mean_pool.assign(c_count, 0.0);
  cache.max_pool.assign(c_count, -std::numeric_limits<double>::infinity());
  for (int c = 0; c < c_count; ++c) {
    const double* plane = f.data.data() + static_cast<std::size_t>(c) * hw;
    double sum = 0.0;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hw; ++i) {
      sum += plane[i];
      mx = std::max(mx, plane[i]);
    }
    cache.mean_pool[c] = sum / static_cast<double>(hw);
    cache.max_pool[c] = mx;
  }

  const auto mlp_hidden = [&](const std::vector<double>& in, std::vector<double>& pre,
                              std::vector<double>& post) {
    pre.assign(hidden, 0.0);
    post.assign(hidden, 0.0);
    for (int hh = 0; hh < hidden; ++hh) {
      double acc = 0.0;
      for (int c = 0; c < c_count; ++c) {
        acc += w.mlp_w1[static_cast<std::size_t>(hh) * c_count + c] * in[c];
      }
      pre[hh] = acc;
      post[hh] = acc > 0.0 ? acc : 0.0;  // ReLU, subgradient 0 at the kink
    }
  };
  mlp_hidden(cache.mean_pool, cache.hidden_mean_pre, cache.hidden_mean);
  mlp_hidden(cache.max_pool, cache.hidden_max_pre, cache.hidden_max);

  cache.gate_pre.assign(c_count, 0.0);
  cache.gate.assign(c_count, 0.0);
  for (int c = 0; c < c_count; ++c) {
    double acc = 0.0;
    for (int hh = 0; hh < hidden; ++hh) {
      acc += w.mlp_w2[static_cast<std::size_t>(c) * hidden + hh] *
             (cache.hidden_mean[hh] + cache.hidden_max[hh]);
    }
    cache.gate_pre[c] = acc;
    cache.gate[c] = sigmoid(acc);
  }
  return cache;
}

// Accumulates MLP gradients given dL/dgate_pre.
void channel_backward(const ChannelCache& cache, const FusionWeights& w,
                      const std::vector<double>& d_gate_pre, FusionGradients& grads) {
  const int c_count = w.channels;
  const int hidden = w.hidden();

  std::vector<double> d_hidden(hidden, 0.0);  // shared by both branches
  for (int c = 0; c < c_count; ++c) {
    const double up = d_gate_pre[c];
    for (int hh = 0; hh < hidden; ++hh) {
      grads.mlp_w2[static_cast<std::size_t>(c) * hidden + hh] +=
          up * (cache.hidden_mean[hh] + cache.hidden_max[hh]);
      d_hidden[hh] += up * w.mlp_w2[static_cast<std::size_t>(c) * hidden + hh];
    }
  }
  for (int hh = 0; hh < hidden; ++hh) {
    const double d_mean_pre = cache.hidden_mean_pre[hh] > 0.0 ? d_hidden[hh] : 0.0;
    const double d_max_pre = cache.hidden_max_pre[hh] > 0.0 ? d_hidden[hh] : 0.0;
    for (int c = 0; c < c_count; ++c) {
      grads.mlp_w1[static_cast<std::size_t>(hh) * c_count + c] +=
          d_mean_pre * cache.mean_pool[c] + d_max_pre * cache.max_pool[c];
    }
  }
}

void check_weight_tensor_match(const FeatureTensor& f, const FusionWeights& w) {
  if (f.channels != w.channels) {
    throw ValidationError("fusion: tensor has " + std::to_string(f.channels) +
                          " channels but weights expect " + std::to_string(w.channels));
  }
}

FusionGradients zero_gradients(const FusionWeights& w) {
  FusionGradients g;
  g.spatial_kernel.assign(w.spatial_kernel.size(), 0.0);
  g.mlp_w1.assign(w.mlp_w1.size(), 0.0);
  g.mlp_w2.assign(w.mlp_w2.size(), 0.0);
  return g;
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xff));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

double take_f64(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
  pos += 8;
  return std::bit_cast<double>(u);
}

std::uint32_t take_u32(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  pos += 4;
  return u;
}

}  // namespace

void FeatureTensor::validate(const char* what) const {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ValidationError(std::string(what) + ": empty or negative dimensions");
  }
  if (data.size() != size()) {
    throw ValidationError(std::string(what) + ": data size does not match dimensions");
  }
  for (const double v : data) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite value");
  }
}

void FusionWeights::validate() const {
  if (channels <= 0 || reduction <= 0 || channels % reduction != 0) {
    throw ValidationError("fusion weights: reduction must divide the channel count");
  }
  if (spatial_kernel.size() != kKernelVolume) {
    throw ValidationError("fusion weights: spatial kernel must be 2x7x7");
  }
  const std::size_t mlp = static_cast<std::size_t>(hidden()) * channels;
  if (mlp_w1.size() != mlp || mlp_w2.size() != mlp) {
    throw ValidationError("fusion weights: MLP shape mismatch");
  }
  if (!std::isfinite(spatial_bias)) throw ValidationError("fusion weights: non-finite bias");
  for (const double v : spatial_kernel) {
    if (!std::isfinite(v)) throw ValidationError("fusion weights: non-finite kernel value");
  }
  for (const double v : mlp_w1) {
    if (!std::isfinite(v)) throw ValidationError("fusion weights: non-finite MLP value");
  }
  for (const double v : mlp_w2) {
    if (!std::isfinite(v)) throw ValidationError("fusion weights: non-finite MLP value");
  }
}

FusionWeights FusionWeights::zeros(int channels, int reduction) {
  FusionWeights w;
  w.channels = channels;
  w.reduction = reduction;
  w.spatial_kernel.assign(kKernelVolume, 0.0);
  w.spatial_bias = 0.0;
  const std::size_t mlp = static_cast<std::size_t>(channels / reduction) * channels;
  w.mlp_w1.assign(mlp, 0.0);
  w.mlp_w2.assign(mlp, 0.0);
  w.validate();
  return w;
}

FusionWeights FusionWeights::seeded(int channels, int reduction, std::uint64_t seed) {
  FusionWeights w = zeros(channels, reduction);
  Rng rng(seed);
  for (auto& v : w.spatial_kernel) v = rng.uniform(-0.1, 0.1);
  w.spatial_bias = rng.uniform(-0.1, 0.1);
  for (auto& v : w.mlp_w1) v = rng.uniform(-0.1, 0.1);
  for (auto& v : w.mlp_w2) v = rng.uniform(-0.1, 0.1);
  return w;
}

std::vector<std::uint8_t> FusionWeights::serialize() const {
  validate();
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * (spatial_kernel.size() + 1 + mlp_w1.size() + mlp_w2.size()));
  out.push_back('A');
  out.push_back('Q');
  out.push_back('F');
  out.push_back('W');
  append_u32(out, static_cast<std::uint32_t>(channels));
  append_u32(out, static_cast<std::uint32_t>(reduction));
  append_u32(out, kSpatialKernelSize);
  for (const double v : spatial_kernel) append_f64(out, v);
  append_f64(out, spatial_bias);
  for (const double v : mlp_w1) append_f64(out, v);
  for (const double v : mlp_w2) append_f64(out, v);
  return out;
}

FusionWeights FusionWeights::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || bytes[0] != 'A' || bytes[1] != 'Q' || bytes[2] != 'F' ||
      bytes[3] != 'W') {
    throw ValidationError("fusion weights: bad magic");
  }
  std::size_t pos = 4;
  const std::uint32_t channels = take_u32(bytes, pos);
  const std::uint32_t reduction = take_u32(bytes, pos);
  const std::uint32_t kernel_size = take_u32(bytes, pos);
  if (kernel_size != kSpatialKernelSize) {
    throw ValidationError("fusion weights: unsupported kernel size " +
                          std::to_string(kernel_size));
  }
  if (channels == 0 || reduction == 0 || channels % reduction != 0 || channels > 4096) {
    throw ValidationError("fusion weights: bad header dimensions");
  }
  const std::size_t mlp = static_cast<std::size_t>(channels / reduction) * channels;
  const std::size_t expected = 16 + 8 * (kKernelVolume + 1 + 2 * mlp);
  if (bytes.size() != expected) {
    throw ValidationError("fusion weights: payload size " + std::to_string(bytes.size()) +
                          " does not match header, expected " + std::to_string(expected));
  }
  FusionWeights w;
  w.channels = static_cast<int>(channels);
  w.reduction = static_cast<int>(reduction);
  w.spatial_kernel.resize(kKernelVolume);
  for (auto& v : w.spatial_kernel) v = take_f64(bytes, pos);
  w.spatial_bias = take_f64(bytes, pos);
  w.mlp_w1.resize(mlp);
  for (auto& v : w.mlp_w1) v = take_f64(bytes, pos);
  w.mlp_w2.resize(mlp);
  for (auto& v : w.mlp_w2) v = take_f64(bytes, pos);
  w.validate();
  return w;
}

FeatureTensor spatial_preactivation(const FeatureTensor& f, const FusionWeights& w) {
  f.validate();
  w.validate();
  check_weight_tensor_match(f, w);
  const PooledPlanes planes = pool_channels(f);
  FeatureTensor out(1, f.height, f.width);
  out.data = conv_forward(planes, f.height, f.width, w);
  return out;
}

FeatureTensor spatial_attention(const FeatureTensor& f, const FusionWeights& w) {
  FeatureTensor out = spatial_preactivation(f, w);
  for (auto& v : out.data) v = sigmoid(v);
  return out;
}

std::vector<double> channel_attention(const FeatureTensor& f, const FusionWeights& w) {
  f.validate();
  w.validate();
  check_weight_tensor_match(f, w);
  return channel_forward(f, w).gate;
}

FeatureTensor fuse(const FeatureTensor& texture, const FeatureTensor& depth_feat,
                   const FusionWeights& w) {
  texture.validate("texture tensor");
  depth_feat.validate("depth tensor");
  w.validate();
  check_weight_tensor_match(texture, w);
  if (texture.channels != depth_feat.channels || texture.height != depth_feat.height ||
      texture.width != depth_feat.width) {
    throw ValidationError("fuse: texture and depth tensors must share a shape");
  }

  const FeatureTensor sa = spatial_attention(texture, w);
  const std::vector<double> ca = channel_attention(texture, w);

  FeatureTensor out(texture.channels, texture.height, texture.width);
  const std::size_t hw = texture.plane_size();
  for (int c = 0; c < texture.channels; ++c) {
    const double gate_c = ca[c];
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t idx = static_cast<std::size_t>(c) * hw + i;
      const double q = gate_c * sa.data[i];
      out.data[idx] = q * texture.data[idx] + (1.0 - q) * depth_feat.data[idx];
    }
  }
  return out;
}

double fusion_loss(FusionOp op, const FeatureTensor& texture,
                   const FeatureTensor& depth_feat, const FusionWeights& w) {
  switch (op) {
    case FusionOp::kSpatialPre: {
      const FeatureTensor pre = spatial_preactivation(texture, w);
      double loss = 0.0;
      for (const double v : pre.data) loss += v;
      return loss;
    }
    case FusionOp::kSpatial: {
      const FeatureTensor sa = spatial_attention(texture, w);
      double loss = 0.0;
      for (const double v : sa.data) loss += v;
      return loss;
    }
    case FusionOp::kChannel: {
      const std::vector<double> ca = channel_attention(texture, w);
      double loss = 0.0;
      for (const double v : ca) loss += v;
      return loss;
    }
    case FusionOp::kFuse: {
      const FeatureTensor out = fuse(texture, depth_feat, w);
      double loss = 0.0;
      for (const double v : out.data) loss += v;
      return loss;
    }
  }
  throw ValidationError("fusion: unknown op");
}

FusionGradients fusion_loss_gradients(FusionOp op, const FeatureTensor& texture,
                                      const FeatureTensor& depth_feat,
                                      const FusionWeights& w) {
  texture.validate("texture tensor");
  w.validate();
  check_weight_tensor_match(texture, w);
  FusionGradients grads = zero_gradients(w);

  const int h = texture.height;
  const int wd = texture.width;
  const std::size_t hw = texture.plane_size();

  switch (op) {
    case FusionOp::kSpatialPre: {
      // Loss is linear in the kernel: dL/dpre = 1.
      const PooledPlanes planes = pool_channels(texture);
      const std::vector<double> d_pre(hw, 1.0);
      conv_backward(planes, h, wd, d_pre, grads);
      return grads;
    }
    case FusionOp::kSpatial: {
      const PooledPlanes planes = pool_channels(texture);
      const std::vector<double> pre = conv_forward(planes, h, wd, w);
      std::vector<double> d_pre(hw);
      for (std::size_t i = 0; i < hw; ++i) {
        const double s = sigmoid(pre[i]);
        d_pre[i] = s * (1.0 - s);
      }
      conv_backward(planes, h, wd, d_pre, grads);
      return grads;
    }
    case FusionOp::kChannel: {
      const ChannelCache cache = channel_forward(texture, w);
      std::vector<double> d_gate_pre(texture.channels);
      for (int c = 0; c < texture.channels; ++c) {
        d_gate_pre[c] = cache.gate[c] * (1.0 - cache.gate[c]);
      }
      channel_backward(cache, w, d_gate_pre, grads);
      return grads;
    }
    case FusionOp::kFuse: {
      depth_feat.validate("depth tensor");
      if (texture.channels != depth_feat.channels || texture.height != depth_feat.height ||
          texture.width != depth_feat.width) {
        throw ValidationError("fuse: texture and depth tensors must share a shape");
      }
      const PooledPlanes planes = pool_channels(texture);
      const std::vector<double> pre = conv_forward(planes, h, wd, w);
      std::vector<double> sa(hw);
      for (std::size_t i = 0; i < hw; ++i) sa[i] = sigmoid(pre[i]);
      const ChannelCache cache = channel_forward(texture, w);

      // dL/dQ_t = texture - depth; Q_t factors into the two gates.
      std::vector<double> d_sa(hw, 0.0);
      std::vector<double> d_ca(texture.channels, 0.0);
      for (int c = 0; c < texture.channels; ++c) {
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t idx = static_cast<std::size_t>(c) * hw + i;
          const double diff = texture.data[idx] - depth_feat.data[idx];
          d_sa[i] += diff * cache.gate[c];
          d_ca[c] += diff * sa[i];
        }
      }

      std::vector<double> d_pre(hw);
      for (std::size_t i = 0; i < hw; ++i) d_pre[i] = d_sa[i] * sa[i] * (1.0 - sa[i]);
      conv_backward(planes, h, wd, d_pre, grads);

      std::vector<double> d_gate_pre(texture.channels);
      for (int c = 0; c < texture.channels; ++c) {
        d_gate_pre[c] = d_ca[c] * cache.gate[c] * (1.0 - cache.gate[c]);
      }
      channel_backward(cache, w, d_gate_pre, grads);
      return grads;
    }
  }
  throw ValidationError("fusion: unknown op");
}

double gradient_check(FusionOp op, const FeatureTensor& texture,
                      const FeatureTensor& depth_feat, const FusionWeights& w) {
  if (texture.channels > 4 || texture.height > 8 || texture.width > 8) {
    throw ValidationError("gradient check: probe must be at most 4x8x8");
  }

  const FusionGradients analytic = fusion_loss_gradients(op, texture, depth_feat, w);
  constexpr double kStep = 1e-5;

  FusionWeights probe = w;
  double max_rel_error = 0.0;
  const auto probe_weight = [&](double* slot, double analytic_grad) {
    const double saved = *slot;
    *slot = saved + kStep;
    const double plus = fusion_loss(op, texture, depth_feat, probe);
    *slot = saved - kStep;
    const double minus = fusion_loss(op, texture, depth_feat, probe);
    *slot = saved;
    const double fd = (plus - minus) / (2.0 * kStep);
    const double denom = std::max({std::abs(fd), std::abs(analytic_grad), 1e-6});
    max_rel_error = std::max(max_rel_error, std::abs(fd - analytic_grad) / denom);
  };

  for (std::size_t i = 0; i < probe.spatial_kernel.size(); ++i) {
    probe_weight(&probe.spatial_kernel[i], analytic.spatial_kernel[i]);
  }
  probe_weight(&probe.spatial_bias, analytic.spatial_bias);
  for (std::size_t i = 0; i < probe.mlp_w1.size(); ++i) {
    probe_weight(&probe.mlp_w1[i], analytic.mlp_w1[i]);
  }
  for (std::size_t i = 0; i < probe.mlp_w2.size(); ++i) {
    probe_weight(&probe.mlp_w2[i], analytic.mlp_w2[i]);
  }
  return max_rel_error;
}

FeatureTensor random_tensor(int channels, int height, int width, Rng& rng, double lo,
                            double hi) {
  FeatureTensor t(channels, height, width);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace aquathru
