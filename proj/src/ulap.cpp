#include "aquathru/ulap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "aquathru/error.hpp"

namespace aquathru {

namespace {

const std::vector<std::string> kUlapKeys = {"mu0", "mu1", "mu2"};

const char* kFeatureNames[3] = {"intercept", "max(B,G)", "R"};

// Solves the symmetric 3x3 system A*x = b by Gaussian elimination with
// partial pivoting. A near-zero pivot identifies the deficient direction.
std::array<double, 3> solve_normal_equations(std::array<std::array<double, 3>, 3> a,
                                             std::array<double, 3> b) {
  double scale = 0.0;
  for (const auto& row : a)
    for (const double v : row) scale = std::max(scale, std::abs(v));
  const double tol = scale * 1e-12;

  // Row pivoting only, so a vanishing pivot at column k means feature k is
  // linearly dependent on the features before it.
  for (int k = 0; k < 3; ++k) {
    int pivot_row = k;
    for (int i = k + 1; i < 3; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[pivot_row][k])) pivot_row = i;
    }
    if (std::abs(a[pivot_row][k]) <= tol) {
      throw NumericError(std::string("ulap fit: rank-deficient normal matrix, '") +
                         kFeatureNames[k] +
                         "' direction is degenerate (constant or collinear feature)");
    }
    std::swap(a[k], a[pivot_row]);
    std::swap(b[k], b[pivot_row]);
    for (int i = k + 1; i < 3; ++i) {
      const double f = a[i][k] / a[k][k];
      for (int j = k; j < 3; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }

  std::array<double, 3> x{};
  for (int k = 2; k >= 0; --k) {
    double s = b[k];
    for (int j = k + 1; j < 3; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  return x;
}

}  // namespace

void UlapCoefficients::validate() const {
  if (!std::isfinite(mu0) || !std::isfinite(mu1) || !std::isfinite(mu2)) {
    throw ValidationError("ulap coefficients: non-finite value");
  }
}

UlapCoefficients UlapCoefficients::from_config(const KvConfig& cfg) {
  cfg.require_only(kUlapKeys);
  UlapCoefficients c;
  c.mu0 = cfg.get_scalar("mu0");
  c.mu1 = cfg.get_scalar("mu1");
  c.mu2 = cfg.get_scalar("mu2");
  c.validate();
  return c;
}

KvConfig UlapCoefficients::to_config() const {
  KvConfig cfg;
  cfg.set("mu0", mu0);
  cfg.set("mu1", mu1);
  cfg.set("mu2", mu2);
  return cfg;
}

RangeMap ulap_range(const RgbImage& img, const UlapCoefficients& coeffs) {
  img.validate("ulap input");
  coeffs.validate();
  RangeMap out(img.width, img.height);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double red = img.data[i * 3 + 0];
    const double green = img.data[i * 3 + 1];
    const double blue = img.data[i * 3 + 2];
    const double d = coeffs.mu0 + coeffs.mu1 * std::max(blue, green) + coeffs.mu2 * red;
    out.data[i] = static_cast<float>(std::max(d, 0.0));
  }
  return out;
}

UlapFit fit_ulap(const std::vector<UlapSample>& pairs) {
  // Accumulate X^T X and X^T z in extended precision; features are
  // (1, max(B,G), R) and the target is z.
  std::array<std::array<long double, 3>, 3> a{};
  std::array<long double, 3> b{};
  long double target_sq = 0.0L;
  std::size_t count = 0;

  for (const auto& pair : pairs) {
    if (!pair.image || !pair.range) throw ValidationError("ulap fit: null sample");
    const RgbImage& img = *pair.image;
    const RangeMap& range = *pair.range;
    img.validate("ulap fit image");
    range.validate("ulap fit range");
    require_same_dims(img, range, "ulap fit image", "ulap fit range");
    if (pair.mask) {
      require_same_dims(img, *pair.mask, "ulap fit image", "ulap fit mask");
    }

    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
      if (pair.mask) {
        if (!pair.mask->data[i]) continue;
        if (!range.valid[i]) {
          throw ValidationError("ulap fit: masked pixel has invalid range");
        }
      } else if (!range.valid[i]) {
        continue;
      }
      const double red = img.data[i * 3 + 0];
      const double maxbg = std::max(img.data[i * 3 + 2], img.data[i * 3 + 1]);
      const double z = range.data[i];
      const double phi[3] = {1.0, maxbg, red};
      for (int r = 0; r < 3; ++r) {
        for (int c = r; c < 3; ++c) a[r][c] += static_cast<long double>(phi[r]) * phi[c];
        b[r] += static_cast<long double>(phi[r]) * z;
      }
      target_sq += static_cast<long double>(z) * z;
      ++count;
    }
  }

  if (count < 3) {
    throw ValidationError("ulap fit: needs at least 3 masked valid pixels, have " +
                          std::to_string(count));
  }

  std::array<std::array<double, 3>, 3> ad{};
  std::array<double, 3> bd{};
  for (int r = 0; r < 3; ++r) {
    bd[r] = static_cast<double>(b[r]);
    for (int c = 0; c < 3; ++c) {
      ad[r][c] = static_cast<double>(r <= c ? a[r][c] : a[c][r]);
    }
  }

  const std::array<double, 3> mu = solve_normal_equations(ad, bd);

  // Residual sum of squares via the normal-equation identity
  // ||z - X mu||^2 = z^T z - 2 mu^T (X^T z) + mu^T (X^T X) mu.
  long double rss = target_sq;
  for (int r = 0; r < 3; ++r) {
    rss -= 2.0L * mu[r] * b[r];
    for (int c = 0; c < 3; ++c) {
      rss += static_cast<long double>(mu[r]) * (r <= c ? a[r][c] : a[c][r]) * mu[c];
    }
  }
  rss = std::max(rss, 0.0L);

  UlapFit fit;
  fit.coeffs = {mu[0], mu[1], mu[2]};
  fit.coeffs.validate();
  fit.rmse = std::sqrt(static_cast<double>(rss / count));
  fit.pixel_count = count;
  return fit;
}

}  // namespace aquathru
