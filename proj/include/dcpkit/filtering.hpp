#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/image.hpp"

namespace dcpkit {

/// Square 2-D kernel of side 2*radius+1, row-major, indexed by (u, v) in
/// [-radius, radius]^2 with u along x.
struct Kernel2D {
  int radius = 0;
  std::vector<double> weights;

  int side() const noexcept { return 2 * radius + 1; }
  double operator()(int u, int v) const noexcept {
    return weights[static_cast<std::size_t>(v + radius) * side() + (u + radius)];
  }
  double& operator()(int u, int v) noexcept {
    return weights[static_cast<std::size_t>(v + radius) * side() + (u + radius)];
  }
  double sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

/// True 2-D convolution, out(x,y) = sum K(u,v) * I(x-u, y-v), replicate padding.
inline GrayImage convolve(const GrayImage& img, const Kernel2D& k) {
  const int w = img.width(), h = img.height(), r = k.radius;
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const bool row_inside = y - r >= 0 && y + r < h;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      if (row_inside && x - r >= 0 && x + r < w) {
        for (int v = -r; v <= r; ++v) {
          const double* src = img.row(y - v);
          for (int u = -r; u <= r; ++u) acc += k(u, v) * src[x - u];
        }
      } else {
        for (int v = -r; v <= r; ++v) {
          for (int u = -r; u <= r; ++u) acc += k(u, v) * img.at_clamped(x - u, y - v);
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

/// Normalized sampled Gaussian exp(-t^2 / (2 sigma^2)), radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double s = 0.0;
  for (int t = -r; t <= r; ++t) {
    k[static_cast<std::size_t>(t + r)] = std::exp(-(t * t) / (2.0 * sigma * sigma));
    s += k[static_cast<std::size_t>(t + r)];
  }
  for (auto& v : k) v /= s;
  return k;
}

/// Separable symmetric blur with replicate padding.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[static_cast<std::size_t>(t + r)] * img.at_clamped(x + t, y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[static_cast<std::size_t>(t + r)] * tmp.at_clamped(x, y + t);
      out(x, y) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Photometric normalization: gamma -> DoG -> contrast equalization -> [0,255]

struct TTParams {
  double gamma = 0.2;
  double sigma1 = 1.4;
  double sigma2 = 2.0;
  double alpha = 0.1;
  double tau = 10.0;

  void validate() const {
    if (!(gamma > 0.0)) throw ConfigError("TT gamma must be positive");
    if (!(sigma1 > 0.0 && sigma1 < sigma2)) throw ConfigError("TT requires 0 < sigma1 < sigma2");
    if (!(tau > 0.0)) throw ConfigError("TT tau must be positive");
    if (!(alpha > 0.0)) throw ConfigError("TT alpha must be positive");
  }
};

/// Monotone power-law map on intensities normalized to [0,1].
inline GrayImage gamma_correct(const GrayImage& img, double gamma) {
  return map_pixels(img, [gamma](double v) { return std::pow(std::max(v, 0.0) / 255.0, gamma); });
}

inline GrayImage tt_normalize(const GrayImage& img, const TTParams& p = {}) {
  p.validate();
  const GrayImage g = gamma_correct(img, p.gamma);
  const GrayImage b1 = gaussian_blur(g, p.sigma1);
  const GrayImage b2 = gaussian_blur(g, p.sigma2);
  GrayImage d(img.width(), img.height());
  auto dp = d.pixels();
  const auto p1 = b1.pixels();
  const auto p2 = b2.pixels();
  for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = p1[i] - p2[i];

  const double n = static_cast<double>(dp.size());
  double m1 = 0.0;
  for (double v : dp) m1 += std::pow(std::abs(v), p.alpha);
  m1 = std::pow(m1 / n, 1.0 / p.alpha);
  if (m1 > 0.0) {
    for (double& v : dp) v /= m1;
  }
  double m2 = 0.0;
  for (double v : dp) m2 += std::pow(std::min(p.tau, std::abs(v)), p.alpha);
  m2 = std::pow(m2 / n, 1.0 / p.alpha);
  if (m2 > 0.0) {
    for (double& v : dp) v /= m2;
  }
  for (double& v : dp) v = p.tau * std::tanh(v / p.tau);
  return rescale_to_255(d);
}

// ---------------------------------------------------------------------------
// First derivative of Gaussian filter bank

struct FDGBank {
  std::vector<double> orientations{0.0, std::numbers::pi / 4, std::numbers::pi / 2, 3 * std::numbers::pi / 4};
  double sigma = 1.0;
  int kernel_radius = 3;

  static FDGBank with_sigma(double sigma, std::size_t n_orientations = 4) {
    FDGBank b;
    b.sigma = sigma;
    b.kernel_radius = static_cast<int>(std::ceil(3.0 * sigma));
    b.orientations.clear();
    for (std::size_t k = 0; k < n_orientations; ++k) {
      b.orientations.push_back(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_orientations));
    }
    return b;
  }

  void validate() const {
    if (orientations.empty()) throw ConfigError("FDG bank needs at least one orientation");
    if (!(sigma > 0.0)) throw ConfigError("FDG sigma must be positive");
    if (kernel_radius < 1) throw ConfigError("FDG kernel radius must be >= 1");
  }
};

/// Directional derivative n . grad G of G = exp(-(x^2+y^2)/sigma^2),
/// n = (cos theta, sin theta). The kernel is mean-free and scaled so that a
/// unit ramp along n produces a response of exactly 1.
inline Kernel2D fdg_kernel(double theta, double sigma, int radius) {
  if (!(sigma > 0.0)) throw ConfigError("FDG sigma must be positive");
  if (radius < 1) throw ConfigError("FDG kernel radius must be >= 1");
  Kernel2D k{radius, std::vector<double>(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)))};
  const double s2 = sigma * sigma;
  const double c = std::cos(theta), s = std::sin(theta);
  double gain = 0.0;
  for (int v = -radius; v <= radius; ++v) {
    for (int u = -radius; u <= radius; ++u) {
      const double g = std::exp(-(u * u + v * v) / s2);
      const double gx = -2.0 * u / s2 * g;
      const double gy = -2.0 * v / s2 * g;
      k(u, v) = c * gx + s * gy;
      gain -= u * gx;
    }
  }
  const double mean = k.sum() / static_cast<double>(k.weights.size());
  for (auto& w : k.weights) w = (w - mean) / gain;
  return k;
}

/// Raw (un-rescaled) response per orientation.
inline std::vector<GrayImage> fdg_response(const GrayImage& img, const FDGBank& bank) {
  bank.validate();
  std::vector<GrayImage> out;
  out.reserve(bank.orientations.size());
  for (double theta : bank.orientations) {
    out.push_back(convolve(img, fdg_kernel(theta, bank.sigma, bank.kernel_radius)));
  }
  return out;
}

/// Response per orientation, each affinely rescaled to [0,255].
inline std::vector<GrayImage> fdg_filter(const GrayImage& img, const FDGBank& bank) {
  auto resp = fdg_response(img, bank);
  for (auto& r : resp) r = rescale_to_255(r);
  return resp;
}

}  // namespace dcpkit
