#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "dcpkit/error.hpp"
#include "dcpkit/image.hpp"

namespace dcpkit {

namespace detail {

using Complex = std::complex<double>;

/// In-place 2-D DFT of an m x m row-major grid.
inline void fft2(std::vector<Complex>& grid, int m, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<Complex> line(static_cast<std::size_t>(m)), out(static_cast<std::size_t>(m));
  const auto run = [&]() {
    if (inverse) {
      fft.inv(out, line);
    } else {
      fft.fwd(out, line);
    }
  };
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) line[static_cast<std::size_t>(c)] = grid[static_cast<std::size_t>(r * m + c)];
    run();
    for (int c = 0; c < m; ++c) grid[static_cast<std::size_t>(r * m + c)] = out[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < m; ++c) {
    for (int r = 0; r < m; ++r) line[static_cast<std::size_t>(r)] = grid[static_cast<std::size_t>(r * m + c)];
    run();
    for (int r = 0; r < m; ++r) grid[static_cast<std::size_t>(r * m + c)] = out[static_cast<std::size_t>(r)];
  }
}

}  // namespace detail

enum class Covariance {
  exponential,          // exp(-r / l)
  squared_exponential,  // exp(-r^2 / (2 l^2))
};

/// Stationary zero-mean unit-variance Gaussian fields sampled by circulant
/// embedding on a doubled torus (negative embedding eigenvalues clipped to 0).
/// Each draw yields two independent fields (real and imaginary parts); the
/// sampler hands them out one at a time.
class GaussianFieldSampler {
 public:
  GaussianFieldSampler(int size, double length_scale, Covariance kind = Covariance::exponential)
      : size_(size), m_(2 * size) {
    if (size < 2) throw ConfigError("random field size must be >= 2");
    if (!(length_scale > 0.0)) throw ConfigError("random field length scale must be positive");
    std::vector<detail::Complex> cov(static_cast<std::size_t>(m_) * m_);
    for (int r = 0; r < m_; ++r) {
      const int dr = std::min(r, m_ - r);
      for (int c = 0; c < m_; ++c) {
        const int dc = std::min(c, m_ - c);
        const double dist = std::hypot(dr, dc);
        cov[static_cast<std::size_t>(r * m_ + c)] =
            kind == Covariance::exponential ? std::exp(-dist / length_scale)
                                            : std::exp(-dist * dist / (2.0 * length_scale * length_scale));
      }
    }
    detail::fft2(cov, m_, false);
    amplitude_.resize(cov.size());
    const double norm = static_cast<double>(m_) * m_;
    for (std::size_t i = 0; i < cov.size(); ++i) {
      amplitude_[i] = std::sqrt(std::max(cov[i].real(), 0.0) / norm);
    }
  }

  /// Field values (not intensities) of one draw.
  template <typename Rng>
  std::vector<double> sample(Rng& rng) {
    if (!spare_.empty()) {
      return std::exchange(spare_, {});
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<detail::Complex> grid(amplitude_.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      grid[i] = amplitude_[i] * detail::Complex(re, im);
    }
    detail::fft2(grid, m_, false);
    std::vector<double> a(static_cast<std::size_t>(size_) * size_), b(a.size());
    for (int r = 0; r < size_; ++r) {
      for (int c = 0; c < size_; ++c) {
        const auto v = grid[static_cast<std::size_t>(r * m_ + c)];
        a[static_cast<std::size_t>(r * size_ + c)] = v.real();
        b[static_cast<std::size_t>(r * size_ + c)] = v.imag();
      }
    }
    spare_ = std::move(b);
    return a;
  }

  /// One draw mapped to intensities mean + scale * field (not clamped).
  template <typename Rng>
  GrayImage sample_image(Rng& rng, double mean = 128.0, double scale = 32.0) {
    auto f = sample(rng);
    for (auto& v : f) v = mean + scale * v;
    return GrayImage(size_, size_, std::move(f));
  }

  int size() const noexcept { return size_; }

 private:
  int size_;
  int m_;
  std::vector<double> amplitude_;
  std::vector<double> spare_;
};

}  // namespace dcpkit
