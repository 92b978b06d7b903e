#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "dcpkit/error.hpp"

namespace dcpkit {

/// Row-major single-channel raster. Out-of-range reads through `at_clamped`
/// replicate the nearest border pixel.
template <typename T>
class BasicImage {
 public:
  using value_type = T;

  BasicImage() = default;

  BasicImage(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw DimensionError("image dimensions must be positive, got " + std::to_string(width) +
                           "x" + std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  BasicImage(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
      throw DimensionError("image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw DimensionError("image data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T at_clamped(int x, int y) const noexcept {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return (*this)(x, y);
  }

  const T* row(int y) const noexcept { return data_.data() + static_cast<std::size_t>(y) * width_; }
  T* row(int y) noexcept { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  bool operator==(const BasicImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Intensities are held as double in [0,255] after loading.
using GrayImage = BasicImage<double>;

/// Bilinear interpolation at subpixel (x, y); taps outside the raster are
/// replaced by the nearest border pixel.
template <typename T>
double sample_bilinear(const BasicImage<T>& img, double x, double y) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double fx = x - fx0;
  const double fy = y - fy0;
  const double p00 = img.at_clamped(x0, y0);
  const double p01 = img.at_clamped(x0 + 1, y0);
  const double p10 = img.at_clamped(x0, y0 + 1);
  const double p11 = img.at_clamped(x0 + 1, y0 + 1);
  // Difference form keeps flat neighbourhoods exact.
  const double top = p00 + fx * (p01 - p00);
  const double bottom = p10 + fx * (p11 - p10);
  return top + fy * (bottom - top);
}

/// Affinely maps the value range onto [0,255]. A flat image maps to all zeros.
inline GrayImage rescale_to_255(const GrayImage& img) {
  const auto px = img.pixels();
  const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  GrayImage out(img.width(), img.height());
  const double span = hi - lo;
  if (!(span > 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))))) {
    return out;
  }
  const double scale = 255.0 / span;
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    dst[i] = std::clamp((px[i] - lo) * scale, 0.0, 255.0);
  }
  return out;
}

/// Rounds and clamps to 8 bits.
inline BasicImage<std::uint8_t> quantize_u8(const GrayImage& img) {
  BasicImage<std::uint8_t> out(img.width(), img.height());
  const auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(src[i]), 0L, 255L));
  }
  return out;
}

template <typename Fn>
GrayImage map_pixels(const GrayImage& img, Fn&& fn) {
  GrayImage out(img.width(), img.height());
  const auto src = img.pixels();
  auto dst = out.pixels();
  std::transform(src.begin(), src.end(), dst.begin(), fn);
  return out;
}

/// Horizontal mirror.
template <typename T>
BasicImage<T> flip_horizontal(const BasicImage<T>& img) {
  BasicImage<T> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(x, y) = img(img.width() - 1 - x, y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255)

namespace detail {

inline void skip_pgm_space(const std::vector<unsigned char>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    const unsigned char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      ++pos;
    } else {
      break;
    }
  }
}

inline long read_pgm_int(const std::vector<unsigned char>& buf, std::size_t& pos) {
  skip_pgm_space(buf, pos);
  if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9') {
    throw FormatError("malformed PGM header: expected integer");
  }
  long v = 0;
  while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
    v = v * 10 + (buf[pos] - '0');
    if (v > 1'000'000'000L) throw FormatError("malformed PGM header: integer overflow");
    ++pos;
  }
  return v;
}

}  // namespace detail

inline GrayImage decode_pgm(const std::vector<unsigned char>& buf) {
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') {
    throw FormatError("not a binary P5 PGM");
  }
  std::size_t pos = 2;
  const long w = detail::read_pgm_int(buf, pos);
  const long h = detail::read_pgm_int(buf, pos);
  const long maxval = detail::read_pgm_int(buf, pos);
  if (pos >= buf.size()) throw FormatError("malformed PGM header: missing raster");
  ++pos;  // single whitespace after maxval
  if (w < 1 || h < 1) throw FormatError("PGM has zero dimension");
  if (maxval != 255) throw UnsupportedError("PGM maxval " + std::to_string(maxval) + " unsupported");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (buf.size() - pos < n) throw FormatError("PGM raster truncated");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(buf[pos + i]);
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

inline GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(buf);
}

inline std::vector<unsigned char> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const auto q = quantize_u8(img);
  out.insert(out.end(), q.pixels().begin(), q.pixels().end());
  return out;
}

inline void save_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  const auto bytes = encode_pgm(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace dcpkit
