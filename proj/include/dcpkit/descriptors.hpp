#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/image.hpp"

namespace dcpkit {

enum class Interpolation { bilinear, nearest };

/// Pixel rectangle; may extend past the raster when used for encoding.
struct Rect {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
  bool operator==(const Rect&) const = default;
};

/// A sample position relative to the centre pixel, split into an integer
/// base offset and fixed bilinear weights.
struct Tap {
  int dx = 0;
  int dy = 0;
  double fx = 0.0;
  double fy = 0.0;

  bool integral() const noexcept { return fx == 0.0 && fy == 0.0; }
};

namespace detail {

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

inline Tap make_tap(double ox, double oy, Interpolation interp) {
  ox = snap(ox);
  oy = snap(oy);
  if (interp == Interpolation::nearest) {
    return {static_cast<int>(std::lround(ox)), static_cast<int>(std::lround(oy)), 0.0, 0.0};
  }
  const double bx = std::floor(ox), by = std::floor(oy);
  return {static_cast<int>(bx), static_cast<int>(by), ox - bx, oy - by};
}

inline double blend(double p00, double p01, double p10, double p11, double fx, double fy) {
  const double top = p00 + fx * (p01 - p00);
  const double bottom = p10 + fx * (p11 - p10);
  return top + fy * (bottom - top);
}

inline double sample_tap_clamped(const GrayImage& img, int x, int y, const Tap& t) {
  const int x0 = x + t.dx, y0 = y + t.dy;
  if (t.integral()) return img.at_clamped(x0, y0);
  return blend(img.at_clamped(x0, y0), img.at_clamped(x0 + 1, y0), img.at_clamped(x0, y0 + 1),
               img.at_clamped(x0 + 1, y0 + 1), t.fx, t.fy);
}

inline double sample_tap_inside(const GrayImage& img, int x, int y, const Tap& t) {
  const int w = img.width();
  const double* p = img.row(y + t.dy) + (x + t.dx);
  if (t.integral()) return *p;
  return blend(p[0], p[1], p[w], p[w + 1], t.fx, t.fy);
}

/// Largest absolute pixel reach of a tap set (including the +1 bilinear neighbour).
template <std::size_t N>
int tap_margin(const std::array<Tap, N>& taps) {
  int m = 0;
  for (const auto& t : taps) {
    m = std::max({m, std::abs(t.dx), std::abs(t.dy), std::abs(t.dx + 1), std::abs(t.dy + 1)});
  }
  return m;
}

/// Calls fn(out_index, center, values) for every pixel of `rect`, values
/// holding the N tap samples in order.
template <std::size_t N, typename Fn>
void gather(const GrayImage& img, const std::array<Tap, N>& taps, const Rect& rect, Fn&& fn) {
  const int margin = tap_margin(taps);
  const int w = img.width(), h = img.height();
  std::array<double, N> vals{};
  std::size_t idx = 0;
  for (int ry = 0; ry < rect.height; ++ry) {
    const int y = rect.top + ry;
    const bool row_inside = y >= margin && y < h - margin;
    for (int rx = 0; rx < rect.width; ++rx, ++idx) {
      const int x = rect.left + rx;
      if (row_inside && x >= margin && x < w - margin) {
        const double c = img(x, y);
        for (std::size_t i = 0; i < N; ++i) vals[i] = sample_tap_inside(img, x, y, taps[i]);
        fn(idx, c, vals);
      } else {
        const double c = img.at_clamped(x, y);
        for (std::size_t i = 0; i < N; ++i) vals[i] = sample_tap_clamped(img, x, y, taps[i]);
        fn(idx, c, vals);
      }
    }
  }
}

}  // namespace detail

/// Sixteen-point layout: A_k on the inner circle and B_k on the outer circle
/// along direction k * pi/4, k = 0..7.
class SamplingGeometry {
 public:
  SamplingGeometry(double r_in = 4.0, double r_ex = 6.0, Interpolation interp = Interpolation::bilinear)
      : r_in_(r_in), r_ex_(r_ex), interp_(interp) {
    if (!(r_in > 0.0 && r_in < r_ex)) {
      throw ConfigError("sampling geometry requires 0 < r_in < r_ex");
    }
    for (int k = 0; k < 8; ++k) {
      inner_[static_cast<std::size_t>(k)] = {r_in * std::cos(k * std::numbers::pi / 4),
                                             r_in * std::sin(k * std::numbers::pi / 4)};
      outer_[static_cast<std::size_t>(k)] = {r_ex * std::cos(k * std::numbers::pi / 4),
                                             r_ex * std::sin(k * std::numbers::pi / 4)};
    }
  }

  double r_in() const noexcept { return r_in_; }
  double r_ex() const noexcept { return r_ex_; }
  Interpolation interpolation() const noexcept { return interp_; }

  /// Subpixel offset (x, y) of A_k.
  std::array<double, 2> inner_offset(int k) const { return inner_.at(static_cast<std::size_t>(k)); }
  /// Subpixel offset (x, y) of B_k.
  std::array<double, 2> outer_offset(int k) const { return outer_.at(static_cast<std::size_t>(k)); }

  Tap inner_tap(int k) const { return detail::make_tap(inner_offset(k)[0], inner_offset(k)[1], interp_); }
  Tap outer_tap(int k) const { return detail::make_tap(outer_offset(k)[0], outer_offset(k)[1], interp_); }

 private:
  double r_in_;
  double r_ex_;
  Interpolation interp_;
  std::array<std::array<double, 2>, 8> inner_{};
  std::array<std::array<double, 2>, 8> outer_{};
};

/// Per-pixel integer codes, one plane per channel.
struct CodeMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  int code_cardinality = 0;
  std::vector<std::uint16_t> codes;  // channel-major planes

  CodeMap() = default;
  CodeMap(int w, int h, int ch, int card)
      : width(w), height(h), channels(ch), code_cardinality(card),
        codes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(ch)) {}

  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(width) * height; }
  std::uint16_t code(int ch, int x, int y) const noexcept {
    return codes[ch * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  std::span<const std::uint16_t> plane(int ch) const {
    return std::span<const std::uint16_t>(codes).subspan(ch * plane_size(), plane_size());
  }
  bool operator==(const CodeMap&) const = default;
};

/// S(a - o) * 2 + S(b - a) with S(x) = [x >= 0].
constexpr int dcp_directional_code(double i_o, double i_a, double i_b) noexcept {
  return (i_a - i_o >= 0.0 ? 2 : 0) + (i_b - i_a >= 0.0 ? 1 : 0);
}

inline Rect full_rect(const GrayImage& img) { return {0, 0, img.width(), img.height()}; }

/// Both cross encoders: channel 0 holds the even directions, channel 1 the odd.
inline CodeMap encode_dcp(const GrayImage& img, const SamplingGeometry& g, const Rect& rect) {
  // taps: A_0..A_7, B_0..B_7
  std::array<Tap, 16> taps;
  for (int k = 0; k < 8; ++k) {
    taps[static_cast<std::size_t>(k)] = g.inner_tap(k);
    taps[static_cast<std::size_t>(k + 8)] = g.outer_tap(k);
  }
  CodeMap cm(rect.width, rect.height, 2, 256);
  const std::size_t plane = cm.plane_size();
  std::uint16_t* c0 = cm.codes.data();
  std::uint16_t* c1 = c0 + plane;
  detail::gather(img, taps, rect, [&](std::size_t idx, double o, const std::array<double, 16>& v) {
    int even = 0, odd = 0;
    for (int i = 3; i >= 0; --i) {
      even = even * 4 + dcp_directional_code(o, v[2 * i], v[2 * i + 8]);
      odd = odd * 4 + dcp_directional_code(o, v[2 * i + 1], v[2 * i + 9]);
    }
    c0[idx] = static_cast<std::uint16_t>(even);
    c1[idx] = static_cast<std::uint16_t>(odd);
  });
  return cm;
}

inline CodeMap encode_dcp(const GrayImage& img, const SamplingGeometry& g) {
  return encode_dcp(img, g, full_rect(img));
}

/// A single cross encoder: parity 0 gives DCP-1 (even directions), 1 gives DCP-2.
inline CodeMap encode_dcp_cross(const GrayImage& img, const SamplingGeometry& g, int parity, const Rect& rect) {
  if (parity != 0 && parity != 1) throw ConfigError("cross encoder parity must be 0 or 1");
  std::array<Tap, 8> taps;
  for (int i = 0; i < 4; ++i) {
    taps[static_cast<std::size_t>(i)] = g.inner_tap(2 * i + parity);
    taps[static_cast<std::size_t>(i + 4)] = g.outer_tap(2 * i + parity);
  }
  CodeMap cm(rect.width, rect.height, 1, 256);
  std::uint16_t* c0 = cm.codes.data();
  detail::gather(img, taps, rect, [&](std::size_t idx, double o, const std::array<double, 8>& v) {
    int code = 0;
    for (int i = 3; i >= 0; --i) code = code * 4 + dcp_directional_code(o, v[i], v[i + 4]);
    c0[idx] = static_cast<std::uint16_t>(code);
  });
  return cm;
}

inline CodeMap encode_dcp_cross(const GrayImage& img, const SamplingGeometry& g, int parity) {
  return encode_dcp_cross(img, g, parity, full_rect(img));
}

/// All eight directional codes DCP_0..DCP_7 per pixel (plane k = direction k).
struct DirectionalCodes {
  int width = 0;
  int height = 0;
  std::array<std::vector<std::uint8_t>, 8> planes;
};

inline DirectionalCodes directional_codes(const GrayImage& img, const SamplingGeometry& g) {
  std::array<Tap, 16> taps;
  for (int k = 0; k < 8; ++k) {
    taps[static_cast<std::size_t>(k)] = g.inner_tap(k);
    taps[static_cast<std::size_t>(k + 8)] = g.outer_tap(k);
  }
  DirectionalCodes dc;
  dc.width = img.width();
  dc.height = img.height();
  for (auto& p : dc.planes) p.resize(img.size());
  detail::gather(img, taps, full_rect(img), [&](std::size_t idx, double o, const std::array<double, 16>& v) {
    for (int k = 0; k < 8; ++k) {
      dc.planes[static_cast<std::size_t>(k)][idx] =
          static_cast<std::uint8_t>(dcp_directional_code(o, v[static_cast<std::size_t>(k)], v[static_cast<std::size_t>(k + 8)]));
    }
  });
  return dc;
}

// ---------------------------------------------------------------------------
// Baselines

namespace detail {

inline std::array<Tap, 8> circle_taps(double radius, Interpolation interp) {
  std::array<Tap, 8> taps;
  for (int k = 0; k < 8; ++k) {
    taps[static_cast<std::size_t>(k)] =
        make_tap(radius * std::cos(k * std::numbers::pi / 4), radius * std::sin(k * std::numbers::pi / 4), interp);
  }
  return taps;
}

inline void lbp_plane(const GrayImage& img, double radius, Interpolation interp, const Rect& rect,
                      std::uint16_t* out) {
  if (!(radius > 0.0)) throw ConfigError("LBP radius must be positive");
  detail::gather(img, circle_taps(radius, interp), rect, [&](std::size_t idx, double c, const std::array<double, 8>& v) {
    int code = 0;
    for (int k = 0; k < 8; ++k) code |= (v[static_cast<std::size_t>(k)] >= c ? 1 : 0) << k;
    out[idx] = static_cast<std::uint16_t>(code);
  });
}

}  // namespace detail

/// 8-neighbour LBP, all 256 codes; bit k set iff neighbour k >= centre.
inline CodeMap encode_lbp(const GrayImage& img, double radius, Interpolation interp = Interpolation::bilinear) {
  CodeMap cm(img.width(), img.height(), 1, 256);
  detail::lbp_plane(img, radius, interp, full_rect(img), cm.codes.data());
  return cm;
}

inline CodeMap encode_mslbp(const GrayImage& img, double r1, double r2, Interpolation interp = Interpolation::bilinear) {
  if (!(r1 < r2)) throw ConfigError("MsLBP requires r1 < r2");
  CodeMap cm(img.width(), img.height(), 2, 256);
  detail::lbp_plane(img, r1, interp, full_rect(img), cm.codes.data());
  detail::lbp_plane(img, r2, interp, full_rect(img), cm.codes.data() + cm.plane_size());
  return cm;
}

/// Upper pattern (diff >= t) in channel 0, lower pattern (diff <= -t) in channel 1.
inline CodeMap encode_ltp(const GrayImage& img, double radius, double t, Interpolation interp = Interpolation::bilinear) {
  if (!(t >= 0.0)) throw ConfigError("LTP threshold must be non-negative");
  if (!(radius > 0.0)) throw ConfigError("LTP radius must be positive");
  CodeMap cm(img.width(), img.height(), 2, 256);
  std::uint16_t* up = cm.codes.data();
  std::uint16_t* lo = up + cm.plane_size();
  detail::gather(img, detail::circle_taps(radius, interp), full_rect(img),
                 [&](std::size_t idx, double c, const std::array<double, 8>& v) {
                   int u = 0, l = 0;
                   for (int k = 0; k < 8; ++k) {
                     const double d = v[static_cast<std::size_t>(k)] - c;
                     u |= (d >= t ? 1 : 0) << k;
                     l |= (d <= -t ? 1 : 0) << k;
                   }
                   up[idx] = static_cast<std::uint16_t>(u);
                   lo[idx] = static_cast<std::uint16_t>(l);
                 });
  return cm;
}

// ---------------------------------------------------------------------------
// Descriptor dispatch

enum class DescriptorKind { dcp, dcp1, dcp2, lbp, mslbp, ltp };

inline DescriptorKind parse_descriptor(const std::string& name) {
  if (name == "dcp") return DescriptorKind::dcp;
  if (name == "dcp1") return DescriptorKind::dcp1;
  if (name == "dcp2") return DescriptorKind::dcp2;
  if (name == "lbp") return DescriptorKind::lbp;
  if (name == "mslbp") return DescriptorKind::mslbp;
  if (name == "ltp") return DescriptorKind::ltp;
  throw ConfigError("unknown descriptor '" + name + "'");
}

inline std::string to_string(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::dcp: return "dcp";
    case DescriptorKind::dcp1: return "dcp1";
    case DescriptorKind::dcp2: return "dcp2";
    case DescriptorKind::lbp: return "lbp";
    case DescriptorKind::mslbp: return "mslbp";
    case DescriptorKind::ltp: return "ltp";
  }
  return "?";
}

/// r_in doubles as the LBP/LTP radius and the first MsLBP radius; r_ex is the
/// second MsLBP radius.
struct DescriptorParams {
  DescriptorKind kind = DescriptorKind::dcp;
  double r_in = 4.0;
  double r_ex = 6.0;
  double ltp_t = 5.0;
  Interpolation interp = Interpolation::bilinear;
};

inline CodeMap encode(const GrayImage& img, const DescriptorParams& p) {
  switch (p.kind) {
    case DescriptorKind::dcp: return encode_dcp(img, SamplingGeometry(p.r_in, p.r_ex, p.interp));
    case DescriptorKind::dcp1: return encode_dcp_cross(img, SamplingGeometry(p.r_in, p.r_ex, p.interp), 0);
    case DescriptorKind::dcp2: return encode_dcp_cross(img, SamplingGeometry(p.r_in, p.r_ex, p.interp), 1);
    case DescriptorKind::lbp: return encode_lbp(img, p.r_in, p.interp);
    case DescriptorKind::mslbp: return encode_mslbp(img, p.r_in, p.r_ex, p.interp);
    case DescriptorKind::ltp: return encode_ltp(img, p.r_in, p.ltp_t, p.interp);
  }
  throw ConfigError("unhandled descriptor");
}

/// Histogram bins contributed by one region.
constexpr int bins_per_region(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::dcp:
    case DescriptorKind::mslbp:
    case DescriptorKind::ltp: return 512;
    case DescriptorKind::dcp1:
    case DescriptorKind::dcp2:
    case DescriptorKind::lbp: return 256;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Regional histograms

/// n x n floor-sized cells, row-major; the last row and column absorb the remainder.
inline std::vector<Rect> grid_regions(int width, int height, int n) {
  if (n < 1 || n > std::min(width, height)) {
    throw ConfigError("grid size " + std::to_string(n) + " out of range for " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  const int cw = width / n, ch = height / n;
  std::vector<Rect> out;
  out.reserve(static_cast<std::size_t>(n * n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      out.push_back({c * cw, r * ch, c == n - 1 ? width - c * cw : cw, r == n - 1 ? height - r * ch : ch});
    }
  }
  return out;
}

struct RegionalHistogramFeature {
  int grid_n = 0;  // 0 when built from explicit rectangles
  std::vector<Rect> regions;
  int channels = 0;
  int code_cardinality = 0;
  std::vector<std::uint32_t> counts;  // region-major, then channel, then bin

  std::size_t block_size() const noexcept { return static_cast<std::size_t>(channels) * code_cardinality; }
};

/// Appends the per-channel bincounts of `rect` (in code-map coordinates).
inline void append_region_histogram(const CodeMap& cm, const Rect& rect, std::vector<std::uint32_t>& out) {
  if (rect.left < 0 || rect.top < 0 || rect.left + rect.width > cm.width || rect.top + rect.height > cm.height) {
    throw GeometryError("histogram region outside code map");
  }
  const std::size_t base = out.size();
  out.resize(base + static_cast<std::size_t>(cm.channels) * cm.code_cardinality, 0);
  for (int ch = 0; ch < cm.channels; ++ch) {
    std::uint32_t* hist = out.data() + base + static_cast<std::size_t>(ch) * cm.code_cardinality;
    const auto plane = cm.plane(ch);
    for (int y = rect.top; y < rect.top + rect.height; ++y) {
      const std::uint16_t* row = plane.data() + static_cast<std::size_t>(y) * cm.width;
      for (int x = rect.left; x < rect.left + rect.width; ++x) ++hist[row[x]];
    }
  }
}

inline RegionalHistogramFeature histograms_over(const CodeMap& cm, std::vector<Rect> regions) {
  RegionalHistogramFeature f;
  f.channels = cm.channels;
  f.code_cardinality = cm.code_cardinality;
  f.counts.reserve(regions.size() * f.block_size());
  for (const auto& r : regions) append_region_histogram(cm, r, f.counts);
  f.regions = std::move(regions);
  return f;
}

inline RegionalHistogramFeature regional_histograms(const CodeMap& cm, int grid_n) {
  auto f = histograms_over(cm, grid_regions(cm.width, cm.height, grid_n));
  f.grid_n = grid_n;
  return f;
}

/// Divides each region block by its total mass.
inline std::vector<double> l1_normalize_regions(const RegionalHistogramFeature& f) {
  std::vector<double> out(f.counts.begin(), f.counts.end());
  const std::size_t block = f.block_size();
  for (std::size_t b = 0; b + block <= out.size(); b += block) {
    double s = 0.0;
    for (std::size_t i = 0; i < block; ++i) s += out[b + i];
    if (s > 0.0) {
      for (std::size_t i = 0; i < block; ++i) out[b + i] /= s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Histogram comparison

template <typename T, typename U>
double chi_squared(std::span<const T> a, std::span<const U> b) {
  if (a.size() != b.size()) throw DimensionError("chi-squared: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = static_cast<double>(a[i]) + static_cast<double>(b[i]);
    if (s > 0.0) {
      const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      d += diff * diff / s;
    }
  }
  return d;
}

template <typename T>
double chi_squared(const std::vector<T>& a, const std::vector<T>& b) {
  return chi_squared(std::span<const T>(a), std::span<const T>(b));
}

template <typename T, typename U>
double hist_intersection(std::span<const T> a, std::span<const U> b) {
  if (a.size() != b.size()) throw DimensionError("histogram intersection: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::min(static_cast<double>(a[i]), static_cast<double>(b[i]));
  }
  return s;
}

template <typename T>
double hist_intersection(const std::vector<T>& a, const std::vector<T>& b) {
  return hist_intersection(std::span<const T>(a), std::span<const T>(b));
}

}  // namespace dcpkit
