#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "dcpkit/descriptors.hpp"
#include "dcpkit/error.hpp"
#include "dcpkit/filtering.hpp"
#include "dcpkit/geometry.hpp"
#include "dcpkit/image.hpp"

namespace dcpkit {

enum class FeatureName { H1, H2, H3, C1, C2, C3, C4, C5, C6 };

inline constexpr std::array<FeatureName, 9> kAllFeatures{FeatureName::H1, FeatureName::H2, FeatureName::H3,
                                                         FeatureName::C1, FeatureName::C2, FeatureName::C3,
                                                         FeatureName::C4, FeatureName::C5, FeatureName::C6};

inline std::string to_string(FeatureName n) {
  static const char* names[] = {"H1", "H2", "H3", "C1", "C2", "C3", "C4", "C5", "C6"};
  return names[static_cast<int>(n)];
}

inline FeatureName parse_feature_name(const std::string& s) {
  for (auto n : kAllFeatures) {
    if (to_string(n) == s) return n;
  }
  throw ConfigError("unknown feature name '" + s + "'");
}

// ---------------------------------------------------------------------------
// 49-point landmark layout
//
//   0-9   eyebrows (0-4 image-left, 5-9 image-right)
//   10-18 nose (10-13 bridge, 14-18 base)
//   19-24 image-left eye, 25-30 image-right eye
//   31-48 mouth (31-42 outer lip, 43-48 inner lip)

namespace landmarks {

inline std::vector<int> range(int first, int last) {
  std::vector<int> v;
  for (int i = first; i <= last; ++i) v.push_back(i);
  return v;
}

inline std::vector<int> left_eye() { return range(19, 24); }
inline std::vector<int> right_eye() { return range(25, 30); }
inline std::vector<int> mouth() { return range(31, 48); }

/// Index permutation induced by a horizontal mirror.
inline std::array<int, kLandmarkCount> mirror_permutation() {
  std::array<int, kLandmarkCount> p{};
  for (int i = 0; i < kLandmarkCount; ++i) p[static_cast<std::size_t>(i)] = i;
  const std::vector<std::pair<int, int>> swaps{
      {0, 9},   {1, 8},   {2, 7},   {3, 6},   {4, 5},   {14, 18}, {15, 17}, {19, 28}, {20, 27}, {21, 26},
      {22, 25}, {23, 30}, {24, 29}, {31, 37}, {32, 36}, {33, 35}, {38, 42}, {39, 41}, {43, 45}, {46, 48}};
  for (auto [a, b] : swaps) {
    p[static_cast<std::size_t>(a)] = b;
    p[static_cast<std::size_t>(b)] = a;
  }
  return p;
}

/// Mean face in the 180x162 canvas, mirror-symmetric about column 81. Eye
/// and mouth centroids land exactly on the canvas anchors.
inline LandmarkSet canonical_template() {
  std::vector<Point> p(kLandmarkCount);
  const auto mirror = mirror_permutation();
  const auto set = [&](int i, double x, double y) {
    p[static_cast<std::size_t>(i)] = {x, y};
    p[static_cast<std::size_t>(mirror[static_cast<std::size_t>(i)])] = {162.0 - x, y};
  };
  const double brow_x[] = {44, 51, 58, 65, 72}, brow_y[] = {52, 49, 48, 49, 52};
  for (int i = 0; i < 5; ++i) set(i, brow_x[i], brow_y[i]);
  for (int i = 0; i < 4; ++i) set(10 + i, 81, 70 + 8 * i);
  set(14, 71, 100);
  set(15, 76, 102);
  set(16, 81, 103);
  set(19, 49, 66);
  set(20, 55, 62);
  set(21, 63, 62);
  set(22, 69, 66);
  set(23, 63, 70);
  set(24, 55, 70);
  for (int i = 0; i <= 6; ++i) {
    const double t = std::numbers::pi * (1.0 - i / 6.0);
    set(31 + i, 81 + 16 * std::cos(t), 116 - 7 * std::sin(t));
  }
  for (int i = 7; i <= 9; ++i) {
    const double t = -std::numbers::pi * (i - 6) / 6.0;
    set(31 + i, 81 + 16 * std::cos(t), 116 - 7 * std::sin(t));
  }
  set(43, 73, 114);
  set(44, 81, 113);
  set(48, 73, 118);
  set(47, 81, 119);
  return LandmarkSet(std::move(p));
}

}  // namespace landmarks

struct ComponentSpec {
  FeatureName name = FeatureName::H3;
  std::vector<int> landmark_indices;
  int patch_size = 40;
  int patch_grid = 4;
};

/// Number of landmarks each landmark-based feature must use.
inline std::size_t expected_landmark_count(FeatureName n) {
  switch (n) {
    case FeatureName::H3: return 21;
    case FeatureName::C1: return 10;
    case FeatureName::C2: return 12;
    case FeatureName::C3: return 11;
    case FeatureName::C4: return 11;
    case FeatureName::C5: return 9;
    case FeatureName::C6: return 18;
    default: throw ConfigError(to_string(n) + " is not a landmark-based feature");
  }
}

inline void validate(const ComponentSpec& s) {
  if (s.landmark_indices.size() != expected_landmark_count(s.name)) {
    throw ConfigError(to_string(s.name) + " needs " + std::to_string(expected_landmark_count(s.name)) +
                      " landmarks, got " + std::to_string(s.landmark_indices.size()));
  }
  for (int i : s.landmark_indices) {
    if (i < 0 || i >= kLandmarkCount) throw ConfigError("landmark index out of range: " + std::to_string(i));
  }
  if (s.patch_size < 1 || s.patch_grid < 1 || s.patch_grid > s.patch_size) {
    throw ConfigError("invalid patch size/grid for " + to_string(s.name));
  }
}

inline std::vector<ComponentSpec> default_components() {
  using landmarks::range;
  auto cat = [](std::vector<int> a, const std::vector<int>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  return {
      {FeatureName::H3, {0, 2, 4, 5, 7, 9, 19, 22, 25, 28, 10, 13, 14, 16, 18, 31, 34, 37, 40, 44, 47}},
      {FeatureName::C1, range(0, 9)},
      {FeatureName::C2, range(19, 30)},
      {FeatureName::C3, cat(range(0, 4), range(19, 24))},
      {FeatureName::C4, cat(range(5, 9), range(25, 30))},
      {FeatureName::C5, range(10, 18)},
      {FeatureName::C6, range(31, 48)},
  };
}

/// Crop of the similarity-normalized canvas split into a grid.
struct HolisticSpec {
  FeatureName name = FeatureName::H1;
  Rect crop;
  int grid = 9;
};

inline std::vector<HolisticSpec> default_holistic() {
  // inclusive corners (row, col): H1 (33,27)-(154,136), H2 (36,41)-(140,122)
  return {{FeatureName::H1, {27, 33, 136 - 27 + 1, 154 - 33 + 1}, 9},
          {FeatureName::H2, {41, 36, 122 - 41 + 1, 140 - 36 + 1}, 9}};
}

enum class FilterMode { fdg, passthrough };

struct MdDcpsConfig {
  FDGBank bank;
  SamplingGeometry geometry{2, 3};
  bool include_unfiltered = false;
  FilterMode filter = FilterMode::fdg;
  bool photometric = false;
  TTParams tt;
  std::vector<HolisticSpec> holistic = default_holistic();
  std::vector<ComponentSpec> components = default_components();

  static MdDcpsConfig feret() {
    MdDcpsConfig c;
    c.photometric = true;
    return c;
  }

  static MdDcpsConfig lfw() {
    MdDcpsConfig c;
    c.geometry = SamplingGeometry(4, 6);
    return c;
  }

  static MdDcpsConfig preset(const std::string& name) {
    if (name == "feret") return feret();
    if (name == "lfw") return lfw();
    throw ConfigError("unknown representation preset '" + name + "'");
  }

  /// Filtered images encoded per region.
  std::size_t n_filtered() const {
    if (filter == FilterMode::passthrough) return 1;
    return bank.orientations.size() + (include_unfiltered ? 1 : 0);
  }

  std::size_t block_length() const { return n_filtered() * 512; }

  const ComponentSpec& component(FeatureName n) const {
    for (const auto& c : components) {
      if (c.name == n) return c;
    }
    throw ConfigError("no component spec for " + to_string(n));
  }

  const HolisticSpec& holistic_spec(FeatureName n) const {
    for (const auto& h : holistic) {
      if (h.name == n) return h;
    }
    throw ConfigError("no holistic spec for " + to_string(n));
  }

  int max_patch_size() const {
    int m = 0;
    for (const auto& c : components) m = std::max(m, c.patch_size);
    return m;
  }

  void validate() const {
    if (filter == FilterMode::fdg) bank.validate();
    if (filter == FilterMode::passthrough && include_unfiltered) {
      throw ConfigError("include_unfiltered has no effect with passthrough filtering");
    }
    if (photometric) tt.validate();
    for (const auto& c : components) dcpkit::validate(c);
    const auto canvas = mdml_canvas().size;
    for (const auto& h : holistic) {
      if (h.crop.left < 0 || h.crop.top < 0 || h.crop.left + h.crop.width > canvas.cols ||
          h.crop.top + h.crop.height > canvas.rows) {
        throw ConfigError("holistic crop for " + to_string(h.name) + " leaves the canvas");
      }
      if (h.grid < 1 || h.grid > std::min(h.crop.width, h.crop.height)) {
        throw ConfigError("holistic grid out of range for " + to_string(h.name));
      }
    }
  }
};

/// Closed-form feature lengths.
inline std::size_t expected_length(const HolisticSpec& h, const MdDcpsConfig& cfg) {
  return static_cast<std::size_t>(h.grid * h.grid) * cfg.block_length();
}

inline std::size_t expected_length(const ComponentSpec& c, const MdDcpsConfig& cfg) {
  return c.landmark_indices.size() * static_cast<std::size_t>(c.patch_grid * c.patch_grid) * cfg.block_length();
}

static_assert(9 * 9 * 4 * 512 == 165888);
static_assert(21 * 4 * 4 * 4 * 512 == 688128);

struct FeatureBlock {
  int landmark = -1;  // -1 for holistic grids
  int region = 0;
  int image = 0;  // index into the filtered-image stack
  std::size_t offset = 0;
};

struct FeatureVector {
  FeatureName name = FeatureName::H1;
  std::vector<float> values;
  std::vector<FeatureBlock> layout;
  std::size_t block_size = 512;
};

// ---------------------------------------------------------------------------
// Filtered code stacks

/// DCP code maps of every filtered image of one canvas, replicate-padded by
/// `margin` pixels on each side so that overhanging patches can be read.
struct CodeStack {
  int width = 0;
  int height = 0;
  int margin = 0;
  std::vector<CodeMap> maps;

  bool contains(const Rect& r) const {
    return r.left >= -margin && r.top >= -margin && r.left + r.width <= width + margin &&
           r.top + r.height <= height + margin;
  }

  /// Appends one orientation-major block per filtered image for `r` (canvas coordinates).
  void append_block(const Rect& r, std::vector<std::uint32_t>& out) const {
    if (!contains(r)) throw GeometryError("region outside the padded canvas");
    const Rect shifted{r.left + margin, r.top + margin, r.width, r.height};
    for (const auto& cm : maps) append_region_histogram(cm, shifted, out);
  }
};

inline std::vector<GrayImage> filtered_images(const GrayImage& img, const MdDcpsConfig& cfg) {
  if (cfg.filter == FilterMode::passthrough) return {img};
  auto out = fdg_filter(img, cfg.bank);
  if (cfg.include_unfiltered) out.push_back(img);
  return out;
}

inline CodeStack encode_stack(const GrayImage& img, const MdDcpsConfig& cfg, int margin = 0) {
  CodeStack s;
  s.width = img.width();
  s.height = img.height();
  s.margin = margin;
  for (const auto& f : filtered_images(img, cfg)) {
    const GrayImage padded = margin > 0 ? crop(f, -margin, -margin, f.width() + 2 * margin, f.height() + 2 * margin) : f;
    s.maps.push_back(encode_dcp(padded, cfg.geometry));
  }
  return s;
}

/// MD-DCPs block of one region: per filtered image, the two-channel DCP
/// histogram of the region, concatenated.
inline std::vector<std::uint32_t> md_dcps_region(const GrayImage& img, const MdDcpsConfig& cfg, const Rect& region) {
  if (region.left < 0 || region.top < 0 || region.width < 1 || region.height < 1 ||
      region.left + region.width > img.width() || region.top + region.height > img.height()) {
    throw GeometryError("region outside image");
  }
  std::vector<std::uint32_t> out;
  encode_stack(img, cfg).append_block(region, out);
  return out;
}

namespace detail {

inline void sqrt_into(const std::vector<std::uint32_t>& counts, std::vector<float>& out) {
  out.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<float>(std::sqrt(static_cast<double>(counts[i])));
}

inline void check_length(const FeatureVector& f, std::size_t expected) {
  if (f.values.size() != expected) {
    throw DimensionError(to_string(f.name) + " length " + std::to_string(f.values.size()) + " != expected " +
                         std::to_string(expected));
  }
}

inline void check_canvas(const GrayImage& img) {
  const auto c = mdml_canvas().size;
  if (img.width() != c.cols || img.height() != c.rows) {
    throw GeometryError("expected a " + std::to_string(c.rows) + "x" + std::to_string(c.cols) + " canvas, got " +
                        std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
}

}  // namespace detail

inline FeatureVector holistic_feature(const CodeStack& codes, const HolisticSpec& h, const MdDcpsConfig& cfg) {
  FeatureVector f;
  f.name = h.name;
  f.block_size = 512;
  std::vector<std::uint32_t> counts;
  counts.reserve(expected_length(h, cfg));
  const auto cells = grid_regions(h.crop.width, h.crop.height, h.grid);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const Rect cell{h.crop.left + cells[r].left, h.crop.top + cells[r].top, cells[r].width, cells[r].height};
    for (std::size_t k = 0; k < codes.maps.size(); ++k) {
      f.layout.push_back({-1, static_cast<int>(r), static_cast<int>(k), counts.size() + k * 512});
    }
    codes.append_block(cell, counts);
  }
  detail::sqrt_into(counts, f.values);
  detail::check_length(f, expected_length(h, cfg));
  return f;
}

/// Top-left corner of the M x M patch around `p`, kept inside the padded canvas.
inline Rect patch_rect(Point p, int patch_size, const CodeStack& codes) {
  int left = static_cast<int>(std::lround(p.x)) - patch_size / 2;
  int top = static_cast<int>(std::lround(p.y)) - patch_size / 2;
  left = std::clamp(left, -codes.margin, codes.width + codes.margin - patch_size);
  top = std::clamp(top, -codes.margin, codes.height + codes.margin - patch_size);
  return {left, top, patch_size, patch_size};
}

inline FeatureVector landmark_feature(const CodeStack& codes, const LandmarkSet& lm, const ComponentSpec& spec,
                                      const MdDcpsConfig& cfg) {
  validate(spec);
  FeatureVector f;
  f.name = spec.name;
  std::vector<std::uint32_t> counts;
  counts.reserve(expected_length(spec, cfg));
  const auto cells = grid_regions(spec.patch_size, spec.patch_size, spec.patch_grid);
  for (int idx : spec.landmark_indices) {
    const Rect patch = patch_rect(lm[static_cast<std::size_t>(idx)], spec.patch_size, codes);
    for (std::size_t r = 0; r < cells.size(); ++r) {
      const Rect cell{patch.left + cells[r].left, patch.top + cells[r].top, cells[r].width, cells[r].height};
      for (std::size_t k = 0; k < codes.maps.size(); ++k) {
        f.layout.push_back({idx, static_cast<int>(r), static_cast<int>(k), counts.size() + k * 512});
      }
      codes.append_block(cell, counts);
    }
  }
  detail::sqrt_into(counts, f.values);
  detail::check_length(f, expected_length(spec, cfg));
  return f;
}

inline GrayImage photometric(const GrayImage& img, const MdDcpsConfig& cfg) {
  return cfg.photometric ? tt_normalize(img, cfg.tt) : img;
}

inline FeatureVector build_holistic(const GrayImage& img_similarity, FeatureName which, const MdDcpsConfig& cfg) {
  if (which != FeatureName::H1 && which != FeatureName::H2) throw ConfigError("holistic feature must be H1 or H2");
  cfg.validate();
  detail::check_canvas(img_similarity);
  return holistic_feature(encode_stack(img_similarity, cfg), cfg.holistic_spec(which), cfg);
}

inline FeatureVector build_landmark_feature(const GrayImage& img_affine, const LandmarkSet& lm, const ComponentSpec& spec,
                                            const MdDcpsConfig& cfg) {
  validate(spec);
  cfg.validate();
  detail::check_canvas(img_affine);
  return landmark_feature(encode_stack(img_affine, cfg, spec.patch_size), lm, spec, cfg);
}

// ---------------------------------------------------------------------------
// Nine-feature representation

struct NormalizedFace {
  GrayImage similarity;
  GrayImage affine;
  LandmarkSet affine_landmarks;
};

inline NormalizedFace normalize_face(const GrayImage& img, const LandmarkSet& lm) {
  const auto canvas = mdml_canvas();
  const Point el = lm.centroid(landmarks::left_eye());
  const Point er = lm.centroid(landmarks::right_eye());
  const Point mo = lm.centroid(landmarks::mouth());
  const auto sim = solve_similarity(el, er, {canvas.eye_left, canvas.eye_right}, canvas.size);
  const auto aff = solve_affine(el, er, mo, {canvas.eye_left, canvas.eye_right, canvas.mouth}, canvas.size);
  return {warp(img, sim), warp(img, aff), aff.apply(lm)};
}

/// Encoded state of one face from which any of the nine features can be read.
struct MdmlCodes {
  CodeStack similarity;
  CodeStack affine;
  LandmarkSet affine_landmarks;
};

inline MdmlCodes prepare_mdml(const GrayImage& img_raw, const LandmarkSet& lm_raw, const MdDcpsConfig& cfg) {
  cfg.validate();
  auto face = normalize_face(img_raw, lm_raw);
  return {encode_stack(photometric(face.similarity, cfg), cfg),
          encode_stack(photometric(face.affine, cfg), cfg, cfg.max_patch_size()), std::move(face.affine_landmarks)};
}

inline FeatureVector mdml_feature(const MdmlCodes& codes, FeatureName name, const MdDcpsConfig& cfg) {
  if (name == FeatureName::H1 || name == FeatureName::H2) {
    return holistic_feature(codes.similarity, cfg.holistic_spec(name), cfg);
  }
  return landmark_feature(codes.affine, codes.affine_landmarks, cfg.component(name), cfg);
}

inline std::vector<FeatureVector> build_mdml(const GrayImage& img_raw, const LandmarkSet& lm_raw,
                                             const MdDcpsConfig& cfg) {
  const auto codes = prepare_mdml(img_raw, lm_raw, cfg);
  std::vector<FeatureVector> out;
  out.reserve(kAllFeatures.size());
  for (auto n : kAllFeatures) out.push_back(mdml_feature(codes, n, cfg));
  return out;
}

}  // namespace dcpkit
