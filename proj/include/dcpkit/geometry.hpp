#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/image.hpp"

namespace dcpkit {

/// Subpixel location; x is the column, y the row.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  bool operator==(const Point&) const = default;
};

/// Builds a point from (row, col) order, the convention used for canvas anchors.
constexpr Point at_row_col(double row, double col) { return {col, row}; }

struct CanvasSize {
  int rows = 0;
  int cols = 0;
  bool operator==(const CanvasSize&) const = default;
};

inline constexpr int kLandmarkCount = 49;

class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() != static_cast<std::size_t>(kLandmarkCount)) {
      throw InputError("landmark set must have 49 points, got " + std::to_string(points_.size()));
    }
    for (const auto& p : points_) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError("non-finite landmark");
    }
  }

  const std::vector<Point>& points() const noexcept { return points_; }
  const Point& operator[](std::size_t i) const { return points_.at(i); }
  std::size_t size() const noexcept { return points_.size(); }

  /// Mean of the given landmark indices.
  Point centroid(const std::vector<int>& indices) const {
    Point c;
    for (int i : indices) c = c + points_.at(static_cast<std::size_t>(i));
    return (1.0 / static_cast<double>(indices.size())) * c;
  }

 private:
  std::vector<Point> points_;
};

/// One "x y" pair per line.
inline LandmarkSet load_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<Point> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Point p;
    if (!(ls >> p.x >> p.y)) throw FormatError("bad landmark line in " + path + ": " + line);
    pts.push_back(p);
  }
  return LandmarkSet(std::move(pts));
}

inline void save_landmarks(const std::string& path, const LandmarkSet& lm) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << std::setprecision(17);
  for (const auto& p : lm.points()) out << p.x << ' ' << p.y << '\n';
}

enum class TransformKind { similarity, affine };

/// Forward map from the source image to the normalized canvas:
///   [x'; y'] = A [x; y] + t, stored as a 2x3 row-major matrix.
struct GeometricNormalization {
  TransformKind kind = TransformKind::similarity;
  std::array<double, 6> matrix{1, 0, 0, 0, 1, 0};
  CanvasSize output_size;
  std::vector<Point> anchor_targets;

  Point apply(Point p) const {
    return {matrix[0] * p.x + matrix[1] * p.y + matrix[2], matrix[3] * p.x + matrix[4] * p.y + matrix[5]};
  }

  double determinant() const { return matrix[0] * matrix[4] - matrix[1] * matrix[3]; }

  Point apply_inverse(Point q) const {
    const double det = determinant();
    const double dx = q.x - matrix[2];
    const double dy = q.y - matrix[5];
    return {(matrix[4] * dx - matrix[1] * dy) / det, (-matrix[3] * dx + matrix[0] * dy) / det};
  }

  /// Inverse transform with the same canvas semantics swapped by the caller.
  GeometricNormalization inverse(CanvasSize source_size) const {
    const double det = determinant();
    GeometricNormalization inv;
    inv.kind = kind;
    inv.output_size = source_size;
    const double a = matrix[4] / det, b = -matrix[1] / det;
    const double c = -matrix[3] / det, d = matrix[0] / det;
    inv.matrix = {a, b, -(a * matrix[2] + b * matrix[5]), c, d, -(c * matrix[2] + d * matrix[5])};
    return inv;
  }

  LandmarkSet apply(const LandmarkSet& lm) const {
    std::vector<Point> pts;
    pts.reserve(lm.size());
    for (const auto& p : lm.points()) pts.push_back(apply(p));
    return LandmarkSet(std::move(pts));
  }
};

/// Two-point rotation + uniform scale + translation mapping each eye onto its target.
inline GeometricNormalization solve_similarity(Point eye_left, Point eye_right,
                                               std::array<Point, 2> targets, CanvasSize output_size) {
  const double sx = eye_right.x - eye_left.x;
  const double sy = eye_right.y - eye_left.y;
  const double norm2 = sx * sx + sy * sy;
  if (!(norm2 > 1e-18)) throw DegenerateError("coincident eye landmarks");
  const double tx = targets[1].x - targets[0].x;
  const double ty = targets[1].y - targets[0].y;
  // complex a = t / s
  const double ar = (tx * sx + ty * sy) / norm2;
  const double ai = (ty * sx - tx * sy) / norm2;
  GeometricNormalization g;
  g.kind = TransformKind::similarity;
  g.output_size = output_size;
  g.anchor_targets = {targets[0], targets[1]};
  const double bx = targets[0].x - (ar * eye_left.x - ai * eye_left.y);
  const double by = targets[0].y - (ai * eye_left.x + ar * eye_left.y);
  g.matrix = {ar, -ai, bx, ai, ar, by};
  return g;
}

/// Unique affine map taking the three source points onto the three targets.
inline GeometricNormalization solve_affine(Point eye_left, Point eye_right, Point mouth,
                                           std::array<Point, 3> targets, CanvasSize output_size) {
  const std::array<Point, 3> src{eye_left, eye_right, mouth};
  // Solve [x y 1] * [a b c]^T = target via Cramer's rule on the 3x3 system.
  const double m[3][3] = {{src[0].x, src[0].y, 1.0}, {src[1].x, src[1].y, 1.0}, {src[2].x, src[2].y, 1.0}};
  const auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double det = det3(m);
  double extent = 0.0;
  for (const auto& p : src) {
    for (const auto& q : src) extent = std::max(extent, std::hypot(p.x - q.x, p.y - q.y));
  }
  if (!(std::abs(det) > 1e-9 * std::max(1.0, extent * extent))) {
    throw DegenerateError("collinear landmarks for affine normalization");
  }
  // Inverse of m via adjugate.
  double inv[3][3];
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  std::array<double, 3> coef_x{}, coef_y{};
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) {
      coef_x[r] += inv[r][k] * targets[k].x;
      coef_y[r] += inv[r][k] * targets[k].y;
    }
  }
  GeometricNormalization g;
  g.kind = TransformKind::affine;
  g.output_size = output_size;
  g.anchor_targets = {targets[0], targets[1], targets[2]};
  g.matrix = {coef_x[0], coef_x[1], coef_x[2], coef_y[0], coef_y[1], coef_y[2]};
  if (!(std::abs(g.determinant()) > 1e-9)) throw DegenerateError("affine normalization is singular");
  return g;
}

/// Inverse-mapping resampler: every output pixel pulls from the source by
/// bilinear interpolation with replicate padding.
inline GrayImage warp(const GrayImage& img, const GeometricNormalization& t) {
  if (!(std::abs(t.determinant()) > 1e-12)) throw DegenerateError("warp transform is not invertible");
  GrayImage out(t.output_size.cols, t.output_size.rows);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const Point src = t.apply_inverse({static_cast<double>(x), static_cast<double>(y)});
      out(x, y) = sample_bilinear(img, src.x, src.y);
    }
  }
  return out;
}

/// Crops rows [top, top+rows) x cols [left, left+cols); may overhang the raster
/// (replicate padding).
inline GrayImage crop(const GrayImage& img, int left, int top, int cols, int rows) {
  GrayImage out(cols, rows);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) out(x, y) = img.at_clamped(left + x, top + y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canvas presets

struct CanvasPreset {
  std::string name;
  CanvasSize size;
  Point eye_left;
  Point eye_right;
  Point mouth;  // only meaningful for affine normalization
};

/// 128x128 descriptor-benchmark crop.
inline CanvasPreset descriptor_canvas() {
  return {"feret128", {128, 128}, at_row_col(34, 31), at_row_col(34, 98), at_row_col(0, 0)};
}

/// 180x162 canvas shared by both multi-level normalizations.
inline CanvasPreset mdml_canvas() {
  return {"mdml180", {180, 162}, at_row_col(66, 59), at_row_col(66, 103), at_row_col(116, 81)};
}

inline CanvasPreset canvas_preset(const std::string& name) {
  if (name == "feret128") return descriptor_canvas();
  if (name == "mdml180") return mdml_canvas();
  throw ConfigError("unknown canvas preset '" + name + "'");
}

}  // namespace dcpkit
