#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "dcpkit/filtering.hpp"
#include "dcpkit/geometry.hpp"
#include "dcpkit/image.hpp"
#include "oracles.hpp"

using namespace dcpkit;
using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dcpkit_test_" + name);
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("load_pgm reads a 2x2 P5 raster row-major", "[imaging][pgm]") {
  const auto path = temp_file("2x2.pgm");
  std::vector<unsigned char> bytes{'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n', 0, 255, 128, 7};
  write_bytes(path, bytes);
  const auto img = load_pgm(path.string());
  REQUIRE(img.width() == 2);
  REQUIRE(img.height() == 2);
  CHECK(img(0, 0) == 0.0);
  CHECK(img(1, 0) == 255.0);
  CHECK(img(0, 1) == 128.0);
  CHECK(img(1, 1) == 7.0);
}

TEST_CASE("load_pgm rejects malformed input", "[imaging][pgm]") {
  const auto path = temp_file("empty.pgm");
  write_bytes(path, {});
  CHECK_THROWS_AS(load_pgm(path.string()), FormatError);

  write_bytes(path, {'P', '5', '\n', '2', ' ', '2', '\n', '6', '5', '5', '3', '5', '\n', 0, 0});
  CHECK_THROWS_AS(load_pgm(path.string()), UnsupportedError);

  write_bytes(path, {'P', '2', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', '0'});
  CHECK_THROWS_AS(load_pgm(path.string()), FormatError);

  write_bytes(path, {'P', '5', '\n', '4', ' ', '4', '\n', '2', '5', '5', '\n', 1, 2, 3});
  CHECK_THROWS_AS(load_pgm(path.string()), FormatError);

  CHECK_THROWS_AS(load_pgm((temp_file("does_not_exist.pgm")).string()), InputError);
}

TEST_CASE("save_pgm(load_pgm(f)) is byte-identical", "[imaging][pgm][property]") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 40), byte(0, 255);
  const auto src = temp_file("rt_src.pgm");
  const auto dst = temp_file("rt_dst.pgm");
  for (int trial = 0; trial < 50; ++trial) {
    const int w = dim(rng), h = dim(rng);
    std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    for (int i = 0; i < w * h; ++i) bytes.push_back(static_cast<unsigned char>(byte(rng)));
    write_bytes(src, bytes);
    save_pgm(dst.string(), load_pgm(src.string()));
    REQUIRE(read_bytes(dst) == bytes);
  }
}

TEST_CASE("sample_bilinear", "[imaging][interp]") {
  GrayImage img(3, 2, std::vector<double>{10, 20, 30, 40, 50, 60});
  SECTION("integer coordinates are exact") {
    CHECK(sample_bilinear(img, 2.0, 1.0) == 60.0);
    CHECK(sample_bilinear(img, 0.0, 0.0) == 10.0);
  }
  SECTION("midpoint of horizontal neighbours") { CHECK(sample_bilinear(img, 0.5, 0.0) == 15.0); }
  SECTION("out of range clamps to border") {
    CHECK(sample_bilinear(img, -5.0, -5.0) == 10.0);
    CHECK(sample_bilinear(img, 9.0, 9.0) == 60.0);
  }
  SECTION("exact on intensity planes") {
    GrayImage plane(17, 13);
    for (int y = 0; y < 13; ++y) {
      for (int x = 0; x < 17; ++x) plane(x, y) = 1.5 * x - 2.25 * y + 7.0;
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.0, 16.0), uy(0.0, 12.0);
    for (int i = 0; i < 500; ++i) {
      const double x = ux(rng), y = uy(rng);
      REQUIRE(sample_bilinear(plane, x, y) == Approx(1.5 * x - 2.25 * y + 7.0).margin(1e-9));
    }
  }
}

TEST_CASE("solve_similarity", "[imaging][geometry]") {
  const auto canvas = mdml_canvas();
  const std::array<Point, 2> targets{canvas.eye_left, canvas.eye_right};

  SECTION("eyes already at targets give identity") {
    const auto t = solve_similarity(canvas.eye_left, canvas.eye_right, targets, canvas.size);
    const std::array<double, 6> id{1, 0, 0, 0, 1, 0};
    for (std::size_t i = 0; i < 6; ++i) CHECK(t.matrix[i] == Approx(id[i]).margin(1e-12));
  }
  SECTION("shifted eyes give pure translation") {
    const double d = 7.0;
    const auto t = solve_similarity(at_row_col(66, 59 + d), at_row_col(66, 103 + d), targets, canvas.size);
    CHECK(t.matrix[0] == Approx(1.0));
    CHECK(t.matrix[1] == Approx(0.0).margin(1e-12));
    CHECK(t.matrix[2] == Approx(-d));
    CHECK(t.matrix[5] == Approx(0.0).margin(1e-12));
  }
  SECTION("88 px eye distance to 44 px target gives scale 0.5") {
    const std::array<Point, 2> tgt{Point{10, 10}, Point{54, 10}};
    const auto t = solve_similarity(Point{100, 50}, Point{188, 50}, tgt, canvas.size);
    CHECK(std::hypot(t.matrix[0], t.matrix[3]) == Approx(0.5).margin(1e-12));
  }
  SECTION("correspondences and scaled-rotation form hold for random eyes") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-200.0, 400.0);
    for (int i = 0; i < 200; ++i) {
      const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
      if (std::hypot(a.x - b.x, a.y - b.y) < 1.0) continue;
      const auto t = solve_similarity(a, b, targets, canvas.size);
      REQUIRE(std::abs(t.apply(a).x - targets[0].x) < 1e-9);
      REQUIRE(std::abs(t.apply(a).y - targets[0].y) < 1e-9);
      REQUIRE(std::abs(t.apply(b).x - targets[1].x) < 1e-9);
      REQUIRE(std::abs(t.apply(b).y - targets[1].y) < 1e-9);
      REQUIRE(std::abs(t.matrix[1] + t.matrix[3]) < 1e-9);
      REQUIRE(std::abs(t.matrix[0] - t.matrix[4]) < 1e-9);
    }
  }
  SECTION("coincident eyes are degenerate") {
    CHECK_THROWS_AS(solve_similarity(Point{3, 3}, Point{3, 3}, targets, canvas.size), DegenerateError);
  }
}

TEST_CASE("solve_affine", "[imaging][geometry]") {
  const auto canvas = mdml_canvas();
  const std::array<Point, 3> targets{canvas.eye_left, canvas.eye_right, canvas.mouth};

  SECTION("sources equal to targets give identity") {
    const auto t = solve_affine(targets[0], targets[1], targets[2], targets, canvas.size);
    const std::array<double, 6> id{1, 0, 0, 0, 1, 0};
    for (std::size_t i = 0; i < 6; ++i) CHECK(t.matrix[i] == Approx(id[i]).margin(1e-12));
  }
  SECTION("sources scaled by 2 about the origin give linear part 0.5 I") {
    const auto t = solve_affine(2.0 * targets[0], 2.0 * targets[1], 2.0 * targets[2], targets, canvas.size);
    CHECK(t.matrix[0] == Approx(0.5));
    CHECK(t.matrix[1] == Approx(0.0).margin(1e-12));
    CHECK(t.matrix[3] == Approx(0.0).margin(1e-12));
    CHECK(t.matrix[4] == Approx(0.5));
    CHECK(t.matrix[2] == Approx(0.0).margin(1e-9));
    CHECK(t.matrix[5] == Approx(0.0).margin(1e-9));
  }
  SECTION("random non-degenerate triples map exactly") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    int checked = 0;
    while (checked < 200) {
      const Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
      const double area = std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
      if (area < 100.0) continue;
      const auto t = solve_affine(a, b, c, targets, canvas.size);
      const std::array<Point, 3> src{a, b, c};
      for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(std::abs(t.apply(src[i]).x - targets[i].x) < 1e-9);
        REQUIRE(std::abs(t.apply(src[i]).y - targets[i].y) < 1e-9);
      }
      ++checked;
    }
  }
  SECTION("collinear sources are degenerate") {
    CHECK_THROWS_AS(solve_affine(Point{0, 0}, Point{10, 10}, Point{20, 20}, targets, canvas.size), DegenerateError);
  }
}

TEST_CASE("warp", "[imaging][geometry]") {
  std::mt19937_64 rng(21);
  const auto noise = oracle::random_real_image(rng, 60, 50);

  SECTION("identity transform copies the overlapping area and replicates the rest") {
    GeometricNormalization id;
    id.output_size = {55, 64};
    const auto out = warp(noise, id);
    REQUIRE(out.width() == 64);
    REQUIRE(out.height() == 55);
    for (int y = 0; y < 55; ++y) {
      for (int x = 0; x < 64; ++x) REQUIRE(out(x, y) == noise.at_clamped(x, y));
    }
  }
  SECTION("integer translation shifts with border replication") {
    GeometricNormalization t;
    t.matrix = {1, 0, 3, 0, 1, -2};
    t.output_size = {50, 60};
    const auto out = warp(noise, t);
    for (int y = 0; y < 50; ++y) {
      for (int x = 0; x < 60; ++x) REQUIRE(out(x, y) == noise.at_clamped(x - 3, y + 2));
    }
  }
  SECTION("warp then inverse warp of a smooth image stays within 2 grey levels") {
    const auto smooth = rescale_to_255(gaussian_blur(oracle::random_real_image(rng, 96, 96), 4.0));
    const CanvasSize size{96, 96};
    const auto t = solve_similarity(Point{30, 40}, Point{66, 44}, {Point{32, 38}, Point{70, 38}}, size);
    const auto back = warp(warp(smooth, t), t.inverse(size));
    double worst = 0.0;
    for (int y = 16; y < 80; ++y) {
      for (int x = 16; x < 80; ++x) worst = std::max(worst, std::abs(back(x, y) - smooth(x, y)));
    }
    CHECK(worst < 2.0);
  }
  SECTION("warp commutes with intensity scaling") {
    const auto t = solve_affine(Point{20, 20}, Point{40, 22}, Point{31, 45}, {Point{18, 20}, Point{42, 19}, Point{30, 40}},
                                {50, 60});
    for (double alpha : {0.3, 1.7, 4.0}) {
      const auto scaled = map_pixels(noise, [alpha](double v) { return alpha * v; });
      const auto a = warp(scaled, t);
      const auto b = warp(noise, t);
      for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a.pixels()[i] - alpha * b.pixels()[i]) < 1e-9);
    }
  }
}

TEST_CASE("landmark files round-trip", "[imaging][landmarks]") {
  std::vector<Point> pts;
  for (int i = 0; i < kLandmarkCount; ++i) pts.push_back({i * 1.25 + 0.1, 200.0 - i * 0.7});
  const LandmarkSet lm(pts);
  const auto path = temp_file("lm.pts");
  save_landmarks(path.string(), lm);
  const auto back = load_landmarks(path.string());
  REQUIRE(back.points() == lm.points());

  std::ofstream(path) << "1 2\n3 4\n";
  CHECK_THROWS_AS(load_landmarks(path.string()), InputError);
  std::ofstream(path) << "1 two\n";
  CHECK_THROWS_AS(load_landmarks(path.string()), FormatError);
}
