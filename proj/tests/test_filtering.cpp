#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "dcpkit/filtering.hpp"
#include "oracles.hpp"

using namespace dcpkit;
using Catch::Approx;

namespace {

double max_abs_diff_interior(const GrayImage& a, const GrayImage& b, int margin) {
  double worst = 0.0;
  for (int y = margin; y < a.height() - margin; ++y) {
    for (int x = margin; x < a.width() - margin; ++x) worst = std::max(worst, std::abs(a(x, y) - b(x, y)));
  }
  return worst;
}

}  // namespace

TEST_CASE("tt_normalize flat field", "[filtering][tt]") {
  const GrayImage flat(40, 30, 97.0);
  const auto out = tt_normalize(flat);
  const double v0 = out.pixels()[0];
  for (double v : out.pixels()) REQUIRE(v == v0);
}

TEST_CASE("tt_normalize is invariant to global gain", "[filtering][tt][property]") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = oracle::random_real_image(rng, 48, 40);
    const auto base = tt_normalize(img);
    for (double alpha : {0.5, 2.0}) {
      const auto scaled = tt_normalize(map_pixels(img, [alpha](double v) { return alpha * v; }));
      for (std::size_t i = 0; i < base.size(); ++i) {
        REQUIRE(std::abs(scaled.pixels()[i] - base.pixels()[i]) < 1e-6);
      }
    }
  }
}

TEST_CASE("tt_normalize output stays in [0,255]", "[filtering][tt][property]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto out = tt_normalize(oracle::random_image(rng, 24, 24));
    for (double v : out.pixels()) REQUIRE((v >= 0.0 && v <= 255.0));
  }
}

TEST_CASE("gamma correction preserves local rank order", "[filtering][tt]") {
  std::mt19937_64 rng(9);
  const auto img = oracle::random_real_image(rng, 16, 16);
  const auto g = gamma_correct(img, 0.2);
  for (std::size_t i = 0; i + 1 < img.size(); ++i) {
    const double a = img.pixels()[i], b = img.pixels()[i + 1];
    const double ga = g.pixels()[i], gb = g.pixels()[i + 1];
    REQUIRE((a < b) == (ga < gb));
  }
}

TEST_CASE("TT parameter validation", "[filtering][tt]") {
  TTParams p;
  p.sigma1 = 2.0;
  p.sigma2 = 1.0;
  CHECK_THROWS_AS(tt_normalize(GrayImage(4, 4), p), ConfigError);
}

TEST_CASE("fdg_kernel symmetries", "[filtering][fdg]") {
  const double pi = std::numbers::pi;
  const auto k0 = fdg_kernel(0.0, 1.0, 3);
  const auto k90 = fdg_kernel(pi / 2, 1.0, 3);
  const auto k45 = fdg_kernel(pi / 4, 1.0, 3);
  REQUIRE(k0.side() == 7);
  CHECK(std::abs(k0.sum()) < 1e-9);
  CHECK(std::abs(k45.sum()) < 1e-9);
  for (int v = -3; v <= 3; ++v) {
    for (int u = -3; u <= 3; ++u) {
      CHECK(k0(u, v) == Approx(-k0(-u, v)).margin(1e-15));
      CHECK(k90(u, v) == Approx(k0(v, u)).margin(1e-12));
      CHECK(k45(u, v) == Approx((k0(u, v) + k90(u, v)) / std::sqrt(2.0)).margin(1e-12));
    }
  }
  // rows sum to zero for the axis-aligned kernel
  for (int v = -3; v <= 3; ++v) {
    double s = 0.0;
    for (int u = -3; u <= 3; ++u) s += k0(u, v);
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("fdg_filter responses", "[filtering][fdg]") {
  const FDGBank bank;
  REQUIRE(bank.orientations.size() == 4);

  SECTION("constant image gives zero response for every orientation") {
    const GrayImage flat(20, 20, 200.0);
    for (const auto& r : fdg_response(flat, bank)) {
      for (double v : r.pixels()) REQUIRE(std::abs(v) < 1e-9);
    }
    for (const auto& r : fdg_filter(flat, bank)) {
      for (double v : r.pixels()) REQUIRE(v == 0.0);
    }
  }

  SECTION("ramp along x gives a constant positive interior response") {
    GrayImage ramp(32, 32);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) ramp(x, y) = x;
    }
    const auto r = convolve(ramp, fdg_kernel(0.0, 1.0, 3));
    double lo = 1e300, hi = -1e300;
    for (int y = 4; y < 28; ++y) {
      for (int x = 4; x < 28; ++x) {
        lo = std::min(lo, r(x, y));
        hi = std::max(hi, r(x, y));
      }
    }
    CHECK(lo > 0.0);
    CHECK(hi - lo < 1e-6);

    // Finite-difference gradient of the Gaussian-smoothed ramp.
    const auto smooth = gaussian_blur(ramp, 1.0 / std::sqrt(2.0));
    for (int y = 6; y < 26; ++y) {
      for (int x = 6; x < 26; ++x) {
        const double fd = 0.5 * (smooth(x + 1, y) - smooth(x - 1, y));
        REQUIRE(std::abs(r(x, y) - fd) < 1e-3);
      }
    }
  }

  SECTION("rotating the image by 90 degrees shifts the orientation by pi/2") {
    std::mt19937_64 rng(44);
    const int n = 32;
    const auto img = oracle::random_real_image(rng, n, n);
    GrayImage rot(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) rot(x, y) = img(y, n - 1 - x);
    }
    for (double theta : {0.0, std::numbers::pi / 4}) {
      const auto a = convolve(img, fdg_kernel(theta, 1.0, 3));
      const auto b = convolve(rot, fdg_kernel(theta + std::numbers::pi / 2, 1.0, 3));
      for (int y = 4; y < n - 4; ++y) {
        for (int x = 4; x < n - 4; ++x) REQUIRE(std::abs(b(x, y) - a(y, n - 1 - x)) < 1e-3);
      }
    }
  }

  SECTION("responses are linear before rescaling") {
    std::mt19937_64 rng(45);
    const auto i1 = oracle::random_real_image(rng, 24, 20);
    const auto i2 = oracle::random_real_image(rng, 24, 20);
    const double a = 0.7, b = -1.3;
    GrayImage mix(24, 20);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.pixels()[i] = a * i1.pixels()[i] + b * i2.pixels()[i];
    const auto rm = fdg_response(mix, bank);
    const auto r1 = fdg_response(i1, bank);
    const auto r2 = fdg_response(i2, bank);
    for (std::size_t k = 0; k < rm.size(); ++k) {
      for (std::size_t i = 0; i < mix.size(); ++i) {
        REQUIRE(std::abs(rm[k].pixels()[i] - (a * r1[k].pixels()[i] + b * r2[k].pixels()[i])) < 1e-9);
      }
    }
  }

  SECTION("rescaled outputs span [0,255]") {
    std::mt19937_64 rng(46);
    for (const auto& r : fdg_filter(oracle::random_real_image(rng, 30, 30), bank)) {
      const auto [lo, hi] = std::minmax_element(r.pixels().begin(), r.pixels().end());
      CHECK(*lo == 0.0);
      CHECK(*hi == Approx(255.0));
    }
  }
}

TEST_CASE("convolve with a delta kernel is the identity", "[filtering]") {
  std::mt19937_64 rng(47);
  const auto img = oracle::random_real_image(rng, 11, 9);
  Kernel2D delta{1, std::vector<double>(9, 0.0)};
  delta(0, 0) = 1.0;
  CHECK(max_abs_diff_interior(convolve(img, delta), img, 0) == 0.0);
}
