#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dcpkit/evaluation.hpp"
#include "oracles.hpp"

using namespace dcpkit;

namespace {

double mann_whitney(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] == 1) ++pos;
    else ++neg;
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != 0) continue;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / (pos * neg);
}

}  // namespace

TEST_CASE("identification ranks", "[evaluation]") {
  Eigen::MatrixXd s(3, 4);
  s << 0.9, 0.1, 0.2, 0.3,   // probe a: correct at rank 1
      0.5, 0.5, 0.1, 0.0,    // probe b: tie with gallery 0, loses on index
      0.1, 0.2, 0.3, 0.4;    // probe z: not enrolled
  const std::vector<std::string> gallery{"a", "b", "c", "d"};
  const std::vector<std::string> probes{"a", "b", "z"};
  const auto r = identify(s, gallery, probes, ScoreOrder::higher_is_better, 4);
  CHECK(r.true_rank == std::vector<int>{1, 2, 0});
  CHECK(r.best_match == std::vector<int>{0, 0, 3});
  CHECK(r.missing == std::vector<int>{2});
  CHECK(r.rank_rates[0] == Catch::Approx(1.0 / 3));
  CHECK(r.rank_rates[1] == Catch::Approx(2.0 / 3));
  CHECK(r.rank_rates[3] == Catch::Approx(2.0 / 3));

  const auto d = identify(-s, gallery, probes, ScoreOrder::lower_is_better, 2);
  CHECK(d.true_rank == r.true_rank);
  CHECK(d.rank_rates.size() == 2);

  CHECK_THROWS_AS(identify(s, {"a", "a", "c", "d"}, probes, ScoreOrder::higher_is_better, 1), InputError);
  CHECK_THROWS_AS(identify(s, gallery, {"a"}, ScoreOrder::higher_is_better, 1), DimensionError);
}

TEST_CASE("CMC is monotone and reaches the enrolled fraction", "[evaluation][property]") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  const int ng = 25, np = 60;
  std::vector<std::string> gallery, probes;
  for (int g = 0; g < ng; ++g) gallery.push_back("s" + std::to_string(g));
  for (int p = 0; p < np; ++p) probes.push_back("s" + std::to_string(p % 30));  // ids 25..29 missing
  Eigen::MatrixXd s(np, ng);
  for (int p = 0; p < np; ++p)
    for (int g = 0; g < ng; ++g) s(p, g) = n(rng) + (probes[static_cast<std::size_t>(p)] == gallery[static_cast<std::size_t>(g)] ? 1.5 : 0.0);
  const auto r = identify(s, gallery, probes, ScoreOrder::higher_is_better, ng);
  for (std::size_t k = 1; k < r.rank_rates.size(); ++k) CHECK(r.rank_rates[k] >= r.rank_rates[k - 1]);
  CHECK(r.rank_rates.back() == Catch::Approx(50.0 / 60.0));
  CHECK(r.missing.size() == 10);
}

TEST_CASE("AUC equals the Mann-Whitney statistic", "[evaluation][oracle]") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s;
  std::vector<int> l;
  for (int i = 0; i < 1000; ++i) {
    const int lab = i % 3 == 0 ? 1 : 0;
    // coarse rounding creates plenty of ties
    s.push_back(std::round((n(rng) + 0.8 * lab) * 4.0) / 4.0);
    l.push_back(lab);
  }
  const auto r = verify(s, l);
  CHECK(std::abs(r.auc - mann_whitney(s, l)) < 1e-9);
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    CHECK(r.roc[i].far >= r.roc[i - 1].far);
    CHECK(r.roc[i].vr >= r.roc[i - 1].vr);
    CHECK(r.roc[i].threshold < r.roc[i - 1].threshold);
  }
  CHECK(r.roc.back().far == 1.0);
  CHECK(r.roc.back().vr == 1.0);
}

TEST_CASE("verification edge cases", "[evaluation]") {
  SECTION("perfect separation") {
    const auto r = verify({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(r.auc == 1.0);
    CHECK(r.vr_at_far.at(0.001) == 1.0);
  }
  SECTION("all scores tied") {
    const auto r = verify({0.5, 0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0, 0});
    CHECK(r.auc == Catch::Approx(0.5));
    CHECK(r.vr_at_far.at(0.01) == 0.0);
  }
  SECTION("VR at FAR uses the largest FAR not above the target") {
    // 10 negatives: one false accept costs FAR 0.1
    std::vector<double> s{10, 9, 8, 7, 6, 5.5};
    std::vector<int> l{1, 0, 1, 1, 0, 1};
    for (int i = 0; i < 8; ++i) {
      s.push_back(-i);
      l.push_back(0);
    }
    const auto r = verify(s, l, {0.05, 0.1, 0.2});
    CHECK(r.vr_at_far.at(0.05) == Catch::Approx(0.25));
    CHECK(r.vr_at_far.at(0.1) == Catch::Approx(0.75));
    CHECK(r.vr_at_far.at(0.2) == Catch::Approx(1.0));
  }
  SECTION("single class") {
    CHECK_THROWS_AS(verify({0.1, 0.2}, {1, 1}), DegenerateError);
    CHECK_THROWS_AS(verify({0.1, 0.2}, {0, 0}), DegenerateError);
  }
  SECTION("non-finite score") {
    CHECK_THROWS_AS(verify({0.1, std::nan("")}, {1, 0}), InputError);
  }
}

TEST_CASE("k-fold accuracy", "[evaluation]") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s;
  std::vector<int> l, f;
  for (int i = 0; i < 600; ++i) {
    const int lab = i % 2;
    s.push_back(n(rng) + 3.0 * lab);
    l.push_back(lab);
    f.push_back((i / 2) % 10);
  }
  const auto r = verify(s, l, {0.01}, f);
  REQUIRE(r.fold_accuracy.size() == 10);
  REQUIRE(r.accuracy_mean.has_value());
  // Bayes accuracy for unit-variance classes 3 apart is Phi(1.5) = 0.933
  CHECK(*r.accuracy_mean == Catch::Approx(0.933).margin(0.03));
  double ss = 0.0;
  for (double a : r.fold_accuracy) ss += (a - *r.accuracy_mean) * (a - *r.accuracy_mean);
  CHECK(*r.accuracy_se == Catch::Approx(std::sqrt(ss / 9.0) / std::sqrt(10.0)));

  CHECK_THROWS_AS(verify(s, l, {0.01}, std::vector<int>(600, 0)), ConfigError);
  auto gap = f;
  for (auto& v : gap) v = v == 3 ? 11 : v;
  CHECK_THROWS_AS(verify(s, l, {0.01}, gap), InputError);
}

TEST_CASE("flip augmentation", "[evaluation][property]") {
  std::mt19937_64 rng(34);
  const auto img = oracle::random_real_image(rng, 162, 180);
  const auto lm = landmarks::canonical_template();

  SECTION("flipping twice is the identity") {
    const auto once = flip_augment(img, lm);
    const auto twice = flip_augment(once.image, once.landmarks);
    CHECK(std::ranges::equal(twice.image.pixels(), img.pixels()));
    for (std::size_t i = 0; i < lm.size(); ++i) {
      CHECK(twice.landmarks[i].x == Catch::Approx(lm[i].x));
      CHECK(twice.landmarks[i].y == lm[i].y);
    }
  }

  SECTION("flipped left eye lands where the right eye mirrors to") {
    const auto f = flip_augment(img, lm);
    const auto el = f.landmarks.centroid(landmarks::left_eye());
    const auto er = lm.centroid(landmarks::right_eye());
    CHECK(el.x == Catch::Approx(161.0 - er.x));
    CHECK(el.y == Catch::Approx(er.y));
  }
}

TEST_CASE("mirrored DCP codes are a digit permutation of the original", "[evaluation][oracle]") {
  for (int parity = 0; parity < 2; ++parity) {
    for (int c = 0; c < 256; ++c) CHECK(mirror_dcp_code(mirror_dcp_code(c, parity), parity) == c);
  }
  // even channel: directions 0 and 4 swap, 2 and 6 stay
  CHECK(mirror_dcp_code(0b00000011, 0) == 0b00110000);
  CHECK(mirror_dcp_code(0b00001100, 0) == 0b00001100);
  // odd channel: 1<->3, 5<->7
  CHECK(mirror_dcp_code(0b00000001, 1) == 0b00000100);
  CHECK(mirror_dcp_code(0b00100000, 1) == 0b10000000);

  std::mt19937_64 rng(35);
  const auto img = oracle::random_image(rng, 41, 37);
  const auto flipped = flip_horizontal(img);
  const SamplingGeometry g(4, 6, Interpolation::nearest);
  const auto a = encode_dcp(img, g);
  const auto b = encode_dcp(flipped, g);
  for (int ch = 0; ch < 2; ++ch) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        REQUIRE(b.code(ch, x, y) == mirror_dcp_code(a.code(ch, img.width() - 1 - x, y), ch));
      }
    }
  }
}
