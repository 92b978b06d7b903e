#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dcpkit/learning.hpp"

using namespace dcpkit;
using Catch::Approx;

namespace {

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  }
  return m;
}

struct PldaTruth {
  Eigen::VectorXd mu;
  Eigen::MatrixXd F, G;
  Eigen::VectorXd sigma;

  Eigen::MatrixXd total() const {
    Eigen::MatrixXd c = F * F.transpose() + G * G.transpose();
    c.diagonal() += sigma;
    return c;
  }
};

PldaTruth make_truth(std::mt19937_64& rng, int d = 20, int dh = 3, int dw = 3) {
  PldaTruth t;
  t.mu = gaussian_matrix(rng, d, 1, 2.0);
  t.F = gaussian_matrix(rng, d, dh, 1.5);
  t.G = gaussian_matrix(rng, d, dw, 0.6);
  t.sigma = Eigen::VectorXd::Constant(d, 0.09);
  return t;
}

/// Each identity draws h once; each sample draws w and noise.
Eigen::MatrixXd sample_plda(const PldaTruth& t, std::mt19937_64& rng, int ids, int per_id, std::vector<int>& labels,
                            int first_label = 0) {
  const Eigen::Index d = t.mu.size();
  Eigen::MatrixXd X(ids * per_id, d);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < ids; ++i) {
    const Eigen::VectorXd h = gaussian_matrix(rng, t.F.cols(), 1);
    for (int j = 0; j < per_id; ++j) {
      const Eigen::VectorXd w = gaussian_matrix(rng, t.G.cols(), 1);
      Eigen::VectorXd e(d);
      for (Eigen::Index k = 0; k < d; ++k) e[k] = nd(rng) * std::sqrt(t.sigma[k]);
      X.row(i * per_id + j) = (t.mu + t.F * h + t.G * w + e).transpose();
      labels.push_back(first_label + i);
    }
  }
  return X;
}

}  // namespace

TEST_CASE("pca_fit", "[learning][pca]") {
  SECTION("points on the line y = x") {
    Eigen::MatrixXd X(5, 2);
    X << 0, 0, 1, 1, 2, 2, -1, -1, 3, 3;
    const auto m = pca_fit(X, 2);
    CHECK(std::abs(m.basis(0, 0)) == Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(m.basis(1, 0)) == Approx(1.0 / std::sqrt(2.0)));
    CHECK(m.eigenvalues[1] == Approx(0.0).margin(1e-12));
    CHECK(pca_project(m, m.mean).norm() < 1e-12);
  }

  std::mt19937_64 rng(1);
  SECTION("orthonormal basis, sorted eigenvalues, full-rank round trip") {
    const auto X = gaussian_matrix(rng, 50, 10);
    const auto m = pca_fit(X, 10);
    CHECK((m.basis.transpose() * m.basis - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index i = 0; i + 1 < 10; ++i) CHECK(m.eigenvalues[i] >= m.eigenvalues[i + 1]);
    for (Eigen::Index i = 0; i < 50; ++i) {
      const Eigen::VectorXd x = X.row(i).transpose();
      const Eigen::VectorXd back = m.basis * pca_project(m, x) + m.mean;
      REQUIRE((back - x).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  SECTION("Gram route matches a direct covariance eigendecomposition") {
    const auto X = gaussian_matrix(rng, 12, 40);
    const auto m = pca_fit(X, 11);
    const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 11.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ref = es.eigenvalues().reverse().head(11);
    CHECK((m.eigenvalues - ref).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((m.basis.transpose() * m.basis - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(((cov * m.basis) - m.basis * m.eigenvalues.asDiagonal()).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index i = 0; i < 12; ++i) {
      const Eigen::VectorXd x = X.row(i).transpose();
      REQUIRE((m.basis * pca_project(m, x) + m.mean - x).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  SECTION("float inputs use the same algorithm") {
    const Eigen::MatrixXf X = gaussian_matrix(rng, 12, 40).cast<float>();
    const auto m = pca_fit(X, 5);
    CHECK((m.basis.transpose() * m.basis - Eigen::MatrixXf::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-5f);
  }

  SECTION("projection contracts distances") {
    const auto X = gaussian_matrix(rng, 40, 15);
    const auto m = pca_fit(X, 6);
    for (Eigen::Index a = 0; a < 40; a += 3) {
      for (Eigen::Index b = 1; b < 40; b += 7) {
        const double dx = (X.row(a) - X.row(b)).norm();
        const double dy = (pca_project(m, X.row(a).transpose()) - pca_project(m, X.row(b).transpose())).norm();
        REQUIRE(dy <= dx + 1e-12);
      }
    }
  }

  SECTION("output dimension too large") {
    const auto X = gaussian_matrix(rng, 5, 8);
    CHECK_THROWS_AS(pca_fit(X, 5), DimensionError);
    CHECK_THROWS_AS(pca_fit(X, 0), DimensionError);
    CHECK_THROWS_AS(pca_fit(gaussian_matrix(rng, 1, 3), 1), DegenerateError);
  }
}

TEST_CASE("wpca_project", "[learning][wpca]") {
  std::mt19937_64 rng(2);
  SECTION("whitened training projections have identity covariance") {
    const Eigen::MatrixXd X = gaussian_matrix(rng, 500, 50) * gaussian_matrix(rng, 50, 50);
    const auto m = pca_fit(X, 20);
    const Eigen::MatrixXd Y = project_rows(m, X, true);
    const Eigen::MatrixXd centered = Y.rowwise() - Y.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 499.0;
    CHECK((cov - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(wpca_project(m, m.mean).norm() < 1e-12);
  }
  SECTION("whitening rescales PCA coordinates by 1/sqrt(lambda)") {
    const auto X = gaussian_matrix(rng, 300, 8);
    const auto m = pca_fit(X, 8);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(m.eigenvalues[i] == Approx(1.0).margin(0.35));
    const Eigen::VectorXd x = X.row(3).transpose();
    const Eigen::VectorXd p = pca_project(m, x), w = wpca_project(m, x);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(w[i] == Approx(p[i] / std::sqrt(m.eigenvalues[i])));
  }
  SECTION("a retained zero eigenvalue is a conditioning error") {
    Eigen::MatrixXd X = gaussian_matrix(rng, 20, 3);
    X.col(2) = X.col(0) + X.col(1);
    const auto m = pca_fit(X, 3);
    CHECK_THROWS_AS(wpca_project(m, X.row(0).transpose()), ConditioningError);
    CHECK(well_conditioned_rank(m) == 2);
    CHECK_NOTHROW(wpca_project(truncate(m, 2), X.row(0).transpose()));
  }
}

TEST_CASE("cosine_sim", "[learning][cosine]") {
  Eigen::VectorXd y(3), z(3);
  y << 1, 2, 3;
  z << 3, 0, -1;
  CHECK(cosine_sim(y, y) == Approx(1.0));
  CHECK(cosine_sim(y, -y) == Approx(-1.0));
  CHECK(cosine_sim(y, z) == Approx(0.0).margin(1e-15));
  CHECK_THROWS_AS(cosine_sim(y, Eigen::VectorXd::Zero(3)), DegenerateError);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd a = gaussian_matrix(rng, 10, 1), b = gaussian_matrix(rng, 10, 1);
    CHECK(std::abs(cosine_sim(2.5 * a, 0.1 * b) - cosine_sim(a, b)) < 1e-12);
  }
}

TEST_CASE("plda", "[learning][plda]") {
  std::mt19937_64 rng(4);
  const auto truth = make_truth(rng);
  std::vector<int> labels;
  const auto X = sample_plda(truth, rng, 50, 8, labels);
  PldaOptions opt;
  opt.d_h = 3;
  opt.d_w = 3;
  opt.iterations = 50;
  opt.seed = 9;
  const auto m = plda_fit(X, labels, opt);

  SECTION("EM log-likelihood never decreases") {
    REQUIRE(m.training_loglik.size() == 51);
    for (std::size_t i = 1; i < m.training_loglik.size(); ++i) {
      REQUIRE(m.training_loglik[i] >= m.training_loglik[i - 1] - 1e-6);
    }
    CHECK(plda_loglik(m, X, labels) == Approx(m.training_loglik.back()));
    for (Eigen::Index k = 0; k < m.sigma.size(); ++k) CHECK(m.sigma[k] > 0.0);
  }

  SECTION("recovered total covariance matches the data and the generator") {
    const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd sample = centered.transpose() * centered / static_cast<double>(X.rows());
    const double to_sample = (m.total_covariance() - sample).norm() / sample.norm();
    const double to_truth = (m.total_covariance() - truth.total()).norm() / truth.total().norm();
    const double sampling = (sample - truth.total()).norm() / truth.total().norm();
    CHECK(to_sample < 0.02);
    CHECK(to_truth < sampling + 0.02);
  }

  SECTION("random initialization also climbs monotonically") {
    PldaOptions r = opt;
    r.init = PldaInit::random;
    const auto mr = plda_fit(X, labels, r);
    for (std::size_t i = 1; i < mr.training_loglik.size(); ++i) {
      REQUIRE(mr.training_loglik[i] >= mr.training_loglik[i - 1] - 1e-6);
    }
    CHECK(mr.training_loglik.back() <= m.training_loglik.back() + 1e-6);
  }

  SECTION("llr is symmetric and tolerates within-class more than between-class change") {
    const PldaScorer scorer(m);
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd a = X.row(i * 7).transpose(), b = X.row(i * 11 + 3).transpose();
      REQUIRE(std::abs(plda_llr(m, a, b) - plda_llr(m, b, a)) < 1e-8);
      REQUIRE(std::abs(scorer(a, b) - plda_llr(m, a, b)) < 1e-8);
      for (Eigen::Index k = 0; k < 3; ++k) {
        const Eigen::VectorXd within = a + 3.0 * m.G.col(k);
        const Eigen::VectorXd between = a + 3.0 * m.G.col(k).norm() * m.F.col(k).normalized();
        REQUIRE(plda_llr(m, a, a) > plda_llr(m, a, between));
        REQUIRE(plda_llr(m, a, within) > plda_llr(m, a, between));
      }
    }
  }

  SECTION("threshold 0 separates held-out pairs") {
    std::vector<int> held_labels;
    const auto H = sample_plda(truth, rng, 200, 2, held_labels, 1000);
    const PldaScorer scorer(m);
    int correct = 0, total = 0;
    for (int i = 0; i < 200; ++i) {
      correct += scorer(H.row(2 * i).transpose(), H.row(2 * i + 1).transpose()) > 0.0;
      correct += scorer(H.row(2 * i).transpose(), H.row((2 * i + 3) % 400).transpose()) <= 0.0;
      total += 2;
    }
    CHECK(static_cast<double>(correct) / total >= 0.95);
  }

  SECTION("llr unchanged when data and probes are shifted and the model refit") {
    Eigen::VectorXd delta(20);
    for (Eigen::Index k = 0; k < 20; ++k) delta[k] = 0.5 * static_cast<double>(k) - 3.0;
    const Eigen::MatrixXd Xs = X.rowwise() + delta.transpose();
    const auto ms = plda_fit(Xs, labels, opt);
    for (int i = 0; i < 10; ++i) {
      const Eigen::VectorXd a = X.row(i).transpose(), b = X.row(399 - i).transpose();
      REQUIRE(std::abs(plda_llr(ms, a + delta, b + delta) - plda_llr(m, a, b)) < 1e-6);
    }
  }

  SECTION("preconditions") {
    PldaOptions bad = opt;
    bad.d_h = 0;
    CHECK_THROWS_AS(plda_fit(X, labels, bad), DimensionError);
    CHECK_THROWS_AS(plda_fit(X, std::vector<int>(labels.size(), 7), opt), DegenerateError);
    CHECK_THROWS_AS(plda_llr(m, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(20)), DimensionError);
  }
}

TEST_CASE("fusion", "[learning][fusion]") {
  SECTION("average mode") {
    const auto m = fusion_fit(Eigen::MatrixXd::Zero(1, 2), {}, {});
    CHECK(fusion_score(m, std::vector<double>{0.2, 0.4}) == Approx(0.3));
    CHECK(m.bias == 0.0);
    const auto one = fusion_fit(Eigen::MatrixXd::Zero(1, 1), {}, {});
    CHECK(fusion_score(one, std::vector<double>{-1.7}) == -1.7);
  }
  SECTION("average mode ordering survives a common positive scale") {
    std::mt19937_64 rng(5);
    const auto S = gaussian_matrix(rng, 30, 4);
    const auto m = fusion_fit(S, {}, {});
    for (Eigen::Index i = 0; i + 1 < 30; ++i) {
      const bool before = fusion_score(m, S.row(i).transpose()) < fusion_score(m, S.row(i + 1).transpose());
      const bool after =
          fusion_score(m, (3.7 * S.row(i)).transpose()) < fusion_score(m, (3.7 * S.row(i + 1)).transpose());
      REQUIRE(before == after);
    }
  }
  SECTION("linear mode separates separable data") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd S(200, 2);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < 200; ++i) {
      const int label = i % 2;
      const double s = u(rng), t = u(rng);
      // margin of 0.2 around the line 2 s0 - s1 = 0.5
      const double offset = label ? 0.3 + 0.5 * std::abs(t) : -0.3 - 0.5 * std::abs(t);
      S(i, 0) = s;
      S(i, 1) = 2.0 * s - 0.5 - offset;
      y.push_back(label);
    }
    FusionOptions opt;
    opt.mode = FusionMode::linear;
    opt.c = 10.0;
    const auto m = fusion_fit(S, y, opt);
    int correct = 0;
    for (Eigen::Index i = 0; i < 200; ++i) correct += (fusion_score(m, S.row(i).transpose()) > 0.0) == (y[static_cast<std::size_t>(i)] == 1);
    CHECK(correct == 200);
    CHECK(fusion_fit(S, y, opt).weights == m.weights);
    CHECK_THROWS_AS(fusion_fit(S, std::vector<int>(200, 1), opt), DegenerateError);
  }
}
