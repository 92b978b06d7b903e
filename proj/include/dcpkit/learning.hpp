#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dcpkit/error.hpp"

namespace dcpkit {

// ---------------------------------------------------------------------------
// PCA / WPCA

template <typename Scalar = double>
struct PcaModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector mean;
  Matrix basis;  // d_in x d_out, orthonormal columns
  Eigen::VectorXd eigenvalues;

  Eigen::Index input_dim() const { return basis.rows(); }
  Eigen::Index output_dim() const { return basis.cols(); }
};

inline constexpr double kEigenFloor = 1e-10;

namespace detail {

/// Flips each column so that its largest-magnitude entry is positive.
template <typename M>
void fix_signs(M& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index i = 0;
    v.col(j).cwiseAbs().maxCoeff(&i);
    if (v(i, j) < 0) v.col(j) = -v.col(j);
  }
}

inline constexpr Eigen::Index kColumnChunk = 8192;

}  // namespace detail

/// Rows of X are samples. Uses the n x n Gram matrix when d > n.
template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& X, Eigen::Index d_out) {
  using Scalar = typename Derived::Scalar;
  using Model = PcaModel<Scalar>;
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2) throw DegenerateError("PCA needs at least two samples");
  if (d_out < 1 || d_out > std::min(n - 1, d)) {
    throw DimensionError("PCA output dimension " + std::to_string(d_out) + " must be in [1, min(n-1, d)] = [1, " +
                         std::to_string(std::min(n - 1, d)) + "]");
  }
  Model m;
  m.mean = (X.colwise().sum().transpose().template cast<double>() / static_cast<double>(n)).template cast<Scalar>();
  const Eigen::VectorXd mean_d = m.mean.template cast<double>();
  const double denom = static_cast<double>(n - 1);

  if (d <= n) {
    Eigen::MatrixXd centered = X.template cast<double>();
    centered.rowwise() -= mean_d.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw ConditioningError("PCA eigendecomposition failed");
    Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse().leftCols(d_out);
    detail::fix_signs(vecs);
    m.basis = vecs.cast<Scalar>();
    m.eigenvalues = es.eigenvalues().reverse().head(d_out).cwiseMax(0.0);
    return m;
  }

  // Gram route, accumulated over column chunks in double precision.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c0 = 0; c0 < d; c0 += detail::kColumnChunk) {
    const Eigen::Index w = std::min(detail::kColumnChunk, d - c0);
    Eigen::MatrixXd block = X.middleCols(c0, w).template cast<double>();
    block.rowwise() -= mean_d.segment(c0, w).transpose();
    gram.noalias() += block * block.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram / denom);
  if (es.info() != Eigen::Success) throw ConditioningError("PCA eigendecomposition failed");
  const Eigen::VectorXd lambda = es.eigenvalues().reverse().head(d_out).cwiseMax(0.0);
  const Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse().leftCols(d_out);
  Eigen::MatrixXd basis(d, d_out);
  for (Eigen::Index c0 = 0; c0 < d; c0 += detail::kColumnChunk) {
    const Eigen::Index w = std::min(detail::kColumnChunk, d - c0);
    Eigen::MatrixXd block = X.middleCols(c0, w).template cast<double>();
    block.rowwise() -= mean_d.segment(c0, w).transpose();
    basis.middleRows(c0, w).noalias() = block.transpose() * v;
  }
  for (Eigen::Index j = 0; j < d_out; ++j) {
    const double norm = basis.col(j).norm();
    if (norm > 0.0) basis.col(j) /= norm;
  }
  detail::fix_signs(basis);
  m.basis = basis.cast<Scalar>();
  m.eigenvalues = lambda;
  return m;
}

/// Number of leading eigenvalues above the whitening floor.
template <typename Scalar>
Eigen::Index well_conditioned_rank(const PcaModel<Scalar>& m, double floor = kEigenFloor) {
  if (m.eigenvalues.size() == 0) return 0;
  const double cut = floor * m.eigenvalues[0];
  Eigen::Index k = 0;
  while (k < m.eigenvalues.size() && m.eigenvalues[k] > cut && m.eigenvalues[k] > 0.0) ++k;
  return k;
}

template <typename Scalar>
PcaModel<Scalar> truncate(const PcaModel<Scalar>& m, Eigen::Index d_out) {
  if (d_out < 1 || d_out > m.output_dim()) throw DimensionError("cannot truncate PCA model to " + std::to_string(d_out));
  return {m.mean, m.basis.leftCols(d_out), m.eigenvalues.head(d_out)};
}

template <typename Scalar, typename Derived>
Eigen::VectorXd pca_project(const PcaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != m.input_dim()) throw DimensionError("PCA input has wrong dimension");
  const auto centered = (x.template cast<Scalar>() - m.mean).eval();
  return (m.basis.transpose() * centered).template cast<double>();
}

template <typename Scalar, typename Derived>
Eigen::VectorXd wpca_project(const PcaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  const double cut = m.eigenvalues.size() > 0 ? kEigenFloor * m.eigenvalues[0] : 0.0;
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
    if (!(m.eigenvalues[i] > cut) || !(m.eigenvalues[i] > 0.0)) {
      throw ConditioningError("retained eigenvalue " + std::to_string(i) + " is below the whitening floor");
    }
  }
  Eigen::VectorXd y = pca_project(m, x);
  return y.cwiseQuotient(m.eigenvalues.cwiseSqrt());
}

/// Projects every row of X.
template <typename Scalar, typename Derived>
Eigen::MatrixXd project_rows(const PcaModel<Scalar>& m, const Eigen::MatrixBase<Derived>& X, bool whiten) {
  Eigen::MatrixXd out(X.rows(), m.output_dim());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = (whiten ? wpca_project(m, X.row(i).transpose()) : pca_project(m, X.row(i).transpose())).transpose();
  }
  return out;
}

template <typename A, typename B>
double cosine_sim(const Eigen::MatrixBase<A>& y1, const Eigen::MatrixBase<B>& y2) {
  if (y1.size() != y2.size()) throw DimensionError("cosine similarity: length mismatch");
  const double n1 = y1.template cast<double>().norm(), n2 = y2.template cast<double>().norm();
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw DegenerateError("cosine similarity of a zero vector is undefined");
  const double c = y1.template cast<double>().dot(y2.template cast<double>()) / (n1 * n2);
  return std::clamp(c, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// PLDA: x = mu + F h + G w + eps, eps ~ N(0, diag(sigma))

struct PldaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd F;
  Eigen::MatrixXd G;
  Eigen::VectorXd sigma;
  std::vector<double> training_loglik;

  Eigen::Index dim() const { return mean.size(); }
  Eigen::MatrixXd total_covariance() const {
    Eigen::MatrixXd c = F * F.transpose() + G * G.transpose();
    c.diagonal() += sigma;
    return c;
  }
};

enum class PldaInit { scatter, random };

struct PldaOptions {
  PldaInit init = PldaInit::scatter;
  Eigen::Index d_h = 100;
  Eigen::Index d_w = 100;
  int iterations = 50;
  std::uint64_t seed = 0;
};

namespace detail {

/// Per-model quantities shared by the likelihood and the E-step.
struct PldaCache {
  Eigen::MatrixXd W_inv;        // (G G^T + Sigma)^-1
  double logdet_W = 0.0;
  Eigen::MatrixXd FtWinv;       // F^T W^-1
  Eigen::MatrixXd FtWinvF;      // F^T W^-1 F
  Eigen::MatrixXd B;            // (I + G^T S^-1 G)^-1 G^T S^-1
  Eigen::MatrixXd Pw_inv;       // (I + G^T S^-1 G)^-1

  explicit PldaCache(const PldaModel& m) {
    Eigen::MatrixXd W = m.G * m.G.transpose();
    W.diagonal() += m.sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(W);
    if (llt.info() != Eigen::Success) throw ConditioningError("PLDA within-class covariance is not positive definite");
    W_inv = llt.solve(Eigen::MatrixXd::Identity(W.rows(), W.cols()));
    logdet_W = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    FtWinv = m.F.transpose() * W_inv;
    FtWinvF = FtWinv * m.F;
    const Eigen::MatrixXd GtSinv = m.G.transpose() * m.sigma.cwiseInverse().asDiagonal();
    Eigen::MatrixXd Pw = GtSinv * m.G;
    Pw.diagonal().array() += 1.0;
    Pw_inv = Pw.llt().solve(Eigen::MatrixXd::Identity(Pw.rows(), Pw.cols()));
    B = Pw_inv * GtSinv;
  }

  Eigen::MatrixXd h_precision(Eigen::Index n) const {
    Eigen::MatrixXd P = static_cast<double>(n) * FtWinvF;
    P.diagonal().array() += 1.0;
    return P;
  }
};

/// log N of n samples sharing one identity variable; columns of Xc are centred samples.
inline double plda_group_loglik(const PldaCache& c, const Eigen::MatrixXd& Xc) {
  const Eigen::Index n = Xc.cols(), d = Xc.rows();
  const Eigen::MatrixXd P = c.h_precision(n);
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  const double logdet_P = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double quad = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) quad += Xc.col(j).dot(c.W_inv * Xc.col(j));
  const Eigen::VectorXd u = c.FtWinv * Xc.rowwise().sum();
  quad -= u.dot(llt.solve(u));
  const double logdet = static_cast<double>(n) * c.logdet_W + logdet_P;
  return -0.5 * (static_cast<double>(n * d) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

/// Leading eigenvectors of S scaled by sqrt(eigenvalue); columns beyond the
/// positive spectrum keep the corresponding column of `fill`.
inline Eigen::MatrixXd leading_factors(const Eigen::MatrixXd& S, Eigen::MatrixXd fill) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::Index d = S.rows();
  const double top = std::max(es.eigenvalues()[d - 1], 0.0);
  for (Eigen::Index j = 0; j < std::min(fill.cols(), d); ++j) {
    const double lambda = es.eigenvalues()[d - 1 - j];
    if (!(lambda > 1e-12 * top)) break;
    fill.col(j) = es.eigenvectors().col(d - 1 - j) * std::sqrt(lambda);
  }
  return fill;
}

inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = nd(rng);
  }
  if (cols > rows) return a / std::sqrt(static_cast<double>(rows));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

}  // namespace detail

/// Marginal log-likelihood of a labelled data set under the model.
inline double plda_loglik(const PldaModel& m, const Eigen::MatrixXd& X, const std::vector<int>& labels) {
  const detail::PldaCache c(m);
  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < X.rows(); ++i) groups[labels[static_cast<std::size_t>(i)]].push_back(i);
  double ll = 0.0;
  for (const auto& [id, rows] : groups) {
    Eigen::MatrixXd Xc(X.cols(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) Xc.col(static_cast<Eigen::Index>(j)) = X.row(rows[j]).transpose() - m.mean;
    ll += detail::plda_group_loglik(c, Xc);
  }
  return ll;
}

/// EM fit; rows of X are samples.
inline PldaModel plda_fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, const PldaOptions& opt = {}) {
  if (opt.d_h < 1 || opt.d_w < 1) throw DimensionError("PLDA subspace dimensions must be >= 1");
  if (opt.iterations < 0) throw ConfigError("PLDA iteration count must be >= 0");
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw DimensionError("PLDA: one label per sample required");
  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < X.rows(); ++i) groups[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (groups.size() < 2) throw DegenerateError("PLDA needs at least two identities");
  bool repeated = false;
  for (const auto& g : groups) repeated = repeated || g.second.size() >= 2;
  if (!repeated) throw DegenerateError("PLDA needs an identity with at least two samples");

  const Eigen::Index d = X.cols(), dh = opt.d_h, dw = opt.d_w, N = X.rows();
  PldaModel m;
  m.mean = X.colwise().mean().transpose();
  Eigen::MatrixXd Xc = X.rowwise() - m.mean.transpose();
  const Eigen::VectorXd var = Xc.colwise().squaredNorm().transpose() / static_cast<double>(N);
  const double var_floor = 1e-10 * std::max(var.mean(), 1e-300);
  std::mt19937_64 rng(opt.seed);
  const double scale = std::sqrt(var.mean());
  m.F = detail::random_orthonormal(d, dh, rng) * scale;
  m.G = detail::random_orthonormal(d, dw, rng) * scale;
  m.sigma = var.cwiseMax(var_floor);

  std::vector<Eigen::MatrixXd> group_data;
  for (const auto& [id, rows] : groups) {
    Eigen::MatrixXd g(d, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) g.col(static_cast<Eigen::Index>(j)) = Xc.row(rows[j]).transpose();
    group_data.push_back(std::move(g));
  }

  if (opt.init == PldaInit::scatter) {
    // Between- and within-identity scatter; unused columns stay small and random.
    Eigen::MatrixXd Sb = Eigen::MatrixXd::Zero(d, d), Sw = Eigen::MatrixXd::Zero(d, d);
    for (const auto& g : group_data) {
      const Eigen::VectorXd mu_i = g.rowwise().mean();
      Sb.noalias() += static_cast<double>(g.cols()) * mu_i * mu_i.transpose();
      const Eigen::MatrixXd e = g.colwise() - mu_i;
      Sw.noalias() += e * e.transpose();
    }
    Sb /= static_cast<double>(N);
    Sw /= static_cast<double>(N);
    m.F = detail::leading_factors(Sb, m.F * 1e-3);
    m.G = detail::leading_factors(Sw, m.G * 1e-3);
    const Eigen::VectorXd explained = (m.F * m.F.transpose() + m.G * m.G.transpose()).diagonal();
    m.sigma = (var - explained).cwiseMax(0.1 * var).cwiseMax(var_floor);
  }
  const auto loglik = [&](const PldaModel& model) {
    const detail::PldaCache c(model);
    double ll = 0.0;
    for (const auto& g : group_data) ll += detail::plda_group_loglik(c, g);
    return ll;
  };
  const Eigen::VectorXd sum_sq = Xc.colwise().squaredNorm().transpose();

  m.training_loglik.push_back(loglik(m));
  for (int it = 0; it < opt.iterations; ++it) {
    const detail::PldaCache c(m);
    const Eigen::Index q = dh + dw;
    Eigen::MatrixXd xz = Eigen::MatrixXd::Zero(d, q);
    Eigen::MatrixXd zz = Eigen::MatrixXd::Zero(q, q);
    std::map<Eigen::Index, Eigen::MatrixXd> sh_cache;
    const Eigen::MatrixXd BF = c.B * m.F;
    for (const auto& g : group_data) {
      const Eigen::Index n = g.cols();
      auto it_s = sh_cache.find(n);
      if (it_s == sh_cache.end()) {
        it_s = sh_cache.emplace(n, c.h_precision(n).llt().solve(Eigen::MatrixXd::Identity(dh, dh))).first;
      }
      const Eigen::MatrixXd& Sh = it_s->second;
      const Eigen::VectorXd mh = Sh * (c.FtWinv * g.rowwise().sum());
      const Eigen::MatrixXd Ehh = Sh + mh * mh.transpose();
      const Eigen::MatrixXd BFSh = BF * Sh;
      const Eigen::MatrixXd base_ww = c.Pw_inv + BFSh * BF.transpose();
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::VectorXd x = g.col(j);
        const Eigen::VectorXd Bx = c.B * x;
        const Eigen::VectorXd mw = Bx - BF * mh;
        const Eigen::MatrixXd Ewh = Bx * mh.transpose() - BF * Ehh;
        const Eigen::MatrixXd Eww = base_ww + mw * mw.transpose();
        xz.leftCols(dh).noalias() += x * mh.transpose();
        xz.rightCols(dw).noalias() += x * mw.transpose();
        zz.topLeftCorner(dh, dh) += Ehh;
        zz.bottomRightCorner(dw, dw) += Eww;
        zz.bottomLeftCorner(dw, dh) += Ewh;
        zz.topRightCorner(dh, dw) += Ewh.transpose();
      }
    }
    const Eigen::MatrixXd A = zz.transpose().ldlt().solve(xz.transpose()).transpose();
    m.F = A.leftCols(dh);
    m.G = A.rightCols(dw);
    const Eigen::VectorXd explained = (A.array() * xz.array()).rowwise().sum();
    m.sigma = ((sum_sq - explained) / static_cast<double>(N)).cwiseMax(var_floor);
    m.training_loglik.push_back(loglik(m));
  }
  return m;
}

template <typename A, typename B>
double plda_llr(const PldaModel& m, const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2) {
  if (x1.size() != m.dim() || x2.size() != m.dim()) throw DimensionError("PLDA input has wrong dimension");
  const detail::PldaCache c(m);
  Eigen::MatrixXd pair(m.dim(), 2);
  pair.col(0) = x1.template cast<double>() - m.mean;
  pair.col(1) = x2.template cast<double>() - m.mean;
  const double same = detail::plda_group_loglik(c, pair);
  const double a = detail::plda_group_loglik(c, pair.col(0));
  const double b = detail::plda_group_loglik(c, pair.col(1));
  return same - a - b;
}

/// Reusable scorer that avoids recomputing the model factorizations.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& m) : m_(m), c_(m) {
    for (Eigen::Index n : {1, 2}) {
      Eigen::MatrixXd P = c_.h_precision(n);
      Eigen::LLT<Eigen::MatrixXd> llt(P);
      logdet_[n - 1] = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      Pinv_[n - 1] = llt.solve(Eigen::MatrixXd::Identity(P.rows(), P.cols()));
    }
  }

  template <typename A, typename B>
  double operator()(const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2) const {
    if (x1.size() != m_.dim() || x2.size() != m_.dim()) throw DimensionError("PLDA input has wrong dimension");
    const Eigen::VectorXd a = x1.template cast<double>() - m_.mean;
    const Eigen::VectorXd b = x2.template cast<double>() - m_.mean;
    const Eigen::VectorXd ua = c_.FtWinv * a, ub = c_.FtWinv * b;
    const Eigen::VectorXd us = ua + ub;
    // The W^-1 quadratic terms and log 2pi cancel between numerator and denominator.
    const double same = -0.5 * (logdet_[1] - us.dot(Pinv_[1] * us));
    const double sep = -0.5 * (2.0 * logdet_[0] - ua.dot(Pinv_[0] * ua) - ub.dot(Pinv_[0] * ub));
    return same - sep;
  }

 private:
  PldaModel m_;
  detail::PldaCache c_;
  double logdet_[2] = {0.0, 0.0};
  Eigen::MatrixXd Pinv_[2];
};

// ---------------------------------------------------------------------------
// Score fusion

enum class FusionMode { average, linear };

inline FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "average") return FusionMode::average;
  if (s == "linear") return FusionMode::linear;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

inline std::string to_string(FusionMode m) { return m == FusionMode::average ? "average" : "linear"; }

struct FusionModel {
  FusionMode mode = FusionMode::average;
  std::vector<double> weights;
  double bias = 0.0;
};

struct FusionOptions {
  FusionMode mode = FusionMode::average;
  double c = 1.0;
  int iterations = 2000;
};

template <typename Derived>
double fusion_score(const FusionModel& m, const Eigen::MatrixBase<Derived>& s) {
  if (static_cast<std::size_t>(s.size()) != m.weights.size()) throw DimensionError("fusion: wrong number of scores");
  double v = m.bias;
  for (std::size_t i = 0; i < m.weights.size(); ++i) v += m.weights[i] * static_cast<double>(s(static_cast<Eigen::Index>(i)));
  return v;
}

inline double fusion_score(const FusionModel& m, const std::vector<double>& s) {
  return fusion_score(m, Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
}

/// Rows of `scores` are pairs, columns are scorers; labels are 1 (same) or 0.
inline FusionModel fusion_fit(const Eigen::MatrixXd& scores, const std::vector<int>& labels,
                              const FusionOptions& opt = {}) {
  const Eigen::Index n = scores.rows(), k = scores.cols();
  if (k < 1) throw DimensionError("fusion needs at least one scorer");
  FusionModel m;
  m.mode = opt.mode;
  if (opt.mode == FusionMode::average) {
    m.weights.assign(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
    return m;
  }
  if (static_cast<std::size_t>(n) != labels.size()) throw DimensionError("fusion: one label per pair required");
  if (!(opt.c > 0.0)) throw ConfigError("fusion cost c must be positive");
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == n) throw DegenerateError("linear fusion needs both same and different pairs");

  const Eigen::RowVectorXd mu = scores.colwise().mean();
  Eigen::RowVectorXd sd = ((scores.rowwise() - mu).colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(sd[j] > 0.0)) sd[j] = 1.0;
  }
  const Eigen::MatrixXd Z = (scores.rowwise() - mu).array().rowwise() / sd.array();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

  // min  lambda/2 |w|^2 + 1/n sum hinge,  lambda = 1/(c n); Pegasos-style steps with iterate averaging.
  const double lambda = 1.0 / (opt.c * static_cast<double>(n));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k), w_avg = Eigen::VectorXd::Zero(k);
  double b = 0.0, b_avg = 0.0;
  for (int t = 1; t <= opt.iterations; ++t) {
    const double eta = 1.0 / (lambda * t);
    Eigen::VectorXd gw = lambda * w;
    double gb = 0.0;
    const Eigen::VectorXd margin = (y.array() * ((Z * w).array() + b)).matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (margin[i] < 1.0) {
        gw -= y[i] * Z.row(i).transpose() / static_cast<double>(n);
        gb -= y[i] / static_cast<double>(n);
      }
    }
    w -= eta * gw;
    b -= eta * gb;
    w_avg += (w - w_avg) / t;
    b_avg += (b - b_avg) / t;
  }
  m.weights.resize(static_cast<std::size_t>(k));
  m.bias = b_avg;
  for (Eigen::Index j = 0; j < k; ++j) {
    m.weights[static_cast<std::size_t>(j)] = w_avg[j] / sd[j];
    m.bias -= w_avg[j] * mu[j] / sd[j];
  }
  return m;
}

}  // namespace dcpkit
