#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/geometry.hpp"
#include "dcpkit/image.hpp"
#include "dcpkit/manifest.hpp"
#include "dcpkit/random_field.hpp"
#include "dcpkit/representation.hpp"

namespace dcpkit {

struct SynthOptions {
  std::uint64_t seed = 0;
  int n_ids = 20;
  int n_per_id = 5;
  int n_train_ids = 0;  // extra identities written with role "train"
  bool gain = false;    // global multiplicative gain per image
  double noise_sigma = 0.0;
  bool ramp = false;    // horizontal illumination ramp per image
  bool jitter = false;  // small rotation/scale/shift per image
  int width = 180;
  int height = 200;

  void validate() const {
    if (n_ids < 2) throw ConfigError("synthetic corpus needs n_ids >= 2");
    if (n_per_id < 1) throw ConfigError("synthetic corpus needs n_per_id >= 1");
    if (n_train_ids < 0) throw ConfigError("n_train_ids must be >= 0");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
    if (width < 170 || height < 190) throw ConfigError("synthetic canvas must be at least 170x190");
  }

  /// Comma-separated subset of none, gain, noise, ramp, jitter.
  void set_variation(const std::string& list, double default_noise = 2.0) {
    gain = ramp = jitter = false;
    noise_sigma = 0.0;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "none" || item.empty()) continue;
      if (item == "gain") gain = true;
      else if (item == "noise") noise_sigma = default_noise;
      else if (item == "ramp") ramp = true;
      else if (item == "jitter") jitter = true;
      else throw ConfigError("unknown variation '" + item + "'");
    }
  }
};

/// Per-identity appearance: smooth base, fine texture and darkened landmark blobs.
class SyntheticIdentity {
 public:
  SyntheticIdentity(std::mt19937_64& rng, GaussianFieldSampler& texture_sampler) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    skin_ = 125.0 + 25.0 * u(rng);
    for (int b = 0; b < 4; ++b) {
      bumps_.push_back({20.0 + 122.0 * u(rng), 30.0 + 130.0 * u(rng), 25.0 * n(rng), 12.0 + 20.0 * u(rng)});
    }
    texture_ = GrayImage(texture_sampler.size(), texture_sampler.size(), texture_sampler.sample(rng));
    const auto tmpl = landmarks::canonical_template();
    std::vector<Point> pts;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
      pts.push_back({tmpl[i].x + 1.5 * n(rng), tmpl[i].y + 1.5 * n(rng)});
      depth_.push_back(35.0 + 25.0 * u(rng));
      spread_.push_back(2.0 + 2.0 * u(rng));
    }
    landmarks_ = LandmarkSet(std::move(pts));
  }

  const LandmarkSet& landmarks() const noexcept { return landmarks_; }

  /// Intensity at canonical-frame point (u, v).
  double value(double u, double v) const {
    const double qu = (u - 81.0) / 66.0, qv = (v - 100.0) / 84.0;
    const double mask = 1.0 / (1.0 + std::exp((qu * qu + qv * qv - 1.0) * 20.0));
    const double bg = 70.0 + 10.0 * std::sin(u / 30.0);
    double face = skin_ + 22.0 * sample_bilinear(texture_, u + 15.0, v + 6.0);
    for (const auto& b : bumps_) {
      const double d2 = (u - b.x) * (u - b.x) + (v - b.y) * (v - b.y);
      face += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
    }
    for (std::size_t k = 0; k < landmarks_.size(); ++k) {
      const double dx = u - landmarks_[k].x, dy = v - landmarks_[k].y;
      const double s = spread_[k];
      const double d2 = dx * dx + dy * dy;
      if (d2 < 25.0 * s * s) face -= depth_[k] * std::exp(-d2 / (2.0 * s * s));
    }
    return mask * face + (1.0 - mask) * bg;
  }

 private:
  struct Bump {
    double x, y, amp, sigma;
  };
  double skin_ = 140.0;
  std::vector<Bump> bumps_;
  GrayImage texture_;
  LandmarkSet landmarks_;
  std::vector<double> depth_;
  std::vector<double> spread_;
};

struct SyntheticImage {
  GrayImage image;
  LandmarkSet landmarks;
};

/// Renders one capture: a similarity placement of the canonical face on the raw
/// canvas followed by the photometric variations selected in `opt`.
inline SyntheticImage render_capture(const SyntheticIdentity& id, const SynthOptions& opt, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double angle = 0.0, scale = 1.0, tx = 0.0, ty = 0.0;
  if (opt.jitter) {
    angle = 1.5 * std::numbers::pi / 180.0 * n(rng);
    scale = 1.0 + 0.03 * u(rng);
    tx = 2.0 * u(rng);
    ty = 2.0 * u(rng);
  }
  const double gain = opt.gain ? 0.95 + 0.2 * u(rng) : 1.0;
  const double ramp = opt.ramp ? 0.3 * u(rng) : 0.0;

  const double cx = 81.0, cy = 90.0;
  const double ox = 0.5 * (opt.width - 162) + tx, oy = 0.5 * (opt.height - 180) + ty;
  const double c = std::cos(angle) * scale, s = std::sin(angle) * scale;
  const auto forward = [&](Point p) {
    const double dx = p.x - cx, dy = p.y - cy;
    return Point{c * dx - s * dy + cx + ox, s * dx + c * dy + cy + oy};
  };
  const double inv = 1.0 / (scale * scale);
  GrayImage img(opt.width, opt.height);
  for (int y = 0; y < opt.height; ++y) {
    for (int x = 0; x < opt.width; ++x) {
      const double dx = x - cx - ox, dy = y - cy - oy;
      const double uu = (c * dx + s * dy) * inv + cx, vv = (-s * dx + c * dy) * inv + cy;
      double v = id.value(uu, vv) * gain;
      v *= 1.0 + ramp * (x - 0.5 * opt.width) / opt.width;
      img(x, y) = v;
    }
  }
  if (opt.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, opt.noise_sigma);
    for (auto& v : img.pixels()) v += noise(rng);
  }
  for (auto& v : img.pixels()) v = std::clamp(std::round(v), 0.0, 255.0);
  std::vector<Point> pts;
  for (const auto& p : id.landmarks().points()) pts.push_back(forward(p));
  return {std::move(img), LandmarkSet(std::move(pts))};
}

namespace detail {

inline std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

inline std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace detail

/// Writes images/, landmarks/ and manifest.json under `out_dir`. The first
/// capture of each identity is the gallery entry, the rest are probes; when
/// there are probes, one same and one different verification pair per probe
/// are listed, folded by identity.
inline Manifest synth_corpus(const SynthOptions& opt, const std::filesystem::path& out_dir) {
  opt.validate();
  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "landmarks");
  const GaussianFieldSampler texture_prototype(192, 1.5, Covariance::squared_exponential);
  Manifest m;
  m.base = out_dir;

  const auto write_identity = [&](const std::string& subject, std::uint64_t stream, int captures, bool train) {
    auto id_rng = detail::seeded(opt.seed, stream, 0);
    auto texture = texture_prototype;  // fresh copy so each identity depends only on its own stream
    const SyntheticIdentity id(id_rng, texture);
    for (int j = 0; j < captures; ++j) {
      auto rng = detail::seeded(opt.seed, stream, static_cast<std::uint64_t>(j) + 1);
      const auto cap = render_capture(id, opt, rng);
      const std::string stem = subject + "_" + std::to_string(j);
      const std::string img_rel = "images/" + stem + ".pgm";
      const std::string lm_rel = "landmarks/" + stem + ".pts";
      save_pgm((out_dir / img_rel).string(), cap.image);
      save_landmarks((out_dir / lm_rel).string(), cap.landmarks);
      ManifestEntry e;
      e.image = img_rel;
      e.landmarks = lm_rel;
      e.subject = subject;
      e.role = train ? Role::train : (j == 0 ? Role::gallery : Role::probe);
      m.entries.push_back(std::move(e));
    }
  };

  const int folds = std::min(10, opt.n_ids);
  for (int i = 0; i < opt.n_ids; ++i) {
    write_identity("s" + detail::zero_pad(i, 3), static_cast<std::uint64_t>(i), opt.n_per_id, false);
    for (int j = 0; j < opt.n_per_id; ++j) m.entries[m.entries.size() - 1 - static_cast<std::size_t>(j)].fold = i % folds;
  }
  for (int i = 0; i < opt.n_train_ids; ++i) {
    write_identity("t" + detail::zero_pad(i, 3), 1000000u + static_cast<std::uint64_t>(i), std::max(opt.n_per_id, 2),
                   true);
  }
  if (opt.n_per_id >= 2) {
    const auto per = static_cast<std::size_t>(opt.n_per_id);
    for (int i = 0; i < opt.n_ids; ++i) {
      const std::size_t gallery = static_cast<std::size_t>(i) * per;
      const std::size_t other = static_cast<std::size_t>((i + 1) % opt.n_ids) * per;
      for (std::size_t j = 1; j < per; ++j) {
        m.pairs.push_back({gallery, gallery + j, true, i % folds});
        m.pairs.push_back({other, gallery + j, false, i % folds});
      }
    }
  }
  save_manifest((out_dir / "manifest.json").string(), m);
  return m;
}

}  // namespace dcpkit
