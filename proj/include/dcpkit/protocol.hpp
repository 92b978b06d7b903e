#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcpkit/descriptors.hpp"
#include "dcpkit/error.hpp"
#include "dcpkit/evaluation.hpp"
#include "dcpkit/filtering.hpp"
#include "dcpkit/geometry.hpp"
#include "dcpkit/image.hpp"
#include "dcpkit/io.hpp"
#include "dcpkit/learning.hpp"
#include "dcpkit/manifest.hpp"
#include "dcpkit/parallel.hpp"
#include "dcpkit/representation.hpp"

namespace dcpkit {

// ---------------------------------------------------------------------------
// Experiment configuration

inline std::string to_string(Interpolation i) { return i == Interpolation::nearest ? "nearest" : "bilinear"; }

inline Interpolation parse_interpolation(const std::string& s) {
  if (s == "bilinear") return Interpolation::bilinear;
  if (s == "nearest") return Interpolation::nearest;
  throw ConfigError("unknown interpolation '" + s + "'");
}

/// Registered pipelines: one of the descriptor names (chi-squared matching on
/// regional histograms) or mdml-wpca / mdml-plda.
struct ExperimentConfig {
  std::string pipeline = "dcp";
  std::uint64_t seed = 0;

  // descriptor pipelines
  DescriptorParams descriptor;
  int grid = 9;
  std::string canvas = "feret128";

  // mdml pipelines
  std::string preset = "feret";
  MdDcpsConfig mdml = MdDcpsConfig::feret();
  std::vector<FeatureName> features{kAllFeatures.begin(), kAllFeatures.end()};
  int pca_dim = 600;
  PldaOptions plda;
  FusionOptions fusion;

  int k_max = 10;
  std::vector<double> far_targets{0.001, 0.01};

  bool is_mdml() const { return pipeline == "mdml-wpca" || pipeline == "mdml-plda"; }

  void validate() const {
    if (!is_mdml()) {
      parse_descriptor(pipeline);
      canvas_preset(canvas);
      if (grid < 1) throw ConfigError("grid must be >= 1");
      SamplingGeometry(descriptor.r_in, descriptor.r_ex);
      if (descriptor.kind == DescriptorKind::ltp && !(descriptor.ltp_t >= 0.0)) {
        throw ConfigError("LTP threshold must be >= 0");
      }
    } else {
      mdml.validate();
      if (features.empty()) throw ConfigError("mdml pipeline needs at least one feature");
      if (pca_dim < 1) throw ConfigError("pca_dim must be >= 1");
      if (pipeline == "mdml-plda" && (plda.d_h < 1 || plda.d_w < 1 || plda.iterations < 1)) {
        throw ConfigError("PLDA dimensions and iterations must be >= 1");
      }
      if (fusion.mode == FusionMode::linear && !(fusion.c > 0.0)) throw ConfigError("fusion c must be positive");
    }
    if (k_max < 1) throw ConfigError("k_max must be >= 1");
    for (double f : far_targets) {
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("FAR targets must lie in (0, 1]");
    }
  }

  /// Only fields that affect the selected pipeline appear, so the hash moves
  /// exactly when something meaningful changes.
  io::json to_json() const {
    io::json j{{"schema", "dcpkit.config/1"}, {"pipeline", pipeline}, {"seed", seed}};
    j["evaluation"] = {{"k_max", k_max}, {"far_targets", far_targets}};
    if (!is_mdml()) {
      io::json d{{"r_in", descriptor.r_in},
                 {"r_ex", descriptor.r_ex},
                 {"interpolation", to_string(descriptor.interp)},
                 {"grid", grid},
                 {"canvas", canvas}};
      if (descriptor.kind == DescriptorKind::ltp) d["ltp_t"] = descriptor.ltp_t;
      j["descriptor"] = d;
      return j;
    }
    io::json comps = io::json::object();
    for (const auto& c : mdml.components) {
      comps[to_string(c.name)] = {{"landmarks", c.landmark_indices}, {"patch_size", c.patch_size},
                                  {"patch_grid", c.patch_grid}};
    }
    std::vector<std::string> names;
    for (auto f : features) names.push_back(to_string(f));
    io::json m{{"preset", preset},
               {"r_in", mdml.geometry.r_in()},
               {"r_ex", mdml.geometry.r_ex()},
               {"interpolation", to_string(mdml.geometry.interpolation())},
               {"filter", mdml.filter == FilterMode::fdg ? "fdg" : "passthrough"},
               {"include_unfiltered", mdml.include_unfiltered},
               {"photometric", mdml.photometric},
               {"components", comps},
               {"features", names},
               {"pca_dim", pca_dim}};
    if (mdml.filter == FilterMode::fdg) {
      m["fdg"] = {{"sigma", mdml.bank.sigma}, {"kernel_radius", mdml.bank.kernel_radius},
                  {"orientations", mdml.bank.orientations}};
    }
    if (mdml.photometric) {
      m["tt"] = {{"gamma", mdml.tt.gamma}, {"sigma1", mdml.tt.sigma1}, {"sigma2", mdml.tt.sigma2},
                 {"alpha", mdml.tt.alpha}, {"tau", mdml.tt.tau}};
    }
    j["mdml"] = m;
    if (pipeline == "mdml-plda") {
      j["plda"] = {{"d_h", plda.d_h}, {"d_w", plda.d_w}, {"iterations", plda.iterations},
                   {"init", plda.init == PldaInit::scatter ? "scatter" : "random"}};
    }
    io::json f{{"mode", to_string(fusion.mode)}};
    if (fusion.mode == FusionMode::linear) {
      f["c"] = fusion.c;
      f["iterations"] = fusion.iterations;
    }
    j["fusion"] = f;
    return j;
  }

  std::string hash() const { return io::json_hash(to_json()); }

  /// Starts from defaults (or the named mdml preset) and applies any fields present.
  static ExperimentConfig from_json(const io::json& j) {
    ExperimentConfig c;
    try {
      c.set_pipeline(j.value("pipeline", c.pipeline));
      c.seed = j.value("seed", c.seed);
      if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        c.k_max = e.value("k_max", c.k_max);
        c.far_targets = e.value("far_targets", c.far_targets);
      }
      if (j.contains("descriptor")) {
        const auto& d = j.at("descriptor");
        c.descriptor.r_in = d.value("r_in", c.descriptor.r_in);
        c.descriptor.r_ex = d.value("r_ex", c.descriptor.r_ex);
        c.descriptor.ltp_t = d.value("ltp_t", c.descriptor.ltp_t);
        c.descriptor.interp = parse_interpolation(d.value("interpolation", to_string(c.descriptor.interp)));
        c.grid = d.value("grid", c.grid);
        c.canvas = d.value("canvas", c.canvas);
      }
      if (j.contains("mdml")) {
        const auto& m = j.at("mdml");
        c.set_preset(m.value("preset", c.preset));
        const double r_in = m.value("r_in", c.mdml.geometry.r_in());
        const double r_ex = m.value("r_ex", c.mdml.geometry.r_ex());
        const auto interp = parse_interpolation(m.value("interpolation", to_string(c.mdml.geometry.interpolation())));
        c.mdml.geometry = SamplingGeometry(r_in, r_ex, interp);
        const auto filter = m.value("filter", std::string("fdg"));
        if (filter != "fdg" && filter != "passthrough") throw ConfigError("unknown filter '" + filter + "'");
        c.mdml.filter = filter == "fdg" ? FilterMode::fdg : FilterMode::passthrough;
        c.mdml.include_unfiltered = m.value("include_unfiltered", c.mdml.include_unfiltered);
        c.mdml.photometric = m.value("photometric", c.mdml.photometric);
        c.pca_dim = m.value("pca_dim", c.pca_dim);
        if (m.contains("features")) {
          c.features.clear();
          for (const auto& n : m.at("features")) c.features.push_back(parse_feature_name(n.get<std::string>()));
        }
        if (m.contains("fdg")) {
          const auto& f = m.at("fdg");
          c.mdml.bank.sigma = f.value("sigma", c.mdml.bank.sigma);
          c.mdml.bank.kernel_radius = f.value("kernel_radius", c.mdml.bank.kernel_radius);
          c.mdml.bank.orientations = f.value("orientations", c.mdml.bank.orientations);
        }
        if (m.contains("tt")) {
          const auto& t = m.at("tt");
          c.mdml.tt.gamma = t.value("gamma", c.mdml.tt.gamma);
          c.mdml.tt.sigma1 = t.value("sigma1", c.mdml.tt.sigma1);
          c.mdml.tt.sigma2 = t.value("sigma2", c.mdml.tt.sigma2);
          c.mdml.tt.alpha = t.value("alpha", c.mdml.tt.alpha);
          c.mdml.tt.tau = t.value("tau", c.mdml.tt.tau);
        }
        if (m.contains("components")) {
          for (const auto& [name, spec] : m.at("components").items()) {
            const auto which = parse_feature_name(name);
            auto it = std::find_if(c.mdml.components.begin(), c.mdml.components.end(),
                                   [&](const ComponentSpec& cs) { return cs.name == which; });
            if (it == c.mdml.components.end()) throw ConfigError("no component named " + name);
            auto& comp = *it;
            comp.landmark_indices = spec.value("landmarks", comp.landmark_indices);
            comp.patch_size = spec.value("patch_size", comp.patch_size);
            comp.patch_grid = spec.value("patch_grid", comp.patch_grid);
          }
        }
      }
      if (j.contains("plda")) {
        const auto& p = j.at("plda");
        c.plda.d_h = p.value("d_h", c.plda.d_h);
        c.plda.d_w = p.value("d_w", c.plda.d_w);
        c.plda.iterations = p.value("iterations", c.plda.iterations);
        const auto init = p.value("init", std::string("scatter"));
        if (init != "scatter" && init != "random") throw ConfigError("unknown PLDA init '" + init + "'");
        c.plda.init = init == "scatter" ? PldaInit::scatter : PldaInit::random;
      }
      if (j.contains("fusion")) {
        const auto& f = j.at("fusion");
        c.fusion.mode = parse_fusion_mode(f.value("mode", to_string(c.fusion.mode)));
        c.fusion.c = f.value("c", c.fusion.c);
        c.fusion.iterations = f.value("iterations", c.fusion.iterations);
      }
    } catch (const io::json::exception& e) {
      throw ConfigError(std::string("bad experiment config: ") + e.what());
    }
    return c;
  }

  void set_pipeline(const std::string& name) {
    pipeline = name;
    if (!is_mdml()) descriptor.kind = parse_descriptor(name);
  }

  void set_preset(const std::string& name) {
    mdml = MdDcpsConfig::preset(name);
    preset = name;
  }
};

// ---------------------------------------------------------------------------
// Protocol run

enum class ProtocolTask { identification, verification, auto_detect };

struct ProtocolOptions {
  ProtocolTask task = ProtocolTask::auto_detect;
  int threads = 1;
  std::string artifacts;  // directory for features and models; empty to skip
};

struct ProtocolResult {
  io::json report;  // deterministic: no timings or paths of outputs
  io::json run;     // config hash, manifest digest, outputs, stage timings
  std::optional<IdentificationReport> identification;
  std::optional<VerificationReport> verification;
};

namespace detail {

class StageClock {
 public:
  void start(const std::string& name) {
    stop();
    name_ = name;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    if (name_.empty()) return;
    const auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
    timings_[name_] += dt;
    name_.clear();
  }
  io::json json() const { return timings_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  std::map<std::string, double> timings_;
};

/// Manifest structure plus the bytes of every referenced file.
inline std::string manifest_digest(const Manifest& m) {
  io::Fnv1a h;
  h.update(m.to_json().dump());
  for (const auto& e : m.entries) {
    for (const auto* p : {&e.image, &e.landmarks}) {
      if (p->empty()) continue;
      const auto bytes = io::read_bytes(m.resolve(*p));
      h.update(bytes.data(), bytes.size());
    }
  }
  return h.hex();
}

inline std::vector<std::uint32_t> descriptor_feature(const Manifest& m, const ManifestEntry& e,
                                                     const ExperimentConfig& cfg) {
  const auto canvas = canvas_preset(cfg.canvas);
  GrayImage img = load_pgm(m.resolve(e.image));
  if (!e.landmarks.empty()) {
    const auto lm = load_landmarks(m.resolve(e.landmarks));
    const auto t = solve_similarity(lm.centroid(landmarks::left_eye()), lm.centroid(landmarks::right_eye()),
                                    {canvas.eye_left, canvas.eye_right}, canvas.size);
    img = warp(img, t);
  } else if (img.width() != canvas.size.cols || img.height() != canvas.size.rows) {
    throw GeometryError(e.image + ": no landmarks and image is not " + std::to_string(canvas.size.cols) + "x" +
                        std::to_string(canvas.size.rows));
  }
  return regional_histograms(encode(img, cfg.descriptor), cfg.grid).counts;
}

struct EntrySets {
  std::vector<std::size_t> gallery, probes, train, needed;  // manifest indices
  std::vector<std::size_t> slot;                            // manifest index -> row in needed, or npos
};

inline EntrySets entry_sets(const Manifest& m, bool ident, bool verif) {
  EntrySets s;
  std::vector<char> use(m.entries.size(), 0);
  if (ident) {
    s.gallery = m.with_role(Role::gallery);
    s.probes = m.with_role(Role::probe);
    for (auto i : s.gallery) use[i] = 1;
    for (auto i : s.probes) use[i] = 1;
  }
  if (verif) {
    for (const auto& p : m.pairs) use[p.a] = use[p.b] = 1;
  }
  s.train = m.with_role(Role::train);
  if (s.train.empty()) {
    if (ident) {
      s.train = s.gallery;
    } else {
      for (std::size_t i = 0; i < use.size(); ++i) {
        if (use[i]) s.train.push_back(i);
      }
    }
  }
  for (auto i : s.train) use[i] = 1;
  s.slot.assign(m.entries.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < use.size(); ++i) {
    if (!use[i]) continue;
    s.slot[i] = s.needed.size();
    s.needed.push_back(i);
  }
  return s;
}

/// Per-pair and probe x gallery scores, higher meaning more similar.
struct ScoreSet {
  Eigen::MatrixXd ident;  // probes x gallery
  std::vector<double> pairs;
};

template <typename Fn>
ScoreSet score_all(const EntrySets& s, const Manifest& m, bool ident, bool verif, int threads, Fn&& sim) {
  ScoreSet out;
  if (ident) {
    out.ident.resize(static_cast<Eigen::Index>(s.probes.size()), static_cast<Eigen::Index>(s.gallery.size()));
    parallel_for(s.probes.size(), threads, [&](std::size_t p) {
      for (std::size_t g = 0; g < s.gallery.size(); ++g) {
        out.ident(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(g)) =
            sim(s.slot[s.probes[p]], s.slot[s.gallery[g]]);
      }
    });
  }
  if (verif) {
    out.pairs.resize(m.pairs.size());
    parallel_for(m.pairs.size(), threads,
                 [&](std::size_t i) { out.pairs[i] = sim(s.slot[m.pairs[i].a], s.slot[m.pairs[i].b]); });
  }
  return out;
}

inline std::string json_number_key(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

inline ProtocolResult run_protocol(const Manifest& m, const ExperimentConfig& cfg, const ProtocolOptions& opt = {}) {
  cfg.validate();
  m.require_files();
  const bool have_ident = !m.with_role(Role::gallery).empty() && !m.with_role(Role::probe).empty();
  const bool have_pairs = !m.pairs.empty();
  bool ident = have_ident, verif = have_pairs;
  if (opt.task == ProtocolTask::identification) {
    if (!have_ident) throw InputError("identification needs gallery and probe entries in the manifest");
    verif = false;
  } else if (opt.task == ProtocolTask::verification) {
    if (!have_pairs) throw InputError("verification needs a pair list in the manifest");
    ident = false;
  } else if (!ident && !verif) {
    throw InputError("manifest has neither gallery/probe entries nor pairs");
  }
  if (cfg.is_mdml()) {
    for (const auto& e : m.entries) {
      if (e.landmarks.empty()) throw InputError(e.image + ": mdml pipelines need landmarks");
    }
  }

  detail::StageClock clock;
  ProtocolResult res;
  io::json outputs = io::json::array();
  const auto s = detail::entry_sets(m, ident, verif);
  const std::string config_hash = cfg.hash();
  clock.start("digest");
  const std::string digest = detail::manifest_digest(m);
  const io::json stamp{{"config_hash", config_hash}, {"manifest_digest", digest}};
  // block files are written as <stem>.bin + <stem>.json
  const auto art_blocks = [&](const std::string& name) {
    const auto p = (std::filesystem::path(opt.artifacts) / name).string();
    outputs.push_back(p + ".bin");
    outputs.push_back(p + ".json");
    return p;
  };
  const auto art_file = [&](const std::string& name) {
    const auto p = (std::filesystem::path(opt.artifacts) / name).string();
    outputs.push_back(p);
    return p;
  };

  detail::ScoreSet scores;
  io::json pipeline_info;
  if (!cfg.is_mdml()) {
    clock.start("encode");
    std::vector<std::vector<std::uint32_t>> feats(s.needed.size());
    parallel_for(s.needed.size(), opt.threads,
                 [&](std::size_t i) { feats[i] = detail::descriptor_feature(m, m.entries[s.needed[i]], cfg); });
    if (!opt.artifacts.empty()) {
      io::BlockWriter w;
      std::vector<std::uint32_t> flat;
      for (const auto& f : feats) flat.insert(flat.end(), f.begin(), f.end());
      w.add("histograms", flat.data(), flat.size(), {feats.size(), feats.empty() ? 0 : feats[0].size()});
      io::json h = stamp;
      h["schema"] = "dcpkit.histograms/1";
      h["layout"] = "row-major entries x (region, channel, bin)";
      h["entries"] = s.needed;
      w.save(art_blocks("features"), h);
    }
    clock.start("score");
    scores = detail::score_all(s, m, ident, verif, opt.threads, [&](std::size_t a, std::size_t b) {
      return -chi_squared(feats[a], feats[b]);
    });
    pipeline_info = {{"kind", "descriptor"}, {"descriptor", cfg.pipeline}, {"distance", "chi-squared"},
                     {"feature_length", feats.empty() ? 0 : feats[0].size()}};
  } else {
    const bool use_plda = cfg.pipeline == "mdml-plda";
    clock.start("encode");
    std::vector<MdmlCodes> codes(s.needed.size());
    parallel_for(s.needed.size(), opt.threads, [&](std::size_t i) {
      const auto& e = m.entries[s.needed[i]];
      codes[i] = prepare_mdml(load_pgm(m.resolve(e.image)), load_landmarks(m.resolve(e.landmarks)), cfg.mdml);
    });
    std::vector<std::size_t> train_rows;
    for (auto t : s.train) train_rows.push_back(s.slot[t]);
    if (train_rows.size() < 2) throw DegenerateError("training set needs at least two entries");
    std::map<std::string, int> subject_ids;
    std::vector<int> train_labels;
    for (auto t : s.train) train_labels.push_back(subject_ids.emplace(m.entries[t].subject, static_cast<int>(subject_ids.size())).first->second);

    const auto nf = cfg.features.size();
    std::vector<detail::ScoreSet> per_feature(nf);
    std::vector<Eigen::MatrixXd> projected(nf);  // kept only for linear fusion
    std::vector<std::optional<PldaScorer>> scorers(nf);
    io::json feature_info = io::json::array();
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const FeatureName name = cfg.features[fi];
      clock.start("features");
      const auto d = static_cast<Eigen::Index>(mdml_feature(codes[train_rows[0]], name, cfg.mdml).values.size());
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(
          static_cast<Eigen::Index>(s.needed.size()), d);
      parallel_for(s.needed.size(), opt.threads, [&](std::size_t i) {
        const auto f = mdml_feature(codes[i], name, cfg.mdml);
        X.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXf>(f.values.data(), static_cast<Eigen::Index>(f.values.size()));
      });
      clock.start("train");
      Eigen::MatrixXf Xt(static_cast<Eigen::Index>(train_rows.size()), d);
      for (std::size_t r = 0; r < train_rows.size(); ++r) Xt.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(train_rows[r]));
      const Eigen::Index k = std::min<Eigen::Index>({static_cast<Eigen::Index>(cfg.pca_dim), Xt.rows() - 1, d});
      auto pca = pca_fit(Xt, k);
      Xt.resize(0, 0);
      const auto rank = well_conditioned_rank(pca);
      if (rank < 1) throw ConditioningError(to_string(name) + ": training features have no variance");
      if (rank < pca.output_dim()) pca = truncate(pca, rank);
      clock.start("project");
      Eigen::MatrixXd Y(X.rows(), pca.output_dim());
      parallel_for(s.needed.size(), opt.threads, [&](std::size_t i) {
        const auto row = X.row(static_cast<Eigen::Index>(i)).transpose();
        Y.row(static_cast<Eigen::Index>(i)) = (use_plda ? pca_project(pca, row) : wpca_project(pca, row)).transpose();
      });
      X.resize(0, 0);
      io::json fj{{"name", to_string(name)}, {"input_dim", d}, {"subspace_dim", pca.output_dim()}};
      std::optional<PldaScorer> scorer;
      if (use_plda) {
        clock.start("train");
        Eigen::MatrixXd Yt(static_cast<Eigen::Index>(train_rows.size()), Y.cols());
        for (std::size_t r = 0; r < train_rows.size(); ++r) Yt.row(static_cast<Eigen::Index>(r)) = Y.row(static_cast<Eigen::Index>(train_rows[r]));
        PldaOptions po = cfg.plda;
        po.d_h = std::min(po.d_h, Y.cols());
        po.d_w = std::min(po.d_w, Y.cols());
        po.seed = cfg.seed;
        const auto model = plda_fit(Yt, train_labels, po);
        fj["plda_d_h"] = po.d_h;
        fj["plda_d_w"] = po.d_w;
        fj["plda_final_loglik"] = model.training_loglik.empty() ? 0.0 : model.training_loglik.back();
        if (!opt.artifacts.empty()) io::save_plda(art_blocks("models/" + to_string(name) + ".plda"), model, stamp);
        scorer.emplace(model);
      }
      if (!opt.artifacts.empty()) {
        io::save_pca(art_blocks("models/" + to_string(name) + (use_plda ? ".pca" : ".wpca")), pca, !use_plda, stamp);
        io::BlockWriter w;
        w.add_matrix("projections", Y);
        io::json h = stamp;
        h["schema"] = "dcpkit.projections/1";
        h["feature"] = to_string(name);
        h["entries"] = s.needed;
        w.save(art_blocks("features/" + to_string(name) + ".proj"), h);
      }
      clock.start("score");
      per_feature[fi] = detail::score_all(s, m, ident, verif, opt.threads, [&](std::size_t a, std::size_t b) {
        if (scorer) return (*scorer)(Y.row(static_cast<Eigen::Index>(a)).transpose(), Y.row(static_cast<Eigen::Index>(b)).transpose());
        return cosine_sim(Y.row(static_cast<Eigen::Index>(a)), Y.row(static_cast<Eigen::Index>(b)));
      });
      if (cfg.fusion.mode == FusionMode::linear) {
        projected[fi] = std::move(Y);
        scorers[fi] = std::move(scorer);
      }
      feature_info.push_back(std::move(fj));
    }

    clock.start("fusion");
    FusionModel fusion;
    if (cfg.fusion.mode == FusionMode::average) {
      fusion = fusion_fit(Eigen::MatrixXd(0, static_cast<Eigen::Index>(nf)), {}, cfg.fusion);
    } else {
      // all training pairs, scored by the same per-feature models
      std::vector<std::pair<std::size_t, std::size_t>> tp;
      std::vector<int> labels;
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        for (std::size_t j = i + 1; j < train_rows.size(); ++j) {
          tp.emplace_back(train_rows[i], train_rows[j]);
          labels.push_back(train_labels[i] == train_labels[j] ? 1 : 0);
        }
      }
      Eigen::MatrixXd S(static_cast<Eigen::Index>(tp.size()), static_cast<Eigen::Index>(nf));
      for (std::size_t fi = 0; fi < nf; ++fi) {
        const auto& Y = projected[fi];
        const auto& scorer = scorers[fi];
        parallel_for(tp.size(), opt.threads, [&](std::size_t i) {
          const auto a = static_cast<Eigen::Index>(tp[i].first), b = static_cast<Eigen::Index>(tp[i].second);
          S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fi)) =
              scorer ? (*scorer)(Y.row(a).transpose(), Y.row(b).transpose()) : cosine_sim(Y.row(a), Y.row(b));
        });
      }
      fusion = fusion_fit(S, labels, cfg.fusion);
    }
    if (!opt.artifacts.empty()) {
      auto fj = io::fusion_to_json(fusion);
      fj.update(stamp);
      io::write_json(art_file("models/fusion.json"), fj);
    }
    Eigen::VectorXd w(static_cast<Eigen::Index>(nf));
    for (std::size_t fi = 0; fi < nf; ++fi) w[static_cast<Eigen::Index>(fi)] = fusion.weights[fi];
    if (ident) {
      scores.ident = Eigen::MatrixXd::Constant(per_feature[0].ident.rows(), per_feature[0].ident.cols(), fusion.bias);
      for (std::size_t fi = 0; fi < nf; ++fi) scores.ident += w[static_cast<Eigen::Index>(fi)] * per_feature[fi].ident;
    }
    if (verif) {
      scores.pairs.assign(m.pairs.size(), fusion.bias);
      for (std::size_t i = 0; i < m.pairs.size(); ++i) {
        for (std::size_t fi = 0; fi < nf; ++fi) scores.pairs[i] += fusion.weights[fi] * per_feature[fi].pairs[i];
      }
    }
    pipeline_info = {{"kind", "mdml"},
                     {"classifier", use_plda ? "pca+plda" : "wpca+cosine"},
                     {"training_entries", s.train.size()},
                     {"features", feature_info},
                     {"fusion", {{"mode", to_string(fusion.mode)}, {"weights", fusion.weights}, {"bias", fusion.bias}}}};
  }

  clock.start("evaluate");
  io::json report{{"schema", "dcpkit.report/1"},
                  {"config_hash", config_hash},
                  {"manifest_digest", digest},
                  {"config", cfg.to_json()},
                  {"pipeline", pipeline_info}};
  if (ident) {
    std::vector<std::string> gids, pids;
    for (auto g : s.gallery) gids.push_back(m.entries[g].subject);
    for (auto p : s.probes) pids.push_back(m.entries[p].subject);
    auto r = identify(scores.ident, gids, pids, ScoreOrder::higher_is_better, cfg.k_max);
    io::json rank_k = io::json::object();
    for (std::size_t k = 0; k < r.rank_rates.size(); ++k) rank_k[std::to_string(k + 1)] = r.rank_rates[k];
    std::vector<std::string> missing;
    for (int p : r.missing) missing.push_back(m.entries[s.probes[static_cast<std::size_t>(p)]].image);
    std::vector<std::size_t> best;
    for (int b : r.best_match) best.push_back(s.gallery[static_cast<std::size_t>(b)]);
    report["identification"] = {{"n_gallery", s.gallery.size()}, {"n_probes", s.probes.size()},
                                {"rank_k", rank_k},          {"true_rank", r.true_rank},
                                {"best_match_entry", best},   {"missing", missing}};
    res.identification = std::move(r);
  }
  if (verif) {
    std::vector<int> labels, folds;
    bool all_folded = true;
    for (const auto& p : m.pairs) {
      labels.push_back(p.same ? 1 : 0);
      folds.push_back(p.fold);
      all_folded = all_folded && p.fold >= 0;
    }
    auto r = verify(scores.pairs, labels, cfg.far_targets, all_folded ? folds : std::vector<int>{});
    io::json roc_far = io::json::array(), roc_vr = io::json::array(), roc_t = io::json::array();
    for (const auto& p : r.roc) {
      roc_far.push_back(p.far);
      roc_vr.push_back(p.vr);
      roc_t.push_back(std::isfinite(p.threshold) ? io::json(p.threshold) : io::json(nullptr));
    }
    io::json vr = io::json::object();
    for (const auto& [far, v] : r.vr_at_far) vr[detail::json_number_key(far)] = v;
    io::json vj{{"n_pairs", m.pairs.size()}, {"n_same", r.n_same}, {"n_different", r.n_different},
                {"auc", r.auc},              {"vr_at_far", vr},    {"roc", {{"far", roc_far}, {"vr", roc_vr}, {"threshold", roc_t}}}};
    if (r.accuracy_mean) {
      vj["accuracy_mean"] = *r.accuracy_mean;
      vj["accuracy_se"] = *r.accuracy_se;
      vj["fold_accuracy"] = r.fold_accuracy;
    }
    report["verification"] = vj;
    res.verification = std::move(r);
  }
  clock.stop();
  res.report = std::move(report);
  res.run = {{"schema", "dcpkit.run/1"}, {"config_hash", config_hash}, {"manifest_digest", digest},
             {"threads", opt.threads},  {"outputs", outputs},          {"timings_ms", clock.json()}};
  return res;
}

/// ROC samples as CSV (far,vr,threshold).
inline std::string roc_csv(const VerificationReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "far,vr,threshold\n";
  for (const auto& p : r.roc) {
    os << p.far << ',' << p.vr << ',';
    if (std::isfinite(p.threshold)) os << p.threshold;
    else os << "inf";
    os << '\n';
  }
  return os.str();
}

}  // namespace dcpkit
