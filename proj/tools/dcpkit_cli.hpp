#pragma once

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dcpkit/descriptors.hpp"
#include "dcpkit/entropy.hpp"
#include "dcpkit/error.hpp"
#include "dcpkit/filtering.hpp"
#include "dcpkit/io.hpp"
#include "dcpkit/learning.hpp"
#include "dcpkit/manifest.hpp"
#include "dcpkit/parallel.hpp"
#include "dcpkit/protocol.hpp"
#include "dcpkit/representation.hpp"
#include "dcpkit/synth.hpp"

namespace dcpkit::cli {

using io::json;
namespace fs = std::filesystem;

namespace detail {

inline void emit(std::ostream& out, const json& j, const std::string& path) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    io::write_json(path, j);
  }
}

inline std::string strip_suffix(std::string s, const std::string& suffix) {
  if (s.ends_with(suffix)) s.resize(s.size() - suffix.size());
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split(s)) {
    try {
      out.push_back(std::stod(t));
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + t + "'");
    }
  }
  return out;
}

/// Training entries: role "train" if present, else every entry.
inline std::vector<std::size_t> training_entries(const Manifest& m) {
  auto t = m.with_role(Role::train);
  if (t.empty()) {
    for (std::size_t i = 0; i < m.entries.size(); ++i) t.push_back(i);
  }
  return t;
}

inline Eigen::MatrixXf mdml_matrix(const Manifest& m, const std::vector<std::size_t>& rows, FeatureName name,
                                   const MdDcpsConfig& cfg, int threads) {
  std::vector<std::vector<float>> feats(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const auto& e = m.entries[rows[i]];
    if (e.landmarks.empty()) throw InputError(e.image + ": landmarks required");
    const auto codes = prepare_mdml(load_pgm(m.resolve(e.image)), load_landmarks(m.resolve(e.landmarks)), cfg);
    feats[i] = mdml_feature(codes, name, cfg).values;
  });
  Eigen::MatrixXf X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feats.at(0).size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXf>(feats[i].data(), static_cast<Eigen::Index>(feats[i].size()));
  }
  return X;
}

inline std::string subset_string(const DirectionSubset& s) {
  std::string out;
  for (int d : s) out += std::to_string(d);
  return out;
}

}  // namespace detail

/// Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dual-Cross Patterns descriptors, MDML-DCPs features, and face matching protocols"};
  app.name("dcpkit");
  app.require_subcommand(1);
  app.fallthrough(false);

  int threads = 0;
  const auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker threads (default: DCPKIT_THREADS or 1)")->check(CLI::PositiveNumber);
  };

  // filter
  std::string f_image, f_outdir, f_op = "fdg";
  double f_sigma = 1.0;
  int f_orient = 4;
  bool f_tt = false;
  TTParams f_ttp;
  auto* filter = app.add_subcommand("filter", "photometric normalization (tt) or FDG filter bank (fdg)");
  filter->add_option("image,--image", f_image, "input P5 PGM")->required();
  filter->add_option("--op", f_op, "tt|fdg")->check(CLI::IsMember({"tt", "fdg"}));
  filter->add_option("--out-dir", f_outdir, "output directory (default: next to the image)");
  filter->add_option("--sigma", f_sigma, "FDG sigma in pixels");
  filter->add_option("--orientations", f_orient, "number of FDG orientations over [0, pi)")->check(CLI::PositiveNumber);
  filter->add_flag("--tt", f_tt, "with --op fdg: normalize photometrically first");
  filter->add_option("--gamma", f_ttp.gamma, "TT gamma");
  filter->add_option("--sigma1", f_ttp.sigma1, "TT inner DoG sigma");
  filter->add_option("--sigma2", f_ttp.sigma2, "TT outer DoG sigma");
  filter->add_option("--alpha", f_ttp.alpha, "TT contrast equalization exponent");
  filter->add_option("--tau", f_ttp.tau, "TT clip threshold");

  // encode
  std::string e_image, e_desc = "dcp", e_interp = "bilinear", e_out, e_landmarks, e_canvas = "feret128";
  double e_rin = 4.0, e_rex = 6.0, e_ltp = 5.0;
  int e_grid = 9;
  auto* encode_cmd = app.add_subcommand("encode", "descriptor code map and regional histograms");
  encode_cmd->add_option("image", e_image, "input P5 PGM")->required();
  encode_cmd->add_option("--descriptor", e_desc, "dcp|dcp1|dcp2|lbp|mslbp|ltp");
  encode_cmd->add_option("--rin", e_rin, "inner radius (LBP/LTP radius, first MsLBP radius)");
  encode_cmd->add_option("--rex", e_rex, "outer radius (second MsLBP radius)");
  encode_cmd->add_option("--grid", e_grid, "N for an N x N region grid");
  encode_cmd->add_option("--ltp-t", e_ltp, "LTP threshold");
  encode_cmd->add_option("--interp", e_interp, "bilinear|nearest");
  encode_cmd->add_option("--landmarks", e_landmarks, "49-point landmarks; the image is first aligned to --canvas");
  encode_cmd->add_option("--canvas", e_canvas, "canvas preset used with --landmarks");
  encode_cmd->add_option("--out", e_out, "output stem (writes <stem>.bin and <stem>.json)");

  // represent
  std::string r_image, r_landmarks, r_preset = "feret", r_out, r_config;
  auto* represent = app.add_subcommand("represent", "MDML-DCPs features (nine named vectors)");
  represent->add_option("--image", r_image, "input P5 PGM")->required();
  represent->add_option("--landmarks", r_landmarks, "49-point landmarks")->required();
  represent->add_option("--preset", r_preset, "feret|lfw");
  represent->add_option("--config", r_config, "experiment config JSON (its mdml section is used)");
  represent->add_option("--out", r_out, "output stem, e.g. face.mdml")->required();
  add_threads(represent);

  // entropy-scan
  std::string s_corpus, s_out;
  double s_rin = 2.0, s_rex = 3.0;
  std::vector<std::string> s_sweep;
  auto* escan = app.add_subcommand("entropy-scan", "mean summed joint entropy of every grouping mode");
  escan->add_option("--corpus", s_corpus, "directory of P5 PGM images")->required();
  escan->add_option("--rin", s_rin, "inner radius");
  escan->add_option("--rex", s_rex, "outer radius");
  escan->add_option("--sweep", s_sweep, "two comma lists: inner radii and outer radii, zipped")->expected(2);
  escan->add_option("--out", s_out, "report path (default stdout)");
  add_threads(escan);

  // train-wpca / train-plda
  std::string t_manifest, t_feature = "H1", t_preset = "feret", t_out, t_config;
  int t_dim = 600, t_dh = 100, t_dw = 100, t_iter = 50;
  std::uint64_t t_seed = 0;
  bool t_no_whiten = false;
  auto* twpca = app.add_subcommand("train-wpca", "fit a (whitened) PCA model on one MDML feature");
  auto* tplda = app.add_subcommand("train-plda", "fit PCA followed by PLDA on one MDML feature");
  for (auto* sub : {twpca, tplda}) {
    sub->add_option("--manifest", t_manifest, "dataset manifest; role=train entries, or all entries")->required();
    sub->add_option("--feature", t_feature, "H1|H2|H3|C1..C6");
    sub->add_option("--preset", t_preset, "feret|lfw");
    sub->add_option("--config", t_config, "experiment config JSON (its mdml section is used)");
    sub->add_option("--dim", t_dim, "PCA subspace dimension (clipped to n-1)")->check(CLI::PositiveNumber);
    sub->add_option("--out", t_out, "output stem")->required();
    sub->add_option("--seed", t_seed, "seed");
    add_threads(sub);
  }
  twpca->add_flag("--no-whiten", t_no_whiten, "plain PCA");
  tplda->add_option("--d-h", t_dh, "identity subspace dimension")->check(CLI::PositiveNumber);
  tplda->add_option("--d-w", t_dw, "within-class subspace dimension")->check(CLI::PositiveNumber);
  tplda->add_option("--iterations", t_iter, "EM iterations")->check(CLI::PositiveNumber);

  // train-fusion
  std::string u_scores, u_mode = "linear", u_out;
  double u_c = 1.0;
  int u_iter = 2000;
  auto* tfusion = app.add_subcommand("train-fusion", "fit score fusion weights");
  tfusion->add_option("--scores", u_scores, "JSON {\"scores\": [[s1..sk], ...], \"labels\": [1|0, ...]}")->required();
  tfusion->add_option("--mode", u_mode, "average|linear");
  tfusion->add_option("--c", u_c, "hinge cost");
  tfusion->add_option("--iterations", u_iter, "optimizer iterations");
  tfusion->add_option("--out", u_out, "model path (default stdout)");

  // identify / verify
  std::string p_manifest, p_pipeline, p_out, p_config, p_artifacts, p_roc_csv, p_preset, p_fusion;
  double p_rin = 0.0, p_rex = 0.0, p_c = 0.0;
  int p_grid = 0, p_pca = 0, p_kmax = 0;
  std::uint64_t p_seed = 0;
  auto* ident = app.add_subcommand("identify", "closed-set identification over gallery and probe entries");
  auto* verif = app.add_subcommand("verify", "pair verification: ROC, AUC, VR@FAR, k-fold accuracy");
  for (auto* sub : {ident, verif}) {
    sub->add_option("--manifest", p_manifest, "dataset manifest")->required();
    sub->add_option("--pipeline", p_pipeline, "dcp|dcp1|dcp2|lbp|mslbp|ltp|mdml-wpca|mdml-plda");
    sub->add_option("--config", p_config, "experiment config JSON; flags below override it");
    sub->add_option("--out", p_out, "report path (default stdout); stage timings go to <stem>.run.json");
    sub->add_option("--artifacts", p_artifacts, "directory for features and models");
    sub->add_option("--rin", p_rin, "inner radius");
    sub->add_option("--rex", p_rex, "outer radius");
    sub->add_option("--grid", p_grid, "descriptor region grid");
    sub->add_option("--preset", p_preset, "mdml preset feret|lfw");
    sub->add_option("--pca-dim", p_pca, "PCA/WPCA dimension");
    sub->add_option("--fusion", p_fusion, "average|linear");
    sub->add_option("--c", p_c, "linear fusion cost");
    sub->add_option("--k-max", p_kmax, "largest reported rank");
    sub->add_option("--seed", p_seed, "seed");
    add_threads(sub);
  }
  verif->add_option("--roc-csv", p_roc_csv, "also write ROC samples as CSV");

  // benchmark
  std::string b_desc = "dcp,lbp", b_out;
  int b_size = 1000, b_repeats = 3;
  double b_rin = 4.0, b_rex = 6.0;
  std::uint64_t b_seed = 0;
  auto* bench = app.add_subcommand("benchmark", "single-thread encoder wall times on a noise image");
  bench->add_option("--descriptor", b_desc, "comma list; the ratio is first over second");
  bench->add_option("--size", b_size, "image side length")->check(CLI::PositiveNumber);
  bench->add_option("--repeats", b_repeats, "timed runs per descriptor (minimum is reported)")->check(CLI::PositiveNumber);
  bench->add_option("--rin", b_rin, "inner radius");
  bench->add_option("--rex", b_rex, "outer radius");
  bench->add_option("--seed", b_seed, "noise seed");
  bench->add_option("--out", b_out, "report path (default stdout)");

  // synth-corpus
  std::string c_out, c_variation = "none";
  int c_ids = 20, c_per = 5, c_train = 0;
  double c_noise = 2.0;
  std::uint64_t c_seed = 0;
  auto* synth = app.add_subcommand("synth-corpus", "write a synthetic face corpus with manifest");
  synth->add_option("--out", c_out, "output directory")->required();
  synth->add_option("--seed", c_seed, "seed");
  synth->add_option("--ids", c_ids, "identities");
  synth->add_option("--per-id", c_per, "captures per identity");
  synth->add_option("--train-ids", c_train, "extra training identities");
  synth->add_option("--variation", c_variation, "comma list of none|gain|noise|ramp|jitter");
  synth->add_option("--noise-sigma", c_noise, "noise standard deviation when noise is selected");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      const auto subs = app.get_subcommands();
      err << (subs.empty() ? app.help() : subs.front()->help());
      return static_cast<int>(ErrorCode::config);
    }
    const int nthreads = resolve_threads(threads);

    if (*filter) {
      GrayImage img = load_pgm(f_image);
      const fs::path src(f_image);
      const fs::path dir = f_outdir.empty() ? src.parent_path() : fs::path(f_outdir);
      if (!dir.empty()) fs::create_directories(dir);
      const std::string stem = (dir / src.stem()).string();
      if (f_op == "tt" || f_tt) img = tt_normalize(img, f_ttp);
      if (f_op == "tt") {
        save_pgm(stem + "_tt.pgm", img);
        out << json{{"outputs", {stem + "_tt.pgm"}}, {"op", "tt"}}.dump(2) << '\n';
        return 0;
      }
      const auto bank = FDGBank::with_sigma(f_sigma, static_cast<std::size_t>(f_orient));
      bank.validate();
      const auto resp = fdg_response(img, bank);
      json files = json::array();
      io::BlockWriter raw;
      for (std::size_t k = 0; k < resp.size(); ++k) {
        // PGM holds the [0,255] rescaled view, the block file the signed response
        const auto p = stem + "_fdg" + std::to_string(k) + ".pgm";
        save_pgm(p, rescale_to_255(resp[k]));
        files.push_back({{"path", p}, {"theta", bank.orientations[k]}});
        raw.add("fdg" + std::to_string(k), resp[k].pixels().data(), resp[k].pixels().size(),
                {static_cast<std::size_t>(resp[k].height()), static_cast<std::size_t>(resp[k].width())});
      }
      raw.save(stem + "_fdg", {{"schema", "dcpkit.fdg/1"}, {"sigma", bank.sigma}, {"orientations", bank.orientations},
                               {"tt", f_tt}, {"layout", "row-major height x width"}});
      out << json{{"op", "fdg"},
                  {"outputs", files},
                  {"responses", {stem + "_fdg.bin", stem + "_fdg.json"}},
                  {"sigma", bank.sigma},
                  {"tt", f_tt}}
                 .dump(2)
          << '\n';
      return 0;
    }

    if (*encode_cmd) {
      DescriptorParams p;
      p.kind = parse_descriptor(e_desc);
      p.r_in = e_rin;
      p.r_ex = e_rex;
      p.ltp_t = e_ltp;
      p.interp = parse_interpolation(e_interp);
      if (p.kind != DescriptorKind::lbp && p.kind != DescriptorKind::ltp) SamplingGeometry(p.r_in, p.r_ex);
      GrayImage img = load_pgm(e_image);
      if (!e_landmarks.empty()) {
        const auto canvas = canvas_preset(e_canvas);
        const auto lm = load_landmarks(e_landmarks);
        img = warp(img, solve_similarity(lm.centroid(landmarks::left_eye()), lm.centroid(landmarks::right_eye()),
                                         {canvas.eye_left, canvas.eye_right}, canvas.size));
      }
      const auto f = regional_histograms(encode(img, p), e_grid);
      const std::string stem = e_out.empty() ? (fs::path(e_image).replace_extension().string() + "." + e_desc) : e_out;
      json meta{{"descriptor", e_desc}, {"r_in", p.r_in}, {"r_ex", p.r_ex}, {"interpolation", e_interp},
                {"width", img.width()}, {"height", img.height()}};
      if (p.kind == DescriptorKind::ltp) meta["ltp_t"] = p.ltp_t;
      meta["config_hash"] = io::json_hash(meta);
      io::save_histogram_feature(stem, f, meta);
      out << json{{"feature", stem + ".bin"}, {"sidecar", stem + ".json"}, {"length", f.counts.size()},
                  {"bins_per_region", f.block_size()}, {"config_hash", meta["config_hash"]}}
                 .dump(2)
          << '\n';
      return 0;
    }

    if (*represent) {
      ExperimentConfig ec;
      ec.set_pipeline("mdml-wpca");
      ec.set_preset(r_preset);
      if (!r_config.empty()) {
        auto j = io::read_json(r_config);
        j["pipeline"] = "mdml-wpca";
        ec = ExperimentConfig::from_json(j);
      }
      ec.validate();
      const auto img = load_pgm(r_image);
      const auto lm = load_landmarks(r_landmarks);
      const auto codes = prepare_mdml(img, lm, ec.mdml);
      std::vector<FeatureVector> feats(ec.features.size());
      parallel_for(feats.size(), nthreads, [&](std::size_t i) { feats[i] = mdml_feature(codes, ec.features[i], ec.mdml); });
      // the representation depends on the mdml section only
      const std::string hash = io::json_hash(ec.to_json().at("mdml"));
      io::save_mdml(r_out, feats, {{"config_hash", hash}, {"preset", ec.preset}});
      json lengths = json::object();
      for (const auto& f : feats) lengths[to_string(f.name)] = f.values.size();
      out << json{{"outputs", {r_out + ".bin", r_out + ".json"}}, {"lengths", lengths}, {"config_hash", hash}}.dump(2)
          << '\n';
      return 0;
    }

    if (*escan) {
      std::vector<std::string> files;
      if (!fs::is_directory(s_corpus)) throw InputError("corpus directory not found: " + s_corpus);
      for (const auto& e : fs::directory_iterator(s_corpus)) {
        if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path().string());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw InputError("no .pgm files in " + s_corpus);
      std::vector<GrayImage> corpus(files.size());
      parallel_for(files.size(), nthreads, [&](std::size_t i) { corpus[i] = load_pgm(files[i]); });
      std::vector<std::pair<double, double>> radii{{s_rin, s_rex}};
      if (!s_sweep.empty()) {
        const auto ri = detail::split_doubles(s_sweep[0]);
        const auto re = detail::split_doubles(s_sweep[1]);
        if (ri.size() != re.size() || ri.empty()) throw ConfigError("--sweep lists must have equal nonzero length");
        radii.clear();
        for (std::size_t i = 0; i < ri.size(); ++i) radii.emplace_back(ri[i], re[i]);
      }
      json scans = json::array();
      for (const auto& [ri, re] : radii) {
        const SamplingGeometry g(ri, re);
        // per-image work in parallel, reduction in corpus order
        std::vector<EntropyReport> parts(corpus.size());
        parallel_for(corpus.size(), nthreads, [&](std::size_t i) { parts[i] = entropy_scan({corpus[i]}, g); });
        EntropyReport rep = parts[0];
        for (auto& v : rep.per_mode) v = 0.0;
        for (const auto& p : parts) {
          for (std::size_t k = 0; k < rep.per_mode.size(); ++k) rep.per_mode[k] += p.per_mode[k];
        }
        for (auto& v : rep.per_mode) v /= static_cast<double>(corpus.size());
        rep.corpus_size = corpus.size();
        json modes = json::array();
        for (const auto& m : rep.modes) {
          modes.push_back({{"id", m.canonical_id},
                           {"subset_a", detail::subset_string(m.subset_a)},
                           {"subset_b", detail::subset_string(m.subset_b)},
                           {"mean_entropy", rep.per_mode[static_cast<std::size_t>(m.canonical_id)]}});
        }
        const auto ranking = rep.ranking();
        const auto dc_rank = std::find(ranking.begin(), ranking.end(), dual_cross_id()) - ranking.begin() + 1;
        scans.push_back({{"r_in", ri},
                         {"r_ex", re},
                         {"modes", modes},
                         {"ranking", ranking},
                         {"dual_cross_id", dual_cross_id()},
                         {"dual_cross_rank", dc_rank}});
      }
      detail::emit(out, {{"schema", "dcpkit.entropy/1"}, {"corpus_size", corpus.size()}, {"scans", scans}}, s_out);
      return 0;
    }

    if (*twpca || *tplda) {
      const bool plda = static_cast<bool>(*tplda);
      ExperimentConfig ec;
      ec.set_pipeline(plda ? "mdml-plda" : "mdml-wpca");
      ec.set_preset(t_preset);
      if (!t_config.empty()) {
        auto j = io::read_json(t_config);
        j["pipeline"] = ec.pipeline;
        ec = ExperimentConfig::from_json(j);
      }
      ec.validate();
      const auto name = parse_feature_name(t_feature);
      const auto m = load_manifest(t_manifest);
      m.require_files();
      const auto rows = detail::training_entries(m);
      if (rows.size() < 2) throw DegenerateError("need at least two training entries");
      const auto X = detail::mdml_matrix(m, rows, name, ec.mdml, nthreads);
      const Eigen::Index k = std::min<Eigen::Index>({t_dim, X.rows() - 1, X.cols()});
      auto pca = pca_fit(X, k);
      const auto rank = well_conditioned_rank(pca);
      if (rank < 1) throw ConditioningError("training features have no variance");
      if (rank < pca.output_dim()) pca = truncate(pca, rank);
      json meta{{"config_hash", io::json_hash(ec.to_json().at("mdml"))}, {"feature", t_feature}, {"seed", t_seed},
                {"training_entries", rows.size()}};
      json report{{"feature", t_feature}, {"input_dim", X.cols()}, {"subspace_dim", pca.output_dim()},
                  {"training_entries", rows.size()}};
      if (!plda) {
        io::save_pca(t_out, pca, !t_no_whiten, meta);
        report["outputs"] = {t_out + ".bin", t_out + ".json"};
      } else {
        std::map<std::string, int> ids;
        std::vector<int> labels;
        for (auto r : rows) labels.push_back(ids.emplace(m.entries[r].subject, static_cast<int>(ids.size())).first->second);
        const Eigen::MatrixXd Y = project_rows(pca, X, false);
        PldaOptions po;
        po.d_h = std::min<Eigen::Index>(t_dh, Y.cols());
        po.d_w = std::min<Eigen::Index>(t_dw, Y.cols());
        po.iterations = t_iter;
        po.seed = t_seed;
        const auto model = plda_fit(Y, labels, po);
        io::save_pca(t_out + ".pca", pca, false, meta);
        io::save_plda(t_out + ".plda", model, meta);
        report["d_h"] = po.d_h;
        report["d_w"] = po.d_w;
        report["training_loglik"] = model.training_loglik;
        report["outputs"] = {t_out + ".pca.bin", t_out + ".pca.json", t_out + ".plda.bin", t_out + ".plda.json"};
      }
      out << report.dump(2) << '\n';
      return 0;
    }

    if (*tfusion) {
      const auto j = io::read_json(u_scores);
      std::vector<std::vector<double>> rows;
      std::vector<int> labels;
      try {
        rows = j.at("scores").get<std::vector<std::vector<double>>>();
        labels = j.at("labels").get<std::vector<int>>();
      } catch (const json::exception& e) {
        throw FormatError(u_scores + ": " + e.what());
      }
      if (rows.empty()) throw InputError("no scores");
      Eigen::MatrixXd S(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw DimensionError("ragged score rows");
        for (std::size_t k = 0; k < rows[i].size(); ++k) S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
      FusionOptions fo;
      fo.mode = parse_fusion_mode(u_mode);
      fo.c = u_c;
      fo.iterations = u_iter;
      auto model = io::fusion_to_json(fusion_fit(S, labels, fo));
      model["config_hash"] = io::json_hash(json{{"mode", u_mode}, {"c", u_c}, {"iterations", u_iter}});
      detail::emit(out, model, u_out);
      return 0;
    }

    if (*ident || *verif) {
      ExperimentConfig ec;
      if (!p_config.empty()) ec = ExperimentConfig::from_json(io::read_json(p_config));
      if (!p_pipeline.empty()) ec.set_pipeline(p_pipeline);
      if (!p_preset.empty()) ec.set_preset(p_preset);
      if (p_rin > 0.0 || p_rex > 0.0) {
        const double ri = p_rin > 0.0 ? p_rin : (ec.is_mdml() ? ec.mdml.geometry.r_in() : ec.descriptor.r_in);
        const double re = p_rex > 0.0 ? p_rex : (ec.is_mdml() ? ec.mdml.geometry.r_ex() : ec.descriptor.r_ex);
        if (ec.is_mdml()) {
          ec.mdml.geometry = SamplingGeometry(ri, re, ec.mdml.geometry.interpolation());
        } else {
          ec.descriptor.r_in = ri;
          ec.descriptor.r_ex = re;
        }
      }
      if (p_grid > 0) ec.grid = p_grid;
      if (p_pca > 0) ec.pca_dim = p_pca;
      if (!p_fusion.empty()) ec.fusion.mode = parse_fusion_mode(p_fusion);
      if (p_c > 0.0) ec.fusion.c = p_c;
      if (p_kmax > 0) ec.k_max = p_kmax;
      if (ident->count("--seed") + verif->count("--seed") > 0) ec.seed = p_seed;
      ec.validate();
      const auto m = load_manifest(p_manifest);
      ProtocolOptions po;
      po.task = *ident ? ProtocolTask::identification : ProtocolTask::verification;
      po.threads = nthreads;
      po.artifacts = p_artifacts;
      auto res = run_protocol(m, ec, po);
      if (!p_roc_csv.empty() && res.verification) {
        io::write_text(p_roc_csv, roc_csv(*res.verification));
        res.run["outputs"].push_back(p_roc_csv);
      }
      detail::emit(out, res.report, p_out);
      if (!p_out.empty()) {
        res.run["outputs"].push_back(p_out);
        io::write_json(detail::strip_suffix(p_out, ".json") + ".run.json", res.run);
      }
      return 0;
    }

    if (*bench) {
      const auto names = detail::split(b_desc);
      if (names.empty()) throw ConfigError("--descriptor needs at least one name");
      std::mt19937_64 rng(b_seed);
      std::uniform_int_distribution<int> d(0, 255);
      GrayImage img(b_size, b_size);
      for (auto& v : img.pixels()) v = d(rng);
      json timings = json::object();
      std::vector<double> best;
      for (const auto& n : names) {
        DescriptorParams p;
        p.kind = parse_descriptor(n);
        p.r_in = b_rin;
        p.r_ex = b_rex;
        encode(img, p);  // warm-up
        double fastest = 0.0;
        for (int r = 0; r < b_repeats; ++r) {
          const auto t0 = std::chrono::steady_clock::now();
          const auto cm = encode(img, p);
          const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          if (cm.codes.empty()) throw DegenerateError("empty code map");
          fastest = r == 0 ? ms : std::min(fastest, ms);
        }
        timings[n] = fastest;
        best.push_back(fastest);
      }
      json rep{{"schema", "dcpkit.benchmark/1"}, {"size", b_size}, {"repeats", b_repeats},
               {"threads", 1},                   {"r_in", b_rin},  {"r_ex", b_rex},
               {"wall_ms", timings}};
      if (best.size() >= 2) {
        rep["ratio"] = best[0] / best[1];
        rep["ratio_of"] = names[0] + "/" + names[1];
      }
      detail::emit(out, rep, b_out);
      return 0;
    }

    if (*synth) {
      SynthOptions so;
      so.seed = c_seed;
      so.n_ids = c_ids;
      so.n_per_id = c_per;
      so.n_train_ids = c_train;
      so.set_variation(c_variation, c_noise);
      const auto m = synth_corpus(so, c_out);
      out << json{{"manifest", (fs::path(c_out) / "manifest.json").string()}, {"entries", m.entries.size()},
                  {"pairs", m.pairs.size()}}
                 .dump(2)
          << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << json{{"error", {{"kind", e.kind()}, {"code", static_cast<int>(e.code())}, {"message", e.what()}}}}.dump()
        << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    err << json{{"error", {{"kind", "input"}, {"code", 3}, {"message", e.what()}}}}.dump() << '\n';
    return static_cast<int>(ErrorCode::input);
  }
  return static_cast<int>(ErrorCode::config);
}

}  // namespace dcpkit::cli
