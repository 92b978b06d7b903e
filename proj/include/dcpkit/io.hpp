#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/learning.hpp"
#include "dcpkit/representation.hpp"

static_assert(std::endian::native == std::endian::little, "binary blocks assume a little-endian host");

namespace dcpkit::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(const void* data, std::size_t n) {
  Fnv1a h;
  h.update(data, n);
  return h.hex();
}

inline std::string fnv1a_hex(const std::string& s) { return fnv1a_hex(s.data(), s.size()); }

/// Hash of the compact dump; json objects keep keys sorted, so this is canonical.
inline std::string json_hash(const json& j) { return fnv1a_hex(j.dump()); }

// ---------------------------------------------------------------------------
// Files

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const void* data, std::size_t n) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw InputError("write failed: " + path);
}

inline void write_text(const std::string& path, const std::string& text) { write_bytes(path, text.data(), text.size()); }

inline json read_json(const std::string& path) {
  const auto bytes = read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Typed blocks

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else if constexpr (std::is_same_v<T, double>) return "f64";
  else if constexpr (std::is_same_v<T, std::uint32_t>) return "u32";
  else static_assert(sizeof(T) == 0, "unsupported block type");
}

struct BlockRef {
  std::string name;
  std::string dtype;
  std::size_t offset = 0;  // bytes into the data file
  std::size_t length = 0;  // elements
  std::vector<std::size_t> shape;
  std::string fnv1a;
};

inline void to_json(json& j, const BlockRef& b) {
  j = json{{"name", b.name}, {"dtype", b.dtype}, {"offset", b.offset}, {"length", b.length}, {"shape", b.shape},
           {"fnv1a64", b.fnv1a}};
}

inline void from_json(const json& j, BlockRef& b) {
  j.at("name").get_to(b.name);
  j.at("dtype").get_to(b.dtype);
  j.at("offset").get_to(b.offset);
  j.at("length").get_to(b.length);
  j.at("shape").get_to(b.shape);
  j.at("fnv1a64").get_to(b.fnv1a);
}

/// Accumulates named little-endian arrays into one data file plus a JSON sidecar.
class BlockWriter {
 public:
  template <typename T>
  void add(const std::string& name, const T* data, std::size_t n, std::vector<std::size_t> shape = {}) {
    BlockRef b;
    b.name = name;
    b.dtype = dtype_name<T>();
    b.offset = bytes_.size();
    b.length = n;
    b.shape = shape.empty() ? std::vector<std::size_t>{n} : std::move(shape);
    const auto* p = reinterpret_cast<const unsigned char*>(data);
    bytes_.insert(bytes_.end(), p, p + n * sizeof(T));
    b.fnv1a = fnv1a_hex(p, n * sizeof(T));
    blocks_.push_back(std::move(b));
  }

  template <typename T>
  void add(const std::string& name, const std::vector<T>& v) {
    add(name, v.data(), v.size());
  }

  /// Stored column-major with shape (rows, cols).
  template <typename Derived>
  void add_matrix(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
    using T = typename Derived::Scalar;
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> dense = m;
    add(name, dense.data(), static_cast<std::size_t>(dense.size()),
        {static_cast<std::size_t>(dense.rows()), static_cast<std::size_t>(dense.cols())});
  }

  /// Writes `<stem>.bin` and `<stem>.json`; `header` gains the block table.
  void save(const std::string& stem, json header) const {
    header["blocks"] = blocks_;
    header["data_file"] = std::filesystem::path(stem + ".bin").filename().string();
    header["data_bytes"] = bytes_.size();
    header["data_fnv1a64"] = fnv1a_hex(bytes_.data(), bytes_.size());
    write_bytes(stem + ".bin", bytes_.data(), bytes_.size());
    write_json(stem + ".json", header);
  }

 private:
  std::vector<unsigned char> bytes_;
  std::vector<BlockRef> blocks_;
};

class BlockReader {
 public:
  /// `stem` may be given with or without the .json/.bin suffix.
  explicit BlockReader(std::string stem) {
    for (const char* ext : {".json", ".bin"}) {
      if (stem.size() > 5 && stem.ends_with(ext)) stem.resize(stem.size() - std::strlen(ext));
    }
    header_ = read_json(stem + ".json");
    const auto dir = std::filesystem::path(stem).parent_path();
    bytes_ = read_bytes((dir / header_.at("data_file").get<std::string>()).string());
    if (bytes_.size() != header_.at("data_bytes").get<std::size_t>()) throw FormatError(stem + ": data size mismatch");
    if (fnv1a_hex(bytes_.data(), bytes_.size()) != header_.at("data_fnv1a64").get<std::string>()) {
      throw FormatError(stem + ": data hash mismatch");
    }
    blocks_ = header_.at("blocks").get<std::vector<BlockRef>>();
  }

  const json& header() const noexcept { return header_; }
  const std::vector<BlockRef>& blocks() const noexcept { return blocks_; }

  const BlockRef& find(const std::string& name) const {
    for (const auto& b : blocks_) {
      if (b.name == name) return b;
    }
    throw FormatError("missing block '" + name + "'");
  }

  template <typename T>
  std::vector<T> get(const std::string& name) const {
    const auto& b = find(name);
    if (b.dtype != dtype_name<T>()) throw FormatError("block '" + name + "' has dtype " + b.dtype);
    if (b.offset + b.length * sizeof(T) > bytes_.size()) throw FormatError("block '" + name + "' overruns the data file");
    std::vector<T> out(b.length);
    std::memcpy(out.data(), bytes_.data() + b.offset, b.length * sizeof(T));
    return out;
  }

  template <typename T>
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> get_matrix(const std::string& name) const {
    const auto& b = find(name);
    if (b.shape.size() != 2) throw FormatError("block '" + name + "' is not a matrix");
    const auto v = get<T>(name);
    return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>>(
        v.data(), static_cast<Eigen::Index>(b.shape[0]), static_cast<Eigen::Index>(b.shape[1]));
  }

  template <typename T>
  Eigen::Matrix<T, Eigen::Dynamic, 1> get_vector(const std::string& name) const {
    const auto v = get<T>(name);
    return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

 private:
  json header_;
  std::vector<unsigned char> bytes_;
  std::vector<BlockRef> blocks_;
};

// ---------------------------------------------------------------------------
// Features

inline void save_histogram_feature(const std::string& stem, const RegionalHistogramFeature& f, const json& meta) {
  BlockWriter w;
  w.add("counts", f.counts);
  json h = meta;
  h["schema"] = "dcpkit.histogram/1";
  h["grid"] = f.grid_n;
  h["regions"] = f.regions.size();
  h["channels"] = f.channels;
  h["code_cardinality"] = f.code_cardinality;
  h["layout"] = "region, channel, bin";
  w.save(stem, h);
}

inline void save_mdml(const std::string& stem, const std::vector<FeatureVector>& features, const json& meta) {
  BlockWriter w;
  for (const auto& f : features) w.add(to_string(f.name), f.values);
  json h = meta;
  h["schema"] = "dcpkit.mdml/1";
  h["block_size"] = features.empty() ? 0 : features.front().block_size;
  h["layout"] = "landmark or cell, region, filtered image, channel, bin";
  w.save(stem, h);
}

inline std::vector<FeatureVector> load_mdml(const std::string& stem) {
  const BlockReader r(stem);
  if (r.header().value("schema", "") != "dcpkit.mdml/1") throw FormatError(stem + ": not an MDML feature file");
  std::vector<FeatureVector> out;
  for (const auto& b : r.blocks()) {
    FeatureVector f;
    f.name = parse_feature_name(b.name);
    f.values = r.get<float>(b.name);
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models

template <typename Scalar>
void save_pca(const std::string& stem, const PcaModel<Scalar>& m, bool whiten, json meta) {
  BlockWriter w;
  w.add_matrix("mean", m.mean);
  w.add_matrix("basis", m.basis);
  w.add_matrix("eigenvalues", m.eigenvalues);
  meta["schema"] = "dcpkit.model/1";
  meta["type"] = whiten ? "wpca" : "pca";
  meta["input_dim"] = m.mean.size();
  meta["output_dim"] = m.basis.cols();
  w.save(stem, meta);
}

inline PcaModel<double> load_pca(const std::string& stem, bool* whiten = nullptr) {
  const BlockReader r(stem);
  const auto type = r.header().value("type", "");
  if (type != "pca" && type != "wpca") throw FormatError(stem + ": not a PCA model");
  if (whiten) *whiten = type == "wpca";
  PcaModel<double> m;
  const auto& mb = r.find("mean");
  if (mb.dtype == "f32") {
    m.mean = r.get_vector<float>("mean").cast<double>();
    m.basis = r.get_matrix<float>("basis").cast<double>();
  } else {
    m.mean = r.get_vector<double>("mean");
    m.basis = r.get_matrix<double>("basis");
  }
  m.eigenvalues = r.get_vector<double>("eigenvalues");
  return m;
}

inline void save_plda(const std::string& stem, const PldaModel& m, json meta) {
  BlockWriter w;
  w.add_matrix("mean", m.mean);
  w.add_matrix("F", m.F);
  w.add_matrix("G", m.G);
  w.add_matrix("sigma", m.sigma);
  meta["schema"] = "dcpkit.model/1";
  meta["type"] = "plda";
  meta["dim"] = m.dim();
  meta["d_h"] = m.F.cols();
  meta["d_w"] = m.G.cols();
  meta["training_loglik"] = m.training_loglik;
  w.save(stem, meta);
}

inline PldaModel load_plda(const std::string& stem) {
  const BlockReader r(stem);
  if (r.header().value("type", "") != "plda") throw FormatError(stem + ": not a PLDA model");
  PldaModel m;
  m.mean = r.get_vector<double>("mean");
  m.F = r.get_matrix<double>("F");
  m.G = r.get_matrix<double>("G");
  m.sigma = r.get_vector<double>("sigma");
  m.training_loglik = r.header().at("training_loglik").get<std::vector<double>>();
  return m;
}

inline json fusion_to_json(const FusionModel& m) {
  return json{{"schema", "dcpkit.model/1"}, {"type", "fusion"}, {"mode", to_string(m.mode)},
              {"weights", m.weights},
              {"bias", m.bias}};
}

inline FusionModel fusion_from_json(const json& j) {
  if (j.value("type", "") != "fusion") throw FormatError("not a fusion model");
  FusionModel m;
  m.mode = parse_fusion_mode(j.at("mode").get<std::string>());
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  return m;
}

}  // namespace dcpkit::io
