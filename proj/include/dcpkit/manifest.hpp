#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dcpkit/error.hpp"
#include "dcpkit/io.hpp"

namespace dcpkit {

enum class Role { gallery, probe, train, none };

inline Role parse_role(const std::string& s) {
  if (s == "gallery") return Role::gallery;
  if (s == "probe") return Role::probe;
  if (s == "train") return Role::train;
  if (s.empty() || s == "none") return Role::none;
  throw InputError("unknown manifest role '" + s + "'");
}

inline std::string to_string(Role r) {
  switch (r) {
    case Role::gallery: return "gallery";
    case Role::probe: return "probe";
    case Role::train: return "train";
    case Role::none: return "none";
  }
  return "none";
}

struct ManifestEntry {
  std::string image;      // as written in the manifest
  std::string landmarks;  // may be empty for descriptor-only runs on pre-cropped images
  std::string subject;
  Role role = Role::none;
  int fold = -1;
};

struct PairSpec {
  std::size_t a = 0;
  std::size_t b = 0;
  bool same = false;
  int fold = -1;
};

struct Manifest {
  std::filesystem::path base;  // relative paths resolve against this
  std::vector<ManifestEntry> entries;
  std::vector<PairSpec> pairs;

  std::string resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
  }

  std::vector<std::size_t> with_role(Role r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].role == r) out.push_back(i);
    }
    return out;
  }

  io::json to_json() const {
    io::json e = io::json::array();
    for (const auto& m : entries) {
      io::json j{{"image", m.image}, {"subject", m.subject}, {"role", to_string(m.role)}};
      if (!m.landmarks.empty()) j["landmarks"] = m.landmarks;
      if (m.fold >= 0) j["fold"] = m.fold;
      e.push_back(std::move(j));
    }
    io::json out{{"schema", "dcpkit.manifest/1"}, {"entries", std::move(e)}};
    if (!pairs.empty()) {
      io::json p = io::json::array();
      for (const auto& q : pairs) {
        io::json j{{"a", q.a}, {"b", q.b}, {"same", q.same}};
        if (q.fold >= 0) j["fold"] = q.fold;
        p.push_back(std::move(j));
      }
      out["pairs"] = std::move(p);
    }
    return out;
  }

  /// Every referenced file that does not exist, in manifest order.
  std::vector<std::string> missing_files() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      for (const auto* p : {&e.image, &e.landmarks}) {
        if (!p->empty() && !std::filesystem::exists(resolve(*p))) out.push_back(resolve(*p));
      }
    }
    return out;
  }

  void require_files() const {
    const auto missing = missing_files();
    if (missing.empty()) return;
    std::string msg = std::to_string(missing.size()) + " missing file(s):";
    for (const auto& m : missing) msg += "\n  " + m;
    throw InputError(msg);
  }
};

namespace detail {

inline std::vector<PairSpec> parse_pairs(const io::json& arr, std::size_t n_entries) {
  if (!arr.is_array()) throw FormatError("manifest pairs must be an array");
  std::vector<PairSpec> out;
  for (const auto& j : arr) {
    PairSpec p;
    p.a = j.at("a").get<std::size_t>();
    p.b = j.at("b").get<std::size_t>();
    p.same = j.at("same").get<bool>();
    p.fold = j.value("fold", -1);
    if (p.a >= n_entries || p.b >= n_entries) throw InputError("pair references entry out of range");
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

/// `pairs` may be inline or the path of a JSON file holding the array.
inline Manifest manifest_from_json(const io::json& j, const std::filesystem::path& base) {
  Manifest m;
  m.base = base;
  try {
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.image = e.at("image").get<std::string>();
      me.landmarks = e.value("landmarks", "");
      me.subject = e.at("subject").get<std::string>();
      me.role = parse_role(e.value("role", ""));
      me.fold = e.value("fold", -1);
      m.entries.push_back(std::move(me));
    }
    if (j.contains("pairs")) {
      const auto& p = j.at("pairs");
      m.pairs = p.is_string() ? detail::parse_pairs(io::read_json(m.resolve(p.get<std::string>())), m.entries.size())
                              : detail::parse_pairs(p, m.entries.size());
    }
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
  if (m.entries.empty()) throw InputError("manifest has no entries");
  return m;
}

inline Manifest load_manifest(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  return manifest_from_json(io::read_json(path), parent);
}

inline void save_manifest(const std::string& path, const Manifest& m) { io::write_json(path, m.to_json()); }

}  // namespace dcpkit
