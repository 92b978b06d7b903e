#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dcpkit/descriptors.hpp"
#include "dcpkit/error.hpp"
#include "dcpkit/image.hpp"

namespace dcpkit {

using DirectionSubset = std::array<int, 4>;

/// A split of the eight directions into two groups of four. Canonical form
/// keeps direction 0 in subset_a.
struct GroupingMode {
  DirectionSubset subset_a{};
  DirectionSubset subset_b{};
  int canonical_id = -1;

  bool operator==(const GroupingMode&) const = default;
};

inline DirectionSubset complement(const DirectionSubset& s) {
  DirectionSubset out{};
  std::size_t n = 0;
  for (int d = 0; d < 8; ++d) {
    if (std::find(s.begin(), s.end(), d) == s.end()) {
      if (n == 4) throw ConfigError("direction subset must have 4 distinct members in 0..7");
      out[n++] = d;
    }
  }
  if (n != 4) throw ConfigError("direction subset must have 4 distinct members in 0..7");
  return out;
}

/// All 35 unordered 4+4 partitions, ordered lexicographically by subset_a.
inline std::vector<GroupingMode> enumerate_groupings() {
  std::vector<GroupingMode> modes;
  for (int b = 1; b < 8; ++b) {
    for (int c = b + 1; c < 8; ++c) {
      for (int d = c + 1; d < 8; ++d) {
        GroupingMode m;
        m.subset_a = {0, b, c, d};
        m.subset_b = complement(m.subset_a);
        m.canonical_id = static_cast<int>(modes.size());
        modes.push_back(m);
      }
    }
  }
  return modes;
}

/// Canonical representative of {s, complement(s)}.
inline GroupingMode canonical_grouping(const DirectionSubset& s) {
  DirectionSubset a = s;
  std::sort(a.begin(), a.end());
  DirectionSubset b = complement(a);
  if (a[0] != 0) std::swap(a, b);
  for (const auto& m : enumerate_groupings()) {
    if (m.subset_a == a) return m;
  }
  throw ConfigError("invalid grouping");
}

inline int dual_cross_id() { return canonical_grouping({0, 2, 4, 6}).canonical_id; }

/// Shannon entropy in bits of a histogram; 0 log 0 = 0.
template <typename Count>
double shannon_entropy_bits(const std::vector<Count>& hist) {
  double total = 0.0;
  for (auto c : hist) total += static_cast<double>(c);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (auto c : hist) {
    if (c > 0) {
      const double p = static_cast<double>(c) / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

/// Joint entropy of four directional codes given their per-pixel planes.
inline double joint_entropy(const DirectionalCodes& dc, const DirectionSubset& subset) {
  std::vector<std::uint32_t> hist(256, 0);
  const auto& p0 = dc.planes.at(static_cast<std::size_t>(subset[0]));
  const auto& p1 = dc.planes.at(static_cast<std::size_t>(subset[1]));
  const auto& p2 = dc.planes.at(static_cast<std::size_t>(subset[2]));
  const auto& p3 = dc.planes.at(static_cast<std::size_t>(subset[3]));
  for (std::size_t i = 0; i < p0.size(); ++i) {
    ++hist[p0[i] | (p1[i] << 2) | (p2[i] << 4) | (p3[i] << 6)];
  }
  return shannon_entropy_bits(hist);
}

inline double joint_entropy(const GrayImage& img, const SamplingGeometry& g, const DirectionSubset& subset) {
  return joint_entropy(directional_codes(img, g), subset);
}

/// Entropy of a single direction's code.
inline double marginal_entropy(const DirectionalCodes& dc, int direction) {
  std::vector<std::uint32_t> hist(4, 0);
  for (auto v : dc.planes.at(static_cast<std::size_t>(direction))) ++hist[v];
  return shannon_entropy_bits(hist);
}

struct EntropyReport {
  double r_in = 0.0;
  double r_ex = 0.0;
  std::size_t corpus_size = 0;
  std::vector<GroupingMode> modes;
  std::vector<double> per_mode;  // indexed by canonical_id

  /// Canonical ids sorted by decreasing mean entropy (ties: lower id first).
  std::vector<int> ranking() const {
    std::vector<int> ids(per_mode.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      return per_mode[static_cast<std::size_t>(a)] > per_mode[static_cast<std::size_t>(b)];
    });
    return ids;
  }
};

/// Mean over images of H(subset_a) + H(subset_b), for every grouping mode.
inline EntropyReport entropy_scan(const std::vector<GrayImage>& corpus, const SamplingGeometry& g) {
  if (corpus.empty()) throw InputError("entropy scan needs a non-empty corpus");
  EntropyReport rep;
  rep.r_in = g.r_in();
  rep.r_ex = g.r_ex();
  rep.corpus_size = corpus.size();
  rep.modes = enumerate_groupings();
  rep.per_mode.assign(rep.modes.size(), 0.0);
  for (const auto& img : corpus) {
    const auto dc = directional_codes(img, g);
    for (const auto& m : rep.modes) {
      rep.per_mode[static_cast<std::size_t>(m.canonical_id)] +=
          joint_entropy(dc, m.subset_a) + joint_entropy(dc, m.subset_b);
    }
  }
  for (auto& v : rep.per_mode) v /= static_cast<double>(corpus.size());
  return rep;
}

}  // namespace dcpkit
