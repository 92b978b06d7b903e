// Library use without the CLI: encode a gallery and a probe set held in
// memory, match with chi-squared, and print the CMC.
#include <iostream>
#include <random>

#include "dcpkit/dcpkit.hpp"

int main(int argc, char** argv) {
  using namespace dcpkit;
  const auto dir = argc > 1 ? std::string(argv[1]) : std::string("/tmp/dcpkit_sample");
  SynthOptions opt;
  opt.seed = 21;
  opt.n_ids = 12;
  opt.n_per_id = 3;
  opt.set_variation("gain,noise,ramp", 6.0);
  const Manifest m = synth_corpus(opt, dir);

  const auto canvas = canvas_preset("feret128");
  DescriptorParams p;  // DCP, r_in 4, r_ex 6
  const auto feature = [&](const ManifestEntry& e) {
    const auto lm = load_landmarks(m.resolve(e.landmarks));
    const auto t = solve_similarity(lm.centroid(landmarks::left_eye()), lm.centroid(landmarks::right_eye()),
                                    {canvas.eye_left, canvas.eye_right}, canvas.size);
    return regional_histograms(encode(warp(load_pgm(m.resolve(e.image)), t), p), 8).counts;
  };

  const auto gallery = m.with_role(Role::gallery), probes = m.with_role(Role::probe);
  std::vector<std::vector<std::uint32_t>> g;
  std::vector<std::string> g_ids, p_ids;
  for (auto i : gallery) {
    g.push_back(feature(m.entries[i]));
    g_ids.push_back(m.entries[i].subject);
  }
  Eigen::MatrixXd dist(static_cast<Eigen::Index>(probes.size()), static_cast<Eigen::Index>(gallery.size()));
  for (std::size_t a = 0; a < probes.size(); ++a) {
    const auto f = feature(m.entries[probes[a]]);
    p_ids.push_back(m.entries[probes[a]].subject);
    for (std::size_t b = 0; b < g.size(); ++b) dist(a, b) = chi_squared(f, g[b]);
  }
  const auto r = identify(dist, g_ids, p_ids, ScoreOrder::lower_is_better, 5);
  for (std::size_t k = 0; k < r.rank_rates.size(); ++k) std::cout << "rank " << k + 1 << ": " << r.rank_rates[k] << "\n";
}
