#pragma once

#include "ddinfer/network.hpp"

#include <random>
#include <string>

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(DDINFER_FIXTURES) + "/" + name; }

inline ddinfer::Network single_edge(double c = 1.0, double s = 1.0, double f = 1.0, double g = 0.0) {
  ddinfer::Mat b(1, 1);
  b << 1.0;
  return ddinfer::Network::from_matrices(b, ddinfer::Vec::Constant(1, c), ddinfer::Vec::Constant(1, f),
                                         ddinfer::Vec::Constant(1, g), ddinfer::Vec::Constant(1, s));
}

/// Connected random network on `nodes` free nodes plus ground: a random
/// spanning tree and `extra` chords, random coefficients and loads.
inline ddinfer::Network random_network(int nodes, int extra, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(0.5, 2.0);
  std::uniform_real_distribution<double> load(-1.0, 1.0);
  std::vector<ddinfer::EdgeSpec> edges;
  auto end = [](int v) { return v < 0 ? ddinfer::EdgeEnd{} : ddinfer::EdgeEnd{v}; };
  for (int v = 0; v < nodes; ++v) {
    std::uniform_int_distribution<int> pick(-1, v - 1);
    edges.push_back({end(pick(rng)), end(v), coef(rng), coef(rng), load(rng)});
  }
  for (int k = 0; k < extra; ++k) {
    std::uniform_int_distribution<int> pick(-1, nodes - 1);
    int a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    edges.push_back({end(a), end(b), coef(rng), coef(rng), load(rng)});
  }
  ddinfer::Vec f(nodes);
  for (int i = 0; i < nodes; ++i) f[i] = load(rng);
  return ddinfer::Network::from_edges(nodes, edges, f);
}

inline ddinfer::Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ddinfer::Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace testing
