#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doe/density.hpp"
#include "doe/hierarchy.hpp"

namespace doe::testing {

inline DiagGaussian random_gaussian(std::size_t d, std::mt19937_64& rng, double lv_lo = -1.0, double lv_hi = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> lv(lv_lo, lv_hi);
  std::vector<double> mean(d), log_var(d);
  for (std::size_t i = 0; i < d; ++i) {
    mean[i] = normal(rng);
    log_var[i] = lv(rng);
  }
  return DiagGaussian(std::move(mean), std::move(log_var));
}

inline bool rel_close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + 1e-8;
}

// c -> a -> r
inline std::vector<NamedEdge> chain_edges() { return {{"c", "a"}, {"a", "r"}}; }

// r has children a, b; a has children c, d.
inline std::vector<NamedEdge> tree_edges() { return {{"a", "r"}, {"b", "r"}, {"c", "a"}, {"d", "a"}}; }

inline HierarchyGraph closed_graph(const std::vector<NamedEdge>& edges) {
  return transitive_closure(HierarchyGraph::build(edges));
}

// Random DAG over n nodes: edges only from lower to higher index.
inline std::vector<NamedEdge> random_dag(int n, double density, std::mt19937_64& rng) {
  std::vector<NamedEdge> edges;
  std::bernoulli_distribution keep(density);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (keep(rng)) edges.emplace_back("n" + std::to_string(perm[u]), "n" + std::to_string(perm[v]));
    }
  }
  return edges;
}

}  // namespace doe::testing
