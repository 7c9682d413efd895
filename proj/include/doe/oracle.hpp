#pragma once

// Brute-force reference computations used to check the closed forms, the
// analytic gradients, the closure and the negative samplers. Nothing here
// calls into the code it verifies.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doe/density.hpp"

namespace doe::oracle {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo estimate of KL(f || g) = E_{X~f}[log f(X) - log g(X)].
McEstimate mc_kl(GaussianView f, GaussianView g, std::size_t n_samples, std::mt19937_64& rng);

/// -2 log of the trapezoidal integral of f*g over `grid_points` points
/// spanning +-10 pooled standard deviations. Throws std::runtime_error if
/// halving the resolution moves the estimate by more than 1e-8.
double quad_elk_1d(GaussianView f, GaussianView g, std::size_t grid_points = 20001);

/// Renyi divergence by trapezoidal integration of f^a g^(1-a), 1-d only.
double quad_renyi_1d(double alpha, GaussianView f, GaussianView g, std::size_t grid_points = 20001);

/// Central finite differences of `fn` at `params`.
std::vector<double> fd_grad(const std::function<double(std::span<const double>)>& fn,
                            std::span<const double> params, double h = 1e-5);

using NamePair = std::pair<std::string, std::string>;

/// All (u, v), u != v, with v reachable from u along child->parent edges.
/// Throws std::runtime_error on a cycle or on more than 200 nodes.
std::set<NamePair> brute_closure(const std::vector<NamePair>& edges);

enum class Sampler { S1, S2, S3, S4 };

struct SupportQuery {
  Sampler method = Sampler::S1;
  std::optional<NamePair> positive;          // required for S1 and S2
  std::optional<NamePair> ancestor_and_pick;  // optional (w, u) for S3 and S4
};

/// Exact output distribution of a negative sampler on the hierarchy given by
/// `edges` (at most 50 nodes). Probabilities sum to 1, or the map is empty
/// when the sampler has no valid output.
std::map<NamePair, double> enumerate_sampler_support(const std::vector<NamePair>& edges,
                                                     const SupportQuery& query);

struct EncapsulationResult {
  bool contained = false;
  bool vacuous = false;  // eta exceeds every grid density of f
};

/// Grid test of {x : f(x) > eta} subset of {x : g(x) > eta} for d <= 2 over
/// +-8 pooled standard deviations with `points_per_axis` samples per axis.
EncapsulationResult strict_encapsulation_check(GaussianView f, GaussianView g, double eta,
                                               std::size_t points_per_axis = 801);

}  // namespace doe::oracle
