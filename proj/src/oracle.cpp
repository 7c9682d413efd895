#include "doe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace doe::oracle {
namespace {

double log_normal_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + z * z / var);
}

double normal_pdf(double x, double mean, double var) { return std::exp(log_normal_pdf(x, mean, var)); }

void require_1d(GaussianView f, GaussianView g) {
  if (f.dim() != 1 || g.dim() != 1) throw std::invalid_argument("1-d oracle called with d != 1");
}

struct Span1d {
  double lo, hi;
};

Span1d pooled_range(GaussianView f, GaussianView g, std::size_t axis, double sds) {
  const double sf = std::sqrt(std::exp(f.log_var[axis]));
  const double sg = std::sqrt(std::exp(g.log_var[axis]));
  const double lo = std::min(f.mean[axis] - sds * sf, g.mean[axis] - sds * sg);
  const double hi = std::max(f.mean[axis] + sds * sf, g.mean[axis] + sds * sg);
  return {lo, hi};
}

template <class Fn>
double trapezoid(Fn fn, Span1d r, std::size_t points) {
  const double h = (r.hi - r.lo) / static_cast<double>(points - 1);
  double sum = 0.5 * (fn(r.lo) + fn(r.hi));
  for (std::size_t i = 1; i + 1 < points; ++i) sum += fn(r.lo + h * static_cast<double>(i));
  return sum * h;
}

}  // namespace

McEstimate mc_kl(GaussianView f, GaussianView g, std::size_t n_samples, std::mt19937_64& rng) {
  if (f.dim() != g.dim()) throw std::invalid_argument("mc_kl: dimension mismatch");
  if (n_samples < 2) throw std::invalid_argument("mc_kl: need at least 2 samples");
  std::normal_distribution<double> normal(0.0, 1.0);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double log_ratio = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) {
      const double vf = std::exp(f.log_var[i]);
      const double vg = std::exp(g.log_var[i]);
      const double x = f.mean[i] + std::sqrt(vf) * normal(rng);
      log_ratio += log_normal_pdf(x, f.mean[i], vf) - log_normal_pdf(x, g.mean[i], vg);
    }
    // Welford
    const double delta = log_ratio - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (log_ratio - mean);
  }
  const double n = static_cast<double>(n_samples);
  return {mean, std::sqrt(m2 / (n - 1.0) / n), n_samples};
}

double quad_elk_1d(GaussianView f, GaussianView g, std::size_t grid_points) {
  require_1d(f, g);
  const double vf = std::exp(f.log_var[0]);
  const double vg = std::exp(g.log_var[0]);
  const Span1d range = pooled_range(f, g, 0, 10.0);
  auto integrand = [&](double x) { return normal_pdf(x, f.mean[0], vf) * normal_pdf(x, g.mean[0], vg); };
  const double fine = trapezoid(integrand, range, grid_points);
  const double coarse = trapezoid(integrand, range, (grid_points + 1) / 2);
  const double value = -2.0 * std::log(fine);
  if (std::abs(value - (-2.0 * std::log(coarse))) > 1e-8) {
    throw std::runtime_error("quad_elk_1d: grid too coarse for a stable estimate");
  }
  return value;
}

double quad_renyi_1d(double alpha, GaussianView f, GaussianView g, std::size_t grid_points) {
  require_1d(f, g);
  const double vf = std::exp(f.log_var[0]);
  const double vg = std::exp(g.log_var[0]);
  const Span1d range = pooled_range(f, g, 0, 10.0);
  auto integrand = [&](double x) {
    return std::exp(alpha * log_normal_pdf(x, f.mean[0], vf) +
                    (1.0 - alpha) * log_normal_pdf(x, g.mean[0], vg));
  };
  return std::log(trapezoid(integrand, range, grid_points)) / (alpha * (alpha - 1.0));
}

std::vector<double> fd_grad(const std::function<double(std::span<const double>)>& fn,
                            std::span<const double> params, double h) {
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = fn(x);
    x[i] = saved - h;
    const double down = fn(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::set<NamePair> brute_closure(const std::vector<NamePair>& edges) {
  std::map<std::string, std::set<std::string>> parents;
  std::set<std::string> nodes;
  for (const auto& [child, parent] : edges) {
    parents[child].insert(parent);
    nodes.insert(child);
    nodes.insert(parent);
  }
  if (nodes.size() > 200) throw std::runtime_error("brute_closure: more than 200 nodes");
  std::set<NamePair> out;
  for (const auto& start : nodes) {
    std::set<std::string> seen;
    std::vector<std::string> stack(parents[start].begin(), parents[start].end());
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      if (cur == start) throw std::runtime_error("brute_closure: cycle through " + start);
      if (!seen.insert(cur).second) continue;
      for (const auto& p : parents[cur]) stack.push_back(p);
    }
    for (const auto& v : seen) out.emplace(start, v);
  }
  return out;
}

std::map<NamePair, double> enumerate_sampler_support(const std::vector<NamePair>& edges,
                                                     const SupportQuery& query) {
  const std::set<NamePair> closure = brute_closure(edges);
  std::set<std::string> node_set;
  for (const auto& [c, p] : edges) {
    node_set.insert(c);
    node_set.insert(p);
  }
  if (node_set.size() > 50) throw std::runtime_error("enumerate_sampler_support: more than 50 nodes");
  const std::vector<std::string> nodes(node_set.begin(), node_set.end());

  // A(w): descendants of w including w.
  std::map<std::string, std::set<std::string>> desc;
  for (const auto& w : nodes) desc[w].insert(w);
  for (const auto& [u, v] : closure) desc[v].insert(u);

  std::map<NamePair, double> out;
  switch (query.method) {
    case Sampler::S1: {
      if (!query.positive) throw std::invalid_argument("S1 support needs a positive pair");
      const auto [u, v] = *query.positive;
      std::set<NamePair> valid;
      for (const auto& x : nodes) {
        for (const NamePair& cand : {NamePair{x, v}, NamePair{u, x}}) {
          if (cand.first == cand.second || cand == *query.positive || closure.count(cand)) continue;
          valid.insert(cand);
        }
      }
      for (const auto& p : valid) out[p] = 1.0 / static_cast<double>(valid.size());
      return out;
    }
    case Sampler::S2: {
      if (!query.positive) throw std::invalid_argument("S2 support needs a positive pair");
      out[{query.positive->second, query.positive->first}] = 1.0;
      return out;
    }
    case Sampler::S3:
    case Sampler::S4: {
      const bool s4 = query.method == Sampler::S4;
      std::vector<std::string> eligible;
      for (const auto& w : nodes) {
        if (desc[w].size() - 1 >= 2) eligible.push_back(w);
      }
      // Unnormalized mass per (w, u), then uniform v over the allowed set.
      double total = 0.0;
      for (const auto& w : eligible) {
        if (query.ancestor_and_pick && query.ancestor_and_pick->first != w) continue;
        const double pick = 1.0 / static_cast<double>(desc[w].size() - 1);
        for (const auto& u : desc[w]) {
          if (u == w) continue;
          if (query.ancestor_and_pick && query.ancestor_and_pick->second != u) continue;
          std::vector<std::string> vs;
          for (const auto& v : desc[w]) {
            if (desc[u].count(v) || (s4 && v == w)) continue;
            vs.push_back(v);
          }
          if (vs.empty()) continue;
          const double mass = pick / static_cast<double>(eligible.size());
          total += mass;
          for (const auto& v : vs) out[{v, u}] += mass / static_cast<double>(vs.size());
        }
      }
      for (auto& [pair, p] : out) p /= total;
      return out;
    }
  }
  return out;
}

EncapsulationResult strict_encapsulation_check(GaussianView f, GaussianView g, double eta,
                                               std::size_t points_per_axis) {
  if (f.dim() != g.dim()) throw std::invalid_argument("encapsulation check: dimension mismatch");
  if (f.dim() < 1 || f.dim() > 2) throw std::invalid_argument("encapsulation check supports d <= 2");
  if (!(eta > 0.0)) throw std::invalid_argument("encapsulation check needs eta > 0");
  if (points_per_axis < 2) throw std::invalid_argument("encapsulation check needs >= 2 points");

  auto density = [](GaussianView q, std::span<const double> x) {
    double log_p = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) log_p += log_normal_pdf(x[i], q.mean[i], std::exp(q.log_var[i]));
    return std::exp(log_p);
  };

  std::vector<Span1d> ranges;
  for (std::size_t a = 0; a < f.dim(); ++a) ranges.push_back(pooled_range(f, g, a, 8.0));

  EncapsulationResult result{true, true};
  std::vector<double> x(f.dim());
  const std::size_t second = f.dim() == 2 ? points_per_axis : 1;
  for (std::size_t i = 0; i < points_per_axis; ++i) {
    for (std::size_t j = 0; j < second; ++j) {
      const std::size_t idx[2] = {i, j};
      for (std::size_t a = 0; a < f.dim(); ++a) {
        const double t = static_cast<double>(idx[a]) / static_cast<double>(points_per_axis - 1);
        x[a] = ranges[a].lo + t * (ranges[a].hi - ranges[a].lo);
      }
      if (density(f, x) > eta) {
        result.vacuous = false;
        if (!(density(g, x) > eta)) result.contained = false;
      }
    }
  }
  return result;
}

}  // namespace doe::oracle
