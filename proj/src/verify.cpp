#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "doe/cli.hpp"
#include "doe/density.hpp"
#include "doe/hierarchy.hpp"
#include "doe/oracle.hpp"

namespace doe::cli {
namespace {

DiagGaussian random_gaussian(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> lv(-1.0, 1.0);
  std::vector<double> mean(d), log_var(d);
  for (std::size_t i = 0; i < d; ++i) {
    mean[i] = normal(rng);
    log_var[i] = lv(rng);
  }
  return DiagGaussian(std::move(mean), std::move(log_var));
}

bool rel_close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + 1e-8; }

// Max relative gradient error of divergence_with_grad against central
// differences over all four parameter blocks.
bool gradient_matches(const DivergenceKind& kind, const DiagGaussian& f, const DiagGaussian& g) {
  const std::size_t d = f.dim();
  const GradPair analytic = divergence_with_grad(kind, f, g);
  std::vector<double> params;
  for (const auto* v : {&f.mean(), &f.log_var(), &g.mean(), &g.log_var()}) params.insert(params.end(), v->begin(), v->end());
  auto fn = [&](std::span<const double> p) {
    const GaussianView fv{p.subspan(0, d), p.subspan(d, d)};
    const GaussianView gv{p.subspan(2 * d, d), p.subspan(3 * d, d)};
    return divergence(kind, fv, gv);
  };
  const std::vector<double> numeric = oracle::fd_grad(fn, params, 1e-5);
  std::vector<double> flat;
  for (const auto* v : {&analytic.d_mean_f, &analytic.d_logvar_f, &analytic.d_mean_g, &analytic.d_logvar_g}) {
    flat.insert(flat.end(), v->begin(), v->end());
  }
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!rel_close(flat[i], numeric[i], 1e-4)) return false;
  }
  return true;
}

}  // namespace

bool run_oracle_battery(std::ostream& out) {
  bool all = true;
  auto row = [&](const std::string& name, bool ok, const std::string& detail) {
    all = all && ok;
    out << name << '\t' << (ok ? "PASS" : "FAIL") << '\t' << detail << '\n';
  };
  std::ostringstream detail;
  auto fmt = [&detail](auto... xs) {
    detail.str("");
    detail << std::setprecision(8);
    ((detail << xs), ...);
    return detail.str();
  };
  out << "check\tstatus\tdetail\n";

  std::mt19937_64 rng(20180501);
  const auto n01 = DiagGaussian::isotropic({0.0}, 1.0);
  const auto n04 = DiagGaussian::isotropic({0.0}, 4.0);

  {
    const auto est = oracle::mc_kl(n01, n04, 1000000, rng);
    const double closed = kl(n01, n04);
    row("kl_vs_monte_carlo", std::abs(est.mean - closed) <= 3.0 * est.std_error,
        fmt("closed=", closed, " mc=", est.mean, " se=", est.std_error));
  }
  {
    const auto est = oracle::mc_kl(n04, n01, 1000000, rng);
    const double closed = divergence(DivergenceKind::reverse_kl(), n01, n04);
    row("reverse_kl_vs_monte_carlo", std::abs(est.mean - closed) <= 3.0 * est.std_error,
        fmt("closed=", closed, " mc=", est.mean, " se=", est.std_error));
  }
  {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const auto f = random_gaussian(1, rng);
      const auto g = random_gaussian(1, rng);
      worst = std::max(worst, std::abs(neg_log_elk(f, g) - oracle::quad_elk_1d(f, g)));
    }
    row("elk_vs_quadrature", worst <= 1e-6, fmt("max_abs_err=", worst));
  }
  {
    double worst = 0.0;
    for (double alpha : {0.25, 0.5, 0.9}) {
      for (int i = 0; i < 10; ++i) {
        const auto f = random_gaussian(1, rng);
        const auto g = random_gaussian(1, rng);
        worst = std::max(worst, std::abs(renyi(alpha, f, g) - oracle::quad_renyi_1d(alpha, f, g)));
      }
    }
    row("renyi_vs_quadrature", worst <= 1e-6, fmt("max_abs_err=", worst));
  }
  for (const auto& kind : {DivergenceKind::kl(), DivergenceKind::reverse_kl(), DivergenceKind::renyi(0.5),
                           DivergenceKind::renyi(0.8), DivergenceKind::neg_log_elk()}) {
    int failures = 0;
    for (int i = 0; i < 100; ++i) {
      if (!gradient_matches(kind, random_gaussian(5, rng), random_gaussian(5, rng))) ++failures;
    }
    row("gradient_fd_" + kind.to_string(), failures == 0, fmt("instances=100 failures=", failures));
  }
  {
    int mismatches = 0;
    for (int trial = 0; trial < 20; ++trial) {
      std::uniform_int_distribution<int> size(2, 50);
      const int n = size(rng);
      std::vector<NamedEdge> edges;
      std::bernoulli_distribution keep(0.1);
      for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
          if (keep(rng)) edges.emplace_back("n" + std::to_string(u), "n" + std::to_string(v));
        }
      }
      if (edges.empty()) continue;
      const HierarchyGraph g = transitive_closure(HierarchyGraph::build(edges));
      std::set<oracle::NamePair> mine;
      for (const Pair& p : g.closure_pairs()) mine.emplace(g.name(p.hypo), g.name(p.hyper));
      if (mine != oracle::brute_closure(edges)) ++mismatches;
    }
    row("closure_vs_brute_force", mismatches == 0, fmt("random_dags=20 mismatches=", mismatches));
  }
  {
    const std::vector<oracle::NamePair> tree = {{"a", "r"}, {"b", "r"}, {"c", "a"}, {"d", "a"}};
    const auto support = oracle::enumerate_sampler_support(tree, {oracle::Sampler::S4, std::nullopt, oracle::NamePair{"a", "c"}});
    const bool ok = support.size() == 1 && support.count({"d", "c"}) == 1;
    row("s4_support_enumeration", ok, fmt("outcomes=", support.size()));
  }
  return all;
}

}  // namespace doe::cli
