// Acceptance harness: one PASS / FAIL / BLOCKED line per criterion.
//
//   doe_acceptance properties            criterion 7, no datasets
//   doe_acceptance wordnet <edges.tsv>   criteria 1 and 8
//   doe_acceptance hyperlex <edges.tsv> <synset_map.tsv> [graded.tsv]
//                                        criteria 2-6; the graded file may also
//                                        come from DOE_HYPERLEX_NOUNS. Exits 77
//                                        (skipped) when it is unavailable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "doe/cli.hpp"
#include "doe/evaluation.hpp"
#include "doe/io.hpp"
#include "doe/oracle.hpp"
#include "doe/training.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace doe;
using doe::testing::random_gaussian;
using doe::testing::rel_close;

namespace {

constexpr int kSkipped = 77;

struct Check {
  std::string name;
  bool ok = true;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << x;
  return ss.str();
}

void print_criterion(int id, const std::string& status, const std::string& summary) {
  std::cout << "criterion " << id << ": " << status << "  " << summary << std::endl;
}

void print_criterion(int id, const std::vector<Check>& checks, const std::string& summary) {
  bool ok = true;
  std::string failed;
  for (const auto& c : checks) {
    ok = ok && c.ok;
    if (!c.ok) failed += (failed.empty() ? "" : ", ") + c.name;
  }
  for (const auto& c : checks) std::cout << "  " << (c.ok ? "ok  " : "FAIL") << "  " << c.name << "  " << c.detail << '\n';
  print_criterion(id, ok ? "PASS" : "FAIL", failed.empty() ? summary : summary + " (failed: " + failed + ")");
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- criterion 7 -----------------------------------------------------------

std::vector<double> flat_grad(const GradPair& g) {
  std::vector<double> out;
  for (const auto* v : {&g.d_mean_f, &g.d_logvar_f, &g.d_mean_g, &g.d_logvar_g}) out.insert(out.end(), v->begin(), v->end());
  return out;
}

Check divergence_oracles() {
  Check c{"divergence vs oracle (3 sigma MC, 1e-6 quadrature)"};
  std::mt19937_64 rng(7001);
  const auto n01 = DiagGaussian::isotropic({0.0}, 1.0);
  const auto n04 = DiagGaussian::isotropic({0.0}, 4.0);
  const auto n11 = DiagGaussian::isotropic({1.0}, 1.0);
  int mc_fail = 0;
  for (const auto& [f, g] : std::vector<std::pair<DiagGaussian, DiagGaussian>>{{n01, n04}, {n04, n01}, {n11, n01}}) {
    const auto est = oracle::mc_kl(f, g, 1000000, rng);
    if (std::abs(est.mean - kl(f, g)) > 3.0 * est.std_error) ++mc_fail;
  }
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto f = random_gaussian(1, rng);
    const auto g = random_gaussian(1, rng);
    worst = std::max(worst, std::abs(neg_log_elk(f, g) - oracle::quad_elk_1d(f, g)));
    for (double alpha : {0.25, 0.5, 0.9}) {
      worst = std::max(worst, std::abs(renyi(alpha, f, g) - oracle::quad_renyi_1d(alpha, f, g)));
    }
  }
  c.ok = mc_fail == 0 && worst <= 1e-6;
  c.detail = "mc_failures=" + std::to_string(mc_fail) + " max_quadrature_err=" + fmt(worst, 3);
  return c;
}

Check gradient_checks() {
  Check c{"gradients vs finite differences (rel 1e-4, 100 per kind)"};
  std::mt19937_64 rng(7002);
  int failures = 0, instances = 0;
  for (const auto& kind : {DivergenceKind::kl(), DivergenceKind::reverse_kl(), DivergenceKind::renyi(0.5),
                           DivergenceKind::renyi(0.8), DivergenceKind::neg_log_elk()}) {
    for (int i = 0; i < 100; ++i) {
      const auto f = random_gaussian(5, rng);
      const auto g = random_gaussian(5, rng);
      std::vector<double> params;
      for (const auto* v : {&f.mean(), &f.log_var(), &g.mean(), &g.log_var()}) params.insert(params.end(), v->begin(), v->end());
      const auto numeric = oracle::fd_grad(
          [&](std::span<const double> p) {
            return divergence(kind, {p.subspan(0, 5), p.subspan(5, 5)}, {p.subspan(10, 5), p.subspan(15, 5)});
          },
          params);
      const auto analytic = flat_grad(divergence_with_grad(kind, f, g));
      bool ok = true;
      for (std::size_t k = 0; k < analytic.size(); ++k) ok = ok && rel_close(analytic[k], numeric[k], 1e-4);
      failures += !ok;
      ++instances;
    }
  }
  // full-batch losses
  for (LossKind loss : {LossKind::Doe, LossKind::W2gRank}) {
    for (int trial = 0; trial < 100; ++trial) {
      constexpr std::size_t n = 5, d = 3;
      EmbeddingTable t(n, d);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& x : t.means()) x = normal(rng);
      for (double& x : t.log_vars()) x = 0.5 * normal(rng);
      TrainConfig cfg;
      cfg.dim = d;
      cfg.gamma = 0.3;
      cfg.margin = 4.0;
      const std::vector<Pair> pos = {{0, 1}, {1, 2}, {3, 4}};
      const std::vector<Pair> neg = {{1, 0}, {4, 0}, {2, 3}};
      const std::vector<RankTriple> triples = {{pos[0], neg[0]}, {pos[1], neg[1]}, {pos[2], neg[2]}};
      auto eval = [&](const EmbeddingTable& tab) {
        return loss == LossKind::Doe ? doe_loss(pos, neg, tab, cfg) : w2g_rank_loss(triples, tab, cfg);
      };
      std::vector<double> params = t.means();
      params.insert(params.end(), t.log_vars().begin(), t.log_vars().end());
      const auto numeric = oracle::fd_grad(
          [&](std::span<const double> p) {
            EmbeddingTable u(n, d);
            std::copy(p.begin(), p.begin() + n * d, u.means().begin());
            std::copy(p.begin() + n * d, p.end(), u.log_vars().begin());
            return eval(u).loss;
          },
          params);
      const auto r = eval(t);
      std::vector<double> analytic(params.size(), 0.0);
      for (std::size_t s = 0; s < r.grads.rows().size(); ++s) {
        const NodeId row = r.grads.rows()[s];
        for (std::size_t k = 0; k < d; ++k) {
          analytic[row * d + k] = r.grads.d_mean(s)[k];
          analytic[n * d + row * d + k] = r.grads.d_log_var(s)[k];
        }
      }
      bool ok = true;
      for (std::size_t k = 0; k < analytic.size(); ++k) ok = ok && rel_close(analytic[k], numeric[k], 1e-4);
      failures += !ok;
      ++instances;
    }
  }
  c.ok = failures == 0;
  c.detail = "instances=" + std::to_string(instances) + " failures=" + std::to_string(failures);
  return c;
}

Check renyi_limit() {
  Check c{"renyi alpha->1 limit (tol 1e-2)"};
  std::mt19937_64 rng(7003);
  const auto n01 = DiagGaussian::isotropic({0.0}, 1.0);
  const auto n04 = DiagGaussian::isotropic({0.0}, 4.0);
  double worst = std::abs(renyi(0.999, n01, n04) - kl(n01, n04));
  for (int i = 0; i < 100; ++i) {
    const auto f = random_gaussian(2, rng, -0.5, 0.5);
    const auto g = random_gaussian(2, rng, -0.5, 0.5);
    worst = std::max(worst, std::abs(renyi(1.0 - 1e-3, f, g) - kl(f, g)));
  }
  c.ok = worst < 1e-2;
  c.detail = "max_gap=" + fmt(worst, 3);
  return c;
}

Check symmetries() {
  Check c{"renyi 1/2 (rel 1e-10) and ELK (bitwise) symmetry"};
  std::mt19937_64 rng(7004);
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    const auto f = random_gaussian(6, rng);
    const auto g = random_gaussian(6, rng);
    const double a = renyi(0.5, f, g), b = renyi(0.5, g, f);
    failures += std::abs(a - b) > 1e-10 * std::max(std::abs(a), std::abs(b));
    failures += neg_log_elk(f, g) != neg_log_elk(g, f);
  }
  c.ok = failures == 0;
  c.detail = "failures=" + std::to_string(failures);
  return c;
}

Check closure_equivalence() {
  Check c{"closure equals brute-force reachability on random DAGs"};
  std::mt19937_64 rng(7005);
  int mismatches = 0, graphs = 0;
  while (graphs < 50) {
    std::uniform_int_distribution<int> size(2, 50);
    std::uniform_real_distribution<double> density(0.02, 0.3);
    const auto edges = testing::random_dag(size(rng), density(rng), rng);
    if (edges.empty()) continue;
    ++graphs;
    const auto g = testing::closed_graph(edges);
    std::set<oracle::NamePair> mine;
    for (const Pair& p : g.closure_pairs()) mine.emplace(g.name(p.hypo), g.name(p.hyper));
    mismatches += mine != oracle::brute_closure({edges.begin(), edges.end()});
  }
  c.ok = mismatches == 0;
  c.detail = "graphs=" + std::to_string(graphs) + " mismatches=" + std::to_string(mismatches);
  return c;
}

Check sampler_support() {
  Check c{"sampler output support equals enumeration (5 sigma frequencies)"};
  const auto edges = testing::tree_edges();
  const std::vector<oracle::NamePair> named(edges.begin(), edges.end());
  const auto g = testing::closed_graph(edges);
  Rng rng(7006);
  constexpr int kDraws = 100000;
  int problems = 0, distributions = 0;
  auto compare = [&](const std::map<oracle::NamePair, double>& support, auto draw) {
    std::map<oracle::NamePair, int> counts;
    for (int i = 0; i < kDraws; ++i) {
      const Pair p = draw();
      ++counts[{g.name(p.hypo), g.name(p.hyper)}];
    }
    ++distributions;
    std::set<oracle::NamePair> seen, expected;
    for (const auto& [k, n] : counts) seen.insert(k);
    for (const auto& [k, p] : support) {
      expected.insert(k);
      const double n = counts.count(k) ? counts.at(k) : 0.0;
      problems += std::abs(n - kDraws * p) > 5.0 * std::sqrt(kDraws * p * (1.0 - p)) + 1e-9;
    }
    problems += seen != expected;
  };
  for (const Pair& pos : g.closure_pairs()) {
    const oracle::NamePair np{g.name(pos.hypo), g.name(pos.hyper)};
    const auto support = oracle::enumerate_sampler_support(named, {oracle::Sampler::S1, np, std::nullopt});
    compare(support, [&] { return sample_s1(g, pos, rng); });
  }
  compare(oracle::enumerate_sampler_support(named, {oracle::Sampler::S3, std::nullopt, std::nullopt}),
          [&] { return sample_s3(g, rng); });
  compare(oracle::enumerate_sampler_support(named, {oracle::Sampler::S4, std::nullopt, std::nullopt}),
          [&] { return sample_s4(g, rng); });
  c.ok = problems == 0;
  c.detail = "distributions=" + std::to_string(distributions) + " problems=" + std::to_string(problems);
  return c;
}

Check checkpoint_round_trip() {
  Check c{"checkpoint round trip is bitwise"};
  std::mt19937_64 rng(7007);
  std::normal_distribution<double> normal(0.0, 10.0);
  EmbeddingTable t(50, 7);
  for (double& x : t.means()) x = normal(rng);
  for (double& x : t.log_vars()) x = normal(rng);
  std::vector<std::string> names;
  for (int i = 0; i < 50; ++i) names.push_back("n" + std::to_string(i) + ".n.01");
  const io::CheckpointMeta meta{DivergenceKind::renyi(0.3), 500.0, 99};
  const fs::path path = fs::temp_directory_path() / "doe_acceptance_roundtrip.ckpt";
  io::save_checkpoint(path, names, t, meta);
  const auto back = io::load_checkpoint(path);
  fs::remove(path);
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  c.ok = back.names == names && same(back.table.means(), t.means()) && same(back.table.log_vars(), t.log_vars()) &&
         back.meta == meta;
  c.detail = c.ok ? "identical" : "differs";
  return c;
}

Check toy_tree() {
  Check c{"toy tree convergence, root log-det strictly largest"};
  const auto g = testing::closed_graph(testing::tree_edges());
  TrainConfig cfg;
  cfg.kind = DivergenceKind::kl();
  cfg.gamma = 1.0;
  cfg.margin = 10.0;
  cfg.dim = 2;
  cfg.epochs = 200;
  cfg.init_var = 0.1;
  cfg.learning_rate = 0.05;
  const auto t = train(g, cfg);
  double max_pos = 0.0, min_swapped = INFINITY;
  for (const Pair& p : g.closure_pairs()) {
    max_pos = std::max(max_pos, penalty(cfg.penalty(), t.row(p.hypo), t.row(p.hyper)));
    min_swapped = std::min(min_swapped, penalty(cfg.penalty(), t.row(p.hyper), t.row(p.hypo)));
  }
  const double root = log_det_volume(t.row(g.id("r")));
  double max_leaf = -INFINITY;
  for (const char* leaf : {"b", "c", "d"}) max_leaf = std::max(max_leaf, log_det_volume(t.row(g.id(leaf))));
  c.ok = max_pos == 0.0 && min_swapped > cfg.margin / 2.0 && root > max_leaf;
  c.detail = "max_positive_penalty=" + fmt(max_pos) + " (need 0) min_swapped_penalty=" + fmt(min_swapped) +
             " (need > 5) root_logdet=" + fmt(root) + " max_leaf_logdet=" + fmt(max_leaf);
  return c;
}

int run_properties() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Check> checks = {divergence_oracles(), gradient_checks(), renyi_limit(),  symmetries(),
                                     closure_equivalence(), sampler_support(), checkpoint_round_trip(), toy_tree()};
  print_criterion(7, checks, "property suites in " + fmt(elapsed_s(start), 3) + "s");
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; }) ? 0 : 1;
}

// ---- dataset runs ----------------------------------------------------------

struct Experiment {
  HierarchyGraph train_graph;
  LabeledPairSet val;
  LabeledPairSet test;
};

// Seeded 4000 + 4000 split of the full closure; training uses the remaining
// closure pairs as the relation.
Experiment prepare(const fs::path& edges_path) {
  const auto closed = transitive_closure(HierarchyGraph::build(io::load_edges(edges_path)));
  std::cout << "# closure: nodes=" << closed.size() << " pairs=" << closed.closure_pairs().size() << std::endl;
  const io::Split split = io::make_split(closed, 4000, 4000, 1);
  Experiment e;
  e.train_graph = HierarchyGraph::build(split.train);
  e.train_graph.adopt_as_closure();
  e.val = io::resolve(split.val, e.train_graph);
  e.test = io::resolve(split.test, e.train_graph);
  return e;
}

TrainConfig best_config() {
  TrainConfig cfg;  // defaults are m=2000, beta=5e-5, gamma=500, d=50, S1+S2+S4
  cfg.epochs = 20;
  cfg.seed = 1;
  cfg.learning_rate = 3e-3;  // picked on val accuracy from {1e-3, 3e-3, 1e-2}
  return cfg;
}

struct RunResult {
  EmbeddingTable table;
  BinaryReport binary;
  std::optional<double> rho;
};

RunResult run_experiment(const Experiment& e, const TrainConfig& cfg, const std::string& label,
                         const std::vector<GradedPair>* graded = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  TrainCallbacks callbacks;
  callbacks.validate = [&](const EmbeddingTable& t) {
    return evaluate_hypernym(e.val, e.val, t, cfg.kind).val_accuracy;
  };
  callbacks.on_epoch = [&](const EpochMetrics& m) {
    std::cout << "# " << label << " epoch=" << m.epoch << " loss=" << fmt(m.train_loss, 6)
              << " val_acc=" << fmt(m.val_accuracy.value_or(NAN)) << std::endl;
  };
  RunResult r{train(e.train_graph, cfg, callbacks), {}, std::nullopt};
  r.binary = evaluate_hypernym(e.val, e.test, r.table, cfg.kind);
  if (graded) r.rho = evaluate_graded(*graded, r.table, cfg.kind).spearman_rho;
  std::cout << "# " << label << " threshold=" << fmt(r.binary.threshold, 6) << " val_acc=" << fmt(r.binary.val_accuracy)
            << " test_acc=" << fmt(r.binary.test_accuracy);
  if (r.rho) std::cout << " spearman=" << fmt(*r.rho);
  std::cout << " time=" << fmt(elapsed_s(start), 4) << "s" << std::endl;
  return r;
}

const std::vector<std::string> kMatrixSynsets = {"city.n.01",  "location.n.01", "living_thing.n.01",
                                                "whole.n.02", "object.n.01",   "physical_entity.n.01"};

int run_wordnet(const fs::path& edges_path) {
  const Experiment e = prepare(edges_path);
  const TrainConfig cfg = best_config();
  const RunResult r = run_experiment(e, cfg, "best-kl");

  const bool c1 = r.binary.test_accuracy >= 0.91;
  print_criterion(1, c1 ? "PASS" : "FAIL", "test accuracy " + fmt(r.binary.test_accuracy) + " (need >= 0.91)");

  // Matrix through the CLI, counts from the library.
  const fs::path ckpt = fs::temp_directory_path() / "doe_acceptance_wordnet.ckpt";
  io::save_checkpoint(ckpt, e.train_graph.names(), r.table, {cfg.kind, cfg.gamma, cfg.seed});
  std::string node_arg;
  for (const auto& s : kMatrixSynsets) node_arg += (node_arg.empty() ? "" : ",") + s;
  std::ostringstream inspect_out, inspect_err;
  const int inspect_code = cli::run({"doe", "inspect", "--checkpoint", ckpt.string(), "--nodes", node_arg}, inspect_out,
                                    inspect_err);
  fs::remove(ckpt);
  std::cout << inspect_out.str() << inspect_err.str();

  const auto full = transitive_closure(HierarchyGraph::build(io::load_edges(edges_path)));
  std::vector<NodeId> nodes, full_ids;
  for (const auto& s : kMatrixSynsets) {
    nodes.push_back(e.train_graph.id(s));
    full_ids.push_back(full.id(s));
  }
  const auto m = kl_matrix(nodes, r.table, cfg.kind);
  int true_cells = 0, true_below = 0, correct = 0, cells = 0;
  for (std::size_t row = 0; row < nodes.size(); ++row) {
    for (std::size_t col = 0; col < nodes.size(); ++col) {
      if (row == col) continue;
      const bool truth = full.entails(full_ids[col], full_ids[row]);  // column |= row
      const bool predicted = m[row][col] < r.binary.threshold;
      ++cells;
      correct += truth == predicted;
      if (truth) {
        ++true_cells;
        true_below += predicted;
      }
    }
  }
  const int needed = static_cast<int>(std::ceil(20.0 / 23.0 * true_cells));
  const bool c8 = inspect_code == 0 && true_below >= needed && correct >= 20;
  print_criterion(8, c8 ? "PASS" : "FAIL",
                  "true cells below threshold " + std::to_string(true_below) + "/" + std::to_string(true_cells) +
                      " (need >= " + std::to_string(needed) + "), correct cells " + std::to_string(correct) + "/" +
                      std::to_string(cells) + " (need >= 20)");
  return c1 && c8 ? 0 : 1;
}

int run_hyperlex(const fs::path& edges_path, const fs::path& synset_path, std::string graded_path) {
  if (graded_path.empty()) {
    if (const char* env = std::getenv("DOE_HYPERLEX_NOUNS")) graded_path = env;
  }
  if (graded_path.empty() || !fs::exists(graded_path)) {
    const std::string why = "HyperLex noun pairs not available (set DOE_HYPERLEX_NOUNS)";
    for (int id = 2; id <= 6; ++id) print_criterion(id, "BLOCKED", why);
    return kSkipped;
  }
  const Experiment e = prepare(edges_path);
  const auto graded = io::attach_synsets(io::load_graded(graded_path), io::load_synset_map(synset_path), e.train_graph);
  std::cout << "# graded pairs=" << graded.size() << std::endl;

  const TrainConfig best = best_config();
  const RunResult base = run_experiment(e, best, "best-kl", &graded);
  const bool c2 = *base.rho >= 0.55;
  print_criterion(2, c2 ? "PASS" : "FAIL", "spearman " + fmt(*base.rho) + " (need >= 0.55)");

  TrainConfig rank = best;
  rank.loss = LossKind::W2gRank;
  const RunResult w2g = run_experiment(e, rank, "rank-loss", &graded);
  const double acc_gap = base.binary.test_accuracy - w2g.binary.test_accuracy;
  const double rho_gap = *base.rho - *w2g.rho;
  const bool c3 = acc_gap >= 0.05 && rho_gap >= 0.05;
  print_criterion(3, c3 ? "PASS" : "FAIL",
                  "accuracy gap " + fmt(acc_gap) + ", spearman gap " + fmt(rho_gap) + " (need >= 0.05 each)");

  TrainConfig s1 = best;
  s1.neg = NegSpec::parse("s1:1");
  s1.gamma = 0.0;
  const RunResult zero = run_experiment(e, s1, "s1-gamma0", &graded);
  double best_nonzero = -INFINITY;
  for (double gamma : {250.0, 500.0, 1000.0}) {
    s1.gamma = gamma;
    best_nonzero = std::max(best_nonzero, *run_experiment(e, s1, "s1-gamma" + fmt(gamma), &graded).rho);
  }
  const bool c4 = best_nonzero - *zero.rho >= 0.03;
  print_criterion(4, c4 ? "PASS" : "FAIL",
                  "best nonzero-gamma spearman " + fmt(best_nonzero) + " vs gamma=0 " + fmt(*zero.rho) + " (need gap >= 0.03)");

  TrainConfig only_s1 = best;
  only_s1.neg = NegSpec::parse("s1:1");
  const RunResult s1_run = run_experiment(e, only_s1, "s1-only", &graded);
  const bool c5 = *base.rho - *s1_run.rho >= 0.03;
  print_criterion(5, c5 ? "PASS" : "FAIL",
                  "S1+S2+S4 spearman " + fmt(*base.rho) + " vs S1 " + fmt(*s1_run.rho) + " (need gap >= 0.03)");

  TrainConfig small = best;
  small.dim = 5;
  const RunResult d5 = run_experiment(e, small, "dim5", &graded);
  const bool c6 = *base.rho - *d5.rho >= 0.05;
  print_criterion(6, c6 ? "PASS" : "FAIL",
                  "d=50 spearman " + fmt(*base.rho) + " vs d=5 " + fmt(*d5.rho) + " (need gap >= 0.05)");
  return c2 && c3 && c4 && c5 && c6 ? 0 : 1;
}

int usage() {
  std::cerr << "usage: doe_acceptance properties\n"
               "       doe_acceptance wordnet <edges.tsv>\n"
               "       doe_acceptance hyperlex <edges.tsv> <synset_map.tsv> [graded.tsv]\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return usage();
  try {
    if (args[0] == "properties" && args.size() == 1) return run_properties();
    if (args[0] == "wordnet" && args.size() == 2) return run_wordnet(args[1]);
    if (args[0] == "hyperlex" && (args.size() == 3 || args.size() == 4)) {
      return run_hyperlex(args[1], args[2], args.size() == 4 ? args[3] : "");
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << '\n';
    return 1;
  }
  return usage();
}
