#include "doe/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "doe/error.hpp"
#include "doe/evaluation.hpp"
#include "doe/io.hpp"
#include "doe/training.hpp"

namespace doe::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HyperParams {
  double margin = 2000.0;
  double init_var = 5e-5;
  double gamma = 500.0;
  std::string divergence = "kl";
  std::size_t dim = 50;
  std::string neg = "s1:1,s2:1,s4:1";
  std::size_t batch_size = 500;
  int epochs = 20;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  std::string loss = "doe";
  bool renormalize = false;
  std::size_t threads = 1;

  TrainConfig to_config() const {
    TrainConfig cfg;
    cfg.margin = margin;
    cfg.init_var = init_var;
    cfg.gamma = gamma;
    cfg.kind = DivergenceKind::parse(divergence);
    cfg.dim = dim;
    cfg.neg = NegSpec::parse(neg);
    cfg.batch_size = batch_size;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.adam_beta1 = beta1;
    cfg.adam_beta2 = beta2;
    cfg.adam_eps = eps;
    cfg.seed = seed;
    if (loss == "doe") {
      cfg.loss = LossKind::Doe;
    } else if (loss == "w2g") {
      cfg.loss = LossKind::W2gRank;
    } else {
      throw std::invalid_argument("unknown loss '" + loss + "' (expected doe or w2g)");
    }
    cfg.renormalize_means = renormalize;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
  }
};

void add_hyper_params(CLI::App* app, HyperParams& hp) {
  app->add_option("--margin", hp.margin, "Loss margin m")->capture_default_str();
  app->add_option("--init-var", hp.init_var, "Initial variance beta")->capture_default_str();
  app->add_option("--gamma", hp.gamma, "Divergence threshold gamma")->capture_default_str();
  app->add_option("--divergence", hp.divergence, "kl | rkl | elk | renyi:<alpha>")->capture_default_str();
  app->add_option("--dim", hp.dim, "Embedding dimension")->capture_default_str();
  app->add_option("--neg", hp.neg, "Negatives per positive, e.g. s1:1,s2:1,s4:1")->capture_default_str();
  app->add_option("--batch-size", hp.batch_size, "Positives per minibatch")->capture_default_str();
  app->add_option("--epochs", hp.epochs, "Training epochs")->capture_default_str();
  app->add_option("--lr", hp.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--beta1", hp.beta1, "Adam beta1")->capture_default_str();
  app->add_option("--beta2", hp.beta2, "Adam beta2")->capture_default_str();
  app->add_option("--eps", hp.eps, "Adam epsilon")->capture_default_str();
  app->add_option("--seed", hp.seed, "Random seed")->capture_default_str();
  app->add_option("--loss", hp.loss, "doe | w2g")->capture_default_str();
  app->add_flag("--renormalize", hp.renormalize, "Rescale means to unit norm after each step");
  app->add_option("--threads", hp.threads, "Gradient worker threads")->capture_default_str();
}

struct DataPaths {
  std::string edges;
  bool closed = false;
  std::string val;
  std::string test;
  std::string graded;
  std::string synsets;
};

void add_graph_options(CLI::App* app, DataPaths& paths) {
  app->add_option("--edges", paths.edges, "Edge TSV (child<TAB>parent)")->required()->check(CLI::ExistingFile);
  app->add_flag("--closed", paths.closed, "Use the edges as the full relation instead of closing them");
}

HierarchyGraph load_graph(const DataPaths& paths) {
  const auto edges = io::load_edges(paths.edges);
  HierarchyGraph g = HierarchyGraph::build(edges);
  if (paths.closed) {
    g.adopt_as_closure();
  } else {
    g.close();
  }
  return g;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_metrics_header(std::ostream& out) { out << "epoch\ttrain_loss\tval_accuracy\n"; }

void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  out << m.epoch << '\t' << io::format_double(m.train_loss) << '\t'
      << (m.val_accuracy ? io::format_double(*m.val_accuracy) : std::string("nan")) << '\n';
}

TrainCallbacks validation_callbacks(const std::optional<LabeledPairSet>& val, const DivergenceKind& kind) {
  TrainCallbacks cb;
  if (val) {
    cb.validate = [&val, kind](const EmbeddingTable& table) {
      const auto scores = pair_scores(*val, table, kind);
      return accuracy_at(scores, *val, tune_threshold_on_scores(scores, *val));
    };
  }
  return cb;
}

// ---- subcommands ----

int cmd_closure(const DataPaths& paths, const std::string& out_path, std::ostream& out) {
  const auto edges = io::load_edges(paths.edges);
  HierarchyGraph g = transitive_closure(HierarchyGraph::build(edges));
  std::vector<NamedEdge> pairs;
  pairs.reserve(g.closure_pairs().size());
  for (const Pair& p : g.closure_pairs()) pairs.emplace_back(g.name(p.hypo), g.name(p.hyper));
  if (out_path.empty() || out_path == "-") {
    for (const auto& [c, p] : pairs) out << c << '\t' << p << '\n';
  } else {
    io::write_edges(out_path, pairs);
  }
  out << "# nodes=" << g.size() << " direct_edges=" << g.direct_edges().size() << " closure_pairs=" << pairs.size()
      << '\n';
  return kOk;
}

int cmd_split(const DataPaths& paths, const std::string& out_dir, std::size_t n_val, std::size_t n_test,
              std::uint64_t seed, std::ostream& out) {
  HierarchyGraph g = load_graph(paths);
  const io::Split split = io::make_split(g, n_val, n_test, seed);
  fs::create_directories(out_dir);
  io::write_edges(fs::path(out_dir) / "train.tsv", split.train);
  io::write_labeled_pairs(fs::path(out_dir) / "val.tsv", split.val);
  io::write_labeled_pairs(fs::path(out_dir) / "test.tsv", split.test);
  out << "train_pairs=" << split.train.size() << " val_pairs=" << split.val.size()
      << " test_pairs=" << split.test.size() << '\n';
  return kOk;
}

int cmd_train(const DataPaths& paths, const HyperParams& hp, const std::string& checkpoint,
              const std::string& metrics_path, std::ostream& out) {
  const TrainConfig cfg = hp.to_config();
  const HierarchyGraph g = load_graph(paths);
  std::optional<LabeledPairSet> val;
  if (!paths.val.empty()) val = io::resolve(io::load_labeled_pairs(paths.val), g);

  std::ofstream metrics_file;
  std::ostream* metrics = &out;
  if (!metrics_path.empty()) {
    metrics_file.open(metrics_path, std::ios::binary);
    if (!metrics_file) throw DataError("cannot write '" + metrics_path + "'");
    metrics = &metrics_file;
  }
  write_metrics_header(*metrics);
  TrainCallbacks cb = validation_callbacks(val, cfg.kind);
  cb.on_epoch = [metrics](const EpochMetrics& m) {
    write_metrics_row(*metrics, m);
    metrics->flush();
  };
  const EmbeddingTable table = train(g, cfg, cb);
  io::save_checkpoint(checkpoint, g.names(), table, {cfg.kind, cfg.gamma, cfg.seed});
  out << "# nodes=" << g.size() << " pairs=" << g.closure_pairs().size() << " checkpoint=" << checkpoint << '\n';
  return kOk;
}

HierarchyGraph graph_from_checkpoint(const io::Checkpoint& cp) {
  return HierarchyGraph::build(cp.names, std::span<const NamedEdge>{});
}

DivergenceKind kind_or_checkpoint(const std::string& divergence, const io::Checkpoint& cp) {
  return divergence.empty() ? cp.meta.kind : DivergenceKind::parse(divergence);
}

int cmd_eval_hypernym(const std::string& checkpoint, const DataPaths& paths, const std::string& divergence,
                      std::ostream& out) {
  const io::Checkpoint cp = io::load_checkpoint(checkpoint);
  const HierarchyGraph g = graph_from_checkpoint(cp);
  const auto val = io::resolve(io::load_labeled_pairs(paths.val), g);
  const auto test = io::resolve(io::load_labeled_pairs(paths.test), g);
  const BinaryReport r = evaluate_hypernym(val, test, cp.table, kind_or_checkpoint(divergence, cp));
  out << "threshold\tval_accuracy\ttest_accuracy\n"
      << io::format_double(r.threshold) << '\t' << io::format_double(r.val_accuracy) << '\t'
      << io::format_double(r.test_accuracy) << '\n';
  return kOk;
}

int cmd_eval_hyperlex(const std::string& checkpoint, const DataPaths& paths, const std::string& divergence,
                      const std::string& scores_out, std::ostream& out) {
  const io::Checkpoint cp = io::load_checkpoint(checkpoint);
  const HierarchyGraph g = graph_from_checkpoint(cp);
  const auto pairs = io::attach_synsets(io::load_graded(paths.graded), io::load_synset_map(paths.synsets), g);
  const GradedReport r = evaluate_graded(pairs, cp.table, kind_or_checkpoint(divergence, cp));
  if (!scores_out.empty()) {
    std::ofstream f(scores_out, std::ios::binary);
    if (!f) throw DataError("cannot write '" + scores_out + "'");
    f << "word1\tword2\tgold\tmodel\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      f << pairs[i].word_u << '\t' << pairs[i].word_v << '\t' << io::format_double(pairs[i].gold) << '\t'
        << io::format_double(r.scores[i]) << '\n';
    }
  }
  out << "spearman\tpairs\tmissing\n"
      << io::format_double(r.spearman_rho) << '\t' << pairs.size() << '\t' << r.missing << '\n';
  return kOk;
}

int cmd_inspect(const std::string& checkpoint, const std::string& nodes_arg, const std::string& divergence,
                std::ostream& out) {
  const io::Checkpoint cp = io::load_checkpoint(checkpoint);
  const HierarchyGraph g = graph_from_checkpoint(cp);
  std::vector<NodeId> nodes;
  for (const auto& name : split_list(nodes_arg, ',')) nodes.push_back(g.id(name));
  if (nodes.empty()) throw UsageError("inspect needs --nodes");
  const DivergenceKind kind = kind_or_checkpoint(divergence, cp);
  const auto m = kl_matrix(nodes, cp.table, kind);
  out << "# " << kind.to_string() << "(column || row)\n";
  out << "row";
  for (NodeId c : nodes) out << '\t' << g.name(c);
  out << '\n';
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    out << g.name(nodes[r]);
    for (double x : m[r]) out << '\t' << io::format_double(x);
    out << '\n';
  }
  out << "# log_det_volume\nnode\tlog_det\n";
  for (const auto& e : volume_report(nodes, g, cp.table)) out << e.name << '\t' << io::format_double(e.log_det) << '\n';
  return kOk;
}

struct SweepGrids {
  std::vector<double> margins;
  std::vector<double> init_vars;
  std::vector<double> gammas;
  std::vector<std::string> divergences;
  std::vector<std::size_t> dims;
  std::vector<std::string> negs;
};

int cmd_sweep(const DataPaths& paths, const HyperParams& base, const SweepGrids& grids, const std::string& out_path,
              std::ostream& out) {
  auto or_base = []<class T>(std::vector<T> v, T fallback) {
    if (v.empty()) v.push_back(fallback);
    return v;
  };
  const auto margins = or_base(grids.margins, base.margin);
  const auto init_vars = or_base(grids.init_vars, base.init_var);
  const auto gammas = or_base(grids.gammas, base.gamma);
  const auto divergences = or_base(grids.divergences, base.divergence);
  const auto dims = or_base(grids.dims, base.dim);
  const auto negs = or_base(grids.negs, base.neg);

  // Reject malformed grid entries before any training starts.
  for (const auto& d : divergences) DivergenceKind::parse(d);
  for (const auto& n : negs) NegSpec::parse(n);

  const HierarchyGraph g = load_graph(paths);
  std::optional<LabeledPairSet> val;
  std::optional<LabeledPairSet> test;
  if (!paths.val.empty()) val = io::resolve(io::load_labeled_pairs(paths.val), g);
  if (!paths.test.empty()) test = io::resolve(io::load_labeled_pairs(paths.test), g);
  std::optional<std::vector<GradedPair>> graded;
  if (!paths.graded.empty()) {
    if (paths.synsets.empty()) throw UsageError("--graded needs --synsets");
    graded = io::attach_synsets(io::load_graded(paths.graded), io::load_synset_map(paths.synsets), g);
  }

  std::ofstream file;
  std::ostream* summary = &out;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw DataError("cannot write '" + out_path + "'");
    summary = &file;
  }
  *summary << "cell\tmargin\tinit_var\tgamma\tdivergence\tdim\tneg\tstatus\tthreshold\tval_accuracy\ttest_accuracy\t"
              "spearman\n";
  std::size_t cell = 0;
  const std::string na = "nan";
  for (double m : margins) {
    for (double b : init_vars) {
      for (double gm : gammas) {
        for (const auto& dv : divergences) {
          for (std::size_t d : dims) {
            for (const auto& ng : negs) {
              HyperParams hp = base;
              hp.margin = m;
              hp.init_var = b;
              hp.gamma = gm;
              hp.divergence = dv;
              hp.dim = d;
              hp.neg = ng;
              std::string status = "ok";
              std::string threshold = na, val_acc = na, test_acc = na, rho = na;
              try {
                const TrainConfig cfg = hp.to_config();
                const EmbeddingTable table = train(g, cfg, validation_callbacks(val, cfg.kind));
                if (val && test) {
                  const BinaryReport r = evaluate_hypernym(*val, *test, table, cfg.kind);
                  threshold = io::format_double(r.threshold);
                  val_acc = io::format_double(r.val_accuracy);
                  test_acc = io::format_double(r.test_accuracy);
                }
                if (graded) rho = io::format_double(evaluate_graded(*graded, table, cfg.kind).spearman_rho);
              } catch (const std::exception& e) {
                std::string msg = e.what();
                for (char& c : msg) {
                  if (c == '\t' || c == '\n') c = ' ';
                }
                status = "failed: " + msg;
              }
              *summary << cell++ << '\t' << io::format_double(m) << '\t' << io::format_double(b) << '\t'
                       << io::format_double(gm) << '\t' << dv << '\t' << d << '\t' << ng << '\t' << status << '\t'
                       << threshold << '\t' << val_acc << '\t' << test_acc << '\t' << rho << '\n';
              summary->flush();
            }
          }
        }
      }
    }
  }
  return kOk;
}

// Config file entries become "--key=value" arguments placed before the
// command-line ones, so explicit flags take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> config;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a path");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config) return rest;
  if (!fs::exists(*config)) throw UsageError("config file not found: " + *config);
  if (rest.size() < 2) throw UsageError("--config needs a subcommand");
  std::vector<std::string> out(rest.begin(), rest.begin() + 2);
  for (const auto& [key, value] : io::load_config(*config)) out.push_back("--" + key + "=" + value);
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Density order embeddings: train and evaluate Gaussian embeddings of hierarchies"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  DataPaths paths;
  HyperParams hp;
  std::string out_path;
  std::string checkpoint;
  std::string metrics;
  std::string divergence;
  std::string nodes;
  std::string scores_out;
  std::size_t n_val = 4000;
  std::size_t n_test = 4000;
  std::uint64_t split_seed = 1;
  bool verify = false;
  SweepGrids grids;
  std::string neg_grid;

  auto* closure = app.add_subcommand("closure", "Transitive closure of an edge list");
  closure->add_option("--edges", paths.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  closure->add_option("--out", out_path, "Output TSV (default: stdout)");

  auto* split = app.add_subcommand("split", "Seeded train/val/test split of the closure");
  add_graph_options(split, paths);
  split->add_option("--out-dir", out_path, "Output directory")->required();
  split->add_option("--val", n_val, "Held-out positives for validation")->capture_default_str();
  split->add_option("--test", n_test, "Held-out positives for test")->capture_default_str();
  split->add_option("--seed", split_seed, "Split seed")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train embeddings and write a checkpoint");
  add_graph_options(train_cmd, paths);
  add_hyper_params(train_cmd, hp);
  train_cmd->add_option("--val", paths.val, "Labeled validation pairs for model selection")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", checkpoint, "Checkpoint path")->required();
  train_cmd->add_option("--metrics", metrics, "Per-epoch metrics TSV (default: stdout)");

  auto* eval_h = app.add_subcommand("eval-hypernym", "Tune a threshold on val, report test accuracy");
  eval_h->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval_h->add_option("--val", paths.val, "Labeled pairs for threshold tuning")->required()->check(CLI::ExistingFile);
  eval_h->add_option("--test", paths.test, "Labeled pairs to score")->required()->check(CLI::ExistingFile);
  eval_h->add_option("--divergence", divergence, "Override the checkpoint's divergence");

  auto* eval_l = app.add_subcommand("eval-hyperlex", "Spearman correlation against graded pairs");
  eval_l->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval_l->add_option("--graded", paths.graded, "word1<TAB>word2<TAB>score")->required()->check(CLI::ExistingFile);
  eval_l->add_option("--synsets", paths.synsets, "word<TAB>synset,...")->required()->check(CLI::ExistingFile);
  eval_l->add_option("--divergence", divergence, "Override the checkpoint's divergence");
  eval_l->add_option("--scores-out", scores_out, "Per-pair scores TSV");

  auto* inspect = app.add_subcommand("inspect", "Pairwise divergence matrix and log-det volumes");
  inspect->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  inspect->add_option("--nodes", nodes, "Comma-separated node names");
  inspect->add_option("--divergence", divergence, "Override the checkpoint's divergence");
  inspect->add_flag("--verify", verify, "Run the oracle cross-checks instead");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate every cell of a hyperparameter grid");
  add_graph_options(sweep, paths);
  add_hyper_params(sweep, hp);
  sweep->add_option("--val", paths.val, "Labeled validation pairs")->check(CLI::ExistingFile);
  sweep->add_option("--test", paths.test, "Labeled test pairs")->check(CLI::ExistingFile);
  sweep->add_option("--graded", paths.graded, "Graded word pairs for Spearman")->check(CLI::ExistingFile);
  sweep->add_option("--synsets", paths.synsets, "Word to synset map")->check(CLI::ExistingFile);
  sweep->add_option("--margins", grids.margins, "Comma-separated grid")->delimiter(',');
  sweep->add_option("--init-vars", grids.init_vars, "Comma-separated grid")->delimiter(',');
  sweep->add_option("--gammas", grids.gammas, "Comma-separated grid")->delimiter(',');
  sweep->add_option("--divergences", grids.divergences, "Comma-separated grid")->delimiter(',');
  sweep->add_option("--dims", grids.dims, "Comma-separated grid")->delimiter(',');
  sweep->add_option("--negs", neg_grid, "Negative specs separated by ';'");
  sweep->add_option("--out", out_path, "Summary TSV (default: stdout)");
  for (auto* opt : {"--margins", "--init-vars", "--gammas", "--divergences", "--dims"}) {
    sweep->get_option(opt)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  try {
    const std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));

    if (*closure) return cmd_closure(paths, out_path, out);
    if (*split) return cmd_split(paths, out_path, n_val, n_test, split_seed, out);
    if (*train_cmd) return cmd_train(paths, hp, checkpoint, metrics, out);
    if (*eval_h) return cmd_eval_hypernym(checkpoint, paths, divergence, out);
    if (*eval_l) return cmd_eval_hyperlex(checkpoint, paths, divergence, scores_out, out);
    if (*inspect) {
      if (verify) return run_oracle_battery(out) ? kOk : kNumeric;
      if (checkpoint.empty()) throw UsageError("inspect needs --checkpoint (or --verify)");
      return cmd_inspect(checkpoint, nodes, divergence, out);
    }
    if (*sweep) {
      grids.negs = split_list(neg_grid, ';');
      return cmd_sweep(paths, hp, grids, out_path, out);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const SamplingError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const TrainingError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::domain_error& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace doe::cli
