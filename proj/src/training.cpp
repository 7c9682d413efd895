#include "doe/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "doe/error.hpp"

namespace doe {

EmbeddingTable::EmbeddingTable(std::size_t n, std::size_t d)
    : n_(n), d_(d), means_(n * d, 0.0), log_vars_(n * d, 0.0) {}

std::size_t EmbeddingTable::offset(NodeId i) const {
  if (i >= n_) throw std::out_of_range("node id " + std::to_string(i) + " out of range");
  return static_cast<std::size_t>(i) * d_;
}

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be > 0");
  if (!(init_var > 0.0)) throw std::invalid_argument("init_var must be > 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be > 0");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  neg.validate();
}

std::size_t SparseGrad::slot(NodeId node) {
  auto [it, inserted] = slots_.try_emplace(node, rows_.size());
  if (inserted) {
    rows_.push_back(node);
    d_mean_.resize(d_mean_.size() + d_, 0.0);
    d_log_var_.resize(d_log_var_.size() + d_, 0.0);
  }
  return it->second;
}

std::optional<std::size_t> SparseGrad::find(NodeId node) const {
  const auto it = slots_.find(node);
  if (it == slots_.end()) return std::nullopt;
  return it->second;
}

AdamState AdamState::zeros(const EmbeddingTable& table) {
  AdamState s;
  s.m_mean.assign(table.means().size(), 0.0);
  s.v_mean.assign(table.means().size(), 0.0);
  s.m_log_var.assign(table.log_vars().size(), 0.0);
  s.v_log_var.assign(table.log_vars().size(), 0.0);
  return s;
}

namespace {

// Raw divergence values and gradients for a list of pairs, laid out as
// [d_mean_f | d_logvar_f | d_mean_g | d_logvar_g] per pair.
struct PairEvals {
  std::size_t d = 0;
  std::vector<double> values;
  std::vector<double> grads;

  GradSink sink(std::size_t i) {
    double* base = grads.data() + i * 4 * d;
    return {{base, d}, {base + d, d}, {base + 2 * d, d}, {base + 3 * d, d}};
  }
};

void check_pair(const Pair& p, const EmbeddingTable& table) {
  if (p.hypo >= table.size() || p.hyper >= table.size()) {
    throw std::invalid_argument("pair (" + std::to_string(p.hypo) + ", " + std::to_string(p.hyper) +
                                ") out of range for table of " + std::to_string(table.size()) + " rows");
  }
}

PairEvals evaluate_pairs(std::span<const Pair> pairs, const EmbeddingTable& table, const TrainConfig& cfg) {
  for (const Pair& p : pairs) check_pair(p, table);
  PairEvals out;
  out.d = table.dim();
  out.values.assign(pairs.size(), 0.0);
  out.grads.assign(pairs.size() * 4 * out.d, 0.0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out.values[i] = accumulate_divergence_grad(cfg.kind, table.row(pairs[i].hypo), table.row(pairs[i].hyper),
                                                 1.0, out.sink(i));
    }
  };
  const std::size_t workers = std::min(cfg.threads, std::max<std::size_t>(1, pairs.size() / 64));
  if (workers <= 1) {
    work(0, pairs.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (pairs.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(pairs.size(), begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  for (auto& t : pool) t.join();
  return out;
}

void add_pair_grad(SparseGrad& grads, const Pair& p, PairEvals& evals, std::size_t i, double scale) {
  const GradSink g = evals.sink(i);
  const std::size_t sf = grads.slot(p.hypo);
  const std::size_t sg = grads.slot(p.hyper);
  auto add = [scale](std::span<double> dst, std::span<const double> src) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  };
  add(grads.d_mean(sf), g.d_mean_f);
  add(grads.d_log_var(sf), g.d_logvar_f);
  add(grads.d_mean(sg), g.d_mean_g);
  add(grads.d_log_var(sg), g.d_logvar_g);
}

}  // namespace

EmbeddingTable init_embeddings(std::size_t n, const TrainConfig& cfg, Rng& rng) {
  if (n < 1) throw std::invalid_argument("init_embeddings needs n >= 1");
  if (!(cfg.init_var > 0.0)) throw std::invalid_argument("init_var must be > 0");
  EmbeddingTable table(n, cfg.dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double log_beta = std::log(cfg.init_var);
  for (NodeId i = 0; i < n; ++i) {
    auto mean = table.mean(i);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& x : mean) {
        x = normal(rng);
        norm2 += x * x;
      }
    } while (norm2 == 0.0);
    const double norm = std::sqrt(norm2);
    for (double& x : mean) x /= norm;
    std::fill(table.log_var(i).begin(), table.log_var(i).end(), log_beta);
  }
  return table;
}

LossResult doe_loss(std::span<const Pair> pos, std::span<const Pair> neg, const EmbeddingTable& table,
                    const TrainConfig& cfg) {
  LossResult result{0.0, SparseGrad(table.dim())};
  PairEvals pos_evals = evaluate_pairs(pos, table, cfg);
  PairEvals neg_evals = evaluate_pairs(neg, table, cfg);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double excess = pos_evals.values[i] - cfg.gamma;
    if (excess > 0.0) {
      result.loss += excess;
      add_pair_grad(result.grads, pos[i], pos_evals, i, 1.0);
    }
  }
  for (std::size_t j = 0; j < neg.size(); ++j) {
    const double excess = neg_evals.values[j] - cfg.gamma;
    const double thresholded = std::max(0.0, excess);
    if (thresholded < cfg.margin) {
      result.loss += cfg.margin - thresholded;
      if (excess > 0.0) add_pair_grad(result.grads, neg[j], neg_evals, j, -1.0);
    }
  }
  return result;
}

LossResult w2g_rank_loss(std::span<const RankTriple> triples, const EmbeddingTable& table, const TrainConfig& cfg) {
  std::vector<Pair> pairs;
  pairs.reserve(2 * triples.size());
  for (const RankTriple& t : triples) {
    pairs.push_back(t.positive);
    pairs.push_back(t.negative);
  }
  PairEvals evals = evaluate_pairs(pairs, table, cfg);
  LossResult result{0.0, SparseGrad(table.dim())};
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const double pos_excess = evals.values[2 * t] - cfg.gamma;
    const double neg_excess = evals.values[2 * t + 1] - cfg.gamma;
    const double hinge = cfg.margin + std::max(0.0, pos_excess) - std::max(0.0, neg_excess);
    if (hinge <= 0.0) continue;
    result.loss += hinge;
    if (pos_excess > 0.0) add_pair_grad(result.grads, pairs[2 * t], evals, 2 * t, 1.0);
    if (neg_excess > 0.0) add_pair_grad(result.grads, pairs[2 * t + 1], evals, 2 * t + 1, -1.0);
  }
  return result;
}

void adam_step(EmbeddingTable& table, const SparseGrad& grads, AdamState& state, const TrainConfig& cfg) {
  if (grads.dim() != table.dim() && !grads.rows().empty()) {
    throw std::invalid_argument("gradient dimension does not match table");
  }
  if (state.m_mean.size() != table.means().size() || state.m_log_var.size() != table.log_vars().size()) {
    throw std::invalid_argument("adam state shape does not match table");
  }
  for (std::size_t s = 0; s < grads.rows().size(); ++s) {
    const NodeId node = grads.rows()[s];
    if (node >= table.size()) throw std::invalid_argument("gradient row out of range");
    for (std::size_t k = 0; k < grads.dim(); ++k) {
      if (!std::isfinite(grads.d_mean(s)[k]) || !std::isfinite(grads.d_log_var(s)[k])) {
        throw TrainingError("non-finite gradient for node " + std::to_string(node));
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.adam_beta2, t);
  auto update = [&](std::span<double> param, std::span<const double> grad, double* m, double* v) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * grad[k];
      v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      param[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  };
  const std::size_t d = table.dim();
  for (std::size_t s = 0; s < grads.rows().size(); ++s) {
    const NodeId node = grads.rows()[s];
    const std::size_t base = static_cast<std::size_t>(node) * d;
    update(table.mean(node), grads.d_mean(s), state.m_mean.data() + base, state.v_mean.data() + base);
    update(table.log_var(node), grads.d_log_var(s), state.m_log_var.data() + base, state.v_log_var.data() + base);
    if (cfg.renormalize_means) {
      auto mean = table.mean(node);
      double norm2 = 0.0;
      for (double x : mean) norm2 += x * x;
      if (norm2 > 0.0) {
        const double norm = std::sqrt(norm2);
        for (double& x : mean) x /= norm;
      }
    }
  }
}

EmbeddingTable train(const HierarchyGraph& graph, const TrainConfig& cfg, const TrainCallbacks& callbacks) {
  cfg.validate();
  Rng rng(cfg.seed);
  EmbeddingTable table = init_embeddings(graph.size(), cfg, rng);
  if (cfg.epochs == 0) return table;

  std::vector<Pair> pairs = graph.closure_pairs();
  if (pairs.empty()) throw DataError("training graph has no relation pairs");
  AdamState adam = AdamState::zeros(table);

  std::optional<EmbeddingTable> best;
  double best_accuracy = -1.0;
  std::vector<Pair> neg_pairs;
  std::vector<RankTriple> triples;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      const std::span<const Pair> batch(pairs.data() + start, std::min(cfg.batch_size, pairs.size() - start));
      const std::vector<Negative> negatives = make_negatives(graph, batch, cfg.neg, rng);
      LossResult step;
      if (cfg.loss == LossKind::Doe) {
        neg_pairs.clear();
        for (const Negative& n : negatives) neg_pairs.push_back(n.pair);
        step = doe_loss(batch, neg_pairs, table, cfg);
      } else {
        triples.clear();
        for (const Negative& n : negatives) triples.push_back({batch[n.owner], n.pair});
        step = w2g_rank_loss(triples, table, cfg);
      }
      if (!std::isfinite(step.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(start / cfg.batch_size));
      }
      epoch_loss += step.loss;
      adam_step(table, step.grads, adam, cfg);
    }

    EpochMetrics metrics{epoch, epoch_loss, std::nullopt};
    if (callbacks.validate) {
      const double accuracy = callbacks.validate(table);
      metrics.val_accuracy = accuracy;
      if (accuracy > best_accuracy) {
        best_accuracy = accuracy;
        best = table;
      }
    }
    if (callbacks.on_epoch) callbacks.on_epoch(metrics);
  }
  return best ? std::move(*best) : table;
}

}  // namespace doe
