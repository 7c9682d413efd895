#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "doe/density.hpp"
#include "doe/hierarchy.hpp"

namespace doe {

/// n x d means and log-variances, row-major.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t n, std::size_t d);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }

  std::span<double> mean(NodeId i) { return {means_.data() + offset(i), d_}; }
  std::span<const double> mean(NodeId i) const { return {means_.data() + offset(i), d_}; }
  std::span<double> log_var(NodeId i) { return {log_vars_.data() + offset(i), d_}; }
  std::span<const double> log_var(NodeId i) const { return {log_vars_.data() + offset(i), d_}; }
  GaussianView row(NodeId i) const { return {mean(i), log_var(i)}; }

  std::vector<double>& means() { return means_; }
  const std::vector<double>& means() const { return means_; }
  std::vector<double>& log_vars() { return log_vars_; }
  const std::vector<double>& log_vars() const { return log_vars_; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t offset(NodeId i) const;

  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> means_;
  std::vector<double> log_vars_;
};

enum class LossKind { Doe, W2gRank };

struct TrainConfig {
  double margin = 2000.0;
  double init_var = 5e-5;
  double gamma = 500.0;
  DivergenceKind kind = DivergenceKind::kl();
  std::size_t dim = 50;
  NegSpec neg{1.0, 1.0, 0.0, 1.0};
  std::size_t batch_size = 500;
  int epochs = 20;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::Doe;
  /// Rescale touched means to unit norm after every optimizer step.
  bool renormalize_means = false;
  /// Worker threads for per-pair gradient evaluation; results are reduced in
  /// a fixed order so any value gives the same trajectory.
  std::size_t threads = 1;

  PenaltyConfig penalty() const { return {kind, gamma}; }
  /// Throws std::invalid_argument on violated constraints.
  void validate() const;
};

/// Gradient rows for the nodes touched by a batch, in first-touch order.
class SparseGrad {
 public:
  explicit SparseGrad(std::size_t d = 0) : d_(d) {}

  std::size_t dim() const { return d_; }
  const std::vector<NodeId>& rows() const { return rows_; }
  /// Slot of `node`, created with zero gradient on first use.
  std::size_t slot(NodeId node);
  std::optional<std::size_t> find(NodeId node) const;

  std::span<double> d_mean(std::size_t slot) { return {d_mean_.data() + slot * d_, d_}; }
  std::span<const double> d_mean(std::size_t slot) const { return {d_mean_.data() + slot * d_, d_}; }
  std::span<double> d_log_var(std::size_t slot) { return {d_log_var_.data() + slot * d_, d_}; }
  std::span<const double> d_log_var(std::size_t slot) const { return {d_log_var_.data() + slot * d_, d_}; }

 private:
  std::size_t d_;
  std::vector<NodeId> rows_;
  std::unordered_map<NodeId, std::size_t> slots_;
  std::vector<double> d_mean_;
  std::vector<double> d_log_var_;
};

struct LossResult {
  double loss = 0.0;
  SparseGrad grads;
};

/// One (positive, negative) comparison of the rank loss.
struct RankTriple {
  Pair positive;
  Pair negative;
};

struct AdamState {
  std::vector<double> m_mean, v_mean, m_log_var, v_log_var;
  std::uint64_t step = 0;

  static AdamState zeros(const EmbeddingTable& table);
};

/// Unit-norm random means, every log-variance ln(init_var).
EmbeddingTable init_embeddings(std::size_t n, const TrainConfig& cfg, Rng& rng);

/// sum_pos d_gamma(u, v) + sum_neg max(0, m - d_gamma(u', v')).
LossResult doe_loss(std::span<const Pair> pos, std::span<const Pair> neg, const EmbeddingTable& table,
                    const TrainConfig& cfg);

/// sum max(0, m - E(pos) + E(neg)) with E = -d_gamma.
LossResult w2g_rank_loss(std::span<const RankTriple> triples, const EmbeddingTable& table,
                         const TrainConfig& cfg);

/// Bias-corrected Adam on the rows present in `grads`; other rows and their
/// moments are left untouched. Throws TrainingError on a non-finite gradient.
void adam_step(EmbeddingTable& table, const SparseGrad& grads, AdamState& state, const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_accuracy;
};

struct TrainCallbacks {
  /// Validation accuracy of the current table; the best-scoring snapshot is
  /// returned by train().
  std::function<double(const EmbeddingTable&)> validate;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Number of minibatches for `pairs` positives.
inline std::size_t batches_per_epoch(std::size_t pairs, std::size_t batch_size) {
  return (pairs + batch_size - 1) / batch_size;
}

/// Minibatch training over the closure pairs of `graph`.
EmbeddingTable train(const HierarchyGraph& graph, const TrainConfig& cfg, const TrainCallbacks& callbacks = {});

}  // namespace doe
