#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "doe/density.hpp"
#include "doe/hierarchy.hpp"
#include "doe/training.hpp"

namespace doe {

struct LabeledPair {
  NodeId hypo = 0;
  NodeId hyper = 0;
  bool label = false;
};

using LabeledPairSet = std::vector<LabeledPair>;

/// A scored word pair with the synsets each word may denote.
struct GradedPair {
  std::string word_u;
  std::string word_v;
  double gold = 0.0;
  std::vector<NodeId> synsets_u;
  std::vector<NodeId> synsets_v;
};

/// D(hypo || hyper) for every pair.
std::vector<double> pair_scores(std::span<const LabeledPair> pairs, const EmbeddingTable& table,
                                const DivergenceKind& kind);

/// Fraction of pairs for which (score < threshold) equals the label.
double accuracy_at(std::span<const double> scores, std::span<const LabeledPair> pairs, double threshold);

/// Threshold maximizing accuracy of "true iff score < t". Candidates are the
/// midpoints between adjacent distinct scores, preferred on ties, plus one
/// cut below and one above all scores. Throws std::invalid_argument unless
/// both labels occur.
double tune_threshold_on_scores(std::span<const double> scores, std::span<const LabeledPair> pairs);

double tune_threshold(std::span<const LabeledPair> val, const EmbeddingTable& table, const DivergenceKind& kind);

double binary_accuracy(std::span<const LabeledPair> test, double threshold, const EmbeddingTable& table,
                       const DivergenceKind& kind);

/// -min D(s_u || s_v) over S_u x S_v; nullopt when either list is empty.
std::optional<double> graded_score(const GradedPair& pair, const EmbeddingTable& table, const DivergenceKind& kind);

/// Replaces missing scores by the median of the present ones.
/// Throws std::invalid_argument when every score is missing.
std::vector<double> impute_missing(std::span<const std::optional<double>> scores);

/// Fractional ranks (1-based, ties share their average rank).
std::vector<double> fractional_ranks(std::span<const double> xs);

/// Pearson correlation of fractional ranks. Throws std::invalid_argument on
/// length mismatch or fewer than 2 items, std::domain_error when either list
/// is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// m[r][c] = D(nodes[c] || nodes[r]), i.e. column tested against row.
std::vector<std::vector<double>> kl_matrix(std::span<const NodeId> nodes, const EmbeddingTable& table,
                                           const DivergenceKind& kind = DivergenceKind::kl());

struct VolumeEntry {
  std::string name;
  double log_det = 0.0;
};

/// log det(Sigma) per node, largest first, ties by name.
std::vector<VolumeEntry> volume_report(std::span<const NodeId> nodes, const HierarchyGraph& graph,
                                       const EmbeddingTable& table);

struct BinaryReport {
  double threshold = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

BinaryReport evaluate_hypernym(std::span<const LabeledPair> val, std::span<const LabeledPair> test,
                               const EmbeddingTable& table, const DivergenceKind& kind);

struct GradedReport {
  double spearman_rho = 0.0;
  std::vector<double> scores;  // after imputation, in input order
  std::size_t missing = 0;
};

GradedReport evaluate_graded(std::span<const GradedPair> pairs, const EmbeddingTable& table,
                             const DivergenceKind& kind);

}  // namespace doe
