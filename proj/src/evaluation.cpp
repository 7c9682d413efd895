#include "doe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace doe {

std::vector<double> pair_scores(std::span<const LabeledPair> pairs, const EmbeddingTable& table,
                                const DivergenceKind& kind) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const LabeledPair& p : pairs) out.push_back(divergence(kind, table.row(p.hypo), table.row(p.hyper)));
  return out;
}

double accuracy_at(std::span<const double> scores, std::span<const LabeledPair> pairs, double threshold) {
  if (scores.size() != pairs.size()) throw std::invalid_argument("score and pair counts differ");
  if (pairs.empty()) throw std::invalid_argument("accuracy of an empty pair set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if ((scores[i] < threshold) == pairs[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double tune_threshold_on_scores(std::span<const double> scores, std::span<const LabeledPair> pairs) {
  if (scores.size() != pairs.size()) throw std::invalid_argument("score and pair counts differ");
  std::size_t positives = 0;
  for (const auto& p : pairs) positives += p.label ? 1 : 0;
  if (positives == 0 || positives == pairs.size()) {
    throw std::invalid_argument("threshold tuning needs both positive and negative pairs");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep cuts upward; `correct` counts pairs classified correctly when every
  // score at or below the current group is predicted true.
  const std::size_t negatives = pairs.size() - positives;
  std::size_t correct = negatives;  // cut below everything: all predicted false
  const double below = scores[order.front()] - 1.0;
  std::size_t best_correct = 0;
  double best_cut = 0.0;
  bool have_midpoint = false;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      correct += pairs[order[j]].label ? 1 : 0;
      correct -= pairs[order[j]].label ? 0 : 1;
      ++j;
    }
    if (j == order.size()) break;
    const double cut = 0.5 * (scores[order[i]] + scores[order[j]]);
    if (!have_midpoint || correct > best_correct) {
      best_correct = correct;
      best_cut = cut;
      have_midpoint = true;
    }
    i = j;
  }
  // Cuts outside the score range only win when strictly better.
  const double above = scores[order.back()] + 1.0;
  if (have_midpoint && best_correct >= std::max(negatives, positives)) return best_cut;
  return negatives >= positives ? below : above;
}

double tune_threshold(std::span<const LabeledPair> val, const EmbeddingTable& table, const DivergenceKind& kind) {
  return tune_threshold_on_scores(pair_scores(val, table, kind), val);
}

double binary_accuracy(std::span<const LabeledPair> test, double threshold, const EmbeddingTable& table,
                       const DivergenceKind& kind) {
  return accuracy_at(pair_scores(test, table, kind), test, threshold);
}

std::optional<double> graded_score(const GradedPair& pair, const EmbeddingTable& table, const DivergenceKind& kind) {
  if (pair.synsets_u.empty() || pair.synsets_v.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (NodeId su : pair.synsets_u) {
    for (NodeId sv : pair.synsets_v) best = std::min(best, divergence(kind, table.row(su), table.row(sv)));
  }
  return -best;
}

namespace {

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

std::vector<double> impute_missing(std::span<const std::optional<double>> scores) {
  std::vector<double> present;
  for (const auto& s : scores) {
    if (s) present.push_back(*s);
  }
  if (present.empty()) throw std::invalid_argument("every score is missing; nothing to impute from");
  const double fill = median(present);
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(s.value_or(fill));
  return out;
}

std::vector<double> fractional_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: lists differ in length");
  if (xs.size() < 2) throw std::invalid_argument("spearman: need at least 2 items");
  const std::vector<double> rx = fractional_ranks(xs);
  const std::vector<double> ry = fractional_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("spearman: correlation undefined for a constant list");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::vector<double>> kl_matrix(std::span<const NodeId> nodes, const EmbeddingTable& table,
                                           const DivergenceKind& kind) {
  std::vector<std::vector<double>> m(nodes.size(), std::vector<double>(nodes.size(), 0.0));
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      if (r != c) m[r][c] = divergence(kind, table.row(nodes[c]), table.row(nodes[r]));
    }
  }
  return m;
}

std::vector<VolumeEntry> volume_report(std::span<const NodeId> nodes, const HierarchyGraph& graph,
                                       const EmbeddingTable& table) {
  std::vector<VolumeEntry> out;
  out.reserve(nodes.size());
  for (NodeId n : nodes) out.push_back({graph.name(n), log_det_volume(table.row(n))});
  std::sort(out.begin(), out.end(), [](const VolumeEntry& a, const VolumeEntry& b) {
    if (a.log_det != b.log_det) return a.log_det > b.log_det;
    return a.name < b.name;
  });
  return out;
}

BinaryReport evaluate_hypernym(std::span<const LabeledPair> val, std::span<const LabeledPair> test,
                               const EmbeddingTable& table, const DivergenceKind& kind) {
  BinaryReport report;
  const std::vector<double> val_scores = pair_scores(val, table, kind);
  report.threshold = tune_threshold_on_scores(val_scores, val);
  report.val_accuracy = accuracy_at(val_scores, val, report.threshold);
  report.test_accuracy = binary_accuracy(test, report.threshold, table, kind);
  return report;
}

GradedReport evaluate_graded(std::span<const GradedPair> pairs, const EmbeddingTable& table,
                             const DivergenceKind& kind) {
  std::vector<std::optional<double>> raw;
  std::vector<double> gold;
  raw.reserve(pairs.size());
  GradedReport report;
  for (const GradedPair& p : pairs) {
    raw.push_back(graded_score(p, table, kind));
    if (!raw.back()) ++report.missing;
    gold.push_back(p.gold);
  }
  report.scores = impute_missing(raw);
  report.spearman_rho = spearman(report.scores, gold);
  return report;
}

}  // namespace doe
