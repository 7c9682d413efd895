#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace doe {

using NodeId = std::uint32_t;
using Rng = std::mt19937_64;

/// Ordered relation pair: `hypo` entails `hyper` (hypo |= hyper).
struct Pair {
  NodeId hypo = 0;
  NodeId hyper = 0;

  friend bool operator==(const Pair&, const Pair&) = default;
  friend auto operator<=>(const Pair&, const Pair&) = default;
};

using NamedEdge = std::pair<std::string, std::string>;  // (child, parent)

/// Interned hierarchy with direct edges and, once closed, the transitive
/// closure and the descendant sets A(w) (each including w itself).
class HierarchyGraph {
 public:
  HierarchyGraph() = default;

  /// Interns names in first-seen order; duplicate edges are dropped.
  /// Throws std::invalid_argument on empty names or self-loops.
  static HierarchyGraph build(std::span<const NamedEdge> edges);

  /// Interns the given nodes first (in order), then the edges.
  static HierarchyGraph build(std::span<const std::string> nodes, std::span<const NamedEdge> edges);

  std::size_t size() const { return names_.size(); }
  const std::string& name(NodeId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<NodeId> find(std::string_view name) const;
  /// Throws DataError for unknown names.
  NodeId id(std::string_view name) const;

  const std::vector<Pair>& direct_edges() const { return direct_; }

  bool closed() const { return closed_; }
  /// Sorted (hypo, hyper) pairs of the closure. Requires closed().
  const std::vector<Pair>& closure_pairs() const;
  /// True iff u |= v in the closure (u != v). Requires closed().
  bool entails(NodeId u, NodeId v) const;
  /// A(w), sorted ascending, includes w. Requires closed().
  std::span<const NodeId> descendants(NodeId w) const;
  /// Strict ancestors of u, sorted ascending. Requires closed().
  std::span<const NodeId> ancestors(NodeId u) const;
  /// Nodes w with |A(w) - {w}| >= 2, ascending.
  std::span<const NodeId> branching_nodes() const;

  /// Computes the transitive closure of the direct edges. Throws DataError
  /// naming a node on a cycle.
  void close();

  /// Uses the direct edges themselves as the (already transitive) relation,
  /// without adding implied pairs. Used for training sets from which
  /// held-out pairs were removed. Throws DataError on cycles.
  void adopt_as_closure();

 private:
  NodeId intern(const std::string& name);
  void add_edge(const std::string& child, const std::string& parent);
  std::vector<NodeId> topological_order() const;  // parents before children
  void finish_closure();

  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Pair> direct_;
  std::vector<std::vector<NodeId>> parents_;

  bool closed_ = false;
  std::vector<std::vector<NodeId>> ancestors_;
  std::vector<std::vector<NodeId>> descendants_;
  std::vector<Pair> closure_;
  std::vector<NodeId> branching_;
};

/// Returns a copy of `g` with its closure computed.
HierarchyGraph transitive_closure(HierarchyGraph g);

/// Per-positive negative sample counts. The integer part of each weight is a
/// fixed count; the fractional part is an independent Bernoulli inclusion.
struct NegSpec {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double s4 = 0.0;

  /// Parses "s1:1,s2:1,s4:1" or "s1:1,s2:0.1,s3:0.9". Throws std::invalid_argument.
  static NegSpec parse(const std::string& text);
  std::string to_string() const;
  /// Throws std::invalid_argument unless weights are finite, >= 0, and not all zero.
  void validate() const;
};

inline constexpr int kDefaultRetryBudget = 100;

/// Replace the hypernym or the hyponym (probability 1/2 each) with a uniform
/// node, rejecting self pairs, the input pair and closure members.
Pair sample_s1(const HierarchyGraph& g, Pair pos, Rng& rng, int retries = kDefaultRetryBudget);

/// The reversed pair.
inline Pair sample_s2(Pair pos) { return {pos.hyper, pos.hypo}; }

/// w uniform over branching nodes, u uniform over A(w) - {w}, v uniform over
/// A(w) - A(u); returns (v, u).
Pair sample_s3(const HierarchyGraph& g, Rng& rng);

/// As sample_s3 with v drawn from A(w) - A(u) - {w}; (w, u) is redrawn when
/// that set is empty.
Pair sample_s4(const HierarchyGraph& g, Rng& rng, int retries = kDefaultRetryBudget);

struct Negative {
  Pair pair;
  std::size_t owner = 0;  // index of the positive that produced it
};

/// Negatives for every positive of `batch`, grouped by positive in batch
/// order and within a positive in the order S1, S2, S3, S4.
std::vector<Negative> make_negatives(const HierarchyGraph& g, std::span<const Pair> batch,
                                     const NegSpec& spec, Rng& rng);

}  // namespace doe
