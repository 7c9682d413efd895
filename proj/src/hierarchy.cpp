#include "doe/hierarchy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "doe/error.hpp"

namespace doe {
namespace {

// v uniform over `pool` minus `excluded` (sorted) and minus `also_excluded`.
// Rejection first; falls back to an explicit difference when rejections pile
// up. Returns nullopt when the difference is empty.
std::optional<NodeId> uniform_from_difference(std::span<const NodeId> pool,
                                              std::span<const NodeId> excluded,
                                              std::optional<NodeId> also_excluded, Rng& rng) {
  auto rejected = [&](NodeId v) {
    return (also_excluded && v == *also_excluded) ||
           std::binary_search(excluded.begin(), excluded.end(), v);
  };
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int attempt = 0; attempt < 32; ++attempt) {
    const NodeId v = pool[pick(rng)];
    if (!rejected(v)) return v;
  }
  std::vector<NodeId> remaining;
  std::set_difference(pool.begin(), pool.end(), excluded.begin(), excluded.end(),
                      std::back_inserter(remaining));
  if (also_excluded) std::erase(remaining, *also_excluded);
  if (remaining.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick_rest(0, remaining.size() - 1);
  return remaining[pick_rest(rng)];
}

// u uniform over A(w) - {w}.
NodeId pick_strict_descendant(std::span<const NodeId> desc_w, NodeId w, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, desc_w.size() - 2);
  std::size_t k = pick(rng);
  const auto self = static_cast<std::size_t>(std::lower_bound(desc_w.begin(), desc_w.end(), w) - desc_w.begin());
  if (k >= self) ++k;
  return desc_w[k];
}

NodeId pick_branching(const HierarchyGraph& g, Rng& rng) {
  const auto nodes = g.branching_nodes();
  if (nodes.empty()) throw SamplingError("no node has at least 2 strict descendants");
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  return nodes[pick(rng)];
}

void require_closed(const HierarchyGraph& g) {
  if (!g.closed()) throw std::logic_error("hierarchy closure has not been computed");
}

}  // namespace

HierarchyGraph HierarchyGraph::build(std::span<const NamedEdge> edges) { return build({}, edges); }

HierarchyGraph HierarchyGraph::build(std::span<const std::string> nodes, std::span<const NamedEdge> edges) {
  HierarchyGraph g;
  for (const auto& n : nodes) {
    if (n.empty()) throw std::invalid_argument("empty node name");
    g.intern(n);
  }
  for (const auto& [child, parent] : edges) g.add_edge(child, parent);
  return g;
}

NodeId HierarchyGraph::intern(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, static_cast<NodeId>(names_.size()));
  if (inserted) {
    names_.push_back(name);
    parents_.emplace_back();
  }
  return it->second;
}

void HierarchyGraph::add_edge(const std::string& child, const std::string& parent) {
  if (child.empty() || parent.empty()) throw std::invalid_argument("empty node name in edge");
  if (child == parent) throw std::invalid_argument("self-loop edge on '" + child + "'");
  const NodeId c = intern(child);
  const NodeId p = intern(parent);
  auto& ps = parents_[c];
  if (std::find(ps.begin(), ps.end(), p) != ps.end()) return;
  ps.push_back(p);
  direct_.push_back({c, p});
  closed_ = false;
}

std::optional<NodeId> HierarchyGraph::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeId HierarchyGraph::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw DataError("unknown node '" + std::string(name) + "'");
}

const std::vector<Pair>& HierarchyGraph::closure_pairs() const {
  require_closed(*this);
  return closure_;
}

bool HierarchyGraph::entails(NodeId u, NodeId v) const {
  require_closed(*this);
  const auto& anc = ancestors_.at(u);
  return std::binary_search(anc.begin(), anc.end(), v);
}

std::span<const NodeId> HierarchyGraph::descendants(NodeId w) const {
  require_closed(*this);
  return descendants_.at(w);
}

std::span<const NodeId> HierarchyGraph::ancestors(NodeId u) const {
  require_closed(*this);
  return ancestors_.at(u);
}

std::span<const NodeId> HierarchyGraph::branching_nodes() const {
  require_closed(*this);
  return branching_;
}

std::vector<NodeId> HierarchyGraph::topological_order() const {
  const std::size_t n = size();
  std::vector<std::vector<NodeId>> children(n);
  std::vector<std::size_t> pending(n);
  for (NodeId u = 0; u < n; ++u) {
    pending[u] = parents_[u].size();
    for (NodeId p : parents_[u]) children[p].push_back(u);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  for (NodeId u = 0; u < n; ++u) {
    if (pending[u] == 0) order.push_back(u);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (NodeId c : children[order[head]]) {
      if (--pending[c] == 0) order.push_back(c);
    }
  }
  if (order.size() == n) return order;

  // Every unprocessed node has an unprocessed parent; walking parents must
  // revisit a node, which lies on a cycle.
  NodeId cur = 0;
  while (pending[cur] == 0) ++cur;
  std::vector<bool> seen(n, false);
  while (!seen[cur]) {
    seen[cur] = true;
    for (NodeId p : parents_[cur]) {
      if (pending[p] != 0) {
        cur = p;
        break;
      }
    }
  }
  throw DataError("hierarchy contains a cycle through '" + names_[cur] + "'");
}

void HierarchyGraph::close() {
  const std::vector<NodeId> order = topological_order();
  ancestors_.assign(size(), {});
  for (NodeId u : order) {
    auto& anc = ancestors_[u];
    for (NodeId p : parents_[u]) {
      anc.push_back(p);
      anc.insert(anc.end(), ancestors_[p].begin(), ancestors_[p].end());
    }
    std::sort(anc.begin(), anc.end());
    anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
  }
  finish_closure();
}

void HierarchyGraph::adopt_as_closure() {
  topological_order();
  ancestors_.assign(size(), {});
  for (NodeId u = 0; u < size(); ++u) {
    ancestors_[u] = parents_[u];
    std::sort(ancestors_[u].begin(), ancestors_[u].end());
  }
  finish_closure();
}

void HierarchyGraph::finish_closure() {
  const std::size_t n = size();
  descendants_.assign(n, {});
  closure_.clear();
  for (NodeId w = 0; w < n; ++w) descendants_[w].push_back(w);
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v : ancestors_[u]) {
      descendants_[v].push_back(u);
      closure_.push_back({u, v});
    }
  }
  branching_.clear();
  for (NodeId w = 0; w < n; ++w) {
    std::sort(descendants_[w].begin(), descendants_[w].end());
    if (descendants_[w].size() >= 3) branching_.push_back(w);
  }
  closed_ = true;
}

HierarchyGraph transitive_closure(HierarchyGraph g) {
  g.close();
  return g;
}

NegSpec NegSpec::parse(const std::string& text) {
  NegSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    const std::string key = item.substr(0, colon);
    double weight = 1.0;
    if (colon != std::string::npos) {
      const std::string value = item.substr(colon + 1);
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), weight);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw std::invalid_argument("bad weight in negative spec item '" + item + "'");
      }
    }
    if (key == "s1") {
      spec.s1 += weight;
    } else if (key == "s2") {
      spec.s2 += weight;
    } else if (key == "s3") {
      spec.s3 += weight;
    } else if (key == "s4") {
      spec.s4 += weight;
    } else {
      throw std::invalid_argument("unknown negative sampler '" + key + "' (expected s1..s4)");
    }
  }
  spec.validate();
  return spec;
}

std::string NegSpec::to_string() const {
  std::ostringstream out;
  const char* sep = "";
  const std::pair<const char*, double> items[] = {{"s1", s1}, {"s2", s2}, {"s3", s3}, {"s4", s4}};
  for (const auto& [key, w] : items) {
    if (w == 0.0) continue;
    out << sep << key << ':' << w;
    sep = ",";
  }
  return out.str();
}

void NegSpec::validate() const {
  bool any = false;
  for (double w : {s1, s2, s3, s4}) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("negative sample weights must be finite and >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw std::invalid_argument("negative spec has no positive weight");
}

Pair sample_s1(const HierarchyGraph& g, Pair pos, Rng& rng, int retries) {
  require_closed(g);
  if (g.size() < 2) throw SamplingError("S1 needs at least 2 nodes");
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(g.size() - 1));
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 0; attempt < retries; ++attempt) {
    Pair cand = pos;
    if (coin(rng)) {
      cand.hypo = node(rng);
    } else {
      cand.hyper = node(rng);
    }
    if (cand.hypo == cand.hyper || cand == pos || g.entails(cand.hypo, cand.hyper)) continue;
    return cand;
  }
  throw SamplingError("S1 retry budget exhausted for (" + g.name(pos.hypo) + ", " + g.name(pos.hyper) + ")");
}

Pair sample_s3(const HierarchyGraph& g, Rng& rng) {
  const NodeId w = pick_branching(g, rng);
  const auto desc_w = g.descendants(w);
  const NodeId u = pick_strict_descendant(desc_w, w, rng);
  // A(w) - A(u) always contains w.
  const NodeId v = *uniform_from_difference(desc_w, g.descendants(u), std::nullopt, rng);
  return {v, u};
}

Pair sample_s4(const HierarchyGraph& g, Rng& rng, int retries) {
  for (int attempt = 0; attempt < retries; ++attempt) {
    const NodeId w = pick_branching(g, rng);
    const auto desc_w = g.descendants(w);
    const NodeId u = pick_strict_descendant(desc_w, w, rng);
    if (auto v = uniform_from_difference(desc_w, g.descendants(u), w, rng)) return {*v, u};
  }
  throw SamplingError("S4 retry budget exhausted");
}

std::vector<Negative> make_negatives(const HierarchyGraph& g, std::span<const Pair> batch,
                                     const NegSpec& spec, Rng& rng) {
  spec.validate();
  auto count = [&rng](double weight) {
    const double whole = std::floor(weight);
    const double frac = weight - whole;
    int n = static_cast<int>(whole);
    if (frac > 0.0 && std::bernoulli_distribution(frac)(rng)) ++n;
    return n;
  };
  std::vector<Negative> out;
  out.reserve(batch.size() * static_cast<std::size_t>(std::ceil(spec.s1 + spec.s2 + spec.s3 + spec.s4)));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Pair pos = batch[i];
    for (int k = count(spec.s1); k > 0; --k) out.push_back({sample_s1(g, pos, rng), i});
    for (int k = count(spec.s2); k > 0; --k) out.push_back({sample_s2(pos), i});
    for (int k = count(spec.s3); k > 0; --k) out.push_back({sample_s3(g, rng), i});
    for (int k = count(spec.s4); k > 0; --k) out.push_back({sample_s4(g, rng), i});
  }
  return out;
}

}  // namespace doe
