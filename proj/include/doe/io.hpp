#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "doe/density.hpp"
#include "doe/evaluation.hpp"
#include "doe/hierarchy.hpp"
#include "doe/training.hpp"

namespace doe::io {

// All loaders read tab-separated UTF-8 text, skip blank and '#' lines, and
// raise ParseError with the offending line number.

/// "child<TAB>parent" lines. Throws DataError when the file has no edges.
std::vector<NamedEdge> load_edges(const std::filesystem::path& path);

struct NamedLabeledPair {
  std::string hypo;
  std::string hyper;
  bool label = false;
};

/// "u<TAB>v<TAB>{0|1}" lines, duplicates kept.
std::vector<NamedLabeledPair> load_labeled_pairs(const std::filesystem::path& path);

/// Maps names onto graph ids; throws DataError on unknown names.
LabeledPairSet resolve(const std::vector<NamedLabeledPair>& pairs, const HierarchyGraph& graph);

struct GradedRow {
  std::string word_u;
  std::string word_v;
  double score = 0.0;
};

/// "word1<TAB>word2<TAB>score" lines.
std::vector<GradedRow> load_graded(const std::filesystem::path& path);

using SynsetMap = std::unordered_map<std::string, std::vector<std::string>>;

/// "word<TAB>synset1,synset2,..." lines.
SynsetMap load_synset_map(const std::filesystem::path& path);

/// Attaches synset ids to each row. Words missing from the map, and synsets
/// missing from the graph, contribute nothing (the pair is then scored as
/// missing). Lookup tries the word verbatim, then lowercased.
std::vector<GradedPair> attach_synsets(const std::vector<GradedRow>& rows, const SynsetMap& map,
                                       const HierarchyGraph& graph);

struct CheckpointMeta {
  DivergenceKind kind = DivergenceKind::kl();
  double gamma = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  std::vector<std::string> names;
  EmbeddingTable table;
  CheckpointMeta meta;
};

/// Text format: header "DOE1 <n> <d> <kind> <gamma> <seed>", then one line
/// per node "name mu_1 .. mu_d logvar_1 .. logvar_d" with shortest
/// round-trip decimals. Throws CheckpointError.
void save_checkpoint(const std::filesystem::path& path, const std::vector<std::string>& names,
                     const EmbeddingTable& table, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Flat "key = value" lines with '#' comments.
std::vector<std::pair<std::string, std::string>> load_config(const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

struct Split {
  std::vector<NamedEdge> train;  // closure pairs not held out
  std::vector<NamedLabeledPair> val;
  std::vector<NamedLabeledPair> test;
};

/// Holds out `n_val` + `n_test` closure pairs as positives, each paired with
/// one S1 corruption as a negative; the rest become training pairs. Pairs
/// whose removal would leave a node without any training pair are skipped.
Split make_split(const HierarchyGraph& closed, std::size_t n_val, std::size_t n_test, std::uint64_t seed);

void write_edges(const std::filesystem::path& path, const std::vector<NamedEdge>& edges);
void write_labeled_pairs(const std::filesystem::path& path, const std::vector<NamedLabeledPair>& pairs);

}  // namespace doe::io
